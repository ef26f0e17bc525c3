//! Command-line front end for the monomer-dimer library.
//!
//! Every experiment is described by a command plus parameters, resolvable
//! from flags, from a TOML document (`--config`), or both (flags win).
//! Results are written atomically with a header carrying the resolved
//! configuration hash, the seed, and the artifact version, so equal
//! inputs give byte-identical outputs.

mod commands;
mod config;
mod dist;
mod output;
mod reference;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

use output::Format;

#[derive(Parser, Debug)]
#[command(name = "mdtool", version, about = "Monomer-dimer model toolbox")]
struct Cli {
    #[command(flatten)]
    globals: GlobalArgs,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Args, Clone, Debug, Default)]
struct GlobalArgs {
    /// Master seed; every stochastic component derives its stream from it
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file (stdout when omitted)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Output format (default: csv for sweeps, json for scalar reports)
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Worker threads (default: all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Run sequentially so repeated invocations are byte-identical
    #[arg(long, global = true)]
    strict_determinism: bool,
    /// TOML experiment description; command-line flags override it
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

#[derive(Subcommand, Clone, Debug)]
enum Command {
    /// Exact partition value of a graph by enumeration and recursion
    Exact(ExactArgs),
    /// Gaussian pairing-sum partition value and its Monte Carlo estimator
    Gaussian(GaussianArgs),
    /// Zero-location and interlacing certificates
    Zeros(ZerosArgs),
    /// Variational pressure, phase diagram, critical point, exponents
    #[command(subcommand)]
    Meanfield(MeanfieldCmd),
    /// Finite-size distribution of the monomer count and its limit laws
    #[command(subcommand)]
    Fluct(FluctCmd),
    /// Sparse random-graph cavity solver and brute-force oracle
    #[command(subcommand)]
    Er(ErCmd),
    /// Random-activity solver on the complete graph
    #[command(subcommand)]
    Rf(RfCmd),
    /// Replica scatter of the quenched pressure across system sizes
    Selfavg(SelfavgArgs),
}

macro_rules! merge_options {
    ($t:ty { $($f:ident),* $(,)? }) => {
        impl $t {
            fn merge(mut self, file: Self) -> Self {
                $( if self.$f.is_none() { self.$f = file.$f; } )*
                self
            }
        }
    };
}

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExactArgs {
    /// Graph file: edge list or JSON
    #[arg(long)]
    pub graph: Option<PathBuf>,
}
merge_options!(ExactArgs { graph });

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GaussianArgs {
    /// Graph file: edge list or JSON
    #[arg(long)]
    pub graph: Option<PathBuf>,
    /// Monte Carlo sample count
    #[arg(long)]
    pub mc_samples: Option<usize>,
}
merge_options!(GaussianArgs { graph, mc_samples });

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ZerosArgs {
    /// Certify a single graph file
    #[arg(long, conflicts_with = "corpus")]
    pub graph: Option<PathBuf>,
    /// Certify a corpus of random graphs of this size
    #[arg(long)]
    pub corpus: Option<usize>,
    /// Largest vertex count in the random corpus
    #[arg(long)]
    pub n_max: Option<usize>,
    /// Certification tolerance
    #[arg(long)]
    pub tol: Option<f64>,
}
merge_options!(ZerosArgs { graph, corpus, n_max, tol });

#[derive(Subcommand, Clone, Debug)]
pub enum MeanfieldCmd {
    /// Maximizers and curvatures of the variational pressure at (h, J)
    Analyze(AnalyzeArgs),
    /// Trace the coexistence curve over a coupling range
    Gamma(GammaArgs),
    /// Compute the critical point and write the reference-values file
    Critical(CriticalArgs),
    /// Fit a critical exponent along an approach path
    Exponents(ExponentsArgs),
}

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalyzeArgs {
    /// Monomer field
    #[arg(long, allow_negative_numbers = true)]
    pub h: Option<f64>,
    /// Imitation coupling
    #[arg(long, allow_negative_numbers = true)]
    pub j: Option<f64>,
}
merge_options!(AnalyzeArgs { h, j });

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GammaArgs {
    /// Lowest coupling (must exceed the critical coupling)
    #[arg(long, allow_negative_numbers = true)]
    pub jmin: Option<f64>,
    /// Highest coupling
    #[arg(long, allow_negative_numbers = true)]
    pub jmax: Option<f64>,
    /// Number of curve points
    #[arg(long)]
    pub steps: Option<usize>,
}
merge_options!(GammaArgs { jmin, jmax, steps });

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CriticalArgs {
    /// Root-finding tolerance
    #[arg(long)]
    pub tol: Option<f64>,
}
merge_options!(CriticalArgs { tol });

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DirectionArg {
    /// Along the continued coexistence curve (expected slope 1/2)
    Tangent,
    /// Fixed critical field, coupling offset from above (expected 1/3)
    VaryJ,
    /// Fixed critical coupling, field offset (expected 1/3)
    VaryH,
}

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExponentsArgs {
    /// Approach path
    #[arg(long, value_enum)]
    pub direction: Option<DirectionArg>,
    /// Number of offsets in the geometric ladder
    #[arg(long)]
    pub steps: Option<usize>,
}
merge_options!(ExponentsArgs { direction, steps });

#[derive(Subcommand, Clone, Debug)]
pub enum FluctCmd {
    /// Exact distribution of the monomer count on the complete graph
    Pmf(PmfArgs),
    /// Gaussian limit check for the centred, scaled monomer count
    Clt(CltArgs),
    /// Mass concentration around the limiting monomer densities
    Lln(LlnArgs),
    /// Quartic-law convergence at the critical point (needs the
    /// reference-values file)
    Critical(FluctCriticalArgs),
}

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PmfArgs {
    /// Vertex count
    #[arg(long)]
    pub n: Option<usize>,
    /// Monomer field
    #[arg(long, allow_negative_numbers = true)]
    pub h: Option<f64>,
    /// Imitation coupling
    #[arg(long, allow_negative_numbers = true)]
    pub j: Option<f64>,
}
merge_options!(PmfArgs { n, h, j });

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CltArgs {
    /// Vertex count
    #[arg(long)]
    pub n: Option<usize>,
    /// Monomer field
    #[arg(long, allow_negative_numbers = true)]
    pub h: Option<f64>,
    /// Imitation coupling
    #[arg(long, allow_negative_numbers = true)]
    pub j: Option<f64>,
}
merge_options!(CltArgs { n, h, j });

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LlnArgs {
    /// Vertex count
    #[arg(long)]
    pub n: Option<usize>,
    /// Monomer field (ignored with --at-coexistence)
    #[arg(long, allow_negative_numbers = true)]
    pub h: Option<f64>,
    /// Imitation coupling
    #[arg(long, allow_negative_numbers = true)]
    pub j: Option<f64>,
    /// Radius of the balls around the limit points
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Evaluate on the coexistence curve at the given coupling
    #[arg(long)]
    pub at_coexistence: Option<bool>,
}
merge_options!(LlnArgs { n, h, j, epsilon, at_coexistence });

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FluctCriticalArgs {
    /// Comma-separated system sizes, e.g. 1e4,1e5
    #[arg(long)]
    pub ns: Option<String>,
    /// Reference-values file written by `meanfield critical`
    #[arg(long)]
    pub reference: Option<PathBuf>,
}
merge_options!(FluctCriticalArgs { ns, reference });

#[derive(Subcommand, Clone, Debug)]
pub enum ErCmd {
    /// Root monomer density with its even/odd bound ladder
    Density(ErDensityArgs),
    /// Quenched pressure, optionally checked against the small-graph
    /// oracle
    Pressure(ErPressureArgs),
    /// Bundled bound-ladder runs at c = 2 over three activities
    Fig2(ErFig2Args),
}

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ErDensityArgs {
    /// Mean degree
    #[arg(long)]
    pub c: Option<f64>,
    /// Monomer activity
    #[arg(long)]
    pub x: Option<f64>,
    /// Iteration depth
    #[arg(long)]
    pub r: Option<u32>,
    /// Population size
    #[arg(long)]
    pub k: Option<usize>,
}
merge_options!(ErDensityArgs { c, x, r, k });

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ErPressureArgs {
    /// Mean degree
    #[arg(long)]
    pub c: Option<f64>,
    /// Monomer activity
    #[arg(long)]
    pub x: Option<f64>,
    /// Iteration depth
    #[arg(long)]
    pub r: Option<u32>,
    /// Population size
    #[arg(long)]
    pub k: Option<usize>,
    /// Also run the exact quenched oracle on graphs of this size
    #[arg(long)]
    pub oracle_n: Option<usize>,
    /// Oracle sample count
    #[arg(long)]
    pub oracle_samples: Option<usize>,
}
merge_options!(ErPressureArgs { c, x, r, k, oracle_n, oracle_samples });

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ErFig2Args {
    /// Iteration depth
    #[arg(long)]
    pub r: Option<u32>,
    /// Population size
    #[arg(long)]
    pub k: Option<usize>,
}
merge_options!(ErFig2Args { r, k });

#[derive(Subcommand, Clone, Debug)]
pub enum RfCmd {
    /// Fixed point, limiting pressure, and dimer density
    Solve(RfSolveArgs),
    /// Finite-size partition value on sampled activities
    Partition(RfPartitionArgs),
}

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RfSolveArgs {
    /// Dimer weight scale
    #[arg(long)]
    pub w: Option<f64>,
    /// Activity distribution, e.g. lognormal:0.0,0.5 or degenerate:1.0
    #[arg(long)]
    pub dist: Option<String>,
}
merge_options!(RfSolveArgs { w, dist });

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RfPartitionArgs {
    /// Vertex count
    #[arg(long)]
    pub n: Option<usize>,
    /// Dimer weight scale
    #[arg(long)]
    pub w: Option<f64>,
    /// Activity distribution
    #[arg(long)]
    pub dist: Option<String>,
}
merge_options!(RfPartitionArgs { n, w, dist });

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SelfavgArgs {
    /// Comma-separated ascending system sizes
    #[arg(long)]
    pub ns: Option<String>,
    /// Activity distribution
    #[arg(long)]
    pub dist: Option<String>,
    /// Dimer weight scale
    #[arg(long)]
    pub w: Option<f64>,
    /// Replicas per size
    #[arg(long)]
    pub reps: Option<usize>,
}
merge_options!(SelfavgArgs { ns, dist, w, reps });

impl Command {
    fn path(&self) -> &'static str {
        match self {
            Command::Exact(_) => "exact",
            Command::Gaussian(_) => "gaussian",
            Command::Zeros(_) => "zeros",
            Command::Meanfield(MeanfieldCmd::Analyze(_)) => "meanfield.analyze",
            Command::Meanfield(MeanfieldCmd::Gamma(_)) => "meanfield.gamma",
            Command::Meanfield(MeanfieldCmd::Critical(_)) => "meanfield.critical",
            Command::Meanfield(MeanfieldCmd::Exponents(_)) => "meanfield.exponents",
            Command::Fluct(FluctCmd::Pmf(_)) => "fluct.pmf",
            Command::Fluct(FluctCmd::Clt(_)) => "fluct.clt",
            Command::Fluct(FluctCmd::Lln(_)) => "fluct.lln",
            Command::Fluct(FluctCmd::Critical(_)) => "fluct.critical",
            Command::Er(ErCmd::Density(_)) => "er.density",
            Command::Er(ErCmd::Pressure(_)) => "er.pressure",
            Command::Er(ErCmd::Fig2(_)) => "er.fig2",
            Command::Rf(RfCmd::Solve(_)) => "rf.solve",
            Command::Rf(RfCmd::Partition(_)) => "rf.partition",
            Command::Selfavg(_) => "selfavg",
        }
    }
}

fn main() {
    if let Err(e) = run() {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run() -> anyhow::Result<()> {
    let cli = Cli::parse();
    let file = match &cli.globals.config {
        Some(path) => Some(config::load(path)?),
        None => None,
    };

    let command = config::resolve_command(cli.command, file.as_ref())?;
    let seed = cli
        .globals
        .seed
        .or(file.as_ref().and_then(|f| f.global.seed))
        .unwrap_or(0);
    let strict = cli.globals.strict_determinism
        || file
            .as_ref()
            .and_then(|f| f.global.strict_determinism)
            .unwrap_or(false);
    let threads = if strict {
        Some(1)
    } else {
        cli.globals
            .threads
            .or(file.as_ref().and_then(|f| f.global.threads))
    };
    if let Some(t) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .ok();
    }
    let out = cli
        .globals
        .out
        .clone()
        .or(file.as_ref().and_then(|f| f.global.out.clone()));

    let format_choice = cli
        .globals
        .format
        .or(file.as_ref().and_then(|f| f.global.format));
    let (params, payload) = commands::execute(&command, seed, format_choice)?;
    let format = format_choice.unwrap_or_else(|| payload.natural_format());

    let config_record = serde_json::json!({
        "command": command.path(),
        "format": format,
        "params": params,
        "seed": seed,
        "strict_determinism": strict,
    });
    output::emit(out.as_deref(), format, seed, &config_record, payload)
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn argument_surface_is_well_formed() {
        Cli::command().debug_assert();
    }

    #[test]
    fn every_command_path_is_resolvable_from_config() {
        let dir = tempfile::tempdir().unwrap();
        for path in config::KNOWN_COMMANDS {
            let file = dir.path().join("cmd.toml");
            std::fs::write(&file, format!("command = \"{path}\"\n")).unwrap();
            let parsed = config::load(&file).unwrap();
            let cmd = config::resolve_command(None, Some(&parsed)).unwrap();
            assert_eq!(cmd.path(), *path);
        }
    }
}
