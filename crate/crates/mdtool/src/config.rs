//! TOML experiment documents.
//!
//! The document mirrors the command-line surface: an optional `command`
//! key naming the experiment (`"er.pressure"`), a `[global]` table, and
//! one table per command holding its parameters. Unknown keys anywhere
//! are rejected. Command-line flags override file values.

use anyhow::{bail, Context};
use serde::Deserialize;
use std::path::{Path, PathBuf};

use crate::output::Format;
use crate::{
    AnalyzeArgs, CltArgs, Command, CriticalArgs, ErCmd, ErDensityArgs, ErFig2Args,
    ErPressureArgs, ExactArgs, ExponentsArgs, FluctCmd, FluctCriticalArgs, GammaArgs,
    GaussianArgs, LlnArgs, MeanfieldCmd, PmfArgs, RfCmd, RfPartitionArgs, RfSolveArgs,
    SelfavgArgs, ZerosArgs,
};

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct GlobalFile {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    pub threads: Option<usize>,
    pub strict_determinism: Option<bool>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
struct MeanfieldSection {
    analyze: Option<AnalyzeArgs>,
    gamma: Option<GammaArgs>,
    critical: Option<CriticalArgs>,
    exponents: Option<ExponentsArgs>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
struct FluctSection {
    pmf: Option<PmfArgs>,
    clt: Option<CltArgs>,
    lln: Option<LlnArgs>,
    critical: Option<FluctCriticalArgs>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
struct ErSection {
    density: Option<ErDensityArgs>,
    pressure: Option<ErPressureArgs>,
    fig2: Option<ErFig2Args>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
struct RfSection {
    solve: Option<RfSolveArgs>,
    partition: Option<RfPartitionArgs>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct ConfigFile {
    command: Option<String>,
    #[serde(default)]
    pub global: GlobalFile,
    exact: Option<ExactArgs>,
    gaussian: Option<GaussianArgs>,
    zeros: Option<ZerosArgs>,
    meanfield: Option<MeanfieldSection>,
    fluct: Option<FluctSection>,
    er: Option<ErSection>,
    rf: Option<RfSection>,
    selfavg: Option<SelfavgArgs>,
}

pub fn load(path: &Path) -> anyhow::Result<ConfigFile> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
}

impl ConfigFile {
    fn section_for(&self, path: &str) -> Command {
        macro_rules! leaf {
            ($wrap:expr, $field:expr) => {
                $wrap($field.clone().unwrap_or_default())
            };
        }
        let mf = self.meanfield.as_ref();
        let fl = self.fluct.as_ref();
        let er = self.er.as_ref();
        let rf = self.rf.as_ref();
        match path {
            "exact" => leaf!(Command::Exact, self.exact),
            "gaussian" => leaf!(Command::Gaussian, self.gaussian),
            "zeros" => leaf!(Command::Zeros, self.zeros),
            "meanfield.analyze" => Command::Meanfield(MeanfieldCmd::Analyze(
                mf.and_then(|s| s.analyze.clone()).unwrap_or_default(),
            )),
            "meanfield.gamma" => Command::Meanfield(MeanfieldCmd::Gamma(
                mf.and_then(|s| s.gamma.clone()).unwrap_or_default(),
            )),
            "meanfield.critical" => Command::Meanfield(MeanfieldCmd::Critical(
                mf.and_then(|s| s.critical.clone()).unwrap_or_default(),
            )),
            "meanfield.exponents" => Command::Meanfield(MeanfieldCmd::Exponents(
                mf.and_then(|s| s.exponents.clone()).unwrap_or_default(),
            )),
            "fluct.pmf" => Command::Fluct(FluctCmd::Pmf(
                fl.and_then(|s| s.pmf.clone()).unwrap_or_default(),
            )),
            "fluct.clt" => Command::Fluct(FluctCmd::Clt(
                fl.and_then(|s| s.clt.clone()).unwrap_or_default(),
            )),
            "fluct.lln" => Command::Fluct(FluctCmd::Lln(
                fl.and_then(|s| s.lln.clone()).unwrap_or_default(),
            )),
            "fluct.critical" => Command::Fluct(FluctCmd::Critical(
                fl.and_then(|s| s.critical.clone()).unwrap_or_default(),
            )),
            "er.density" => Command::Er(ErCmd::Density(
                er.and_then(|s| s.density.clone()).unwrap_or_default(),
            )),
            "er.pressure" => Command::Er(ErCmd::Pressure(
                er.and_then(|s| s.pressure.clone()).unwrap_or_default(),
            )),
            "er.fig2" => Command::Er(ErCmd::Fig2(
                er.and_then(|s| s.fig2.clone()).unwrap_or_default(),
            )),
            "rf.solve" => Command::Rf(RfCmd::Solve(
                rf.and_then(|s| s.solve.clone()).unwrap_or_default(),
            )),
            "rf.partition" => Command::Rf(RfCmd::Partition(
                rf.and_then(|s| s.partition.clone()).unwrap_or_default(),
            )),
            "selfavg" => leaf!(Command::Selfavg, self.selfavg),
            _ => unreachable!("validated command path"),
        }
    }
}

pub const KNOWN_COMMANDS: &[&str] = &[
    "exact",
    "gaussian",
    "zeros",
    "meanfield.analyze",
    "meanfield.gamma",
    "meanfield.critical",
    "meanfield.exponents",
    "fluct.pmf",
    "fluct.clt",
    "fluct.lln",
    "fluct.critical",
    "er.density",
    "er.pressure",
    "er.fig2",
    "rf.solve",
    "rf.partition",
    "selfavg",
];

/// Picks the command to run (command line wins over the file's `command`
/// key) and merges its parameters, flag values taking precedence.
pub fn resolve_command(
    cli: Option<Command>,
    file: Option<&ConfigFile>,
) -> anyhow::Result<Command> {
    let from_file = |name: &str, file: &ConfigFile| -> anyhow::Result<Command> {
        let normalized = name.trim().replace([' ', '/'], ".");
        if !KNOWN_COMMANDS.contains(&normalized.as_str()) {
            bail!(
                "unknown command `{name}` in config; expected one of: {}",
                KNOWN_COMMANDS.join(", ")
            );
        }
        Ok(file.section_for(&normalized))
    };
    match (cli, file) {
        (Some(cmd), None) => Ok(cmd),
        (Some(cmd), Some(f)) => {
            // pull file-side defaults for the same command
            let base = f.section_for(cmd.path());
            Ok(merge_command(cmd, base))
        }
        (None, Some(f)) => match &f.command {
            Some(name) => from_file(name, f),
            None => bail!("no command given: pass a subcommand or set `command` in the config"),
        },
        (None, None) => bail!("no command given; see --help"),
    }
}

fn merge_command(cli: Command, file: Command) -> Command {
    match (cli, file) {
        (Command::Exact(a), Command::Exact(b)) => Command::Exact(a.merge(b)),
        (Command::Gaussian(a), Command::Gaussian(b)) => Command::Gaussian(a.merge(b)),
        (Command::Zeros(a), Command::Zeros(b)) => Command::Zeros(a.merge(b)),
        (
            Command::Meanfield(MeanfieldCmd::Analyze(a)),
            Command::Meanfield(MeanfieldCmd::Analyze(b)),
        ) => Command::Meanfield(MeanfieldCmd::Analyze(a.merge(b))),
        (
            Command::Meanfield(MeanfieldCmd::Gamma(a)),
            Command::Meanfield(MeanfieldCmd::Gamma(b)),
        ) => Command::Meanfield(MeanfieldCmd::Gamma(a.merge(b))),
        (
            Command::Meanfield(MeanfieldCmd::Critical(a)),
            Command::Meanfield(MeanfieldCmd::Critical(b)),
        ) => Command::Meanfield(MeanfieldCmd::Critical(a.merge(b))),
        (
            Command::Meanfield(MeanfieldCmd::Exponents(a)),
            Command::Meanfield(MeanfieldCmd::Exponents(b)),
        ) => Command::Meanfield(MeanfieldCmd::Exponents(a.merge(b))),
        (Command::Fluct(FluctCmd::Pmf(a)), Command::Fluct(FluctCmd::Pmf(b))) => {
            Command::Fluct(FluctCmd::Pmf(a.merge(b)))
        }
        (Command::Fluct(FluctCmd::Clt(a)), Command::Fluct(FluctCmd::Clt(b))) => {
            Command::Fluct(FluctCmd::Clt(a.merge(b)))
        }
        (Command::Fluct(FluctCmd::Lln(a)), Command::Fluct(FluctCmd::Lln(b))) => {
            Command::Fluct(FluctCmd::Lln(a.merge(b)))
        }
        (Command::Fluct(FluctCmd::Critical(a)), Command::Fluct(FluctCmd::Critical(b))) => {
            Command::Fluct(FluctCmd::Critical(a.merge(b)))
        }
        (Command::Er(ErCmd::Density(a)), Command::Er(ErCmd::Density(b))) => {
            Command::Er(ErCmd::Density(a.merge(b)))
        }
        (Command::Er(ErCmd::Pressure(a)), Command::Er(ErCmd::Pressure(b))) => {
            Command::Er(ErCmd::Pressure(a.merge(b)))
        }
        (Command::Er(ErCmd::Fig2(a)), Command::Er(ErCmd::Fig2(b))) => {
            Command::Er(ErCmd::Fig2(a.merge(b)))
        }
        (Command::Rf(RfCmd::Solve(a)), Command::Rf(RfCmd::Solve(b))) => {
            Command::Rf(RfCmd::Solve(a.merge(b)))
        }
        (Command::Rf(RfCmd::Partition(a)), Command::Rf(RfCmd::Partition(b))) => {
            Command::Rf(RfCmd::Partition(a.merge(b)))
        }
        (Command::Selfavg(a), Command::Selfavg(b)) => Command::Selfavg(a.merge(b)),
        (cli, _) => cli,
    }
}
