//! Executes a resolved command and returns the fully resolved parameter
//! record plus the result payload.

use anyhow::{bail, Context};
use monomer_dimer::er::{er_monomer_density, er_pressure, er_quenched_oracle, ErParams};
use monomer_dimer::fluctuations::{
    clt_check, critical_scaling_check, exact_pmf, lln_check, normal_cdf,
};
use monomer_dimer::gaussian::{
    gaussian_partition_exact, gaussian_partition_mc, imitative_gaussian_enum,
};
use monomer_dimer::graph::{
    imitative_partition_enum, imitative_partition_hl, monomer_probabilities, partition_enum,
    partition_hl, Graph,
};
use monomer_dimer::io::{model_from_str, ModelInput};
use monomer_dimer::meanfield::{
    analyze, coexistence_h, critical_exponents, critical_point, ExponentDirection,
};
use monomer_dimer::polynomial::{certify_imaginary, certify_interlacing};
use monomer_dimer::rf::{rf_partition_quadrature, rf_pressure_and_density, self_averaging_experiment};
use monomer_dimer::rng::{stream_rng, tags};
use rand::Rng;
use serde_json::{json, Value};

use crate::dist;
use crate::output::{fnv1a64, Format, Payload};
use crate::reference;
use crate::{
    Command, DirectionArg, ErCmd, FluctCmd, MeanfieldCmd, RfCmd,
};

/// Enumeration caps used when a command reports both the recursive and
/// the exhaustive value.
const ENUM_LIMIT: usize = 16;
const IMITATIVE_ENUM_LIMIT: usize = 10;

pub fn execute(
    command: &Command,
    seed: u64,
    format: Option<Format>,
) -> anyhow::Result<(Value, Payload)> {
    match command {
        Command::Exact(a) => exact(a),
        Command::Gaussian(a) => gaussian(a, seed),
        Command::Zeros(a) => zeros(a, seed),
        Command::Meanfield(MeanfieldCmd::Analyze(a)) => mf_analyze(a),
        Command::Meanfield(MeanfieldCmd::Gamma(a)) => mf_gamma(a),
        Command::Meanfield(MeanfieldCmd::Critical(a)) => mf_critical(a, seed),
        Command::Meanfield(MeanfieldCmd::Exponents(a)) => mf_exponents(a),
        Command::Fluct(FluctCmd::Pmf(a)) => fluct_pmf(a),
        Command::Fluct(FluctCmd::Clt(a)) => fluct_clt(a, format),
        Command::Fluct(FluctCmd::Lln(a)) => fluct_lln(a),
        Command::Fluct(FluctCmd::Critical(a)) => fluct_critical(a),
        Command::Er(ErCmd::Density(a)) => er_density(a, seed, format),
        Command::Er(ErCmd::Pressure(a)) => er_pressure_cmd(a, seed),
        Command::Er(ErCmd::Fig2(a)) => er_fig2(a, seed),
        Command::Rf(RfCmd::Solve(a)) => rf_solve(a),
        Command::Rf(RfCmd::Partition(a)) => rf_partition(a, seed),
        Command::Selfavg(a) => selfavg(a, seed),
    }
}

fn require<T: Clone>(value: &Option<T>, flag: &str) -> anyhow::Result<T> {
    value
        .clone()
        .with_context(|| format!("--{flag} is required (flag or config key)"))
}

fn load_model(path: &std::path::Path) -> anyhow::Result<ModelInput> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading graph {}", path.display()))?;
    Ok(model_from_str(&text)?)
}

fn exact(a: &crate::ExactArgs) -> anyhow::Result<(Value, Payload)> {
    let path = require(&a.graph, "graph")?;
    let params = json!({"graph": path.display().to_string()});
    let model = load_model(&path)?;
    let result = match &model {
        ModelInput::Pure(m) => {
            let n = m.graph().n();
            let log_z = partition_hl(m)?;
            let log_z_enumeration = if n <= ENUM_LIMIT {
                Some(partition_enum(m)?)
            } else {
                None
            };
            let probs = if n <= ENUM_LIMIT {
                Some(monomer_probabilities(m)?)
            } else {
                None
            };
            json!({
                "kind": "pure",
                "n": n,
                "edges": m.graph().edges().len(),
                "log_z": log_z,
                "log_z_enumeration": log_z_enumeration,
                "monomer_probabilities": probs,
            })
        }
        ModelInput::Imitative(im) => {
            let n = im.base().graph().n();
            let log_z = imitative_partition_hl(im)?;
            let log_z_enumeration = if n <= IMITATIVE_ENUM_LIMIT {
                Some(imitative_partition_enum(im)?)
            } else {
                None
            };
            json!({
                "kind": "imitative",
                "n": n,
                "edges": im.base().graph().edges().len(),
                "log_z": log_z,
                "log_z_enumeration": log_z_enumeration,
            })
        }
    };
    Ok((params, Payload::Scalar(result)))
}

fn gaussian(a: &crate::GaussianArgs, seed: u64) -> anyhow::Result<(Value, Payload)> {
    let path = require(&a.graph, "graph")?;
    let samples = a.mc_samples.unwrap_or(100_000);
    let params = json!({
        "graph": path.display().to_string(),
        "mc_samples": samples,
    });
    let model = load_model(&path)?;
    let result = match &model {
        ModelInput::Pure(m) => {
            let (estimate, stderr) = gaussian_partition_mc(m, samples, seed)?;
            json!({
                "kind": "pure",
                "log_z_pairing": gaussian_partition_exact(m)?,
                "log_z_recursion": partition_hl(m)?,
                "mc_estimate": estimate,
                "mc_stderr": stderr,
            })
        }
        ModelInput::Imitative(im) => json!({
            "kind": "imitative",
            "log_z_pairing": imitative_gaussian_enum(im)?,
            "log_z_recursion": imitative_partition_hl(im)?,
        }),
    };
    Ok((params, Payload::Scalar(result)))
}

fn zeros(a: &crate::ZerosArgs, seed: u64) -> anyhow::Result<(Value, Payload)> {
    let tol = a.tol.unwrap_or(1e-8);
    let columns = vec![
        "graph",
        "n",
        "max_re",
        "min_gap",
        "imaginary_pass",
        "interlacing_pass",
    ];
    let mut rows = Vec::new();
    let certify_row = |label: String, g: &Graph, w: &[f64]| -> anyhow::Result<Vec<String>> {
        let zc = certify_imaginary(g, w, tol)?;
        let ic = certify_interlacing(g, w, 0, tol)?;
        Ok(vec![
            label,
            g.n().to_string(),
            zc.max_re.to_string(),
            ic.min_gap.to_string(),
            zc.pass.to_string(),
            ic.pass.to_string(),
        ])
    };
    let params;
    match (&a.graph, a.corpus) {
        (Some(path), None) => {
            params = json!({
                "graph": path.display().to_string(),
                "tol": tol,
            });
            let model = load_model(path)?;
            let base = model.base();
            rows.push(certify_row(
                path.display().to_string(),
                base.graph(),
                base.w(),
            )?);
        }
        (None, Some(count)) => {
            let n_max = a.n_max.unwrap_or(10);
            if n_max < 2 {
                bail!("--n-max must be at least 2");
            }
            params = json!({
                "corpus": count,
                "n_max": n_max,
                "tol": tol,
            });
            for idx in 0..count {
                let (g, w) = random_positive_graph(seed, idx as u64, n_max);
                rows.push(certify_row(idx.to_string(), &g, &w)?);
            }
        }
        _ => bail!("pass exactly one of --graph or --corpus"),
    }
    Ok((params, Payload::Sweep { columns, rows }))
}

fn random_positive_graph(seed: u64, idx: u64, n_max: usize) -> (Graph, Vec<f64>) {
    let mut rng = stream_rng(seed, [0xCB, idx]);
    let n = rng.gen_range(2..=n_max);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.gen::<f64>() < 0.6 {
                edges.push((i, j));
            }
        }
    }
    let graph = Graph::new(n, edges).expect("generated edges are valid");
    let w = (0..graph.edges().len())
        .map(|_| 0.05 + 1.95 * rng.gen::<f64>())
        .collect();
    (graph, w)
}

fn mf_analyze(a: &crate::AnalyzeArgs) -> anyhow::Result<(Value, Payload)> {
    let h = require(&a.h, "h")?;
    let j = require(&a.j, "j")?;
    let params = json!({"h": h, "j": j});
    let analysis = analyze(h, j, 1e-9);
    Ok((params, Payload::Scalar(serde_json::to_value(&analysis)?)))
}

fn mf_gamma(a: &crate::GammaArgs) -> anyhow::Result<(Value, Payload)> {
    let jmin = require(&a.jmin, "jmin")?;
    let jmax = require(&a.jmax, "jmax")?;
    let steps = a.steps.unwrap_or(10);
    if steps < 2 || jmax <= jmin {
        bail!("need steps >= 2 and jmax > jmin");
    }
    let params = json!({"jmin": jmin, "jmax": jmax, "steps": steps});
    let columns = vec!["J", "gamma", "m1", "m2", "rho1", "rho2"];
    let mut rows = Vec::new();
    for k in 0..steps {
        let j = jmin + (jmax - jmin) * k as f64 / (steps - 1) as f64;
        let h = coexistence_h(j, 1e-12)?;
        let an = analyze(h, j, 1e-9);
        let m1 = an.maximizers.first().copied().expect("maximizer exists");
        let m2 = an.maximizers.last().copied().expect("maximizer exists");
        let (rho1, rho2) = monomer_dimer::fluctuations::mixture_weights(h, j)?;
        rows.push(vec![
            j.to_string(),
            h.to_string(),
            m1.to_string(),
            m2.to_string(),
            rho1.to_string(),
            rho2.to_string(),
        ]);
    }
    Ok((params, Payload::Sweep { columns, rows }))
}

fn mf_critical(a: &crate::CriticalArgs, seed: u64) -> anyhow::Result<(Value, Payload)> {
    let tol = a.tol.unwrap_or(1e-12);
    let crit = critical_point(tol)?;
    let params = json!({"tol": tol});
    let record = json!({
        "command": "meanfield.critical",
        "params": params,
        "seed": seed,
    });
    let hash = format!(
        "{:016x}",
        fnv1a64(serde_json::to_string(&record)?.as_bytes())
    );
    let refs = reference::build(&crit, tol, seed, hash);
    let mut text = serde_json::to_string_pretty(&refs)?;
    text.push('\n');
    Ok((params, Payload::Document(text)))
}

fn mf_exponents(a: &crate::ExponentsArgs) -> anyhow::Result<(Value, Payload)> {
    let direction = require(&a.direction, "direction")?;
    let steps = a.steps.unwrap_or(10);
    let params = json!({
        "direction": serde_json::to_value(direction)?,
        "steps": steps,
    });
    let dir = match direction {
        DirectionArg::Tangent => ExponentDirection::TangentGamma,
        DirectionArg::VaryJ => ExponentDirection::VaryJ,
        DirectionArg::VaryH => ExponentDirection::VaryH,
    };
    let fit = critical_exponents(dir, steps)?;
    Ok((params, Payload::Scalar(serde_json::to_value(&fit)?)))
}

fn fluct_pmf(a: &crate::PmfArgs) -> anyhow::Result<(Value, Payload)> {
    let n = require(&a.n, "n")?;
    let h = a.h.unwrap_or(0.0);
    let j = a.j.unwrap_or(0.0);
    let params = json!({"n": n, "h": h, "j": j});
    let pmf = exact_pmf(n, h, j)?;
    let probs = pmf.probabilities();
    let columns = vec!["m", "probability"];
    let rows = pmf
        .support()
        .iter()
        .zip(&probs)
        .map(|(&m, &p)| vec![m.to_string(), p.to_string()])
        .collect();
    Ok((params, Payload::Sweep { columns, rows }))
}

fn fluct_clt(a: &crate::CltArgs, format: Option<Format>) -> anyhow::Result<(Value, Payload)> {
    let n = require(&a.n, "n")?;
    let h = a.h.unwrap_or(0.0);
    let j = a.j.unwrap_or(0.0);
    let params = json!({"n": n, "h": h, "j": j});
    let report = clt_check(n, h, j)?;
    if format == Some(Format::Csv) {
        // plotting rows: scaled atom, exact CDF, limit CDF
        let pmf = exact_pmf(n, h, j)?;
        let probs = pmf.probabilities();
        let scale = (n as f64).sqrt();
        let center = n as f64 * report.m_star;
        let columns = vec!["y", "empirical_cdf", "limit_cdf"];
        let mut cum = 0.0;
        let rows = pmf
            .support()
            .iter()
            .zip(&probs)
            .map(|(&m, &p)| {
                cum += p;
                let y = (m as f64 - center) / scale;
                vec![
                    y.to_string(),
                    cum.to_string(),
                    normal_cdf(y, report.sigma2).to_string(),
                ]
            })
            .collect();
        Ok((params, Payload::Sweep { columns, rows }))
    } else {
        Ok((params, Payload::Scalar(serde_json::to_value(report)?)))
    }
}

fn fluct_lln(a: &crate::LlnArgs) -> anyhow::Result<(Value, Payload)> {
    let n = require(&a.n, "n")?;
    let j = a.j.unwrap_or(0.0);
    let epsilon = a.epsilon.unwrap_or(0.05);
    let at_coexistence = a.at_coexistence.unwrap_or(false);
    let h = if at_coexistence {
        coexistence_h(j, 1e-12)?
    } else {
        a.h.unwrap_or(0.0)
    };
    let params = json!({
        "n": n,
        "h": h,
        "j": j,
        "epsilon": epsilon,
        "at_coexistence": at_coexistence,
    });
    let report = lln_check(n, h, j, epsilon)?;
    Ok((params, Payload::Scalar(serde_json::to_value(&report)?)))
}

fn parse_sizes(text: &str) -> anyhow::Result<Vec<usize>> {
    text.split(',')
        .map(|t| {
            let v: f64 = t
                .trim()
                .parse()
                .with_context(|| format!("bad size `{t}`"))?;
            if !(v >= 1.0 && v.fract() == 0.0 && v <= 1e9) {
                bail!("size `{t}` must be a positive integer");
            }
            Ok(v as usize)
        })
        .collect()
}

fn fluct_critical(a: &crate::FluctCriticalArgs) -> anyhow::Result<(Value, Payload)> {
    let ns = parse_sizes(a.ns.as_deref().unwrap_or("1e4,1e5"))?;
    let path = a
        .reference
        .clone()
        .unwrap_or_else(|| "reference_values.json".into());
    let params = json!({
        "ns": ns,
        "reference": path.display().to_string(),
    });
    let crit = reference::load(&path)?;
    let columns = vec!["n", "quartic_distance", "gaussian_control_distance"];
    let mut rows = Vec::new();
    for &n in &ns {
        let rep = critical_scaling_check(n, &crit)?;
        rows.push(vec![
            n.to_string(),
            rep.quartic_distance.to_string(),
            rep.gaussian_control_distance.to_string(),
        ]);
    }
    Ok((params, Payload::Sweep { columns, rows }))
}

fn er_density(
    a: &crate::ErDensityArgs,
    seed: u64,
    format: Option<Format>,
) -> anyhow::Result<(Value, Payload)> {
    let c = require(&a.c, "c")?;
    let x = require(&a.x, "x")?;
    let r = a.r.unwrap_or(20);
    let k = a.k.unwrap_or(100_000);
    let params = json!({"c": c, "x": x, "r": r, "k": k});
    let report = er_monomer_density(ErParams::new(c, x)?, r, k, seed)?;
    if format == Some(Format::Csv) {
        let columns = vec!["step", "mean", "stderr"];
        let rows = report
            .ladder
            .iter()
            .map(|rung| {
                vec![
                    rung.step.to_string(),
                    rung.mean.to_string(),
                    rung.stderr.to_string(),
                ]
            })
            .collect();
        Ok((params, Payload::Sweep { columns, rows }))
    } else {
        Ok((params, Payload::Scalar(serde_json::to_value(&report)?)))
    }
}

fn er_pressure_cmd(a: &crate::ErPressureArgs, seed: u64) -> anyhow::Result<(Value, Payload)> {
    let c = require(&a.c, "c")?;
    let x = require(&a.x, "x")?;
    let r = a.r.unwrap_or(30);
    let k = a.k.unwrap_or(100_000);
    let er_params = ErParams::new(c, x)?;
    let report = er_pressure(er_params, r, k, seed)?;
    let mut result = serde_json::to_value(&report)?;
    let obj = result.as_object_mut().expect("report is an object");
    obj.insert(
        "orientation_note".into(),
        json!(
            "sign fixed by the c = 0 limit (pressure -> log x) and the \
             large-activity normalization (pressure - log x -> 0)"
        ),
    );
    let params;
    if let Some(oracle_n) = a.oracle_n {
        let samples = a.oracle_samples.unwrap_or(500);
        params = json!({
            "c": c, "x": x, "r": r, "k": k,
            "oracle_n": oracle_n, "oracle_samples": samples,
        });
        let oracle = er_quenched_oracle(oracle_n, er_params, samples, seed)?;
        obj.insert("oracle".into(), serde_json::to_value(&oracle)?);
        obj.insert(
            "finite_size_gap".into(),
            json!((report.estimate - oracle.mean).abs()),
        );
    } else {
        params = json!({"c": c, "x": x, "r": r, "k": k});
    }
    Ok((params, Payload::Scalar(result)))
}

fn er_fig2(a: &crate::ErFig2Args, seed: u64) -> anyhow::Result<(Value, Payload)> {
    let r = a.r.unwrap_or(12);
    let k = a.k.unwrap_or(100_000);
    let params = json!({"c": 2.0, "xs": [0.5, 1.0, 2.0], "r": r, "k": k});
    let columns = vec!["x", "step", "mean", "stderr"];
    let mut rows = Vec::new();
    for &x in &[0.5, 1.0, 2.0] {
        let report = er_monomer_density(ErParams::new(2.0, x)?, r, k, seed)?;
        for rung in &report.ladder {
            rows.push(vec![
                x.to_string(),
                rung.step.to_string(),
                rung.mean.to_string(),
                rung.stderr.to_string(),
            ]);
        }
    }
    Ok((params, Payload::Sweep { columns, rows }))
}

fn rf_solve(a: &crate::RfSolveArgs) -> anyhow::Result<(Value, Payload)> {
    let w = a.w.unwrap_or(1.0);
    let spec = require(&a.dist, "dist")?;
    let params = json!({"w": w, "dist": spec});
    let dist = dist::parse(&spec)?;
    let sol = rf_pressure_and_density(w, &dist)?;
    Ok((params, Payload::Scalar(serde_json::to_value(sol)?)))
}

fn rf_partition(a: &crate::RfPartitionArgs, seed: u64) -> anyhow::Result<(Value, Payload)> {
    let n = a.n.unwrap_or(500);
    let w = a.w.unwrap_or(1.0);
    let spec = require(&a.dist, "dist")?;
    let params = json!({"n": n, "w": w, "dist": spec});
    let dist = dist::parse(&spec)?;
    let mut rng = stream_rng(seed, [tags::RF_ACTIVITIES, 0]);
    let xs = dist.sample_vec(&mut rng, n);
    let log_z = rf_partition_quadrature(n, w, &xs, 1e-10)?;
    let limit = rf_pressure_and_density(w, &dist)?.pressure;
    let pressure = log_z / n as f64;
    let result = json!({
        "n": n,
        "w": w,
        "log_z": log_z,
        "pressure": pressure,
        "limit_pressure": limit,
        "gap": (pressure - limit).abs(),
    });
    Ok((params, Payload::Scalar(result)))
}

fn selfavg(a: &crate::SelfavgArgs, seed: u64) -> anyhow::Result<(Value, Payload)> {
    let ns = parse_sizes(a.ns.as_deref().unwrap_or("50,100,200,400"))?;
    let spec = require(&a.dist, "dist")?;
    let w = a.w.unwrap_or(1.0);
    let reps = a.reps.unwrap_or(30);
    let params = json!({"ns": ns, "dist": spec, "w": w, "reps": reps});
    let dist = dist::parse(&spec)?;
    let rows_data = self_averaging_experiment(&ns, &dist, w, reps, seed)?;
    let columns = vec!["n", "mean", "std"];
    let rows = rows_data
        .iter()
        .map(|r| vec![r.n.to_string(), r.mean.to_string(), r.std.to_string()])
        .collect();
    Ok((params, Payload::Sweep { columns, rows }))
}
