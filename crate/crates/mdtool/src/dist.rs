//! Activity distribution specs.
//!
//! Grammar: `degenerate:X`, `twopoint:X1,X2,P`, `lognormal:MU,SIGMA`,
//! `empirical:@FILE` where FILE holds numbers separated by commas,
//! whitespace, or newlines.

use anyhow::{bail, Context};
use monomer_dimer::rf::ActivityDistribution;

pub fn parse(spec: &str) -> anyhow::Result<ActivityDistribution> {
    let (kind, rest) = spec
        .split_once(':')
        .with_context(|| format!("distribution `{spec}` is missing `:`"))?;
    let floats = |expected: usize| -> anyhow::Result<Vec<f64>> {
        let vals: Vec<f64> = rest
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<f64>()
                    .with_context(|| format!("bad number `{t}` in `{spec}`"))
            })
            .collect::<anyhow::Result<_>>()?;
        if vals.len() != expected {
            bail!("`{kind}` takes {expected} parameters, got {}", vals.len());
        }
        Ok(vals)
    };
    let dist = match kind {
        "degenerate" => {
            let v = floats(1)?;
            ActivityDistribution::degenerate(v[0])?
        }
        "twopoint" => {
            let v = floats(3)?;
            ActivityDistribution::two_point(v[0], v[1], v[2])?
        }
        "lognormal" => {
            let v = floats(2)?;
            ActivityDistribution::log_normal(v[0], v[1])?
        }
        "empirical" => {
            let path = rest
                .strip_prefix('@')
                .with_context(|| format!("`empirical:` takes `@file`, got `{rest}`"))?;
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading samples from {path}"))?;
            let samples: Vec<f64> = text
                .split(|c: char| c.is_whitespace() || c == ',')
                .filter(|t| !t.is_empty())
                .map(|t| {
                    t.parse::<f64>()
                        .with_context(|| format!("bad sample `{t}` in {path}"))
                })
                .collect::<anyhow::Result<_>>()?;
            ActivityDistribution::empirical(samples)?
        }
        other => bail!(
            "unknown distribution kind `{other}`; expected degenerate, twopoint, lognormal, or empirical"
        ),
    };
    Ok(dist)
}
