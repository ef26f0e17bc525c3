//! The reference-values file: critical constants computed once by
//! `meanfield critical` and consumed by the critical-scaling checks, so
//! every module sees the same numbers. A version mismatch is refused with
//! a regeneration hint rather than silently reused.

use anyhow::{bail, Context};
use monomer_dimer::meanfield::CriticalPoint;
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::output::VERSION;

#[derive(Serialize, Deserialize, Debug, Clone)]
pub struct ReferenceValues {
    pub h_c: f64,
    #[serde(rename = "J_c")]
    pub j_c: f64,
    pub m_c: f64,
    pub t_star: f64,
    pub lambda_c: f64,
    pub tolerances: Tolerances,
    pub provenance: String,
    pub version: String,
    pub seed: u64,
    pub config_hash: String,
}

#[derive(Serialize, Deserialize, Debug, Clone, Copy)]
pub struct Tolerances {
    pub critical_point: f64,
}

pub fn build(crit: &CriticalPoint, tol: f64, seed: u64, config_hash: String) -> ReferenceValues {
    ReferenceValues {
        h_c: crit.h_c,
        j_c: crit.j_c,
        m_c: crit.m_c,
        t_star: crit.t_star,
        lambda_c: crit.lambda_c,
        tolerances: Tolerances {
            critical_point: tol,
        },
        provenance: "derived".into(),
        version: VERSION.into(),
        seed,
        config_hash,
    }
}

pub fn load(path: &Path) -> anyhow::Result<CriticalPoint> {
    let text = std::fs::read_to_string(path).with_context(|| {
        format!(
            "reading reference values from {}; generate them with \
             `mdtool meanfield critical --out {}`",
            path.display(),
            path.display()
        )
    })?;
    let raw: ReferenceValues = serde_json::from_str(&text)
        .with_context(|| format!("parsing reference values {}", path.display()))?;
    if raw.provenance != "derived" {
        bail!(
            "reference values in {} have provenance `{}`; only derived \
             constants are accepted",
            path.display(),
            raw.provenance
        );
    }
    if raw.version != VERSION {
        bail!(
            "reference values in {} were written by version {} but this is \
             {}; regenerate with `mdtool meanfield critical --out {}`",
            path.display(),
            raw.version,
            VERSION,
            path.display()
        );
    }
    Ok(CriticalPoint {
        h_c: raw.h_c,
        j_c: raw.j_c,
        m_c: raw.m_c,
        t_star: raw.t_star,
        lambda_c: raw.lambda_c,
    })
}
