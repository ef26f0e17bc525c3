//! Random-activity solver on the complete graph with uniform dimer
//! weight `w/n`: quenched i.i.d. monomer activities, the scalar cavity
//! fixed point, the limiting pressure, and a deterministic quadrature
//! for the finite-size partition function.
//!
//! The model collapses to one dimension: a Gaussian linearization of the
//! pair interaction writes the partition function as
//! `Z_n = sqrt(n/2πw) ∫ exp(-n ξ²/(2w)) Π_i (ξ + x_i) dξ`,
//! whose saddle point yields the fixed-point equation
//! `ξ = E[w/(ξ + x)]` and the limiting pressure
//! `Φ(ξ*) = -ξ*²/(2w) + E[log(ξ* + x)]`.

use crate::error::{Error, Result};
use crate::logspace::KahanSum;
use crate::rng::{stream_rng, tags};
use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::{Distribution, LogNormal as LogNormalSampler};
use rayon::prelude::*;
use serde::Serialize;
use std::sync::OnceLock;

/// Largest system the deterministic quadrature will handle.
pub const RF_QUAD_CAP: usize = 10_000;

const GH_NODES: usize = 64;

/// Gauss-Hermite nodes and weights for `∫ f(t) e^{-t²} dt`, computed from
/// the symmetric tridiagonal recurrence matrix.
fn gauss_hermite() -> &'static [(f64, f64)] {
    static TABLE: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let n = GH_NODES;
        let mut jacobi = DMatrix::<f64>::zeros(n, n);
        for k in 1..n {
            let b = (k as f64 / 2.0).sqrt();
            jacobi[(k - 1, k)] = b;
            jacobi[(k, k - 1)] = b;
        }
        let eig = SymmetricEigen::new(jacobi);
        let mut pts: Vec<(f64, f64)> = (0..n)
            .map(|i| {
                let v0 = eig.eigenvectors[(0, i)];
                (
                    eig.eigenvalues[i],
                    std::f64::consts::PI.sqrt() * v0 * v0,
                )
            })
            .collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        pts
    })
}

/// Law of the i.i.d. positive monomer activities.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ActivityDistribution {
    Degenerate { x: f64 },
    TwoPoint { x1: f64, x2: f64, p: f64 },
    LogNormal { mu: f64, sigma: f64 },
    Empirical { samples: Vec<f64> },
}

fn positive(v: f64, what: &str) -> Result<()> {
    if !(v > 0.0) || !v.is_finite() {
        return Err(Error::InvalidInput(format!(
            "{what} must be finite and positive, got {v}"
        )));
    }
    Ok(())
}

impl ActivityDistribution {
    pub fn degenerate(x: f64) -> Result<Self> {
        positive(x, "activity")?;
        Ok(Self::Degenerate { x })
    }

    pub fn two_point(x1: f64, x2: f64, p: f64) -> Result<Self> {
        positive(x1, "activity")?;
        positive(x2, "activity")?;
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidInput(format!(
                "mixture probability must lie in [0, 1], got {p}"
            )));
        }
        Ok(Self::TwoPoint { x1, x2, p })
    }

    pub fn log_normal(mu: f64, sigma: f64) -> Result<Self> {
        if !mu.is_finite() || !sigma.is_finite() || sigma < 0.0 {
            return Err(Error::InvalidInput(format!(
                "log-normal parameters must be finite with sigma >= 0, got ({mu}, {sigma})"
            )));
        }
        Ok(Self::LogNormal { mu, sigma })
    }

    pub fn empirical(samples: Vec<f64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidInput(
                "empirical distribution needs at least one sample".into(),
            ));
        }
        for &s in &samples {
            positive(s, "activity sample")?;
        }
        Ok(Self::Empirical { samples })
    }

    /// `E[f(x)]`, by closed form, 64-node quadrature on the log scale, or
    /// the full sample mean.
    pub fn expect(&self, f: impl Fn(f64) -> f64) -> f64 {
        match self {
            Self::Degenerate { x } => f(*x),
            Self::TwoPoint { x1, x2, p } => p * f(*x1) + (1.0 - p) * f(*x2),
            Self::LogNormal { mu, sigma } => {
                let scale = std::f64::consts::SQRT_2 * sigma;
                let mut sum = KahanSum::new();
                for &(t, wgt) in gauss_hermite() {
                    sum.add(wgt * f((mu + scale * t).exp()));
                }
                sum.value() / std::f64::consts::PI.sqrt()
            }
            Self::Empirical { samples } => {
                let mut sum = KahanSum::new();
                for &s in samples {
                    sum.add(f(s));
                }
                sum.value() / samples.len() as f64
            }
        }
    }

    /// Draws `n` i.i.d. activities.
    pub fn sample_vec<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Vec<f64> {
        match self {
            Self::Degenerate { x } => vec![*x; n],
            Self::TwoPoint { x1, x2, p } => (0..n)
                .map(|_| if rng.gen::<f64>() < *p { *x1 } else { *x2 })
                .collect(),
            Self::LogNormal { mu, sigma } => {
                let sampler = LogNormalSampler::new(*mu, *sigma)
                    .expect("parameters validated at construction");
                (0..n).map(|_| sampler.sample(rng)).collect()
            }
            Self::Empirical { samples } => (0..n)
                .map(|_| samples[rng.gen_range(0..samples.len())])
                .collect(),
        }
    }
}

/// Solves `ξ = E[w/(ξ + x)]` by bisection on `[0, w E[1/x]]`; the right
/// side is strictly decreasing in `ξ`, so the root is unique.
pub fn rf_fixed_point(w: f64, dist: &ActivityDistribution, tol: f64) -> Result<f64> {
    positive(w, "dimer weight")?;
    if !(tol > 0.0) {
        return Err(Error::InvalidInput("tolerance must be positive".into()));
    }
    let mean_inv = dist.expect(|x| 1.0 / x);
    if !mean_inv.is_finite() {
        return Err(Error::InvalidInput(
            "the activity distribution has no finite inverse moment".into(),
        ));
    }
    let residual = |xi: f64| dist.expect(|x| w / (xi + x)) - xi;
    let (mut a, mut b) = (0.0, w * mean_inv);
    if residual(b) > 0.0 {
        // only possible through rounding on the expectation; widen slightly
        b += 2.0 * tol + 1e-12 * b;
    }
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mid == a || mid == b || b - a <= tol {
            break;
        }
        if residual(mid) > 0.0 {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok(0.5 * (a + b))
}

/// Fixed point, limiting pressure, and limiting dimer density.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RfSolution {
    pub xi: f64,
    /// `Φ(ξ*) = -ξ*²/(2w) + E[log(ξ* + x)]`.
    pub pressure: f64,
    /// `ξ*²/(2w)`; equals `w ∂p/∂w`.
    pub density: f64,
}

pub fn rf_pressure_and_density(w: f64, dist: &ActivityDistribution) -> Result<RfSolution> {
    let xi = rf_fixed_point(w, dist, 1e-15)?;
    let density = xi * xi / (2.0 * w);
    let pressure = -density + dist.expect(|x| (xi + x).ln());
    Ok(RfSolution {
        xi,
        pressure,
        density,
    })
}

fn simpson_rule(fa: f64, fm: f64, fb: f64, width: f64) -> f64 {
    width / 6.0 * (fa + 4.0 * fm + fb)
}

fn adaptive_simpson(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    eps: f64,
    depth: u32,
) -> Result<f64> {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson_rule(fa, flm, fm, m - a);
    let right = simpson_rule(fm, frm, fb, b - m);
    let delta = left + right - whole;
    if delta.abs() <= 15.0 * eps {
        return Ok(left + right + delta / 15.0);
    }
    if depth == 0 {
        return Err(Error::Convergence(format!(
            "quadrature failed to converge on [{a}, {b}]"
        )));
    }
    Ok(adaptive_simpson(f, a, m, fa, flm, fm, left, 0.5 * eps, depth - 1)?
        + adaptive_simpson(f, m, b, fm, frm, fb, right, 0.5 * eps, depth - 1)?)
}

fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, eps: f64) -> Result<f64> {
    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    let whole = simpson_rule(fa, fm, fb, b - a);
    adaptive_simpson(f, a, b, fa, fm, fb, whole, eps, 60)
}

/// Deterministic evaluation of `log Z_n` for activities `xs` and uniform
/// dimer weight `w/n`, via the one-dimensional integral representation.
/// The integrand is a polynomial times a Gaussian; it is integrated with
/// its sign over a window centred on the positive saddle point, extended
/// until the symmetric envelope drops 46 log-units below the peak.
pub fn rf_partition_quadrature(n: usize, w: f64, xs: &[f64], rel_tol: f64) -> Result<f64> {
    positive(w, "dimer weight")?;
    if !(rel_tol > 0.0) {
        return Err(Error::InvalidInput("tolerance must be positive".into()));
    }
    if xs.len() != n || n == 0 {
        return Err(Error::InvalidInput(format!(
            "expected {n} activities, got {}",
            xs.len()
        )));
    }
    if n > RF_QUAD_CAP {
        return Err(Error::SizeCap {
            what: "quadrature system size",
            size: n,
            cap: RF_QUAD_CAP,
        });
    }
    for &x in xs {
        positive(x, "activity")?;
    }
    let nf = n as f64;

    // saddle point: -n ξ/w + Σ 1/(ξ + x_i) = 0, strictly decreasing left side
    let slope = |xi: f64| {
        let mut s = KahanSum::new();
        for &x in xs {
            s.add(1.0 / (xi + x));
        }
        s.value() - nf * xi / w
    };
    let mut a = 0.0;
    let mut b = {
        let mut s = KahanSum::new();
        for &x in xs {
            s.add(1.0 / x);
        }
        w * s.value() / nf
    };
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mid == a || mid == b {
            break;
        }
        if slope(mid) > 0.0 {
            a = mid;
        } else {
            b = mid;
        }
    }
    let saddle = 0.5 * (a + b);

    // log magnitude and sign of the integrand
    let log_magnitude = |xi: f64| {
        let mut s = KahanSum::new();
        for &x in xs {
            s.add((xi + x).abs().ln());
        }
        s.value() - nf * xi * xi / (2.0 * w)
    };
    let peak = log_magnitude(saddle);
    // the same expression with |ξ| bounds the magnitude at -ξ, and is
    // single-peaked on the positive axis, so one doubling search gives a
    // symmetric window containing all non-negligible mass
    let mut step = (2.0 * w / nf).sqrt().max(saddle);
    let mut radius = saddle + step;
    let mut guard = 0;
    while log_magnitude(radius) > peak - 46.0 {
        step *= 2.0;
        radius = saddle + step;
        guard += 1;
        if guard > 200 {
            return Err(Error::Convergence(
                "integration window failed to close".into(),
            ));
        }
    }

    let shifted = |xi: f64| {
        let mut s = KahanSum::new();
        let mut negatives = 0u32;
        for &x in xs {
            let t = xi + x;
            if t < 0.0 {
                negatives += 1;
            }
            s.add(t.abs().ln());
        }
        let magnitude = (s.value() - nf * xi * xi / (2.0 * w) - peak).exp();
        if negatives % 2 == 0 {
            magnitude
        } else {
            -magnitude
        }
    };
    let curvature = {
        let mut s = KahanSum::new();
        for &x in xs {
            s.add(1.0 / ((saddle + x) * (saddle + x)));
        }
        s.value() + nf / w
    };
    let scale = (2.0 * std::f64::consts::PI / curvature).sqrt();
    let eps = 0.5 * rel_tol * scale;
    let integral = integrate(&shifted, -radius, saddle, eps)?
        + integrate(&shifted, saddle, radius, eps)?;
    if !(integral > 0.0) {
        return Err(Error::Convergence(format!(
            "signed quadrature lost the dominant mass (integral = {integral})"
        )));
    }
    Ok(0.5 * ((nf / (2.0 * std::f64::consts::PI * w)).ln()) + peak + integral.ln())
}

/// One row of the concentration experiment: replicas of the quenched
/// pressure at a fixed size.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SelfAveragingRow {
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation of the per-replica pressure.
    pub std: f64,
}

/// Recomputes the pressure on fresh i.i.d. activities `reps` times per
/// size and reports how the replica scatter shrinks as `n` grows.
pub fn self_averaging_experiment(
    ns: &[usize],
    dist: &ActivityDistribution,
    w: f64,
    reps: usize,
    seed: u64,
) -> Result<Vec<SelfAveragingRow>> {
    if ns.is_empty() || ns.windows(2).any(|p| p[1] <= p[0]) {
        return Err(Error::InvalidInput(
            "sizes must be ascending and nonempty".into(),
        ));
    }
    if reps < 30 {
        return Err(Error::InvalidInput(format!(
            "need at least 30 replicas for a stable scatter estimate, got {reps}"
        )));
    }
    let mut rows = Vec::with_capacity(ns.len());
    for (idx, &n) in ns.iter().enumerate() {
        let pressures: Vec<f64> = (0..reps)
            .into_par_iter()
            .map(|rep| {
                let mut rng = stream_rng(
                    seed,
                    [tags::SELF_AVERAGING | ((idx as u64) << 16), rep as u64],
                );
                let xs = dist.sample_vec(&mut rng, n);
                rf_partition_quadrature(n, w, &xs, 1e-10).map(|log_z| log_z / n as f64)
            })
            .collect::<Result<_>>()?;
        let mut sum = KahanSum::new();
        for &p in &pressures {
            sum.add(p);
        }
        let mean = sum.value() / reps as f64;
        let mut sq = KahanSum::new();
        for &p in &pressures {
            sq.add((p - mean) * (p - mean));
        }
        rows.push(SelfAveragingRow {
            n,
            mean,
            std: (sq.value() / (reps as f64 - 1.0)).sqrt(),
        });
    }
    Ok(rows)
}
