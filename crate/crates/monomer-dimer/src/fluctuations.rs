//! Exact finite-size distribution of the monomer count on the complete
//! graph and its limit-law diagnostics.
//!
//! With uniform dimer weight `1/n` and an optional vertex-pair coupling
//! `J/n`, the Gibbs weight of a configuration depends only on the number
//! of monomers `m`, so the full distribution of the monomer count is
//! computable exactly in `O(n)`: the count of placements with `d = (n-m)/2`
//! dimers is `c(n, d) = n! / ((n-2d)! d! 2^d)`, giving
//!
//! `P(M = m) ∝ c(n, d) n^{-d} exp(h m + (J/n)[C(m,2) + C(n-m,2)])`.
//!
//! All weights are carried in log-space with a single max-shift at
//! normalization time. On top of the pmf this module checks the law of
//! large numbers, the two-point mixture on the coexistence curve, the
//! central limit theorem away from criticality, and the quartic law at
//! the critical point under `n^{3/4}` scaling.

use crate::error::{Error, Result};
use crate::logspace::{log_factorials, KahanSum};
use crate::meanfield::{
    self, analyze, psi_second, Classification, CriticalPoint, PsiAnalysis,
};
use serde::Serialize;
use statrs::function::erf::erf;
use statrs::function::gamma::{gamma, gamma_lr};

/// Largest system size for the exact pmf (memory is linear in `n`).
pub const PMF_CAP: usize = 10_000_000;

/// Exact distribution of the monomer count `M` on `n` vertices.
///
/// The support runs over `m ∈ {n mod 2, n mod 2 + 2, ..., n}` (the parity
/// of `M` matches the parity of `n`), stored ascending alongside the
/// unnormalized log-weights.
#[derive(Debug, Clone)]
pub struct FiniteNPmf {
    n: usize,
    h: f64,
    j: f64,
    support: Vec<u32>,
    logw: Vec<f64>,
}

impl FiniteNPmf {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn field(&self) -> f64 {
        self.h
    }

    pub fn coupling(&self) -> f64 {
        self.j
    }

    /// Monomer counts in ascending order.
    pub fn support(&self) -> &[u32] {
        &self.support
    }

    /// Unnormalized log-weights aligned with `support()`.
    pub fn log_weights(&self) -> &[f64] {
        &self.logw
    }

    /// Log of the partition function, `log Σ_m weight(m)`.
    pub fn log_partition(&self) -> f64 {
        let max = self.logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = KahanSum::new();
        for &lw in &self.logw {
            sum.add((lw - max).exp());
        }
        max + sum.value().ln()
    }

    /// Normalized probabilities aligned with `support()`.
    pub fn probabilities(&self) -> Vec<f64> {
        let max = self.logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = KahanSum::new();
        let mut p: Vec<f64> = self
            .logw
            .iter()
            .map(|&lw| {
                let v = (lw - max).exp();
                sum.add(v);
                v
            })
            .collect();
        let z = sum.value();
        for v in &mut p {
            *v /= z;
        }
        debug_assert!({
            let mut t = KahanSum::new();
            for &v in &p {
                t.add(v);
            }
            (t.value() - 1.0).abs() < 1e-12
        });
        p
    }

    /// Expected monomer count `E[M]`.
    pub fn mean_count(&self) -> f64 {
        let p = self.probabilities();
        let mut sum = KahanSum::new();
        for (&m, &pm) in self.support.iter().zip(&p) {
            sum.add(m as f64 * pm);
        }
        sum.value()
    }

    /// Expected monomer density `E[M]/n`.
    pub fn mean_density(&self) -> f64 {
        self.mean_count() / self.n as f64
    }
}

/// Builds the exact monomer-count distribution for `n` vertices, monomer
/// field `h`, and pair coupling `j` (dimer weight `1/n`, coupling `j/n`).
pub fn exact_pmf(n: usize, h: f64, j: f64) -> Result<FiniteNPmf> {
    if n < 1 {
        return Err(Error::InvalidInput("system size must be at least 1".into()));
    }
    if n > PMF_CAP {
        return Err(Error::SizeCap {
            what: "complete-graph pmf system size",
            size: n,
            cap: PMF_CAP,
        });
    }
    let lf = log_factorials(n);
    let nf = n as f64;
    let log_n = nf.ln();
    let parity = n % 2;
    let len = (n - parity) / 2 + 1;
    let mut support = Vec::with_capacity(len);
    let mut logw = Vec::with_capacity(len);
    let pairs = |k: f64| 0.5 * k * (k - 1.0);
    let mut m = parity;
    while m <= n {
        let d = (n - m) / 2;
        let mf = m as f64;
        let df = d as f64;
        // log c(n, d) = log n! - log m! - log d! - d log 2
        let log_count = lf[n] - lf[m] - lf[d] - df * std::f64::consts::LN_2;
        let coupling = if j == 0.0 {
            0.0
        } else {
            (j / nf) * (pairs(mf) + pairs(nf - mf))
        };
        support.push(m as u32);
        logw.push(log_count - df * log_n + h * mf + coupling);
        m += 2;
    }
    Ok(FiniteNPmf {
        n,
        h,
        j,
        support,
        logw,
    })
}

/// Finite-size pressure `(1/n) log Z_n(h, j)`; converges to `sup_m ψ(m)`.
pub fn finite_pressure(n: usize, h: f64, j: f64) -> Result<f64> {
    Ok(exact_pmf(n, h, j)?.log_partition() / n as f64)
}

/// Sharpened pressure asymptotics at `j = 0`: the partition function obeys
/// `Z_n e^{-n p0(h)} → 1/sqrt(2 - g(h))`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct LaplaceCheck {
    /// `Z_n · exp(-n p0(h))`.
    pub value: f64,
    /// `1 / sqrt(2 - g(h))`.
    pub target: f64,
    /// `value / target`; tends to 1.
    pub ratio: f64,
}

pub fn laplace_refinement_check(n: usize, h: f64) -> Result<LaplaceCheck> {
    let log_z = exact_pmf(n, h, 0.0)?.log_partition();
    let value = (log_z - n as f64 * meanfield::p0(h)).exp();
    let target = 1.0 / (2.0 - meanfield::g(h)).sqrt();
    Ok(LaplaceCheck {
        value,
        target,
        ratio: value / target,
    })
}

/// Limiting distribution of the (suitably scaled) monomer count.
#[derive(Debug, Clone, Copy, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LimitLaw {
    /// Unique maximizer: `M/n` concentrates on a point.
    PointMass { m: f64 },
    /// Coexistence: `M/n` splits between two points with given weights.
    TwoPointMixture {
        m1: f64,
        m2: f64,
        rho1: f64,
        rho2: f64,
    },
    /// Gaussian fluctuations at scale `sqrt(n)`.
    Gaussian { sigma2: f64 },
    /// Quartic law `∝ exp(lambda x^4 / 24)` at scale `n^{3/4}`.
    Quartic { lambda: f64 },
}

/// Classifies the law-of-large-numbers limit at `(h, j)`.
pub fn limit_law(h: f64, j: f64, tol: f64) -> Result<LimitLaw> {
    let analysis = analyze(h, j, tol);
    Ok(match analysis.classification {
        Classification::Unique => LimitLaw::PointMass {
            m: analysis.maximizers[0],
        },
        Classification::Coexistence => {
            let (rho1, rho2) = mixture_weights(h, j)?;
            LimitLaw::TwoPointMixture {
                m1: analysis.maximizers[0],
                m2: analysis.maximizers[1],
                rho1,
                rho2,
            }
        }
        Classification::Critical => LimitLaw::Quartic {
            lambda: analysis.lambda4[0],
        },
    })
}

/// Mixture weights of the two-point limit on the coexistence curve:
/// `rho_l ∝ 1/sqrt(-λ_l (2 - m_l))` with `λ_l = ψ''(m_l)`.
pub fn mixture_weights(h: f64, j: f64) -> Result<(f64, f64)> {
    let analysis = analyze(h, j, 1e-9);
    if analysis.classification != Classification::Coexistence {
        return Err(Error::InvalidInput(format!(
            "mixture weights need two coexisting maximizers; found {:?} at (h, J) = ({h}, {j})",
            analysis.classification
        )));
    }
    let b = |m: f64| -> Result<f64> {
        let lambda = psi_second(m, h, j);
        if lambda >= 0.0 {
            return Err(Error::Convergence(format!(
                "curvature at maximizer m = {m} is not negative: {lambda}"
            )));
        }
        Ok(1.0 / (-lambda * (2.0 - m)).sqrt())
    };
    let b1 = b(analysis.maximizers[0])?;
    let b2 = b(analysis.maximizers[1])?;
    Ok((b1 / (b1 + b2), b2 / (b1 + b2)))
}

/// Concentration report for the monomer density at finite `n`.
#[derive(Debug, Clone, Serialize)]
pub struct LlnReport {
    pub classification: Classification,
    /// Limit point(s) of `M/n`, ascending.
    pub limit_points: Vec<f64>,
    pub epsilon: f64,
    /// Probability mass farther than `epsilon` from every limit point.
    pub outside_mass: f64,
    /// On the coexistence curve: pmf mass of the two basins, split at the
    /// interior minimizer of `ψ` between the maximizers.
    pub basin_masses: Option<(f64, f64)>,
    /// On the coexistence curve: the predicted limiting weights.
    pub predicted_weights: Option<(f64, f64)>,
}

fn interior_minimizer(analysis: &PsiAnalysis, h: f64, j: f64) -> Result<f64> {
    let (m1, m2) = (analysis.maximizers[0], analysis.maximizers[1]);
    let roots = meanfield::consistency_solutions(h, j, 1e-13);
    roots
        .into_iter()
        .find(|&r| r > m1 + 1e-9 && r < m2 - 1e-9 && psi_second(r, h, j) > 0.0)
        .ok_or_else(|| {
            Error::Convergence(format!(
                "no interior minimizer of the variational pressure between {m1} and {m2}"
            ))
        })
}

/// Measures how much pmf mass sits outside `epsilon`-neighbourhoods of the
/// predicted limit point(s) of `M/n`, and on the coexistence curve compares
/// the two basin masses with the limiting mixture weights.
pub fn lln_check(n: usize, h: f64, j: f64, epsilon: f64) -> Result<LlnReport> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidInput("epsilon must be positive".into()));
    }
    let analysis = analyze(h, j, 1e-9);
    let pmf = exact_pmf(n, h, j)?;
    let probs = pmf.probabilities();
    let points = analysis.maximizers.clone();
    let mut outside = KahanSum::new();
    for (&m, &pm) in pmf.support().iter().zip(&probs) {
        let density = m as f64 / n as f64;
        if points.iter().all(|&p| (density - p).abs() > epsilon) {
            outside.add(pm);
        }
    }
    let (basin_masses, predicted_weights) =
        if analysis.classification == Classification::Coexistence {
            let split = interior_minimizer(&analysis, h, j)?;
            let mut low = KahanSum::new();
            let mut high = KahanSum::new();
            for (&m, &pm) in pmf.support().iter().zip(&probs) {
                if (m as f64) <= split * n as f64 {
                    low.add(pm);
                } else {
                    high.add(pm);
                }
            }
            (
                Some((low.value(), high.value())),
                Some(mixture_weights(h, j)?),
            )
        } else {
            (None, None)
        };
    Ok(LlnReport {
        classification: analysis.classification,
        limit_points: points,
        epsilon,
        outside_mass: outside.value(),
        basin_masses,
        predicted_weights,
    })
}

/// Sup-distance between a discrete distribution and a continuous CDF,
/// taking the sup over both sides of every atom's jump.
pub fn kolmogorov_distance(
    atoms: &[f64],
    probs: &[f64],
    cdf: impl Fn(f64) -> f64,
) -> f64 {
    debug_assert_eq!(atoms.len(), probs.len());
    debug_assert!(atoms.windows(2).all(|w| w[0] <= w[1]));
    let mut cum = KahanSum::new();
    let mut dist: f64 = 0.0;
    for (&x, &p) in atoms.iter().zip(probs) {
        let before = cum.value();
        cum.add(p);
        let after = cum.value();
        let f = cdf(x);
        dist = dist.max((f - before).abs()).max((f - after).abs());
    }
    dist
}

/// CDF of a centred normal with variance `sigma2`.
pub fn normal_cdf(y: f64, sigma2: f64) -> f64 {
    0.5 * (1.0 + erf(y / (2.0 * sigma2).sqrt()))
}

/// Gaussian-fluctuation report at scale `sqrt(n)`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CltReport {
    /// Limiting monomer density.
    pub m_star: f64,
    /// Limiting variance of `(M - n m*)/sqrt(n)`.
    pub sigma2: f64,
    /// Kolmogorov distance of the exact pmf to `N(0, sigma2)`.
    pub distance: f64,
}

/// Limiting variance of the centred, `sqrt(n)`-scaled monomer count in the
/// uniqueness region: `g'(h)` at `j = 0`, else `-1/ψ''(m*) - 1/(2j)`.
pub fn clt_variance(m_star: f64, h: f64, j: f64) -> Result<f64> {
    let sigma2 = if j == 0.0 {
        meanfield::g_prime(h)
    } else {
        let lambda = psi_second(m_star, h, j);
        if lambda >= 0.0 {
            return Err(Error::Convergence(format!(
                "curvature at maximizer m = {m_star} is not negative: {lambda}"
            )));
        }
        -1.0 / lambda - 1.0 / (2.0 * j)
    };
    if !(sigma2 > 0.0) {
        return Err(Error::Convergence(format!(
            "limiting variance is not positive: {sigma2}"
        )));
    }
    Ok(sigma2)
}

/// Kolmogorov distance of `(M - n m*)/sqrt(n)` to its limiting Gaussian.
/// Requires a unique maximizer away from the critical point.
pub fn clt_check(n: usize, h: f64, j: f64) -> Result<CltReport> {
    let analysis = analyze(h, j, 1e-9);
    if analysis.classification != Classification::Unique {
        return Err(Error::InvalidInput(format!(
            "Gaussian fluctuations need a unique non-critical maximizer; found {:?}",
            analysis.classification
        )));
    }
    let m_star = analysis.maximizers[0];
    let sigma2 = clt_variance(m_star, h, j)?;
    let pmf = exact_pmf(n, h, j)?;
    let probs = pmf.probabilities();
    let scale = (n as f64).sqrt();
    let atoms: Vec<f64> = pmf
        .support()
        .iter()
        .map(|&m| (m as f64 - n as f64 * m_star) / scale)
        .collect();
    let distance = kolmogorov_distance(&atoms, &probs, |y| normal_cdf(y, sigma2));
    Ok(CltReport {
        m_star,
        sigma2,
        distance,
    })
}

/// CDF of the quartic law with density `C exp(lambda x^4 / 24)`,
/// `lambda < 0`. Writing `a = -lambda/24`, substitution reduces the
/// integral to a regularized incomplete gamma function:
/// `F(x) = (1 + sign(x) P(1/4, a x^4)) / 2`.
pub fn quartic_cdf(x: f64, lambda: f64) -> f64 {
    debug_assert!(lambda < 0.0);
    let a = -lambda / 24.0;
    if x == 0.0 {
        return 0.5;
    }
    let p = gamma_lr(0.25, a * x.powi(4));
    0.5 * (1.0 + x.signum() * p)
}

/// Normalizing constant `C` of the quartic density:
/// `1/C = 2 Γ(5/4) (24/|lambda|)^{1/4}`.
pub fn quartic_norm_constant(lambda: f64) -> f64 {
    let a = -lambda / 24.0;
    a.powf(0.25) / (2.0 * gamma(1.25))
}

/// Critical-scaling report: the distance of the `n^{3/4}`-scaled monomer
/// count to the quartic law, plus a negative control at the wrong scale
/// `sqrt(n)` against the best-fitting (moment-matched) Gaussian.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CriticalScalingReport {
    pub n: usize,
    pub quartic_distance: f64,
    pub gaussian_control_distance: f64,
}

/// Evaluates both critical-scaling distances at the supplied critical
/// point. The critical constants are taken as input rather than re-derived
/// so every consumer works from the same certified values.
pub fn critical_scaling_check(n: usize, crit: &CriticalPoint) -> Result<CriticalScalingReport> {
    let pmf = exact_pmf(n, crit.h_c, crit.j_c)?;
    let probs = pmf.probabilities();
    let nf = n as f64;
    let center = nf * crit.m_c;

    let scale_q = nf.powf(0.75);
    let atoms_q: Vec<f64> = pmf
        .support()
        .iter()
        .map(|&m| (m as f64 - center) / scale_q)
        .collect();
    let lambda = crit.lambda_c;
    let quartic_distance = kolmogorov_distance(&atoms_q, &probs, |x| quartic_cdf(x, lambda));

    let scale_g = nf.sqrt();
    let atoms_g: Vec<f64> = pmf
        .support()
        .iter()
        .map(|&m| (m as f64 - center) / scale_g)
        .collect();
    let mut mean = KahanSum::new();
    for (&y, &p) in atoms_g.iter().zip(&probs) {
        mean.add(y * p);
    }
    let mu = mean.value();
    let mut var = KahanSum::new();
    for (&y, &p) in atoms_g.iter().zip(&probs) {
        var.add((y - mu) * (y - mu) * p);
    }
    let s2 = var.value();
    let gaussian_control_distance =
        kolmogorov_distance(&atoms_g, &probs, |y| normal_cdf(y - mu, s2));

    Ok(CriticalScalingReport {
        n,
        quartic_distance,
        gaussian_control_distance,
    })
}

/// Finite-size analogue of the variational pressure:
/// `p̃_n(x) = -J x² + J/2 + p⁰_n(2Jx + h - J)` where `p⁰_n` is the
/// finite-size pressure of the pure model. Converges pointwise to `ψ`.
pub fn p_tilde_n(n: usize, h: f64, j: f64, x: f64) -> Result<f64> {
    Ok(-j * x * x + 0.5 * j + finite_pressure(n, 2.0 * j * x + h - j, 0.0)?)
}

/// Density samples of the Gaussian-convolution diagnostic
/// `∝ exp(n · p̃_n(x/n^η + u))` on an ascending grid of scaled
/// coordinates, normalized by the trapezoid rule over that grid.
pub fn convolution_scaling_density(
    n: usize,
    h: f64,
    j: f64,
    eta: f64,
    u: f64,
    xs: &[f64],
) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::InvalidInput(
            "scaling exponent must lie in [0, 1]".into(),
        ));
    }
    if xs.len() < 2 || xs.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput(
            "grid must be ascending with at least two points".into(),
        ));
    }
    let nf = n as f64;
    let shrink = nf.powf(eta);
    let mut logv = Vec::with_capacity(xs.len());
    for &x in xs {
        logv.push(nf * p_tilde_n(n, h, j, x / shrink + u)?);
    }
    let max = logv.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut v: Vec<f64> = logv.into_iter().map(|l| (l - max).exp()).collect();
    let mut mass = KahanSum::new();
    for i in 1..xs.len() {
        mass.add(0.5 * (v[i - 1] + v[i]) * (xs[i] - xs[i - 1]));
    }
    let z = mass.value();
    if !(z > 0.0) {
        return Err(Error::Convergence(
            "convolution density has no mass on the supplied grid".into(),
        ));
    }
    for d in &mut v {
        *d /= z;
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{
        imitative_partition_hl, partition_hl, Graph, ImitativeModel, MdModel,
    };
    use crate::meanfield::{coexistence_h, critical_point, g, g_prime, p0};
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    #[test]
    fn two_vertex_weights() {
        let pmf = exact_pmf(2, 0.0, 0.0).unwrap();
        assert_eq!(pmf.support(), &[0, 2]);
        let p = pmf.probabilities();
        assert_relative_eq!(p[0], 1.0 / 3.0, max_relative = 1e-14);
        assert_relative_eq!(p[1], 2.0 / 3.0, max_relative = 1e-14);
    }

    #[test]
    fn four_vertex_weights() {
        let pmf = exact_pmf(4, 0.0, 0.0).unwrap();
        assert_eq!(pmf.support(), &[0, 2, 4]);
        let w: Vec<f64> = pmf.log_weights().iter().map(|l| l.exp()).collect();
        // placements: 3 double dimers / 16, 6 single dimers / 4, all monomers
        assert_relative_eq!(w[0], 3.0 / 16.0, max_relative = 1e-12);
        assert_relative_eq!(w[1], 6.0 / 4.0, max_relative = 1e-12);
        assert_relative_eq!(w[2], 1.0, max_relative = 1e-12);
    }

    #[test]
    fn matches_complete_graph_enumeration() {
        let h: f64 = 0.3;
        for n in [2usize, 3, 5, 8, 12] {
            let g = Graph::complete(n);
            let model = MdModel::uniform(g, 1.0 / n as f64, h.exp()).unwrap();
            let direct = partition_hl(&model).unwrap();
            let pmf = exact_pmf(n, h, 0.0).unwrap();
            assert_relative_eq!(pmf.log_partition(), direct, max_relative = 1e-10);
        }
    }

    #[test]
    fn matches_complete_graph_with_coupling() {
        let (h, j): (f64, f64) = (-0.2, 0.7);
        for n in [2usize, 4, 5, 7] {
            let g = Graph::complete(n);
            let model = MdModel::uniform(g, 1.0 / n as f64, h.exp()).unwrap();
            let couplings = vec![j / n as f64; model.graph().edges().len()];
            let imitative = ImitativeModel::new(model, couplings).unwrap();
            let direct = imitative_partition_hl(&imitative).unwrap();
            let pmf = exact_pmf(n, h, j).unwrap();
            assert_relative_eq!(pmf.log_partition(), direct, max_relative = 1e-10);
        }
    }

    #[test]
    fn pressure_converges_to_the_variational_value() {
        let p = finite_pressure(2000, 0.0, 0.0).unwrap();
        assert_abs_diff_eq!(p, 0.2902288, epsilon = 5e-3);
        let err_n = (p - p0(0.0)).abs();
        let err_2n = (finite_pressure(4000, 0.0, 0.0).unwrap() - p0(0.0)).abs();
        assert!(err_2n < err_n);
        let p2 = finite_pressure(2000, 2.0, 0.0).unwrap();
        assert_abs_diff_eq!(p2, p0(2.0), epsilon = 5e-3);
    }

    #[test]
    fn laplace_ratio_tends_to_one() {
        for h in [0.0, 1.0] {
            let check = laplace_refinement_check(5000, h).unwrap();
            assert!(
                (check.ratio - 1.0).abs() < 0.01,
                "h = {h}: ratio {}",
                check.ratio
            );
        }
        let check = laplace_refinement_check(5000, 0.0).unwrap();
        assert_abs_diff_eq!(check.target, 0.8506508, epsilon = 1e-6);
    }

    #[test]
    fn mean_density_matches_pressure_derivative() {
        let (n, h, j) = (2000, 0.2, 0.5);
        let pmf = exact_pmf(n, h, j).unwrap();
        let s = 1e-6;
        let fd = (finite_pressure(n, h + s, j).unwrap()
            - finite_pressure(n, h - s, j).unwrap())
            / (2.0 * s);
        assert_abs_diff_eq!(pmf.mean_density(), fd, epsilon = 1e-6);
    }

    #[test]
    fn lln_concentrates_in_the_uniqueness_region() {
        let report = lln_check(10_000, 0.0, 0.0, 0.05).unwrap();
        assert_eq!(report.classification, Classification::Unique);
        assert_relative_eq!(report.limit_points[0], g(0.0), max_relative = 1e-9);
        assert!(report.outside_mass < 1e-3, "mass {}", report.outside_mass);
        let tighter = lln_check(40_000, 0.0, 0.0, 0.05).unwrap();
        assert!(tighter.outside_mass <= report.outside_mass);
    }

    #[test]
    fn coexistence_basins_match_mixture_weights() {
        let crit = critical_point(1e-12).unwrap();
        let j = 2.0 * crit.j_c;
        let h = coexistence_h(j, 1e-13).unwrap();
        let report = lln_check(100_000, h, j, 0.02).unwrap();
        assert_eq!(report.classification, Classification::Coexistence);
        let (b1, b2) = report.basin_masses.unwrap();
        let (r1, r2) = report.predicted_weights.unwrap();
        assert!((b1 - r1).abs() < 0.01, "basin {b1} vs weight {r1}");
        assert!((b2 - r2).abs() < 0.01, "basin {b2} vs weight {r2}");
        assert!((r1 - r2).abs() > 0.01);
        assert_relative_eq!(r1 + r2, 1.0, max_relative = 1e-14);
        assert!(report.outside_mass < 1e-3);
    }

    #[test]
    fn mixture_ratio_flattens_at_strong_coupling() {
        let h = coexistence_h(20.0, 1e-13).unwrap();
        let (r1, r2) = mixture_weights(h, 20.0).unwrap();
        assert!(
            (r1 / r2 - std::f64::consts::FRAC_1_SQRT_2).abs() <= 0.02,
            "ratio {}",
            r1 / r2
        );
    }

    #[test]
    fn mixture_weights_reject_the_uniqueness_region() {
        assert!(mixture_weights(0.0, 0.0).is_err());
    }

    #[test]
    fn gaussian_fluctuations_away_from_criticality() {
        let report = clt_check(100_000, 0.0, 0.0).unwrap();
        assert_abs_diff_eq!(report.sigma2, 0.34164, epsilon = 1e-5);
        assert_relative_eq!(report.sigma2, g_prime(0.0), max_relative = 1e-12);
        assert!(report.distance < 0.01, "distance {}", report.distance);

        let coupled = clt_check(100_000, 0.0, 0.1).unwrap();
        assert!(coupled.distance < 0.01, "distance {}", coupled.distance);

        let coarse = clt_check(10_000, 0.0, 0.0).unwrap();
        let fine = clt_check(40_000, 0.0, 0.0).unwrap();
        assert!(fine.distance < coarse.distance);
    }

    #[test]
    fn quartic_normalization_closed_form() {
        let crit = critical_point(1e-12).unwrap();
        let c = quartic_norm_constant(crit.lambda_c);
        assert_abs_diff_eq!(1.0 / c, 1.8124121, epsilon = 1e-6);

        // cross-check the incomplete-gamma CDF against direct quadrature
        let density = |t: f64| c * (crit.lambda_c * t.powi(4) / 24.0).exp();
        let simpson = |f: &dyn Fn(f64) -> f64, a: f64, b: f64, k: usize| {
            let hstep = (b - a) / k as f64;
            let mut s = KahanSum::new();
            for i in 0..k {
                let l = a + i as f64 * hstep;
                s.add(hstep / 6.0 * (f(l) + 4.0 * f(l + 0.5 * hstep) + f(l + hstep)));
            }
            s.value()
        };
        let total = simpson(&density, -3.2, 3.2, 4096);
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-10);
        for x in [-1.3, -0.4, 0.0, 0.7, 2.1] {
            let by_quad = simpson(&density, -3.2, x, 4096);
            assert_abs_diff_eq!(quartic_cdf(x, crit.lambda_c), by_quad, epsilon = 1e-10);
        }
    }

    #[test]
    fn quartic_law_wins_at_the_critical_point() {
        let crit = critical_point(1e-12).unwrap();
        let mut previous = f64::INFINITY;
        for n in [10_000usize, 100_000, 1_000_000] {
            let report = critical_scaling_check(n, &crit).unwrap();
            assert!(
                report.quartic_distance < previous,
                "n = {n}: {} not below {previous}",
                report.quartic_distance
            );
            previous = report.quartic_distance;
            // the best-fit Gaussian at scale sqrt(n) stays far off
            assert!(report.gaussian_control_distance > 0.03);
            assert!(report.gaussian_control_distance > 3.0 * report.quartic_distance);
        }
        assert!(previous <= 0.05);
    }

    #[test]
    fn limit_law_classification() {
        let crit = critical_point(1e-12).unwrap();
        match limit_law(0.0, 0.0, 1e-9).unwrap() {
            LimitLaw::PointMass { m } => assert_relative_eq!(m, g(0.0), max_relative = 1e-9),
            other => panic!("expected point mass, got {other:?}"),
        }
        let j = 1.7 * crit.j_c;
        let h = coexistence_h(j, 1e-13).unwrap();
        match limit_law(h, j, 1e-9).unwrap() {
            LimitLaw::TwoPointMixture { rho1, rho2, m1, m2 } => {
                assert!(m1 < m2);
                assert_relative_eq!(rho1 + rho2, 1.0, max_relative = 1e-14);
            }
            other => panic!("expected mixture, got {other:?}"),
        }
        match limit_law(crit.h_c, crit.j_c, 1e-9).unwrap() {
            LimitLaw::Quartic { lambda } => {
                assert_abs_diff_eq!(lambda, crit.lambda_c, epsilon = 1e-4)
            }
            other => panic!("expected quartic, got {other:?}"),
        }
    }

    #[test]
    fn finite_variational_profile_converges() {
        let (h, j) = (0.15, 0.6);
        for m in [0.2, 0.4, 0.6, 0.8] {
            let approx_val = p_tilde_n(2000, h, j, m).unwrap();
            let limit = meanfield::psi(m, h, j);
            assert_abs_diff_eq!(approx_val, limit, epsilon = 5e-3);
        }
    }

    #[test]
    fn convolution_density_normalizes_and_flattens_at_zero_coupling() {
        let xs: Vec<f64> = (0..81).map(|i| -2.0 + 0.05 * i as f64).collect();
        let dens = convolution_scaling_density(400, 0.1, 0.5, 0.25, 0.5, &xs).unwrap();
        let mut mass = 0.0;
        for i in 1..xs.len() {
            mass += 0.5 * (dens[i - 1] + dens[i]) * (xs[i] - xs[i - 1]);
        }
        assert_relative_eq!(mass, 1.0, max_relative = 1e-12);

        let flat = convolution_scaling_density(400, 0.1, 0.0, 0.25, 0.5, &xs).unwrap();
        let (lo, hi) = flat
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| {
                (l.min(v), h.max(v))
            });
        assert_relative_eq!(lo, hi, max_relative = 1e-12);
    }

    #[test]
    fn size_cap_is_enforced() {
        assert!(matches!(
            exact_pmf(PMF_CAP + 1, 0.0, 0.0),
            Err(Error::SizeCap { .. })
        ));
        assert!(exact_pmf(0, 0.0, 0.0).is_err());
    }
}
