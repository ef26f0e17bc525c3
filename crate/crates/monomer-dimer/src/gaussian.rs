//! Gaussian moment representation of the partition function.
//!
//! With a covariance matrix W that carries the dimer activities off the
//! diagonal, the partition function equals `E[prod_i (xi_i + x_i)]` for
//! `xi ~ N(0, W)`. Expanding the product turns that into sums of hafnians
//! (pair-partition sums) over vertex subsets, which this module evaluates
//! exactly on small instances and by Monte Carlo on larger ones. The
//! diagonal of W is free; the default makes W diagonally dominant, hence
//! positive semi-definite.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::MdModel;
use crate::logspace::KahanSum;
use crate::rng::{stream_rng, tags, CHUNK};

/// Subset-size cap for exact pair-partition sums.
pub const HAFNIAN_CAP: usize = 20;
/// Vertex cap for the exact subset-summed representation.
pub const GAUSSIAN_ENUM_CAP: usize = 20;
/// Vertex cap for the imitative subset sum (every subset is weighted).
pub const IMITATIVE_GAUSSIAN_CAP: usize = 12;

/// Symmetric covariance matrix with the dimer activities off-diagonal.
#[derive(Clone, Debug, PartialEq)]
pub struct CovMatrix {
    mat: DMatrix<f64>,
}

impl CovMatrix {
    /// Default diagonal: `W_ii = sum_j w_ij`, which makes the matrix
    /// diagonally dominant and therefore positive semi-definite.
    pub fn psd_diagonal(m: &MdModel) -> Self {
        let n = m.graph().n();
        let mut mat = DMatrix::zeros(n, n);
        for (idx, &(a, b)) in m.graph().edges().iter().enumerate() {
            mat[(a, b)] = m.w()[idx];
            mat[(b, a)] = m.w()[idx];
            mat[(a, a)] += m.w()[idx];
            mat[(b, b)] += m.w()[idx];
        }
        Self { mat }
    }

    /// Same off-diagonal entries with a caller-chosen diagonal.
    pub fn with_diagonal(m: &MdModel, diag: &[f64]) -> Result<Self> {
        let n = m.graph().n();
        if diag.len() != n {
            return Err(Error::InvalidInput(format!(
                "{} diagonal entries for {n} vertices",
                diag.len()
            )));
        }
        let mut cov = Self::psd_diagonal(m);
        for (i, &d) in diag.iter().enumerate() {
            cov.mat[(i, i)] = d;
        }
        Ok(cov)
    }

    pub fn n(&self) -> usize {
        self.mat.nrows()
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.mat[(i, j)]
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.mat
    }

    /// Symmetric square root; fails unless the smallest eigenvalue is
    /// above -1e-10 (small negatives are clipped to zero).
    pub fn sqrt_factor(&self) -> Result<DMatrix<f64>> {
        let eig = self.mat.clone().symmetric_eigen();
        let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        if min < -1e-10 {
            return Err(Error::NotPositiveSemiDefinite {
                min_eigenvalue: min,
            });
        }
        let sqrt = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| l.max(0.0).sqrt()));
        Ok(&eig.eigenvectors * sqrt * eig.eigenvectors.transpose())
    }
}

/// Dense hafnian table over all submasks of `0..n`: `haf[mask]` is the sum
/// over pair-partitions of the mask's vertices of the product of `W`
/// entries. Odd masks are zero, the empty mask is one.
fn hafnian_table(w: &DMatrix<f64>, n: usize) -> Vec<f64> {
    let size = 1usize << n;
    let mut haf = vec![0.0; size];
    haf[0] = 1.0;
    for mask in 1..size {
        if mask.count_ones() % 2 == 1 {
            continue;
        }
        // pair the lowest vertex with each partner in turn
        let i = mask.trailing_zeros() as usize;
        let rest = mask & !(1 << i);
        let mut sum = KahanSum::new();
        let mut jbits = rest;
        while jbits != 0 {
            let j = jbits.trailing_zeros() as usize;
            jbits &= jbits - 1;
            let wij = w[(i, j)];
            if wij != 0.0 {
                sum.add(wij * haf[rest & !(1 << j)]);
            }
        }
        haf[mask] = sum.value();
    }
    haf
}

/// Pair-partition sum (hafnian) of `W` restricted to the vertices in `a`.
/// Zero for odd `|a|`, one for the empty set.
pub fn wick_pairing_sum(w: &CovMatrix, a: &[usize]) -> Result<f64> {
    if a.len() > HAFNIAN_CAP {
        return Err(Error::SizeCap {
            what: "pair-partition sum",
            size: a.len(),
            cap: HAFNIAN_CAP,
        });
    }
    let mut seen = std::collections::HashSet::new();
    for &v in a {
        if v >= w.n() {
            return Err(Error::InvalidInput(format!("vertex {v} out of range")));
        }
        if !seen.insert(v) {
            return Err(Error::InvalidInput(format!("repeated vertex {v}")));
        }
    }
    if a.len() % 2 == 1 {
        return Ok(0.0);
    }
    let k = a.len();
    let mut sub = DMatrix::zeros(k, k);
    for (p, &vp) in a.iter().enumerate() {
        for (q, &vq) in a.iter().enumerate() {
            sub[(p, q)] = w.entry(vp, vq);
        }
    }
    let table = hafnian_table(&sub, k);
    Ok(table[(1usize << k) - 1])
}

/// log Z via the exact subset expansion
/// `Z = sum_A haf(W_A) prod_{i not in A} x_i`. The diagonal of `cov` never
/// enters (pairings use distinct vertices only).
pub fn gaussian_partition_exact_with(m: &MdModel, cov: &CovMatrix) -> Result<f64> {
    let n = m.graph().n();
    if cov.n() != n {
        return Err(Error::InvalidInput(format!(
            "covariance is {}x{} for {n} vertices",
            cov.n(),
            cov.n()
        )));
    }
    if n > GAUSSIAN_ENUM_CAP {
        return Err(Error::SizeCap {
            what: "subset expansion",
            size: n,
            cap: GAUSSIAN_ENUM_CAP,
        });
    }
    let haf = hafnian_table(cov.matrix(), n);
    let xprod = xprod_table(m.x());
    let full = (1usize << n) - 1;
    let mut z = KahanSum::new();
    for (mask, &h) in haf.iter().enumerate() {
        if h != 0.0 {
            z.add(h * xprod[full & !mask]);
        }
    }
    Ok(z.value().ln())
}

/// [`gaussian_partition_exact_with`] using the default PSD diagonal.
pub fn gaussian_partition_exact(m: &MdModel) -> Result<f64> {
    gaussian_partition_exact_with(m, &CovMatrix::psd_diagonal(m))
}

fn xprod_table(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut t = vec![1.0; 1usize << n];
    for mask in 1..t.len() {
        let i = mask.trailing_zeros() as usize;
        t[mask] = x[i] * t[mask & !(1 << i)];
    }
    t
}

fn sample_value(l: &DMatrix<f64>, x: &[f64], z: &[f64]) -> f64 {
    let n = x.len();
    let mut v = 1.0;
    for i in 0..n {
        let mut xi = 0.0;
        for j in 0..n {
            xi += l[(i, j)] * z[j];
        }
        v *= xi + x[i];
    }
    v
}

/// Monte Carlo estimate of Z (linear scale) with its standard error, by
/// averaging `prod_i (xi_i + x_i)` over draws `xi ~ N(0, W)`. Chunked
/// sampling keyed by `(seed, chunk)` makes the result independent of the
/// worker count.
pub fn gaussian_partition_mc(m: &MdModel, samples: usize, seed: u64) -> Result<(f64, f64)> {
    if samples < 2 {
        return Err(Error::InvalidInput("need at least 2 samples".into()));
    }
    let l = CovMatrix::psd_diagonal(m).sqrt_factor()?;
    let x = m.x().to_vec();
    let n = x.len();
    let nchunks = samples.div_ceil(CHUNK);
    let partials: Vec<[f64; 2]> = (0..nchunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream_rng(seed, [tags::GAUSS_MC, c as u64]);
            let count = CHUNK.min(samples - c * CHUNK);
            let mut sum = KahanSum::new();
            let mut sumsq = KahanSum::new();
            let mut z = vec![0.0; n];
            for _ in 0..count {
                for zj in z.iter_mut() {
                    *zj = rng.sample(StandardNormal);
                }
                let v = sample_value(&l, &x, &z);
                sum.add(v);
                sumsq.add(v * v);
            }
            [sum.value(), sumsq.value()]
        })
        .collect();
    let mut s1 = KahanSum::new();
    let mut s2 = KahanSum::new();
    for p in &partials {
        s1.add(p[0]);
        s2.add(p[1]);
    }
    let nf = samples as f64;
    let mean = s1.value() / nf;
    let var = ((s2.value() - nf * mean * mean) / (nf - 1.0)).max(0.0);
    Ok((mean, (var / nf).sqrt()))
}

/// Ratio estimator for the monomer probability of vertex `i`, using one
/// common Gaussian sample pool for numerator and denominator; the standard
/// error comes from the delta method on the joint sample.
pub fn monomer_prob_gaussian(
    m: &MdModel,
    i: usize,
    samples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if samples < 2 {
        return Err(Error::InvalidInput("need at least 2 samples".into()));
    }
    let n = m.graph().n();
    if i >= n {
        return Err(Error::InvalidInput(format!("vertex {i} out of range")));
    }
    let l = CovMatrix::psd_diagonal(m).sqrt_factor()?;
    let x = m.x().to_vec();
    let nchunks = samples.div_ceil(CHUNK);
    // running sums: f, g, f^2, g^2, fg
    let partials: Vec<[f64; 5]> = (0..nchunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream_rng(seed, [tags::GAUSS_MONOMER, c as u64]);
            let count = CHUNK.min(samples - c * CHUNK);
            let mut acc = [KahanSum::new(); 5];
            let mut z = vec![0.0; n];
            for _ in 0..count {
                for zj in z.iter_mut() {
                    *zj = rng.sample(StandardNormal);
                }
                let mut without_i = 1.0;
                let mut factor_i = 0.0;
                for r in 0..n {
                    let mut xi = 0.0;
                    for s in 0..n {
                        xi += l[(r, s)] * z[s];
                    }
                    let f = xi + x[r];
                    if r == i {
                        factor_i = f;
                    } else {
                        without_i *= f;
                    }
                }
                let f = x[i] * without_i;
                let g = factor_i * without_i;
                acc[0].add(f);
                acc[1].add(g);
                acc[2].add(f * f);
                acc[3].add(g * g);
                acc[4].add(f * g);
            }
            [
                acc[0].value(),
                acc[1].value(),
                acc[2].value(),
                acc[3].value(),
                acc[4].value(),
            ]
        })
        .collect();
    let mut tot = [0.0; 5];
    for k in 0..5 {
        let mut s = KahanSum::new();
        for p in &partials {
            s.add(p[k]);
        }
        tot[k] = s.value();
    }
    let nf = samples as f64;
    let (fbar, gbar) = (tot[0] / nf, tot[1] / nf);
    let sff = (tot[2] - nf * fbar * fbar) / (nf - 1.0);
    let sgg = (tot[3] - nf * gbar * gbar) / (nf - 1.0);
    let sfg = (tot[4] - nf * fbar * gbar) / (nf - 1.0);
    let r = fbar / gbar;
    let var = ((sff - 2.0 * r * sfg + r * r * sgg) / (nf * gbar * gbar)).max(0.0);
    Ok((r, var.sqrt()))
}

/// log Z of the imitative model via the subset expansion: each subset A
/// carries `haf(W_A) prod_{i in A^c} x_i` times `exp(J_e)` for every edge
/// with both endpoints in A or both in A^c.
pub fn imitative_gaussian_enum(im: &crate::graph::ImitativeModel) -> Result<f64> {
    let m = im.base();
    let n = m.graph().n();
    if n > IMITATIVE_GAUSSIAN_CAP {
        return Err(Error::SizeCap {
            what: "imitative subset expansion",
            size: n,
            cap: IMITATIVE_GAUSSIAN_CAP,
        });
    }
    let cov = CovMatrix::psd_diagonal(m);
    let haf = hafnian_table(cov.matrix(), n);
    let xprod = xprod_table(m.x());
    let full = if n == 0 { 0 } else { (1usize << n) - 1 };
    let mut z = KahanSum::new();
    for mask in 0..(1usize << n) {
        if haf[mask] == 0.0 {
            continue;
        }
        let comp = full & !mask;
        let mut jsum = 0.0;
        for (idx, &(a, b)) in m.graph().edges().iter().enumerate() {
            let (ba, bb) = (1usize << a, 1usize << b);
            let same_in = mask & ba != 0 && mask & bb != 0;
            let same_out = comp & ba != 0 && comp & bb != 0;
            if same_in || same_out {
                jsum += im.j()[idx];
            }
        }
        z.add(haf[mask] * xprod[comp] * jsum.exp());
    }
    Ok(z.value().ln())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{
        imitative_partition_enum, partition_enum, Graph, ImitativeModel, MdModel,
    };
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn uniform(g: Graph, w: f64, x: f64) -> MdModel {
        MdModel::uniform(g, w, x).unwrap()
    }

    #[test]
    fn default_diagonal_rule() {
        let k2 = CovMatrix::psd_diagonal(&uniform(Graph::complete(2), 1.0, 1.0));
        for i in 0..2 {
            for j in 0..2 {
                assert_eq!(k2.entry(i, j), 1.0);
            }
        }
        let empty = CovMatrix::psd_diagonal(&uniform(Graph::new(3, []).unwrap(), 0.0, 1.0));
        assert!(empty.matrix().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn default_diagonal_is_psd() {
        let k3 = CovMatrix::psd_diagonal(&uniform(Graph::complete(3), 1.0, 1.0));
        let eig = k3.matrix().clone().symmetric_eigen();
        assert!(eig.eigenvalues.iter().all(|&l| l >= -1e-12));
        assert!(k3.sqrt_factor().is_ok());
    }

    #[test]
    fn pairing_sum_basics() {
        let k4 = CovMatrix::psd_diagonal(&uniform(Graph::complete(4), 1.0, 1.0));
        assert_eq!(wick_pairing_sum(&k4, &[]).unwrap(), 1.0);
        assert_eq!(wick_pairing_sum(&k4, &[0, 2, 3]).unwrap(), 0.0);
        assert_relative_eq!(wick_pairing_sum(&k4, &[0, 1, 2, 3]).unwrap(), 3.0);
        let pair = CovMatrix::psd_diagonal(&uniform(Graph::complete(2), 0.7, 1.0));
        assert_relative_eq!(wick_pairing_sum(&pair, &[0, 1]).unwrap(), 0.7);
    }

    #[test]
    fn pairing_sum_double_factorial() {
        let k6 = CovMatrix::psd_diagonal(&uniform(Graph::complete(6), 1.0, 1.0));
        // (2k-1)!! pairings of 6 elements with unit weights
        assert_relative_eq!(wick_pairing_sum(&k6, &[0, 1, 2, 3, 4, 5]).unwrap(), 15.0);
    }

    #[test]
    fn pairing_sum_input_checks() {
        let k2 = CovMatrix::psd_diagonal(&uniform(Graph::complete(2), 1.0, 1.0));
        assert!(wick_pairing_sum(&k2, &[0, 0]).is_err());
        assert!(wick_pairing_sum(&k2, &[5]).is_err());
    }

    #[test]
    fn exact_expansion_matches_enumeration() {
        let k2 = uniform(Graph::complete(2), 1.0, 1.0);
        assert_relative_eq!(
            gaussian_partition_exact(&k2).unwrap(),
            2.0f64.ln(),
            max_relative = 1e-13
        );
        let k3 = uniform(Graph::complete(3), 1.0, 1.0);
        assert_relative_eq!(
            gaussian_partition_exact(&k3).unwrap(),
            4.0f64.ln(),
            max_relative = 1e-13
        );
        let m = MdModel::new(
            Graph::complete(4),
            vec![0.4, 1.2, 0.8, 2.0, 0.6, 1.5],
            vec![0.9, 1.4, 0.5, 2.2],
        )
        .unwrap();
        assert_relative_eq!(
            gaussian_partition_exact(&m).unwrap(),
            partition_enum(&m).unwrap(),
            max_relative = 1e-11
        );
    }

    #[test]
    fn diagonal_never_affects_exact_expansion() {
        let m = MdModel::new(
            Graph::complete(4),
            vec![0.4, 1.2, 0.8, 2.0, 0.6, 1.5],
            vec![0.9, 1.4, 0.5, 2.2],
        )
        .unwrap();
        let default = CovMatrix::psd_diagonal(&m);
        let doubled: Vec<f64> = (0..4).map(|i| 2.0 * default.entry(i, i)).collect();
        let cov2 = CovMatrix::with_diagonal(&m, &doubled).unwrap();
        assert_relative_eq!(
            gaussian_partition_exact_with(&m, &default).unwrap(),
            gaussian_partition_exact_with(&m, &cov2).unwrap(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn mc_estimates_k2() {
        let k2 = uniform(Graph::complete(2), 1.0, 1.0);
        let (est, se) = gaussian_partition_mc(&k2, 200_000, 7).unwrap();
        assert!(se > 0.0 && se < 0.05);
        assert!((est - 2.0).abs() < 4.0 * se, "est {est} se {se}");
    }

    #[test]
    fn mc_zero_covariance_is_deterministic() {
        let m = uniform(Graph::new(3, []).unwrap(), 0.0, 2.0);
        let (est, se) = gaussian_partition_mc(&m, 1000, 1).unwrap();
        assert_abs_diff_eq!(est, 8.0);
        assert_abs_diff_eq!(se, 0.0);
    }

    #[test]
    fn mc_is_reproducible() {
        let k4 = uniform(Graph::complete(4), 1.0, 1.0);
        let a = gaussian_partition_mc(&k4, 10_000, 42).unwrap();
        let b = gaussian_partition_mc(&k4, 10_000, 42).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn monomer_ratio_estimator() {
        let k2 = uniform(Graph::complete(2), 1.0, 1.0);
        let (est, se) = monomer_prob_gaussian(&k2, 0, 100_000, 11).unwrap();
        assert!((est - 0.5).abs() < 5.0 * se, "est {est} se {se}");
        let k3 = uniform(Graph::complete(3), 1.0, 1.0);
        let (est3, se3) = monomer_prob_gaussian(&k3, 1, 100_000, 12).unwrap();
        assert!((est3 - 0.5).abs() < 5.0 * se3, "est {est3} se {se3}");
    }

    #[test]
    fn monomer_ratio_no_dimers() {
        let m = uniform(Graph::new(2, []).unwrap(), 0.0, 1.5);
        let (est, _) = monomer_prob_gaussian(&m, 0, 1000, 3).unwrap();
        assert_abs_diff_eq!(est, 1.0);
    }

    #[test]
    fn indefinite_diagonal_is_rejected() {
        let m = uniform(Graph::complete(2), 1.0, 1.0);
        let cov = CovMatrix::with_diagonal(&m, &[0.0, 0.0]).unwrap();
        assert!(matches!(
            cov.sqrt_factor(),
            Err(Error::NotPositiveSemiDefinite { .. })
        ));
    }

    #[test]
    fn imitative_expansion_matches_oracle() {
        let k2 = uniform(Graph::complete(2), 1.0, 1.0);
        let im = ImitativeModel::new(k2, vec![2.0 * 2.0f64.ln()]).unwrap();
        assert_relative_eq!(
            imitative_gaussian_enum(&im).unwrap(),
            8.0f64.ln(),
            max_relative = 1e-12
        );
        assert_relative_eq!(
            imitative_gaussian_enum(&im).unwrap(),
            imitative_partition_enum(&im).unwrap(),
            max_relative = 1e-12
        );

        let k3 = MdModel::new(
            Graph::complete(3),
            vec![0.5, 1.1, 0.9],
            vec![1.3, 0.6, 1.0],
        )
        .unwrap();
        let im3 = ImitativeModel::new(k3, vec![0.7, -0.4, 1.1]).unwrap();
        assert_relative_eq!(
            imitative_gaussian_enum(&im3).unwrap(),
            imitative_partition_enum(&im3).unwrap(),
            max_relative = 1e-10
        );
    }

    #[test]
    fn imitative_expansion_zero_coupling() {
        let m = MdModel::new(
            Graph::complete(4),
            vec![0.4, 1.2, 0.8, 2.0, 0.6, 1.5],
            vec![0.9, 1.4, 0.5, 2.2],
        )
        .unwrap();
        let im = ImitativeModel::new(m.clone(), vec![0.0; 6]).unwrap();
        assert_relative_eq!(
            imitative_gaussian_enum(&im).unwrap(),
            gaussian_partition_exact(&m).unwrap(),
            max_relative = 1e-12
        );
    }
}
