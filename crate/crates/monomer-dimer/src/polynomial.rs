//! Matching polynomial in the uniform monomer activity, its complex
//! zeros, and certification that they are purely imaginary and interlace
//! under vertex deletion.
//!
//! Zeros are found on a transformed polynomial: substituting `x = i y`
//! and stripping the phase leaves a real polynomial in `y`, and factoring
//! out parity leaves a polynomial `R(u)` in `u = y^2` whose roots are the
//! squared imaginary parts. `R` is solved by companion-matrix eigenvalues
//! plus Newton polishing, which is far better conditioned than chasing
//! conjugate pairs in the complex plane directly. A root `u < 0` maps
//! back to a real zero, so corrupted inputs fail certification instead of
//! being masked.

use std::collections::HashMap;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::logspace::KahanSum;

/// Vertex cap for coefficient extraction; conditioning of the root solve
/// degrades beyond this degree.
pub const POLY_CAP: usize = 24;

/// `Z_G(x) = sum_k c_k x^k` with `c_k` the total weight of matchings
/// leaving `k` monomers. Monic of degree `n`; only coefficients with the
/// parity of `n` are nonzero.
#[derive(Clone, Debug, PartialEq)]
pub struct MatchingPolynomial {
    coeffs: Vec<f64>,
}

impl MatchingPolynomial {
    /// Validates shape: nonempty, monic, parity-sparse, nonnegative.
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::InvalidInput("empty coefficient list".into()));
        }
        let n = coeffs.len() - 1;
        if coeffs[n] != 1.0 {
            return Err(Error::InvalidInput("matching polynomial must be monic".into()));
        }
        for (k, &c) in coeffs.iter().enumerate() {
            if (k % 2) != (n % 2) && c != 0.0 {
                return Err(Error::InvalidInput(format!(
                    "coefficient c_{k} breaks the parity pattern"
                )));
            }
            if c < 0.0 {
                return Err(Error::InvalidInput(format!("coefficient c_{k} is negative")));
            }
        }
        Ok(Self { coeffs })
    }

    /// Skips validation; for experiments with deliberately broken inputs.
    pub fn from_coeffs_unchecked(coeffs: Vec<f64>) -> Self {
        Self { coeffs }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for &c in self.coeffs.iter().rev() {
            acc = acc * z + c;
        }
        acc
    }
}

/// Coefficients of the matching polynomial by the deletion recursion in
/// polynomial arithmetic, memoized on vertex subsets.
pub fn polynomial_coeffs(g: &Graph, w: &[f64]) -> Result<MatchingPolynomial> {
    if g.n() > POLY_CAP {
        return Err(Error::SizeCap {
            what: "matching polynomial",
            size: g.n(),
            cap: POLY_CAP,
        });
    }
    if w.len() != g.edges().len() {
        return Err(Error::InvalidInput(format!(
            "{} weights for {} edges",
            w.len(),
            g.edges().len()
        )));
    }
    if let Some(bad) = w.iter().find(|v| !v.is_finite() || **v < 0.0) {
        return Err(Error::InvalidInput(format!("edge weight {bad} invalid")));
    }

    fn poly(g: &Graph, w: &[f64], mask: u32, memo: &mut HashMap<u32, Vec<f64>>) -> Vec<f64> {
        if mask == 0 {
            return vec![1.0];
        }
        if let Some(p) = memo.get(&mask) {
            return p.clone();
        }
        // lowest-index vertex of maximum live degree
        let mut i = usize::MAX;
        let mut best = 0usize;
        for v in 0..g.n() {
            if mask & (1 << v) == 0 {
                continue;
            }
            let deg = g
                .neighbors(v)
                .iter()
                .filter(|&&(u, e)| mask & (1 << u) != 0 && w[e] > 0.0)
                .count();
            if i == usize::MAX || deg > best {
                i = v;
                best = deg;
            }
        }
        let len = mask.count_ones() as usize + 1;
        let mut out = vec![0.0; len];
        let monomer = poly(g, w, mask & !(1 << i), memo);
        for (k, &c) in monomer.iter().enumerate() {
            out[k + 1] += c; // times x
        }
        for &(u, e) in g.neighbors(i) {
            if mask & (1 << u) != 0 && w[e] > 0.0 {
                let dimer = poly(g, w, mask & !(1 << i) & !(1 << u), memo);
                for (k, &c) in dimer.iter().enumerate() {
                    out[k] += w[e] * c;
                }
            }
        }
        memo.insert(mask, out.clone());
        out
    }

    let full = if g.n() == 0 { 0 } else { u32::MAX >> (32 - g.n()) };
    let mut memo = HashMap::new();
    let coeffs = poly(g, w, full, &mut memo);
    MatchingPolynomial::new(coeffs)
}

/// All complex zeros. `tol` gates the scaled residual `|Z(root)|` against
/// `sum_k |c_k| |root|^k`.
pub fn polynomial_roots(p: &MatchingPolynomial, tol: f64) -> Result<Vec<Complex64>> {
    let n = p.degree();
    if n == 0 {
        return Ok(Vec::new());
    }
    let parity = n % 2;
    let d = n / 2;
    // R(u) with R(y^2) y^parity = phase-stripped Z(i y); roots u are the
    // squared imaginary parts of the zeros
    let r: Vec<f64> = (0..=d)
        .map(|j| {
            let sign = if (d - j) % 2 == 0 { 1.0 } else { -1.0 };
            sign * p.coeffs()[2 * j + parity]
        })
        .collect();

    let mut us: Vec<f64> = if d == 0 {
        Vec::new()
    } else {
        let mut companion = DMatrix::zeros(d, d);
        for k in 1..d {
            companion[(k, k - 1)] = 1.0;
        }
        for k in 0..d {
            companion[(k, d - 1)] = -r[k];
        }
        let eig = companion.complex_eigenvalues();
        // the theorem says R is real-rooted; polish on the real axis
        eig.iter()
            .map(|l| {
                let mut u = l.re;
                for _ in 0..4 {
                    let (mut v, mut dv) = (0.0f64, 0.0f64);
                    for &c in r.iter().rev() {
                        dv = dv * u + v;
                        v = v * u + c;
                    }
                    if dv != 0.0 {
                        let step = v / dv;
                        if step.is_finite() {
                            u -= step;
                        }
                    }
                }
                u
            })
            .collect()
    };
    us.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let mut roots = Vec::with_capacity(n);
    if parity == 1 {
        roots.push(Complex64::new(0.0, 0.0));
    }
    for &u in &us {
        // complex square root on purpose: u < 0 must surface as real zeros
        let y = Complex64::new(u, 0.0).sqrt();
        let root = Complex64::new(0.0, 1.0) * y;
        roots.push(root);
        roots.push(-root);
    }
    roots.sort_by(|a, b| {
        (a.im, a.re)
            .partial_cmp(&(b.im, b.re))
            .expect("finite roots")
    });

    let mut worst: f64 = 0.0;
    for root in &roots {
        let mut scale = KahanSum::new();
        let mut pow = 1.0;
        for &c in p.coeffs() {
            scale.add(c.abs() * pow);
            pow *= root.norm();
        }
        worst = worst.max(p.eval(*root).norm() / scale.value().max(f64::MIN_POSITIVE));
    }
    if worst > tol {
        return Err(Error::Convergence(format!(
            "root residual {worst:.3e} exceeds tolerance {tol:.3e} at degree {n}"
        )));
    }
    Ok(roots)
}

/// Certified bound on the real parts of the zeros.
#[derive(Clone, Copy, Debug)]
pub struct ZeroCertificate {
    pub max_re: f64,
    pub max_abs: f64,
    pub pass: bool,
}

/// Checks the zeros of a given polynomial lie on the imaginary axis:
/// pass iff `max |Re| < tol * (1 + max |root|)`.
pub fn certify_imaginary_poly(p: &MatchingPolynomial, tol: f64) -> Result<ZeroCertificate> {
    let roots = polynomial_roots(p, 1e-6)?;
    let max_re = roots.iter().map(|r| r.re.abs()).fold(0.0, f64::max);
    let max_abs = roots.iter().map(|r| r.norm()).fold(0.0, f64::max);
    Ok(ZeroCertificate {
        max_re,
        max_abs,
        pass: max_re < tol * (1.0 + max_abs),
    })
}

/// [`certify_imaginary_poly`] for a weighted graph.
pub fn certify_imaginary(g: &Graph, w: &[f64], tol: f64) -> Result<ZeroCertificate> {
    certify_imaginary_poly(&polynomial_coeffs(g, w)?, tol)
}

/// Interlacing check between a graph's zeros and those after deleting one
/// vertex.
#[derive(Clone, Copy, Debug)]
pub struct InterlacingCertificate {
    /// Smallest slack in the sorted chain; negative means a violation
    /// larger than any rounding wiggle.
    pub min_gap: f64,
    pub pass: bool,
}

/// Sorts the imaginary parts of the zeros of `Z_G` and `Z_{G-i}` and
/// checks they alternate within `tol`.
pub fn certify_interlacing(
    g: &Graph,
    w: &[f64],
    i: usize,
    tol: f64,
) -> Result<InterlacingCertificate> {
    if i >= g.n() {
        return Err(Error::InvalidInput(format!("vertex {i} out of range")));
    }
    let full = imag_parts(&polynomial_roots(&polynomial_coeffs(g, w)?, 1e-6)?);

    let keep: Vec<usize> = (0..g.n()).filter(|&v| v != i).collect();
    let mut new_id = vec![usize::MAX; g.n()];
    for (new, &old) in keep.iter().enumerate() {
        new_id[old] = new;
    }
    let mut edges = Vec::new();
    let mut wsub = Vec::new();
    for (idx, &(a, b)) in g.edges().iter().enumerate() {
        if a != i && b != i {
            edges.push((new_id[a], new_id[b]));
            wsub.push(w[idx]);
        }
    }
    let sub = Graph::new(g.n() - 1, edges)?;
    let deleted = imag_parts(&polynomial_roots(&polynomial_coeffs(&sub, &wsub)?, 1e-6)?);

    let mut min_gap = f64::INFINITY;
    for (l, &b) in deleted.iter().enumerate() {
        min_gap = min_gap.min(b - full[l]);
        min_gap = min_gap.min(full[l + 1] - b);
    }
    if full.len() <= 1 {
        min_gap = 0.0;
    }
    Ok(InterlacingCertificate {
        min_gap,
        pass: min_gap > -tol,
    })
}

fn imag_parts(roots: &[Complex64]) -> Vec<f64> {
    let mut parts: Vec<f64> = roots.iter().map(|r| r.im).collect();
    parts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    parts
}
