//! Population-dynamics solver for the monomer-dimer model on sparse
//! Erdős–Rényi graphs, with a brute-force small-graph oracle.
//!
//! The root monomer probability on a Galton–Watson tree with Poisson(c)
//! offspring satisfies the distributional fixed point
//! `M = x² / (x² + Σ_{i≤Δ} M_i)`, `Δ ~ Poisson(c)`, with the `M_i` i.i.d.
//! copies. Iterating from `M ≡ 1` yields alternating bounds: populations
//! after an even number of steps dominate the fixed point in expectation,
//! odd ones are dominated by it. All randomness flows through per-chunk
//! counter-derived streams, so results are reproducible at any thread
//! count.

use crate::error::{Error, Result};
use crate::graph::{partition_hl, Graph, MdModel};
use crate::logspace::KahanSum;
use crate::rng::{poisson_inv, stream_rng, tags, CHUNK};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

/// Smallest admissible population; below this the plug-in estimators are
/// too noisy to interpret.
pub const MIN_POPULATION: usize = 1_000;
/// Default population size.
pub const DEFAULT_POPULATION: usize = 100_000;
/// Largest graph the brute-force quenched oracle will enumerate.
pub const ORACLE_CAP: usize = 16;

/// Mean degree `c` and monomer activity `x` of the sparse random-graph
/// model (edge probability `c/n`, dimer weight 1).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ErParams {
    pub c: f64,
    pub x: f64,
}

impl ErParams {
    pub fn new(c: f64, x: f64) -> Result<Self> {
        if !(c >= 0.0) || !c.is_finite() {
            return Err(Error::InvalidInput(format!(
                "mean degree must be finite and nonnegative, got {c}"
            )));
        }
        if !(x > 0.0) || !x.is_finite() {
            return Err(Error::InvalidInput(format!(
                "monomer activity must be finite and positive, got {x}"
            )));
        }
        Ok(Self { c, x })
    }
}

/// A pool of samples of the cavity monomer probability, all in `[0, 1]`.
#[derive(Debug, Clone)]
pub struct Population {
    values: Vec<f64>,
    generation: u32,
}

impl Population {
    /// Starting pool `M ≡ 1` (the zero-step upper bound).
    pub fn ones(k: usize) -> Result<Self> {
        if k < MIN_POPULATION {
            return Err(Error::InvalidInput(format!(
                "population size {k} is below the minimum {MIN_POPULATION}"
            )));
        }
        Ok(Self {
            values: vec![1.0; k],
            generation: 0,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Number of completed update sweeps.
    pub fn generation(&self) -> u32 {
        self.generation
    }

    pub fn mean(&self) -> f64 {
        let mut sum = KahanSum::new();
        for &v in &self.values {
            sum.add(v);
        }
        sum.value() / self.values.len() as f64
    }

    /// Standard error of the pool mean (i.i.d. approximation).
    pub fn stderr(&self) -> f64 {
        let m = self.mean();
        let mut sq = KahanSum::new();
        for &v in &self.values {
            sq.add((v - m) * (v - m));
        }
        let k = self.values.len() as f64;
        (sq.value() / (k - 1.0)).sqrt() / k.sqrt()
    }
}

fn step_tag(base: u64, generation: u32) -> u64 {
    base | ((generation as u64) << 16)
}

/// One bulk-synchronous sweep: every new value resamples its inputs from
/// the previous pool. Deterministic in `(seed, generation, chunk)`.
pub fn population_step(pop: &Population, params: ErParams, seed: u64) -> Population {
    let k = pop.values.len();
    let next_gen = pop.generation + 1;
    let x2 = params.x * params.x;
    let mut values = vec![0.0; k];
    values
        .par_chunks_mut(CHUNK)
        .enumerate()
        .for_each(|(chunk, out)| {
            let mut rng = stream_rng(
                seed,
                [step_tag(tags::ER_POPULATION, next_gen), chunk as u64],
            );
            for v in out.iter_mut() {
                let degree = poisson_inv(&mut rng, params.c);
                let mut sum = 0.0;
                for _ in 0..degree {
                    sum += pop.values[rng.gen_range(0..k)];
                }
                *v = x2 / (x2 + sum);
            }
        });
    Population {
        values,
        generation: next_gen,
    }
}

/// Pool mean and standard error after one sweep of the ladder.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct LadderRung {
    pub step: u32,
    pub mean: f64,
    pub stderr: f64,
}

/// Monomer-density estimate with the even/odd bound ladder.
#[derive(Debug, Clone, Serialize)]
pub struct ErDensityReport {
    /// Pool mean after the final sweep.
    pub estimate: f64,
    pub stderr: f64,
    /// One rung per sweep, in order. Even steps bound the density from
    /// above, odd steps from below (within Monte Carlo error).
    pub ladder: Vec<LadderRung>,
}

/// Runs `r` sweeps from `M ≡ 1` and reports the density estimate together
/// with the full even/odd ladder.
pub fn er_monomer_density(
    params: ErParams,
    r: u32,
    k: usize,
    seed: u64,
) -> Result<ErDensityReport> {
    if r < 1 {
        return Err(Error::InvalidInput("need at least one sweep".into()));
    }
    let mut pop = Population::ones(k)?;
    let mut ladder = Vec::with_capacity(r as usize);
    for _ in 0..r {
        pop = population_step(&pop, params, seed);
        ladder.push(LadderRung {
            step: pop.generation(),
            mean: pop.mean(),
            stderr: pop.stderr(),
        });
    }
    let last = ladder[ladder.len() - 1];
    Ok(ErDensityReport {
        estimate: last.mean,
        stderr: last.stderr,
        ladder,
    })
}

/// Plug-in pressure estimate from a converged population.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ErPressureReport {
    pub estimate: f64,
    pub stderr: f64,
    /// Gap between the last two sweep means (even vs odd bound).
    pub even_odd_gap: f64,
    /// Whether the gap is below three combined standard errors.
    pub converged: bool,
}

/// Estimates the limiting pressure `E[log(x/M)] - (c/2) E[log(1 + M₁M₂/x²)]`
/// by plugging in the population after `r` sweeps, with `M₁, M₂` resampled
/// independently from the pool.
///
/// The orientation of the first logarithm is fixed by two exact limits:
/// at `c = 0` the pressure must equal `log x`, and for large `x` the
/// difference `p - log x` must vanish. The small-graph oracle
/// [`er_quenched_oracle`] confirms the same orientation empirically.
pub fn er_pressure(params: ErParams, r: u32, k: usize, seed: u64) -> Result<ErPressureReport> {
    if r < 2 {
        return Err(Error::InvalidInput(
            "need at least two sweeps to compare the even and odd bounds".into(),
        ));
    }
    let mut pop = Population::ones(k)?;
    let mut prev_stats = (1.0, 0.0);
    let mut stats = (1.0, 0.0);
    for _ in 0..r {
        pop = population_step(&pop, params, seed);
        prev_stats = stats;
        stats = (pop.mean(), pop.stderr());
    }
    let even_odd_gap = (stats.0 - prev_stats.0).abs();
    let combined = (stats.1 * stats.1 + prev_stats.1 * prev_stats.1).sqrt();
    let converged = even_odd_gap <= 3.0 * combined;

    let x2 = params.x * params.x;
    let values = pop.values();
    let k_f = values.len() as f64;

    let mut single = KahanSum::new();
    let mut single_sq = KahanSum::new();
    for &m in values {
        let t = (params.x / m).ln();
        single.add(t);
        single_sq.add(t * t);
    }
    let mean1 = single.value() / k_f;
    let var1 = (single_sq.value() / k_f - mean1 * mean1).max(0.0);

    let mut pair = KahanSum::new();
    let mut pair_sq = KahanSum::new();
    let pairs = values.len();
    let chunks = pairs.div_ceil(CHUNK);
    let partials: Vec<(f64, f64)> = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = stream_rng(seed, [tags::ER_PAIRS, chunk as u64]);
            let lo = chunk * CHUNK;
            let hi = ((chunk + 1) * CHUNK).min(pairs);
            let mut s = KahanSum::new();
            let mut sq = KahanSum::new();
            for _ in lo..hi {
                let a = values[rng.gen_range(0..values.len())];
                let b = values[rng.gen_range(0..values.len())];
                let t = (a * b / x2).ln_1p();
                s.add(t);
                sq.add(t * t);
            }
            (s.value(), sq.value())
        })
        .collect();
    for (s, sq) in partials {
        pair.add(s);
        pair_sq.add(sq);
    }
    let mean2 = pair.value() / pairs as f64;
    let var2 = (pair_sq.value() / pairs as f64 - mean2 * mean2).max(0.0);

    let half_c = 0.5 * params.c;
    let estimate = mean1 - half_c * mean2;
    let stderr = ((var1 / k_f) + half_c * half_c * (var2 / pairs as f64)).sqrt();
    Ok(ErPressureReport {
        estimate,
        stderr,
        even_odd_gap,
        converged,
    })
}

/// Quenched average of `(1/n) log Z` over sampled `G(n, c/n)` graphs.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ErOracleReport {
    pub mean: f64,
    /// Standard error of the mean over graph samples.
    pub stderr: f64,
    /// Sample standard deviation of the per-graph pressure.
    pub per_graph_std: f64,
}

/// Brute-force quenched oracle: samples Erdős–Rényi graphs with edge
/// probability `c/n`, computes each pressure exactly by the dimer
/// recursion, and averages. Carries finite-size bias of order `1/n`;
/// report the gap rather than treating this as the limit.
pub fn er_quenched_oracle(
    n: usize,
    params: ErParams,
    samples: usize,
    seed: u64,
) -> Result<ErOracleReport> {
    if n < 1 || n > ORACLE_CAP {
        return Err(Error::SizeCap {
            what: "quenched oracle graph size",
            size: n,
            cap: ORACLE_CAP,
        });
    }
    if samples < 2 {
        return Err(Error::InvalidInput("need at least two samples".into()));
    }
    let p_edge = params.c / n as f64;
    if p_edge > 1.0 {
        return Err(Error::InvalidInput(format!(
            "edge probability c/n = {p_edge} exceeds 1"
        )));
    }
    let pressures: Vec<f64> = (0..samples)
        .into_par_iter()
        .map(|s| {
            let mut rng = stream_rng(seed, [tags::ER_SAMPLE, s as u64]);
            let mut edges = Vec::new();
            for i in 0..n {
                for j in (i + 1)..n {
                    if rng.gen::<f64>() < p_edge {
                        edges.push((i, j));
                    }
                }
            }
            let graph = Graph::new(n, edges).expect("generated edges are valid");
            let model = MdModel::uniform(graph, 1.0, params.x)
                .expect("positive uniform weights are valid");
            partition_hl(&model).expect("size below recursion cap") / n as f64
        })
        .collect();
    let mut sum = KahanSum::new();
    for &p in &pressures {
        sum.add(p);
    }
    let mean = sum.value() / samples as f64;
    let mut sq = KahanSum::new();
    for &p in &pressures {
        sq.add((p - mean) * (p - mean));
    }
    let per_graph_std = (sq.value() / (samples as f64 - 1.0)).sqrt();
    Ok(ErOracleReport {
        mean,
        stderr: per_graph_std / (samples as f64).sqrt(),
        per_graph_std,
    })
}

/// Mean gap per sweep between two populations driven by shared randomness,
/// started from the extreme configurations `M ≡ 1` and `M ≡ 0`.
///
/// The update is antitone, so the pair is advanced crosswise (each chain
/// reads the other's pool) to keep the upper chain above the lower one.
/// The expected gap contracts by at most `c/x²` per sweep once `x² > c`.
pub fn er_coupled_gap(
    params: ErParams,
    steps: u32,
    k: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if steps < 1 {
        return Err(Error::InvalidInput("need at least one sweep".into()));
    }
    if k < MIN_POPULATION {
        return Err(Error::InvalidInput(format!(
            "population size {k} is below the minimum {MIN_POPULATION}"
        )));
    }
    let x2 = params.x * params.x;
    let mut upper = vec![1.0; k];
    let mut lower = vec![0.0; k];
    let mut gaps = Vec::with_capacity(steps as usize);
    for step in 1..=steps {
        let mut new_upper = vec![0.0; k];
        let mut new_lower = vec![0.0; k];
        new_upper
            .par_chunks_mut(CHUNK)
            .zip(new_lower.par_chunks_mut(CHUNK))
            .enumerate()
            .for_each(|(chunk, (up_out, low_out))| {
                let mut rng =
                    stream_rng(seed, [step_tag(tags::ER_COUPLING, step), chunk as u64]);
                for (u, l) in up_out.iter_mut().zip(low_out.iter_mut()) {
                    let degree = poisson_inv(&mut rng, params.c);
                    let mut sum_upper = 0.0;
                    let mut sum_lower = 0.0;
                    for _ in 0..degree {
                        let idx = rng.gen_range(0..k);
                        sum_upper += upper[idx];
                        sum_lower += lower[idx];
                    }
                    // crosswise: the antitone map swaps the order
                    *u = x2 / (x2 + sum_lower);
                    *l = x2 / (x2 + sum_upper);
                }
            });
        upper = new_upper;
        lower = new_lower;
        let mut gap = KahanSum::new();
        for (u, l) in upper.iter().zip(&lower) {
            debug_assert!(u >= l);
            gap.add(u - l);
        }
        gaps.push(gap.value() / k as f64);
    }
    Ok(gaps)
}
