//! Finite graphs, matchings, and exact monomer-dimer partition functions.
//!
//! Two independent evaluation routes are provided: direct enumeration over
//! all matchings, and a vertex-deletion recursion memoized on vertex-subset
//! bitmasks. They agree to near machine precision on their common domain,
//! and the test suite leans on that cross-check. Both the pure model and
//! the imitative variant (same-kind edges rewarded by a coupling) are
//! supported, along with monomer probabilities, elementary pressure bounds,
//! and tree-ball correlation bounds.

use std::collections::{HashMap, HashSet};

use crate::error::{Error, Result};
use crate::logspace::{log_sum_exp, KahanSum, OnlineLogSum};

/// Vertex cap for routines that walk every matching.
pub const ENUM_CAP: usize = 20;
/// Default vertex cap for the subset-memoized recursion.
pub const HL_CAP_DEFAULT: usize = 24;
/// Hard vertex cap for the subset-memoized recursion; masks are 32-bit.
pub const HL_CAP_HARD: usize = 30;

/// Simple undirected graph on vertices `0..n`, no self-loops, no
/// duplicate edges. Edges are stored canonically as `(min, max)` in
/// insertion order; parallel weight vectors elsewhere index into that order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    edges: Vec<(usize, usize)>,
    adj: Vec<Vec<(usize, usize)>>,
}

impl Graph {
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut canon = Vec::new();
        let mut seen = HashSet::new();
        for (a, b) in edges {
            if a == b {
                return Err(Error::InvalidInput(format!("self-loop at vertex {a}")));
            }
            if a >= n || b >= n {
                return Err(Error::InvalidInput(format!(
                    "edge ({a}, {b}) out of range for {n} vertices"
                )));
            }
            let e = (a.min(b), a.max(b));
            if !seen.insert(e) {
                return Err(Error::InvalidInput(format!(
                    "duplicate edge ({}, {})",
                    e.0, e.1
                )));
            }
            canon.push(e);
        }
        let mut adj = vec![Vec::new(); n];
        for (idx, &(a, b)) in canon.iter().enumerate() {
            adj[a].push((b, idx));
            adj[b].push((a, idx));
        }
        Ok(Self {
            n,
            edges: canon,
            adj,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Neighbors of `i` as `(vertex, edge index)` pairs.
    pub fn neighbors(&self, i: usize) -> &[(usize, usize)] {
        &self.adj[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adj[i].len()
    }

    pub fn complete(n: usize) -> Self {
        let edges = (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b)));
        Self::new(n, edges).expect("complete graph is always valid")
    }

    pub fn path(n: usize) -> Self {
        Self::new(n, (1..n).map(|b| (b - 1, b))).expect("path graph is always valid")
    }

    pub fn cycle(n: usize) -> Self {
        assert!(n >= 3, "cycle needs at least 3 vertices");
        Self::new(n, (0..n).map(|a| (a, (a + 1) % n))).expect("cycle graph is always valid")
    }

    /// Star with `leaves` rays; vertex 0 is the center.
    pub fn star(leaves: usize) -> Self {
        Self::new(leaves + 1, (1..=leaves).map(|b| (0, b))).expect("star graph is always valid")
    }
}

/// Monomer-dimer model: a graph with dimer activities `w` (one per edge,
/// parallel to `graph.edges()`) and monomer activities `x` (one per vertex).
/// Edges with `w = 0` behave exactly as if absent.
#[derive(Clone, Debug, PartialEq)]
pub struct MdModel {
    graph: Graph,
    w: Vec<f64>,
    x: Vec<f64>,
}

impl MdModel {
    pub fn new(graph: Graph, w: Vec<f64>, x: Vec<f64>) -> Result<Self> {
        if w.len() != graph.edges().len() {
            return Err(Error::InvalidInput(format!(
                "{} dimer activities for {} edges",
                w.len(),
                graph.edges().len()
            )));
        }
        if x.len() != graph.n() {
            return Err(Error::InvalidInput(format!(
                "{} monomer activities for {} vertices",
                x.len(),
                graph.n()
            )));
        }
        if let Some(bad) = w.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::InvalidInput(format!("dimer activity {bad} invalid")));
        }
        if let Some(bad) = x.iter().find(|v| !v.is_finite() || **v <= 0.0) {
            return Err(Error::InvalidInput(format!(
                "monomer activity {bad} must be positive"
            )));
        }
        Ok(Self { graph, w, x })
    }

    pub fn uniform(graph: Graph, w: f64, x: f64) -> Result<Self> {
        let ne = graph.edges().len();
        let n = graph.n();
        Self::new(graph, vec![w; ne], vec![x; n])
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn w(&self) -> &[f64] {
        &self.w
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    /// Restriction to `keep` (in its given order), vertices renumbered.
    fn induced(&self, keep: &[usize]) -> MdModel {
        let mut new_id = vec![usize::MAX; self.graph.n()];
        for (new, &old) in keep.iter().enumerate() {
            new_id[old] = new;
        }
        let mut edges = Vec::new();
        let mut w = Vec::new();
        for (idx, &(a, b)) in self.graph.edges().iter().enumerate() {
            if new_id[a] != usize::MAX && new_id[b] != usize::MAX {
                edges.push((new_id[a], new_id[b]));
                w.push(self.w[idx]);
            }
        }
        let graph = Graph::new(keep.len(), edges).expect("induced subgraph is valid");
        let x = keep.iter().map(|&v| self.x[v]).collect();
        MdModel::new(graph, w, x).expect("induced model is valid")
    }
}

/// Imitative model: a monomer-dimer model plus one coupling per edge.
/// Configurations gain a factor `exp(J_e)` for every edge whose endpoints
/// are of the same kind (both monomers, or both covered by dimers).
#[derive(Clone, Debug, PartialEq)]
pub struct ImitativeModel {
    base: MdModel,
    j: Vec<f64>,
}

impl ImitativeModel {
    pub fn new(base: MdModel, j: Vec<f64>) -> Result<Self> {
        if j.len() != base.graph().edges().len() {
            return Err(Error::InvalidInput(format!(
                "{} couplings for {} edges",
                j.len(),
                base.graph().edges().len()
            )));
        }
        if let Some(bad) = j.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("coupling {bad} invalid")));
        }
        Ok(Self { base, j })
    }

    pub fn base(&self) -> &MdModel {
        &self.base
    }

    pub fn j(&self) -> &[f64] {
        &self.j
    }
}

/// A set of pairwise non-incident edges.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Matching {
    dimers: Vec<(usize, usize)>,
}

impl Matching {
    pub fn dimers(&self) -> &[(usize, usize)] {
        &self.dimers
    }

    pub fn dimer_count(&self) -> usize {
        self.dimers.len()
    }

    /// Per-vertex indicator of being covered by a dimer.
    pub fn covered(&self, n: usize) -> Vec<bool> {
        let mut c = vec![false; n];
        for &(a, b) in &self.dimers {
            c[a] = true;
            c[b] = true;
        }
        c
    }

    /// No vertex touched twice.
    pub fn respects_hard_core(&self) -> bool {
        let mut seen = HashSet::new();
        self.dimers
            .iter()
            .all(|&(a, b)| seen.insert(a) && seen.insert(b))
    }
}

fn check_cap(what: &'static str, size: usize, cap: usize) -> Result<()> {
    if size > cap {
        Err(Error::SizeCap { what, size, cap })
    } else {
        Ok(())
    }
}

/// Visits every matching of `g` exactly once. `chosen` holds edge indices in
/// ascending order; `covered` flags the matched vertices.
fn for_each_matching(g: &Graph, f: &mut impl FnMut(&[usize], &[bool])) {
    fn rec(
        g: &Graph,
        next_edge: usize,
        chosen: &mut Vec<usize>,
        covered: &mut [bool],
        f: &mut impl FnMut(&[usize], &[bool]),
    ) {
        if next_edge == g.edges().len() {
            f(chosen, covered);
            return;
        }
        rec(g, next_edge + 1, chosen, covered, f);
        let (a, b) = g.edges()[next_edge];
        if !covered[a] && !covered[b] {
            covered[a] = true;
            covered[b] = true;
            chosen.push(next_edge);
            rec(g, next_edge + 1, chosen, covered, f);
            chosen.pop();
            covered[a] = false;
            covered[b] = false;
        }
    }
    let mut chosen = Vec::new();
    let mut covered = vec![false; g.n()];
    rec(g, 0, &mut chosen, &mut covered, f);
}

/// All matchings of `g`, the empty one included.
pub fn enumerate_matchings(g: &Graph) -> Result<Vec<Matching>> {
    check_cap("matching enumeration", g.n(), ENUM_CAP)?;
    let mut out = Vec::new();
    for_each_matching(g, &mut |chosen, _| {
        out.push(Matching {
            dimers: chosen.iter().map(|&e| g.edges()[e]).collect(),
        });
    });
    Ok(out)
}

/// log Z by direct summation over all matchings.
pub fn partition_enum(m: &MdModel) -> Result<f64> {
    check_cap("matching enumeration", m.graph().n(), ENUM_CAP)?;
    let log_w: Vec<f64> = m.w().iter().map(|v| v.ln()).collect();
    let log_x: Vec<f64> = m.x().iter().map(|v| v.ln()).collect();
    let mut acc = OnlineLogSum::new();
    for_each_matching(m.graph(), &mut |chosen, covered| {
        // a zero-weight dimer zeroes the whole term
        if chosen.iter().any(|&e| log_w[e] == f64::NEG_INFINITY) {
            return;
        }
        let mut l = KahanSum::new();
        for &e in chosen {
            l.add(log_w[e]);
        }
        for (i, &c) in covered.iter().enumerate() {
            if !c {
                l.add(log_x[i]);
            }
        }
        acc.add(l.value());
    });
    Ok(acc.value())
}

/// Mean number of dimers under the Gibbs measure, by enumeration.
pub fn mean_dimer_count_enum(m: &MdModel) -> Result<f64> {
    check_cap("matching enumeration", m.graph().n(), ENUM_CAP)?;
    let log_w: Vec<f64> = m.w().iter().map(|v| v.ln()).collect();
    let log_x: Vec<f64> = m.x().iter().map(|v| v.ln()).collect();
    let mut z = OnlineLogSum::new();
    let mut num = OnlineLogSum::new();
    for_each_matching(m.graph(), &mut |chosen, covered| {
        if chosen.iter().any(|&e| log_w[e] == f64::NEG_INFINITY) {
            return;
        }
        let mut l = KahanSum::new();
        for &e in chosen {
            l.add(log_w[e]);
        }
        for (i, &c) in covered.iter().enumerate() {
            if !c {
                l.add(log_x[i]);
            }
        }
        z.add(l.value());
        if !chosen.is_empty() {
            num.add(l.value() + (chosen.len() as f64).ln());
        }
    });
    Ok((num.value() - z.value()).exp())
}

/// Lowest-index vertex of maximum live degree in `mask` (edges with zero
/// weight do not count). Deterministic pivot for the deletion recursion.
fn pivot_vertex(m: &MdModel, mask: u32) -> usize {
    let mut best = usize::MAX;
    let mut best_deg = usize::MAX;
    for v in 0..m.graph().n() {
        if mask & (1 << v) == 0 {
            continue;
        }
        let deg = m
            .graph()
            .neighbors(v)
            .iter()
            .filter(|&&(u, e)| mask & (1 << u) != 0 && m.w()[e] > 0.0)
            .count();
        if best == usize::MAX || deg > best_deg {
            best = v;
            best_deg = deg;
        }
    }
    best
}

fn hl_log_z(m: &MdModel, mask: u32, memo: &mut HashMap<u32, f64>) -> f64 {
    if mask == 0 {
        return 0.0;
    }
    if let Some(&v) = memo.get(&mask) {
        return v;
    }
    let i = pivot_vertex(m, mask);
    let mut terms = Vec::with_capacity(1 + m.graph().degree(i));
    terms.push(m.x()[i].ln() + hl_log_z(m, mask & !(1 << i), memo));
    for &(u, e) in m.graph().neighbors(i) {
        if mask & (1 << u) != 0 && m.w()[e] > 0.0 {
            let sub = mask & !(1 << i) & !(1 << u);
            terms.push(m.w()[e].ln() + hl_log_z(m, sub, memo));
        }
    }
    let v = log_sum_exp(&terms);
    memo.insert(mask, v);
    v
}

fn full_mask(n: usize) -> u32 {
    if n == 0 {
        0
    } else {
        (u32::MAX) >> (32 - n)
    }
}

/// log Z by the vertex-deletion recursion
/// `Z_G = x_i Z_{G-i} + sum_{j~i} w_ij Z_{G-i-j}`, memoized on vertex
/// subsets. Agrees with [`partition_enum`] to ~1e-12 relative.
pub fn partition_hl(m: &MdModel) -> Result<f64> {
    partition_hl_with_cap(m, HL_CAP_DEFAULT)
}

/// Same as [`partition_hl`] with an explicit vertex cap (at most
/// [`HL_CAP_HARD`]).
pub fn partition_hl_with_cap(m: &MdModel, cap: usize) -> Result<f64> {
    if cap > HL_CAP_HARD {
        return Err(Error::InvalidInput(format!(
            "recursion cap {cap} exceeds hard limit {HL_CAP_HARD}"
        )));
    }
    check_cap("vertex-deletion recursion", m.graph().n(), cap)?;
    let mut memo = HashMap::new();
    Ok(hl_log_z(m, full_mask(m.graph().n()), &mut memo))
}

/// Probability that vertex `i` is a monomer: `x_i Z_{G-i} / Z_G`.
pub fn monomer_probability(m: &MdModel, i: usize) -> Result<f64> {
    check_cap("vertex-deletion recursion", m.graph().n(), HL_CAP_DEFAULT)?;
    if i >= m.graph().n() {
        return Err(Error::InvalidInput(format!("vertex {i} out of range")));
    }
    let mut memo = HashMap::new();
    let full = full_mask(m.graph().n());
    let log_z = hl_log_z(m, full, &mut memo);
    let log_z_minus = hl_log_z(m, full & !(1 << i), &mut memo);
    Ok((m.x()[i].ln() + log_z_minus - log_z).exp().min(1.0))
}

/// Monomer probabilities of every vertex, sharing one memo table.
pub fn monomer_probabilities(m: &MdModel) -> Result<Vec<f64>> {
    check_cap("vertex-deletion recursion", m.graph().n(), HL_CAP_DEFAULT)?;
    let mut memo = HashMap::new();
    let full = full_mask(m.graph().n());
    let log_z = hl_log_z(m, full, &mut memo);
    Ok((0..m.graph().n())
        .map(|i| {
            let log_z_minus = hl_log_z(m, full & !(1 << i), &mut memo);
            (m.x()[i].ln() + log_z_minus - log_z).exp().min(1.0)
        })
        .collect())
}

/// Elementary bracket for log Z: `sum_i log x_i` from below, plus
/// `sum_e log(1 + w_e/(x_a x_b))` from above.
pub fn pressure_bounds(m: &MdModel) -> (f64, f64) {
    let mut lower = KahanSum::new();
    for &xi in m.x() {
        lower.add(xi.ln());
    }
    let mut excess = KahanSum::new();
    for (idx, &(a, b)) in m.graph().edges().iter().enumerate() {
        excess.add((m.w()[idx] / (m.x()[a] * m.x()[b])).ln_1p());
    }
    (lower.value(), lower.value() + excess.value())
}

/// log Z of the imitative model by enumeration: each matching carries the
/// pure weight times `exp(J_e)` over edges whose endpoints are of the same
/// kind.
pub fn imitative_partition_enum(im: &ImitativeModel) -> Result<f64> {
    let m = im.base();
    check_cap("matching enumeration", m.graph().n(), ENUM_CAP)?;
    let log_w: Vec<f64> = m.w().iter().map(|v| v.ln()).collect();
    let log_x: Vec<f64> = m.x().iter().map(|v| v.ln()).collect();
    let mut acc = OnlineLogSum::new();
    for_each_matching(m.graph(), &mut |chosen, covered| {
        if chosen.iter().any(|&e| log_w[e] == f64::NEG_INFINITY) {
            return;
        }
        let mut l = KahanSum::new();
        for &e in chosen {
            l.add(log_w[e]);
        }
        for (i, &c) in covered.iter().enumerate() {
            if !c {
                l.add(log_x[i]);
            }
        }
        for (idx, &(a, b)) in m.graph().edges().iter().enumerate() {
            if covered[a] == covered[b] {
                l.add(im.j()[idx]);
            }
        }
        acc.add(l.value());
    });
    Ok(acc.value())
}

/// log Z of the imitative model by the deletion recursion with modified
/// activities: removing a monomer at `i` multiplies every remaining `x_k`
/// by `exp(J_ik)`; removing a dimer on `ij` contributes `w_ij exp(J_ij)`
/// and multiplies every remaining edge weight `w_kk'` by
/// `exp(J_ik + J_ik' + J_jk + J_jk')`. Couplings of absent pairs are zero.
pub fn imitative_partition_hl(im: &ImitativeModel) -> Result<f64> {
    let m = im.base();
    let g = m.graph();
    check_cap("imitative recursion", g.n(), ENUM_CAP)?;
    let mut jp = HashMap::new();
    for (idx, &e) in g.edges().iter().enumerate() {
        jp.insert(e, im.j()[idx]);
    }
    let coupling = |a: usize, b: usize| -> f64 {
        *jp.get(&(a.min(b), a.max(b))).unwrap_or(&0.0)
    };

    // log-space activities, cloned along each branch of the recursion
    fn rec(
        g: &Graph,
        mask: u32,
        lx: &[f64],
        lw: &[f64],
        coupling: &dyn Fn(usize, usize) -> f64,
    ) -> f64 {
        if mask == 0 {
            return 0.0;
        }
        // lowest-index vertex of maximum live degree
        let mut i = usize::MAX;
        let mut best_deg = 0usize;
        for v in 0..g.n() {
            if mask & (1 << v) == 0 {
                continue;
            }
            let deg = g
                .neighbors(v)
                .iter()
                .filter(|&&(u, e)| mask & (1 << u) != 0 && lw[e] != f64::NEG_INFINITY)
                .count();
            if i == usize::MAX || deg > best_deg {
                i = v;
                best_deg = deg;
            }
        }
        let mut terms = Vec::with_capacity(1 + g.degree(i));

        let mut lx_mon = lx.to_vec();
        for &(k, _) in g.neighbors(i) {
            if mask & (1 << k) != 0 {
                lx_mon[k] += coupling(i, k);
            }
        }
        terms.push(lx[i] + rec(g, mask & !(1 << i), &lx_mon, lw, coupling));

        for &(j, e) in g.neighbors(i) {
            if mask & (1 << j) == 0 || lw[e] == f64::NEG_INFINITY {
                continue;
            }
            let sub = mask & !(1 << i) & !(1 << j);
            let mut lw_dim = lw.to_vec();
            for (idx, &(k, kp)) in g.edges().iter().enumerate() {
                if sub & (1 << k) != 0 && sub & (1 << kp) != 0 {
                    lw_dim[idx] +=
                        coupling(i, k) + coupling(i, kp) + coupling(j, k) + coupling(j, kp);
                }
            }
            terms.push(lw[e] + coupling(i, j) + rec(g, sub, lx, &lw_dim, coupling));
        }
        log_sum_exp(&terms)
    }

    let lx: Vec<f64> = m.x().iter().map(|v| v.ln()).collect();
    let lw: Vec<f64> = m.w().iter().map(|v| v.ln()).collect();
    Ok(rec(g, full_mask(g.n()), &lx, &lw, &coupling))
}

/// Monomer probability of `root` bracketed by the same probability on balls
/// around it, plus the exact value on the whole graph.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MonomerBounds {
    pub lower: f64,
    pub upper: f64,
    pub exact: f64,
}

/// Correlation bounds: on a graph whose ball of radius `2r+1` around `root`
/// is a tree, the root's monomer probability computed on the radius-`2r+1`
/// ball bounds the true value from below, and on the radius-`2r` ball from
/// above.
pub fn ball_monomer_bounds(m: &MdModel, root: usize, r: usize) -> Result<MonomerBounds> {
    let g = m.graph();
    if root >= g.n() {
        return Err(Error::InvalidInput(format!("vertex {root} out of range")));
    }
    let dist = bfs_distances(g, root);
    let radius = 2 * r + 1;
    let outer: Vec<usize> = (0..g.n()).filter(|&v| dist[v] <= radius).collect();
    let inner: Vec<usize> = (0..g.n()).filter(|&v| dist[v] <= radius - 1).collect();

    // the ball is connected by construction; it is a tree iff |E| = |V| - 1
    let in_outer: Vec<bool> = {
        let mut f = vec![false; g.n()];
        for &v in &outer {
            f[v] = true;
        }
        f
    };
    let outer_edges = g
        .edges()
        .iter()
        .filter(|&&(a, b)| in_outer[a] && in_outer[b])
        .count();
    if outer_edges != outer.len() - 1 {
        return Err(Error::NonTreeBall { root, radius });
    }

    let root_in = |keep: &[usize]| keep.iter().position(|&v| v == root).expect("root kept");
    let lower = monomer_probability(&m.induced(&outer), root_in(&outer))?;
    let upper = monomer_probability(&m.induced(&inner), root_in(&inner))?;
    let exact = monomer_probability(m, root)?;
    debug_assert!(lower <= exact + 1e-9 && exact <= upper + 1e-9);
    Ok(MonomerBounds {
        lower,
        upper,
        exact,
    })
}

fn bfs_distances(g: &Graph, root: usize) -> Vec<usize> {
    let mut dist = vec![usize::MAX; g.n()];
    dist[root] = 0;
    let mut queue = std::collections::VecDeque::from([root]);
    while let Some(v) = queue.pop_front() {
        for &(u, _) in g.neighbors(v) {
            if dist[u] == usize::MAX {
                dist[u] = dist[v] + 1;
                queue.push_back(u);
            }
        }
    }
    dist
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn uniform(g: Graph, w: f64, x: f64) -> MdModel {
        MdModel::uniform(g, w, x).unwrap()
    }

    #[test]
    fn matching_counts_on_small_cliques() {
        assert_eq!(enumerate_matchings(&Graph::complete(2)).unwrap().len(), 2);
        assert_eq!(enumerate_matchings(&Graph::complete(3)).unwrap().len(), 4);
        assert_eq!(enumerate_matchings(&Graph::complete(4)).unwrap().len(), 10);
    }

    #[test]
    fn matchings_respect_hard_core() {
        for matching in enumerate_matchings(&Graph::complete(5)).unwrap() {
            assert!(matching.respects_hard_core());
        }
    }

    #[test]
    fn enum_partition_small_cases() {
        let k2 = uniform(Graph::complete(2), 1.0, 1.0);
        assert_relative_eq!(partition_enum(&k2).unwrap(), 2.0f64.ln(), max_relative = 1e-14);
        let k4 = uniform(Graph::complete(4), 1.0, 1.0);
        assert_relative_eq!(partition_enum(&k4).unwrap(), 10.0f64.ln(), max_relative = 1e-14);
    }

    #[test]
    fn enum_partition_path_with_distinct_activities() {
        // Z(P3) = x0 x1 x2 + w01 x2 + w12 x0
        let g = Graph::path(3);
        let m = MdModel::new(g, vec![7.0, 11.0], vec![2.0, 3.0, 5.0]).unwrap();
        let expect: f64 = 2.0 * 3.0 * 5.0 + 7.0 * 5.0 + 11.0 * 2.0;
        assert_relative_eq!(partition_enum(&m).unwrap(), expect.ln(), max_relative = 1e-14);
    }

    #[test]
    fn hl_partition_small_cases() {
        let k2 = uniform(Graph::complete(2), 1.0, 1.0);
        assert_relative_eq!(partition_hl(&k2).unwrap(), 2.0f64.ln(), max_relative = 1e-14);
        let k4 = uniform(Graph::complete(4), 1.0, 1.0);
        assert_relative_eq!(partition_hl(&k4).unwrap(), 10.0f64.ln(), max_relative = 1e-14);
        let empty = uniform(Graph::new(3, []).unwrap(), 0.0, 2.0);
        assert_relative_eq!(partition_hl(&empty).unwrap(), 8.0f64.ln(), max_relative = 1e-14);
    }

    #[test]
    fn hl_matches_enum_on_weighted_graph() {
        let g = Graph::new(6, [(0, 1), (1, 2), (2, 3), (3, 0), (0, 2), (4, 5), (1, 4)]).unwrap();
        let w = vec![0.3, 1.7, 2.0, 0.9, 0.0, 1.1, 0.5];
        let x = vec![0.4, 1.0, 2.5, 0.7, 1.3, 0.2];
        let m = MdModel::new(g, w, x).unwrap();
        assert_relative_eq!(
            partition_hl(&m).unwrap(),
            partition_enum(&m).unwrap(),
            max_relative = 1e-13
        );
    }

    #[test]
    fn empty_graph_partition_is_one() {
        let m = uniform(Graph::new(0, []).unwrap(), 0.0, 1.0);
        assert_eq!(partition_hl(&m).unwrap(), 0.0);
        assert_eq!(partition_enum(&m).unwrap(), 0.0);
    }

    #[test]
    fn monomer_probability_small_cases() {
        let k2 = uniform(Graph::complete(2), 1.0, 1.0);
        assert_relative_eq!(monomer_probability(&k2, 0).unwrap(), 0.5, max_relative = 1e-13);
        let k2_no_dimer = uniform(Graph::complete(2), 0.0, 1.0);
        assert_abs_diff_eq!(monomer_probability(&k2_no_dimer, 0).unwrap(), 1.0);
        let k3 = uniform(Graph::complete(3), 1.0, 1.0);
        for v in 0..3 {
            assert_relative_eq!(monomer_probability(&k3, v).unwrap(), 0.5, max_relative = 1e-13);
        }
    }

    #[test]
    fn monomer_count_identity_on_a_clique() {
        let m = uniform(Graph::complete(5), 0.8, 1.3);
        let probs = monomer_probabilities(&m).unwrap();
        let total: f64 = probs.iter().sum();
        let dimers = mean_dimer_count_enum(&m).unwrap();
        assert_relative_eq!(total + 2.0 * dimers, 5.0, max_relative = 1e-12);
    }

    #[test]
    fn pressure_bounds_bracket() {
        let k2 = uniform(Graph::complete(2), 1.0, 1.0);
        let (lo, hi) = pressure_bounds(&k2);
        assert_abs_diff_eq!(lo, 0.0);
        assert_relative_eq!(hi, 2.0f64.ln(), max_relative = 1e-14);
        // K2 with unit activities saturates the upper bound
        assert_relative_eq!(partition_enum(&k2).unwrap(), hi, max_relative = 1e-14);

        let k4 = uniform(Graph::complete(4), 1.0, 1.0);
        let (lo4, hi4) = pressure_bounds(&k4);
        let log_z = partition_enum(&k4).unwrap();
        assert_abs_diff_eq!(lo4, 0.0);
        assert_relative_eq!(hi4, 6.0 * 2.0f64.ln(), max_relative = 1e-14);
        assert!(lo4 <= log_z && log_z <= hi4);

        let empty = uniform(Graph::new(4, []).unwrap(), 0.0, 1.7);
        let (lo_e, hi_e) = pressure_bounds(&empty);
        assert_eq!(lo_e, hi_e);
    }

    #[test]
    fn imitative_reduces_to_pure_at_zero_coupling() {
        let g = Graph::new(5, [(0, 1), (1, 2), (2, 3), (3, 4), (0, 4), (1, 3)]).unwrap();
        let m = MdModel::new(
            g,
            vec![0.5, 1.5, 0.7, 2.0, 1.0, 0.3],
            vec![1.2, 0.5, 2.0, 0.9, 1.0],
        )
        .unwrap();
        let im = ImitativeModel::new(m.clone(), vec![0.0; 6]).unwrap();
        assert_relative_eq!(
            imitative_partition_enum(&im).unwrap(),
            partition_enum(&m).unwrap(),
            max_relative = 1e-13
        );
        assert_relative_eq!(
            imitative_partition_hl(&im).unwrap(),
            partition_hl(&m).unwrap(),
            max_relative = 1e-13
        );
    }

    #[test]
    fn imitative_single_edge_doubles_both_kinds() {
        // both configurations of K2 are same-kind, so J = log 2 doubles Z
        let m = uniform(Graph::complete(2), 1.0, 1.0);
        let im = ImitativeModel::new(m, vec![2.0f64.ln()]).unwrap();
        assert_relative_eq!(
            imitative_partition_enum(&im).unwrap(),
            4.0f64.ln(),
            max_relative = 1e-13
        );
        assert_relative_eq!(
            imitative_partition_hl(&im).unwrap(),
            4.0f64.ln(),
            max_relative = 1e-13
        );
    }

    #[test]
    fn imitative_single_vertex() {
        let h: f64 = 0.37;
        let m = uniform(Graph::new(1, []).unwrap(), 0.0, h.exp());
        let im = ImitativeModel::new(m, vec![]).unwrap();
        assert_relative_eq!(imitative_partition_enum(&im).unwrap(), h, max_relative = 1e-14);
        assert_relative_eq!(imitative_partition_hl(&im).unwrap(), h, max_relative = 1e-14);
    }

    #[test]
    fn imitative_recursion_matches_enumeration() {
        let k3 = uniform(Graph::complete(3), 1.0, 1.0);
        let im3 = ImitativeModel::new(k3, vec![0.5; 3]).unwrap();
        assert_relative_eq!(
            imitative_partition_hl(&im3).unwrap(),
            imitative_partition_enum(&im3).unwrap(),
            max_relative = 1e-12
        );

        let star = MdModel::new(
            Graph::star(3),
            vec![0.8, 1.4, 0.6],
            vec![1.0, 0.7, 1.8, 1.2],
        )
        .unwrap();
        let im_star = ImitativeModel::new(star, vec![0.4, -0.9, 1.3]).unwrap();
        assert_relative_eq!(
            imitative_partition_hl(&im_star).unwrap(),
            imitative_partition_enum(&im_star).unwrap(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn ball_bounds_on_path_center() {
        let m = uniform(Graph::path(5), 1.0, 1.0);
        let b = ball_monomer_bounds(&m, 2, 0).unwrap();
        assert_relative_eq!(b.lower, 1.0 / 3.0, max_relative = 1e-12);
        assert_abs_diff_eq!(b.upper, 1.0);
        assert_relative_eq!(b.exact, 0.5, max_relative = 1e-12);
        assert!(b.lower <= b.exact && b.exact <= b.upper);
    }

    #[test]
    fn ball_bounds_collapse_when_ball_covers_graph() {
        let m = uniform(Graph::star(4), 1.0, 1.0);
        let b = ball_monomer_bounds(&m, 0, 1).unwrap();
        assert_relative_eq!(b.lower, b.exact, max_relative = 1e-12);
        assert_relative_eq!(b.upper, b.exact, max_relative = 1e-12);
    }

    #[test]
    fn ball_bounds_on_star_center() {
        let m = uniform(Graph::star(4), 1.0, 1.0);
        let b = ball_monomer_bounds(&m, 0, 0).unwrap();
        assert_abs_diff_eq!(b.upper, 1.0);
        assert_relative_eq!(b.exact, 0.2, max_relative = 1e-12);
        assert_relative_eq!(b.lower, b.exact, max_relative = 1e-12);
    }

    #[test]
    fn ball_bounds_reject_cycles() {
        let m = uniform(Graph::cycle(3), 1.0, 1.0);
        assert!(matches!(
            ball_monomer_bounds(&m, 0, 0),
            Err(Error::NonTreeBall { .. })
        ));
    }

    #[test]
    fn caps_are_enforced() {
        let big = uniform(Graph::new(21, []).unwrap(), 0.0, 1.0);
        assert!(matches!(partition_enum(&big), Err(Error::SizeCap { .. })));
        let bigger = uniform(Graph::new(25, []).unwrap(), 0.0, 1.0);
        assert!(matches!(partition_hl(&bigger), Err(Error::SizeCap { .. })));
        assert!(partition_hl_with_cap(&bigger, 30).is_ok());
        assert!(matches!(
            partition_hl_with_cap(&bigger, 31),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn graph_validation() {
        assert!(Graph::new(3, [(0, 0)]).is_err());
        assert!(Graph::new(3, [(0, 3)]).is_err());
        assert!(Graph::new(3, [(0, 1), (1, 0)]).is_err());
        assert!(MdModel::new(Graph::complete(2), vec![1.0], vec![1.0, 0.0]).is_err());
        assert!(MdModel::new(Graph::complete(2), vec![-1.0], vec![1.0, 1.0]).is_err());
        assert!(MdModel::new(Graph::complete(2), vec![], vec![1.0, 1.0]).is_err());
    }
}
