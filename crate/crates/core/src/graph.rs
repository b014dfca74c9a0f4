//! Superpixel affinity graph and clamped label propagation.
//!
//! The affinity between regions `i` and `j` is `exp(-||c_i - c_j|| / sigma_c2)`
//! on unit-scaled mean LAB colors, restricted to the 2-layer neighbourhood
//! plus a clique over all border regions. Rows are normalized to obtain the
//! transition matrix `A = D^-1 W`, and propagation iterates
//! `V_{t+1}(i) = sum_j a_ij V_t(j)` on unlabeled nodes while labeled nodes
//! stay clamped at 1.
//!
//! The fixed point of that recursion on a connected graph is the constant
//! vector, so the useful output is the transient: iteration stops once the
//! mean per-node variance over a sliding window of iterates falls below a
//! threshold, and the snapshot is then min-max normalized.

use std::collections::{BTreeMap, VecDeque};
use std::fmt::Write as _;

use crate::segmentation::{BoundarySet, SuperpixelMap};
use crate::{Error, Result};

/// Compressed sparse rows with ascending column indices in each row.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseMatrix {
    fn from_rows(rows: Vec<BTreeMap<usize, f64>>) -> Self {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for row in rows {
            for (c, v) in row {
                cols.push(c);
                vals.push(v);
            }
            row_ptr.push(cols.len());
        }
        SparseMatrix {
            n,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.cols[r.clone()], &self.vals[r])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        cols.binary_search(&j).map_or(0.0, |k| vals[k])
    }

    pub fn row_sum(&self, i: usize) -> f64 {
        self.row(i).1.iter().sum()
    }

    /// Dot product of row `i` with `v`, summed in ascending column order.
    pub fn row_dot(&self, i: usize, v: &[f64]) -> f64 {
        let (cols, vals) = self.row(i);
        cols.iter().zip(vals).fold(0.0, |acc, (&c, &a)| acc + a * v[c])
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut dense = vec![vec![0.0; self.n]; self.n];
        for (i, row) in dense.iter_mut().enumerate() {
            let (cols, vals) = self.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                row[c] = v;
            }
        }
        dense
    }

    /// `(i, j, value)` for every stored entry, row-major.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |i| {
            let (cols, vals) = self.row(i);
            cols.iter().zip(vals).map(move |(&j, &v)| (i, j, v))
        })
    }

    /// One `i j value` line per stored entry.
    pub fn to_triplet_text(&self) -> String {
        let mut out = String::new();
        for (i, j, v) in self.triplets() {
            let _ = writeln!(out, "{i} {j} {v:.17e}");
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct AffinityGraph {
    weights: SparseMatrix,
    transition: SparseMatrix,
    degrees: Vec<f64>,
    boundary: BoundarySet,
}

impl AffinityGraph {
    /// Builds the graph from explicit weights. Duplicate `(i, j)` entries
    /// are summed; diagonal and zero entries are dropped. A node with no
    /// positive weight gets a self-loop in the transition matrix so every
    /// row stays stochastic.
    pub fn from_weights(
        n: usize,
        entries: impl IntoIterator<Item = (usize, usize, f64)>,
        boundary: BoundarySet,
    ) -> Result<Self> {
        let mut rows: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); n];
        for (i, j, w) in entries {
            if i >= n || j >= n {
                return Err(Error::invalid("weights", format!("entry ({i}, {j}) outside {n} nodes")));
            }
            if !w.is_finite() || w < 0.0 {
                return Err(Error::invalid("weights", format!("entry ({i}, {j}) = {w}")));
            }
            if i != j && w > 0.0 {
                *rows[i].entry(j).or_insert(0.0) += w;
            }
        }
        let degrees: Vec<f64> = rows.iter().map(|r| r.values().sum()).collect();
        let transition_rows = rows
            .iter()
            .enumerate()
            .map(|(i, r)| {
                if degrees[i] > 0.0 {
                    r.iter().map(|(&j, &w)| (j, w / degrees[i])).collect()
                } else {
                    BTreeMap::from([(i, 1.0)])
                }
            })
            .collect();
        Ok(AffinityGraph {
            weights: SparseMatrix::from_rows(rows),
            transition: SparseMatrix::from_rows(transition_rows),
            degrees,
            boundary,
        })
    }

    pub fn n(&self) -> usize {
        self.weights.n()
    }

    /// Symmetric affinity matrix `W`.
    pub fn weights(&self) -> &SparseMatrix {
        &self.weights
    }

    /// Row-normalized matrix `A = D^-1 W`.
    pub fn transition(&self) -> &SparseMatrix {
        &self.transition
    }

    pub fn degrees(&self) -> &[f64] {
        &self.degrees
    }

    pub fn boundary(&self) -> &BoundarySet {
        &self.boundary
    }

    pub fn is_isolated(&self, i: usize) -> bool {
        self.degrees[i] == 0.0
    }
}

fn color_distance(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Affinity over the 2-layer neighbourhood plus the boundary clique, using
/// unit-scaled LAB region means.
pub fn build_affinity(sp: &SuperpixelMap, boundary: &BoundarySet, sigma_c2: f64) -> Result<AffinityGraph> {
    if !(sigma_c2.is_finite() && sigma_c2 > 0.0) {
        return Err(Error::invalid("sigma_c2", format!("{sigma_c2} is not > 0")));
    }
    let regions = sp.regions();
    let weight = |i: usize, j: usize| {
        (-color_distance(regions[i].mean_unit, regions[j].mean_unit) / sigma_c2).exp()
    };
    let mut entries = Vec::new();
    for r in regions {
        let i = r.id;
        let mut targets: Vec<usize> = r.neighbors_2.clone();
        if boundary.contains(i) {
            targets.extend(boundary.ids().iter().copied().filter(|&j| j != i));
            targets.sort_unstable();
            targets.dedup();
        }
        entries.extend(targets.into_iter().map(|j| (i, j, weight(i, j))));
    }
    AffinityGraph::from_weights(sp.n(), entries, boundary.clone())
}

/// Drops the `floor(drop_frac * |B|)` border regions whose colors differ
/// most from the rest of the border, ranked by mean unit-LAB distance to
/// the other border regions (descending, ties by ascending id). Returns the
/// remaining ids in ascending order.
pub fn select_boundary_labels(boundary: &BoundarySet, sp: &SuperpixelMap, drop_frac: f64) -> Result<Vec<usize>> {
    if !(0.0..1.0).contains(&drop_frac) {
        return Err(Error::invalid("drop_frac", format!("{drop_frac} is outside [0, 1)")));
    }
    let ids = boundary.ids();
    if ids.len() < 2 {
        return Err(Error::TooFewBoundaryNodes(ids.len()));
    }
    let mut scored: Vec<(f64, usize)> = ids
        .iter()
        .map(|&b| {
            let total: f64 = ids
                .iter()
                .filter(|&&o| o != b)
                .map(|&o| color_distance(sp.region(b).mean_unit, sp.region(o).mean_unit))
                .sum();
            (total / (ids.len() - 1) as f64, b)
        })
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    // Small epsilon so that e.g. 0.3 * 30 drops 9 rather than 8.
    let drop = ((drop_frac * ids.len() as f64) + 1e-9).floor() as usize;
    let mut kept: Vec<usize> = scored[drop..].iter().map(|&(_, b)| b).collect();
    kept.sort_unstable();
    Ok(kept)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PropagationConfig {
    /// Stop once the windowed mean variance drops below this.
    pub thres: f64,
    /// Window spans `window + 1` iterates.
    pub window: usize,
    pub max_iters: usize,
}

impl Default for PropagationConfig {
    fn default() -> Self {
        PropagationConfig {
            thres: 1e-4,
            window: 49,
            max_iters: 2000,
        }
    }
}

impl PropagationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.thres.is_finite() && self.thres > 0.0) {
            return Err(Error::invalid("thres", format!("{} is not > 0", self.thres)));
        }
        if self.window < 1 {
            return Err(Error::invalid("const", "window length must be >= 1"));
        }
        if self.max_iters <= self.window {
            return Err(Error::invalid(
                "max_iters",
                format!("{} must exceed const = {}", self.max_iters, self.window),
            ));
        }
        Ok(())
    }
}

/// Sliding window over the last `len` iterates; reports the mean over nodes
/// of each node's (population) variance across the window once full.
#[derive(Clone, Debug)]
pub struct VarianceWindow {
    len: usize,
    history: VecDeque<Vec<f64>>,
}

impl VarianceWindow {
    pub fn new(window: usize) -> Self {
        VarianceWindow {
            len: window + 1,
            history: VecDeque::with_capacity(window + 2),
        }
    }

    pub fn push(&mut self, v: &[f64]) -> Option<f64> {
        if self.history.len() == self.len {
            let mut old = self.history.pop_front().expect("window is full");
            old.copy_from_slice(v);
            self.history.push_back(old);
        } else {
            self.history.push_back(v.to_vec());
        }
        (self.history.len() == self.len).then(|| self.mean_variance())
    }

    fn mean_variance(&self) -> f64 {
        let n = self.history[0].len();
        if n == 0 {
            return 0.0;
        }
        let k = self.history.len() as f64;
        let mut total = 0.0;
        for i in 0..n {
            let mean = self.history.iter().map(|v| v[i]).sum::<f64>() / k;
            total += self.history.iter().map(|v| (v[i] - mean).powi(2)).sum::<f64>() / k;
        }
        total / n as f64
    }
}

/// Step-by-step clamped propagation over a fixed label set.
pub struct Propagator<'a> {
    graph: &'a AffinityGraph,
    labeled: Vec<bool>,
    values: Vec<f64>,
    scratch: Vec<f64>,
    t: usize,
}

impl<'a> Propagator<'a> {
    pub fn new(graph: &'a AffinityGraph, labels: &[usize]) -> Result<Self> {
        let labeled = label_mask(graph.n(), labels)?;
        let values = labeled.iter().map(|&l| if l { 1.0 } else { 0.0 }).collect();
        Ok(Propagator {
            graph,
            labeled,
            scratch: vec![0.0; graph.n()],
            values,
            t: 0,
        })
    }

    pub fn step(&mut self) {
        let a = self.graph.transition();
        for i in 0..self.values.len() {
            self.scratch[i] = if self.labeled[i] { 1.0 } else { a.row_dot(i, &self.values) };
        }
        std::mem::swap(&mut self.values, &mut self.scratch);
        self.t += 1;
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn iterations(&self) -> usize {
        self.t
    }

    pub fn all_labeled(&self) -> bool {
        self.labeled.iter().all(|&l| l)
    }
}

pub(crate) fn label_mask(n: usize, labels: &[usize]) -> Result<Vec<bool>> {
    if labels.is_empty() {
        return Err(Error::EmptyLabels);
    }
    let mut mask = vec![false; n];
    for &l in labels {
        if l >= n {
            return Err(Error::LabelOutOfRange { label: l, n });
        }
        mask[l] = true;
    }
    Ok(mask)
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabelState {
    pub labels: Vec<usize>,
    pub values: Vec<f64>,
    pub iterations: usize,
    /// False when `max_iters` was hit before the variance criterion.
    pub converged: bool,
}

/// Runs propagation until the windowed variance drops below `cfg.thres` or
/// `cfg.max_iters` iterations have run.
pub fn propagate(graph: &AffinityGraph, labels: &[usize], cfg: &PropagationConfig) -> Result<LabelState> {
    propagate_traced(graph, labels, cfg, |_, _, _| {})
}

/// Like [`propagate`], calling `trace(t, values, check)` after every iteration.
pub fn propagate_traced(
    graph: &AffinityGraph,
    labels: &[usize],
    cfg: &PropagationConfig,
    mut trace: impl FnMut(usize, &[f64], Option<f64>),
) -> Result<LabelState> {
    cfg.validate()?;
    let mut prop = Propagator::new(graph, labels)?;
    let mut window = VarianceWindow::new(cfg.window);
    window.push(prop.values());
    let mut converged = false;
    if prop.all_labeled() {
        prop.step();
        trace(prop.iterations(), prop.values(), None);
        converged = true;
    }
    while !converged && prop.iterations() < cfg.max_iters {
        prop.step();
        let check = window.push(prop.values());
        trace(prop.iterations(), prop.values(), check);
        if check.is_some_and(|c| c < cfg.thres) {
            converged = true;
        }
    }
    let mut sorted = labels.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    Ok(LabelState {
        labels: sorted,
        iterations: prop.iterations(),
        values: prop.values,
        converged,
    })
}

/// Exactly `iters` propagation steps with the sparse engine.
pub fn propagate_steps(graph: &AffinityGraph, labels: &[usize], iters: usize) -> Result<Vec<f64>> {
    let mut prop = Propagator::new(graph, labels)?;
    for _ in 0..iters {
        prop.step();
    }
    Ok(prop.values)
}

/// Reference recursion with plain dense matrix-vector products, used to
/// cross-check the sparse engine.
pub fn propagate_oracle(graph: &AffinityGraph, labels: &[usize], iters: usize) -> Vec<f64> {
    let a = graph.transition().to_dense();
    let n = a.len();
    let mut v = vec![0.0; n];
    for &l in labels {
        v[l] = 1.0;
    }
    for _ in 0..iters {
        let mut next = vec![0.0; n];
        for i in 0..n {
            if labels.contains(&i) {
                next[i] = 1.0;
                continue;
            }
            let mut s = 0.0;
            for j in 0..n {
                s += a[i][j] * v[j];
            }
            next[i] = s;
        }
        v = next;
    }
    v
}

/// Min-max normalization to [0, 1]; a constant vector maps to all zeros.
pub fn normalize(v: &[f64]) -> Vec<f64> {
    let (lo, hi) = v
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    let range = hi - lo;
    if !(range > 0.0) {
        return vec![0.0; v.len()];
    }
    v.iter().map(|&x| ((x - lo) / range).clamp(0.0, 1.0)).collect()
}

/// Background similarity to regional saliency: `1 - normalize(V)`, with a
/// constant `V` giving all-zero saliency.
pub fn background_to_saliency(v: &[f64]) -> Vec<f64> {
    let n = normalize(v);
    if n.iter().all(|&x| x == 0.0) {
        return n;
    }
    n.into_iter().map(|x| 1.0 - x).collect()
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::imaging::{rgb_to_lab, RgbRaster};
    use crate::segmentation::boundary_nodes;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn chain(n: usize) -> AffinityGraph {
        let edges = (0..n - 1).flat_map(|i| [(i, i + 1, 1.0), (i + 1, i, 1.0)]);
        AffinityGraph::from_weights(n, edges, BoundarySet::from_ids([])).unwrap()
    }

    pub(crate) fn random_graph(rng: &mut ChaCha8Rng, n: usize, density: f64) -> AffinityGraph {
        let mut entries = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if rng.gen::<f64>() < density {
                    let w: f64 = rng.gen_range(0.01..1.0);
                    entries.push((i, j, w));
                    entries.push((j, i, w));
                }
            }
        }
        AffinityGraph::from_weights(n, entries, BoundarySet::from_ids([])).unwrap()
    }

    #[test]
    fn two_node_normalization() {
        let g = AffinityGraph::from_weights(2, [(0, 1, 0.5), (1, 0, 0.5)], BoundarySet::from_ids([])).unwrap();
        assert_eq!(g.transition().to_dense(), vec![vec![0.0, 1.0], vec![1.0, 0.0]]);
        assert_eq!(g.degrees(), &[0.5, 0.5]);
    }

    #[test]
    fn isolated_node_gets_self_loop() {
        let g = AffinityGraph::from_weights(3, [(0, 1, 1.0), (1, 0, 1.0)], BoundarySet::from_ids([])).unwrap();
        assert!(g.is_isolated(2));
        assert_eq!(g.transition().get(2, 2), 1.0);
        assert_eq!(g.weights().get(2, 2), 0.0);
        let v = propagate_steps(&g, &[0], 10).unwrap();
        assert_eq!(v[2], 0.0);
    }

    #[test]
    fn rejects_bad_weights() {
        let b = BoundarySet::from_ids([]);
        assert!(AffinityGraph::from_weights(2, [(0, 2, 1.0)], b.clone()).is_err());
        assert!(AffinityGraph::from_weights(2, [(0, 1, -1.0)], b.clone()).is_err());
        assert!(AffinityGraph::from_weights(2, [(0, 1, f64::NAN)], b).is_err());
    }

    fn grid_map(colors: &[[u8; 3]], k: usize, cell: usize) -> SuperpixelMap {
        let w = k * cell;
        let img = RgbRaster::from_fn(w, w, |x, y| colors[(y / cell) * k + x / cell]);
        let labels = (0..w * w).map(|i| (i / w / cell) * k + (i % w) / cell).collect();
        SuperpixelMap::from_labels(labels, &rgb_to_lab(&img)).unwrap()
    }

    #[test]
    fn affinity_entries_follow_mask() {
        let colors: Vec<[u8; 3]> = (0..25).map(|i| [(i * 10) as u8, 80, 200 - (i * 5) as u8]).collect();
        let sp = grid_map(&colors, 5, 3);
        let b = boundary_nodes(&sp);
        let g = build_affinity(&sp, &b, 0.1).unwrap();
        for i in 0..sp.n() {
            assert_eq!(g.weights().get(i, i), 0.0);
            assert!((g.transition().row_sum(i) - 1.0).abs() < 1e-12);
            for j in 0..sp.n() {
                let w = g.weights().get(i, j);
                assert_eq!(w, g.weights().get(j, i));
                let allowed = sp.region(i).neighbors_2.contains(&j) || (b.contains(i) && b.contains(j) && i != j);
                assert_eq!(w > 0.0, allowed, "({i},{j})");
                if allowed {
                    let d = color_distance(sp.region(i).mean_unit, sp.region(j).mean_unit);
                    assert!((w - (-d / 0.1).exp()).abs() < 1e-15);
                }
            }
        }
        // Opposite corners 0 and 24 are both on the border: geodesic clique.
        assert!(g.weights().get(0, 24) > 0.0);
        // The center is not within two hops of a corner.
        assert_eq!(g.weights().get(12, 0), 0.0);
    }

    #[test]
    fn identical_neighbours_have_unit_affinity() {
        let sp = grid_map(&[[50, 60, 70]; 9], 3, 2);
        let g = build_affinity(&sp, &boundary_nodes(&sp), 0.1).unwrap();
        assert_eq!(g.weights().get(4, 1), 1.0);
    }

    #[test]
    fn boundary_selection_counts_and_ties() {
        let sp = grid_map(&[[90, 90, 90]; 16], 4, 2);
        let b = boundary_nodes(&sp);
        assert_eq!(b.len(), 12);
        let kept = select_boundary_labels(&b, &sp, 0.3).unwrap();
        // floor(0.3 * 12) = 3 dropped; identical colors drop the lowest ids.
        assert_eq!(kept.len(), 9);
        assert_eq!(kept, vec![3, 4, 7, 8, 11, 12, 13, 14, 15]);
    }

    #[test]
    fn ten_boundary_nodes_keep_seven() {
        // 10 border regions: a 1x10 strip of columns.
        let img = RgbRaster::from_fn(10, 3, |x, _| if x == 6 { [230, 20, 20] } else { [128, 128, 128] });
        let lab = rgb_to_lab(&img);
        let sp = SuperpixelMap::from_labels((0..30).map(|i| i % 10).collect(), &lab).unwrap();
        let b = boundary_nodes(&sp);
        assert_eq!(b.len(), 10);
        let kept = select_boundary_labels(&b, &sp, 0.3).unwrap();
        assert_eq!(kept.len(), 7);
        assert!(!kept.contains(&6), "the red node is the most distinct");
        // Exhaustive oracle: red has the largest mean distance of all nodes.
        let dist = |i: usize| -> f64 {
            (0..10)
                .filter(|&j| j != i)
                .map(|j| color_distance(sp.region(i).mean_unit, sp.region(j).mean_unit))
                .sum::<f64>()
        };
        assert!((0..10).filter(|&i| i != 6).all(|i| dist(6) > dist(i)));

        let gray = RgbRaster::from_fn(10, 3, |_, _| [128, 128, 128]);
        let sp = SuperpixelMap::from_labels((0..30).map(|i| i % 10).collect(), &rgb_to_lab(&gray)).unwrap();
        assert_eq!(select_boundary_labels(&b, &sp, 0.3).unwrap(), vec![3, 4, 5, 6, 7, 8, 9]);
    }

    #[test]
    fn boundary_selection_errors() {
        let sp = grid_map(&[[1, 2, 3]; 4], 2, 2);
        assert!(matches!(
            select_boundary_labels(&BoundarySet::from_ids([0]), &sp, 0.3),
            Err(Error::TooFewBoundaryNodes(1))
        ));
        assert!(select_boundary_labels(&boundary_nodes(&sp), &sp, 1.0).is_err());
    }

    #[test]
    fn chain_hand_simulation() {
        let g = chain(3);
        assert_eq!(propagate_steps(&g, &[0], 1).unwrap(), vec![1.0, 0.5, 0.0]);
        assert_eq!(propagate_steps(&g, &[0], 2).unwrap(), vec![1.0, 0.5, 0.5]);
        assert_eq!(propagate_oracle(&g, &[0], 2), vec![1.0, 0.5, 0.5]);
    }

    #[test]
    fn all_labeled_finishes_in_one_step() {
        let g = chain(4);
        let s = propagate(&g, &[0, 1, 2, 3], &PropagationConfig::default()).unwrap();
        assert_eq!(s.iterations, 1);
        assert_eq!(s.values, vec![1.0; 4]);
    }

    #[test]
    fn oracle_edge_cases() {
        let g = chain(4);
        assert_eq!(propagate_oracle(&g, &[1, 3], 0), vec![0.0, 1.0, 0.0, 1.0]);
        assert!(matches!(propagate(&g, &[], &PropagationConfig::default()), Err(Error::EmptyLabels)));
        assert!(matches!(propagate_steps(&g, &[9], 1), Err(Error::LabelOutOfRange { .. })));
    }

    #[test]
    fn long_run_approaches_all_ones() {
        let g = chain(6);
        let cfg = PropagationConfig {
            thres: 1e-300,
            window: 49,
            max_iters: 20_000,
        };
        let s = propagate(&g, &[0], &cfg).unwrap();
        assert!(s.values.iter().all(|&v| (1.0 - v).abs() < 1e-3));
        assert!(!s.converged);
    }

    #[test]
    fn variance_window_mean() {
        let mut w = VarianceWindow::new(1);
        assert_eq!(w.push(&[0.0, 1.0]), None);
        // Node 0: {0, 2} var 1; node 1: {1, 1} var 0 -> mean 0.5.
        assert_eq!(w.push(&[2.0, 1.0]), Some(0.5));
        assert_eq!(w.push(&[2.0, 1.0]), Some(0.0));
    }

    #[test]
    fn config_validation() {
        assert!(PropagationConfig::default().validate().is_ok());
        let bad = PropagationConfig { thres: 0.0, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = PropagationConfig { window: 49, max_iters: 49, ..Default::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn saliency_from_background_similarity() {
        assert_eq!(background_to_saliency(&[1.0, 0.5, 0.0]), vec![0.0, 0.5, 1.0]);
        assert_eq!(background_to_saliency(&[0.4; 5]), vec![0.0; 5]);
        let s = background_to_saliency(&[0.2, 0.8, 0.6]);
        let expected = [1.0, 0.0, 1.0 / 3.0];
        for (a, b) in s.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn triplet_dump_lists_entries() {
        let g = chain(3);
        let text = g.transition().to_triplet_text();
        assert_eq!(text.lines().count(), 4);
        assert!(text.starts_with("0 1 1.0"));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn sparse_matches_dense(seed in any::<u64>(), n in 2usize..40, iters in 0usize..60) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = random_graph(&mut rng, n, 0.2);
            let k = rng.gen_range(1..=n.min(5));
            let labels: Vec<usize> = (0..k).map(|_| rng.gen_range(0..n)).collect();
            let fast = propagate_steps(&g, &labels, iters).unwrap();
            let slow = propagate_oracle(&g, &labels, iters);
            for (a, b) in fast.iter().zip(&slow) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }

        #[test]
        fn values_monotone_bounded_and_clamped(seed in any::<u64>(), n in 2usize..30) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = random_graph(&mut rng, n, 0.3);
            let labels = vec![rng.gen_range(0..n)];
            let mut p = Propagator::new(&g, &labels).unwrap();
            let mut prev = p.values().to_vec();
            for _ in 0..50 {
                p.step();
                for (i, (&a, &b)) in prev.iter().zip(p.values()).enumerate() {
                    prop_assert!(b >= a && b <= 1.0);
                    if labels.contains(&i) {
                        prop_assert_eq!(b, 1.0);
                    }
                }
                prev = p.values().to_vec();
            }
        }
    }
}
