//! Compactness gate and inter propagation between boundary and objectness
//! labels (co-transduction).

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::graph::{background_to_saliency, label_mask, normalize, AffinityGraph, PropagationConfig, VarianceWindow};
use crate::{Error, Result};

pub const COMPACTNESS_BINS: usize = 10;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CompactnessScore {
    pub value: f64,
    /// Bin masses, summing to 1.
    pub histogram: [f64; COMPACTNESS_BINS],
}

/// Triangle weight of 1-based bin `b`.
pub fn bin_weight(b: usize) -> usize {
    b.min(COMPACTNESS_BINS + 1 - b)
}

/// 1-based bin of a saliency value; the last bin is closed on the right.
pub fn saliency_bin(s: f64) -> usize {
    ((s * COMPACTNESS_BINS as f64).floor().max(0.0) as usize).min(COMPACTNESS_BINS - 1) + 1
}

/// `C = sum_b min(b, 11 - b) h(b)` over the mass-normalized 10-bin
/// histogram. Well-separated maps score near 1, maps with many mid values
/// score higher (up to 5).
pub fn compactness(s: &[f64]) -> Result<CompactnessScore> {
    if s.is_empty() {
        return Err(Error::EmptySaliency);
    }
    let mut counts = [0usize; COMPACTNESS_BINS];
    for &v in s {
        counts[saliency_bin(v) - 1] += 1;
    }
    let n = s.len() as f64;
    let weighted: usize = counts.iter().enumerate().map(|(b, &c)| bin_weight(b + 1) * c).sum();
    let mut histogram = [0.0; COMPACTNESS_BINS];
    for (h, &c) in histogram.iter_mut().zip(&counts) {
        *h = c as f64 / n;
    }
    Ok(CompactnessScore {
        value: weighted as f64 / n,
        histogram,
    })
}

/// Which side of `gamma2` sends a map to inter propagation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GateOrientation {
    /// Refine when `C >= gamma2` (mid-valued maps).
    #[default]
    AtLeast,
    /// Refine when `C < gamma2`.
    Below,
}

impl GateOrientation {
    pub fn routes(self, c: &CompactnessScore, gamma2: f64) -> bool {
        match self {
            GateOrientation::AtLeast => c.value >= gamma2,
            GateOrientation::Below => c.value < gamma2,
        }
    }
}

pub fn needs_refinement(c: &CompactnessScore, gamma2: f64) -> bool {
    GateOrientation::AtLeast.routes(c, gamma2)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoTransductionConfig {
    pub propagation: PropagationConfig,
    pub p1: usize,
    pub p2: usize,
    pub alpha: f64,
    pub beta: f64,
}

impl Default for CoTransductionConfig {
    fn default() -> Self {
        CoTransductionConfig {
            propagation: PropagationConfig::default(),
            p1: 2,
            p2: 150,
            alpha: 1.0,
            beta: 1.0,
        }
    }
}

impl CoTransductionConfig {
    pub fn validate(&self) -> Result<()> {
        self.propagation.validate()?;
        if self.p1 < 1 {
            return Err(Error::invalid("p1", "must be >= 1"));
        }
        if self.p2 < self.p1 {
            return Err(Error::invalid("p2", format!("{} must be >= p1 = {}", self.p2, self.p1)));
        }
        for (key, v) in [("alpha", self.alpha), ("beta", self.beta)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(key, format!("{v} is not > 0")));
            }
        }
        Ok(())
    }
}

/// Nodes moved between label sets in one iteration, plus both vectors as
/// they were before the move.
#[derive(Clone, Debug, PartialEq)]
pub struct SwitchReport {
    pub to_objectness: Vec<usize>,
    pub to_background: Vec<usize>,
    pub vb_before: Vec<f64>,
    pub vo_before: Vec<f64>,
}

/// Twin clamped recursions with label switching, advanced one iteration at
/// a time.
pub struct CoTransduction<'a> {
    graph: &'a AffinityGraph,
    in_b: Vec<bool>,
    in_o: Vec<bool>,
    vb: Vec<f64>,
    vo: Vec<f64>,
    scratch: Vec<f64>,
    p1: usize,
    p2: usize,
    t: usize,
}

impl<'a> CoTransduction<'a> {
    /// Nodes in both label sets are dropped from the background set.
    pub fn new(graph: &'a AffinityGraph, background: &[usize], objects: &[usize], p1: usize, p2: usize) -> Result<Self> {
        let n = graph.n();
        let in_o = label_mask(n, objects)?;
        let mut in_b = label_mask(n, background)?;
        for (b, &o) in in_b.iter_mut().zip(&in_o) {
            *b &= !o;
        }
        if !in_b.iter().any(|&b| b) || !in_o.iter().any(|&o| o) {
            return Err(Error::EmptyLabels);
        }
        if p1 < 1 || p2 < p1 {
            return Err(Error::invalid("p1", format!("need 1 <= p1 <= p2, got p1 = {p1}, p2 = {p2}")));
        }
        let ones = |mask: &[bool]| mask.iter().map(|&m| if m { 1.0 } else { 0.0 }).collect::<Vec<_>>();
        Ok(CoTransduction {
            graph,
            vb: ones(&in_b),
            vo: ones(&in_o),
            in_b,
            in_o,
            scratch: vec![0.0; n],
            p1,
            p2,
            t: 0,
        })
    }

    fn advance(graph: &AffinityGraph, v: &mut Vec<f64>, scratch: &mut Vec<f64>, clamped: &[bool]) {
        let a = graph.transition();
        for i in 0..v.len() {
            scratch[i] = if clamped[i] { 1.0 } else { a.row_dot(i, v) };
        }
        std::mem::swap(v, scratch);
    }

    /// Lowest `count` entries of `v` over `eligible` nodes, ties by id.
    fn lowest(v: &[f64], eligible: impl Iterator<Item = usize>, count: usize) -> Vec<usize> {
        let mut nodes: Vec<usize> = eligible.collect();
        nodes.sort_by(|&a, &b| v[a].total_cmp(&v[b]).then(a.cmp(&b)));
        nodes.truncate(count);
        nodes.sort_unstable();
        nodes
    }

    pub fn step(&mut self) -> SwitchReport {
        Self::advance(self.graph, &mut self.vb, &mut self.scratch, &self.in_b);
        Self::advance(self.graph, &mut self.vo, &mut self.scratch, &self.in_o);
        self.t += 1;

        let free = |i: &usize| !self.in_b[*i] && !self.in_o[*i];
        let n = self.vb.len();
        let to_o = Self::lowest(&self.vb, (0..n).filter(free), self.p1);
        let to_b = Self::lowest(&self.vo, (0..n).filter(free).filter(|i| to_o.binary_search(i).is_err()), self.p2);
        let report = SwitchReport {
            vb_before: self.vb.clone(),
            vo_before: self.vo.clone(),
            to_objectness: to_o,
            to_background: to_b,
        };
        for &i in &report.to_objectness {
            self.in_o[i] = true;
            self.vo[i] = 1.0;
        }
        for &i in &report.to_background {
            self.in_b[i] = true;
            self.vb[i] = 1.0;
        }
        report
    }

    pub fn background_values(&self) -> &[f64] {
        &self.vb
    }

    pub fn objectness_values(&self) -> &[f64] {
        &self.vo
    }

    pub fn background_labels(&self) -> Vec<usize> {
        (0..self.in_b.len()).filter(|&i| self.in_b[i]).collect()
    }

    pub fn object_labels(&self) -> Vec<usize> {
        (0..self.in_o.len()).filter(|&i| self.in_o[i]).collect()
    }

    pub fn iterations(&self) -> usize {
        self.t
    }
}

/// `normalize(alpha * sb + beta * so)`.
pub fn fuse(sb: &[f64], so: &[f64], alpha: f64, beta: f64) -> Vec<f64> {
    let mixed: Vec<f64> = sb.iter().zip(so).map(|(b, o)| alpha * b + beta * o).collect();
    normalize(&mixed)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub background_count: usize,
    pub object_count: usize,
    pub background_check: Option<f64>,
    pub object_check: Option<f64>,
    pub compactness: f64,
}

pub fn trace_csv(rows: &[TraceRow]) -> String {
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let mut out = String::from("iteration,background_labels,object_labels,background_variance,object_variance,compactness\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.iteration,
            r.background_count,
            r.object_count,
            opt(r.background_check),
            opt(r.object_check),
            r.compactness
        );
    }
    out
}

#[derive(Clone, Debug)]
pub struct CoTransductionResult {
    pub saliency: Vec<f64>,
    pub background_saliency: Vec<f64>,
    pub objectness_saliency: Vec<f64>,
    pub background_values: Vec<f64>,
    pub objectness_values: Vec<f64>,
    pub background_labels: Vec<usize>,
    pub object_labels: Vec<usize>,
    pub iterations: usize,
    pub converged: bool,
    pub trace: Vec<TraceRow>,
}

/// Runs co-transduction until both variance windows fall below `thres` (or
/// `max_iters`), then fuses the two maps.
pub fn cotransduct(
    graph: &AffinityGraph,
    background: &[usize],
    objects: &[usize],
    cfg: &CoTransductionConfig,
) -> Result<CoTransductionResult> {
    cotransduct_impl(graph, background, objects, cfg, false)
}

/// Like [`cotransduct`], also recording one [`TraceRow`] per iteration.
pub fn cotransduct_traced(
    graph: &AffinityGraph,
    background: &[usize],
    objects: &[usize],
    cfg: &CoTransductionConfig,
) -> Result<CoTransductionResult> {
    cotransduct_impl(graph, background, objects, cfg, true)
}

fn cotransduct_impl(
    graph: &AffinityGraph,
    background: &[usize],
    objects: &[usize],
    cfg: &CoTransductionConfig,
    traced: bool,
) -> Result<CoTransductionResult> {
    cfg.validate()?;
    let pc = cfg.propagation;
    let mut state = CoTransduction::new(graph, background, objects, cfg.p1, cfg.p2)?;
    let mut wb = VarianceWindow::new(pc.window);
    let mut wo = VarianceWindow::new(pc.window);
    wb.push(state.background_values());
    wo.push(state.objectness_values());
    let mut trace = Vec::new();
    let mut converged = false;
    while state.iterations() < pc.max_iters {
        state.step();
        let cb = wb.push(state.background_values());
        let co = wo.push(state.objectness_values());
        if traced {
            let fused = fuse(
                &background_to_saliency(state.background_values()),
                &normalize(state.objectness_values()),
                cfg.alpha,
                cfg.beta,
            );
            trace.push(TraceRow {
                iteration: state.iterations(),
                background_count: state.in_b.iter().filter(|&&b| b).count(),
                object_count: state.in_o.iter().filter(|&&o| o).count(),
                background_check: cb,
                object_check: co,
                compactness: compactness(&fused)?.value,
            });
        }
        if matches!((cb, co), (Some(b), Some(o)) if b < pc.thres && o < pc.thres) {
            converged = true;
            break;
        }
    }
    let background_saliency = background_to_saliency(state.background_values());
    let objectness_saliency = normalize(state.objectness_values());
    Ok(CoTransductionResult {
        saliency: fuse(&background_saliency, &objectness_saliency, cfg.alpha, cfg.beta),
        background_saliency,
        objectness_saliency,
        background_values: state.vb.clone(),
        objectness_values: state.vo.clone(),
        background_labels: state.background_labels(),
        object_labels: state.object_labels(),
        iterations: state.iterations(),
        converged,
        trace,
    })
}

/// Exactly `iters` co-transduction iterations; returns `(V^B, V^O)`.
pub fn cotransduct_steps(
    graph: &AffinityGraph,
    background: &[usize],
    objects: &[usize],
    p1: usize,
    p2: usize,
    iters: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut state = CoTransduction::new(graph, background, objects, p1, p2)?;
    for _ in 0..iters {
        state.step();
    }
    Ok((state.vb, state.vo))
}
