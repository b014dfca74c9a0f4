//! Acceptance checks, one line per criterion. Runs as a plain binary so the
//! lines are always printed:
//!
//! ```text
//! cargo test -p lps-core --test acceptance
//! ```
//!
//! Set `LPS_MSRA_IMAGES` and `LPS_MSRA_GT` to also score an MSRA-1000 copy.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use lps::config::PipelineConfig;
use lps::evaluation::{confusion_counts, evaluate_dataset, evaluate_map, f_measure, overlap, GroundTruth};
use lps::fixtures::{mid_gray_gradient, synthetic_suite, two_color};
use lps::fusion::{compactness, cotransduct, cotransduct_steps, CoTransductionConfig, GateOrientation};
use lps::graph::{background_to_saliency, propagate, propagate_steps, AffinityGraph, PropagationConfig, Propagator};
use lps::imaging::load_image;
use lps::objectness::{pixel_objectness, Window, WindowScore};
use lps::pipeline::{evaluate_batch, list_images, prepare, run_batch, Route, RunOptions};
use lps::segmentation::BoundarySet;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn fixtures_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests").join("fixtures")
}

fn random_entries(rng: &mut ChaCha8Rng, n: usize) -> Vec<(usize, usize, f64)> {
    let density = rng.gen_range(0.05..0.6);
    let mut entries = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.gen::<f64>() < density {
                let w = rng.gen_range(1e-3..1.0);
                entries.push((i, j, w));
                entries.push((j, i, w));
            }
        }
    }
    entries
}

/// Connected variant: a random spanning path plus random extra edges.
fn random_connected(rng: &mut ChaCha8Rng, n: usize) -> AffinityGraph {
    let mut entries = random_entries(rng, n);
    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        order.swap(i, rng.gen_range(0..=i));
    }
    for w in order.windows(2) {
        let x = rng.gen_range(1e-3..1.0);
        entries.push((w[0], w[1], x));
        entries.push((w[1], w[0], x));
    }
    AffinityGraph::from_weights(n, entries, BoundarySet::from_ids([])).unwrap()
}

/// `k` distinct sorted node ids, `k` drawn from `1..=max_k` (capped at `n`).
fn random_subset(rng: &mut ChaCha8Rng, n: usize, max_k: usize) -> Vec<usize> {
    let k = rng.gen_range(1..=max_k.clamp(1, n));
    let mut ids: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        ids.swap(i, rng.gen_range(0..=i));
    }
    ids.truncate(k);
    ids.sort_unstable();
    ids
}

/// Row-normalized dense matrix built straight from the edge list; rows
/// without edges get a self-loop.
fn dense_transition(n: usize, entries: &[(usize, usize, f64)]) -> Vec<Vec<f64>> {
    let mut w = vec![vec![0.0; n]; n];
    let mut seen = vec![vec![false; n]; n];
    for &(i, j, x) in entries {
        w[i][j] += x;
        seen[i][j] = true;
    }
    for i in 0..n {
        // Sum in column order over present entries, the same order a sorted
        // sparse row uses.
        let deg: f64 = (0..n).filter(|&j| seen[i][j]).map(|j| w[i][j]).fold(0.0, |a, b| a + b);
        if deg > 0.0 {
            for x in w[i].iter_mut() {
                *x /= deg;
            }
        } else {
            w[i][i] = 1.0;
        }
    }
    w
}

fn dense_clamped_step(a: &[Vec<f64>], v: &[f64], clamped: &[bool]) -> Vec<f64> {
    (0..v.len())
        .map(|i| {
            if clamped[i] {
                1.0
            } else {
                let mut s = 0.0;
                for j in 0..v.len() {
                    if a[i][j] != 0.0 {
                        s += a[i][j] * v[j];
                    }
                }
                s
            }
        })
        .collect()
}

fn dense_inner(a: &[Vec<f64>], labels: &[usize], iters: usize) -> Vec<f64> {
    let n = a.len();
    let clamped: Vec<bool> = (0..n).map(|i| labels.contains(&i)).collect();
    let mut v: Vec<f64> = clamped.iter().map(|&c| if c { 1.0 } else { 0.0 }).collect();
    for _ in 0..iters {
        v = dense_clamped_step(a, &v, &clamped);
    }
    v
}

/// Co-transduction written out plainly: advance both clamped vectors, move
/// the `p1` free nodes least reached from the background into the object
/// set, then the `p2` remaining free nodes least reached from the objects
/// into the background set.
fn dense_inter(a: &[Vec<f64>], b: &[usize], o: &[usize], p1: usize, p2: usize, iters: usize) -> (Vec<f64>, Vec<f64>) {
    let n = a.len();
    let mut in_o: Vec<bool> = (0..n).map(|i| o.contains(&i)).collect();
    let mut in_b: Vec<bool> = (0..n).map(|i| b.contains(&i) && !in_o[i]).collect();
    let mut vb: Vec<f64> = in_b.iter().map(|&c| if c { 1.0 } else { 0.0 }).collect();
    let mut vo: Vec<f64> = in_o.iter().map(|&c| if c { 1.0 } else { 0.0 }).collect();
    for _ in 0..iters {
        vb = dense_clamped_step(a, &vb, &in_b);
        vo = dense_clamped_step(a, &vo, &in_o);
        let mut free: Vec<usize> = (0..n).filter(|&i| !in_b[i] && !in_o[i]).collect();
        free.sort_by(|&x, &y| vb[x].partial_cmp(&vb[y]).unwrap().then(x.cmp(&y)));
        let to_o: Vec<usize> = free.iter().copied().take(p1).collect();
        let mut rest: Vec<usize> = free.into_iter().filter(|i| !to_o.contains(i)).collect();
        rest.sort_by(|&x, &y| vo[x].partial_cmp(&vo[y]).unwrap().then(x.cmp(&y)));
        for &i in &to_o {
            in_o[i] = true;
            vo[i] = 1.0;
        }
        for &i in rest.iter().take(p2) {
            in_b[i] = true;
            vb[i] = 1.0;
        }
    }
    (vb, vo)
}

fn max_diff(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

fn propagation_oracle() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    let pc = PropagationConfig {
        thres: 1e-4,
        window: 9,
        max_iters: 300,
    };
    for g in 0..200 {
        let n = rng.gen_range(2..=50);
        let entries = random_entries(&mut rng, n);
        let graph = AffinityGraph::from_weights(n, entries.clone(), BoundarySet::from_ids([])).unwrap();
        let a = dense_transition(n, &entries);

        let labels = random_subset(&mut rng, n, n.div_ceil(3));
        let state = propagate(&graph, &labels, &pc).map_err(|e| e.to_string())?;
        let d = max_diff(&state.values, &dense_inner(&a, &labels, state.iterations));
        worst = worst.max(d);
        ensure!(d < 1e-12, "graph {g}: inner |delta| = {d:e} after {} iterations", state.iterations);
        let t = rng.gen_range(0..60);
        let d = max_diff(&propagate_steps(&graph, &labels, t).unwrap(), &dense_inner(&a, &labels, t));
        worst = worst.max(d);
        ensure!(d < 1e-12, "graph {g}: inner |delta| = {d:e} at step {t}");

        if n < 3 {
            continue;
        }
        let objects = random_subset(&mut rng, n, n / 3);
        let background: Vec<usize> = random_subset(&mut rng, n, n / 2);
        if background.iter().all(|b| objects.contains(b)) {
            continue;
        }
        let p1 = rng.gen_range(1..=3);
        let p2 = rng.gen_range(p1..=n);
        let cfg = CoTransductionConfig {
            propagation: pc,
            p1,
            p2,
            ..Default::default()
        };
        let res = cotransduct(&graph, &background, &objects, &cfg).map_err(|e| e.to_string())?;
        let (vb, vo) = dense_inter(&a, &background, &objects, p1, p2, res.iterations);
        let d = max_diff(&res.background_values, &vb).max(max_diff(&res.objectness_values, &vo));
        worst = worst.max(d);
        ensure!(d < 1e-12, "graph {g}: inter |delta| = {d:e} after {} iterations", res.iterations);
        let t = rng.gen_range(0..40);
        let (sb, so) = cotransduct_steps(&graph, &background, &objects, p1, p2, t).unwrap();
        let (vb, vo) = dense_inter(&a, &background, &objects, p1, p2, t);
        let d = max_diff(&sb, &vb).max(max_diff(&so, &vo));
        worst = worst.max(d);
        ensure!(d < 1e-12, "graph {g}: inter |delta| = {d:e} at step {t}");
    }
    let secs = start.elapsed().as_secs_f64();
    ensure!(secs < 10.0, "took {secs:.2} s");
    Ok(format!("200 graphs, max |delta| {worst:e}, {secs:.2} s"))
}

fn harmonic_limit() -> Check {
    let cfg = PipelineConfig::default();
    let limit = 10 * cfg.max_iters;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for g in 0..20 {
        let n = rng.gen_range(2..=50);
        let graph = random_connected(&mut rng, n);
        let labels = random_subset(&mut rng, n, 3);
        let v = propagate_steps(&graph, &labels, limit).unwrap();
        let gap = v.iter().map(|x| 1.0 - x).fold(0.0, f64::max);
        worst = worst.max(gap);
        ensure!(gap < 1e-3, "random graph {g}: 1 - min V = {gap:e}");
    }
    for f in synthetic_suite().iter().take(3) {
        let (_, _, _, labels, graph) = prepare(&f.image, &cfg).map_err(|e| e.to_string())?;
        let v = propagate_steps(&graph, &labels, limit).unwrap();
        let gap = v.iter().map(|x| 1.0 - x).fold(0.0, f64::max);
        worst = worst.max(gap);
        ensure!(gap < 1e-3, "{}: 1 - min V = {gap:e}", f.name);
    }
    let img = two_color(160, 120, [200, 40, 40], [40, 60, 200]);
    let (_, _, _, labels, graph) = prepare(&img, &cfg).map_err(|e| e.to_string())?;
    let state = propagate(&graph, &labels, &cfg.propagation()).map_err(|e| e.to_string())?;
    let (lo, hi) = state.values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    ensure!(hi > lo, "early-stopped V on the two-color image is uniform ({lo})");
    Ok(format!(
        "max 1 - V at {limit} steps {worst:e}; two-color early stop at {} steps spans [{lo:.6}, {hi:.6}]",
        state.iterations
    ))
}

fn stochastic_and_monotone() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut graphs = Vec::new();
    for _ in 0..50 {
        let n = rng.gen_range(2..=50);
        let entries = random_entries(&mut rng, n);
        graphs.push(AffinityGraph::from_weights(n, entries, BoundarySet::from_ids([])).unwrap());
    }
    let cfg = PipelineConfig::default();
    for f in synthetic_suite() {
        let (_, _, _, _, graph) = prepare(&f.image, &cfg).map_err(|e| e.to_string())?;
        graphs.push(graph);
    }
    let mut worst: f64 = 0.0;
    for (g, graph) in graphs.iter().enumerate() {
        for i in 0..graph.n() {
            let d = (graph.transition().row_sum(i) - 1.0).abs();
            worst = worst.max(d);
            ensure!(d <= 1e-12, "graph {g} row {i}: sum off by {d:e}");
        }
    }
    let mut steps = 0;
    let mut g = 0;
    while steps < 1000 {
        let graph = &graphs[g % graphs.len()];
        let labels = random_subset(&mut rng, graph.n(), graph.n());
        let mut prop = Propagator::new(graph, &labels).unwrap();
        for _ in 0..rng.gen_range(1..=40) {
            let before = prop.values().to_vec();
            prop.step();
            steps += 1;
            for (i, (a, b)) in before.iter().zip(prop.values()).enumerate() {
                ensure!(b >= a, "graph {g} node {i} decreased from {a} to {b}");
            }
        }
        g += 1;
    }
    Ok(format!("{} graphs, max row-sum error {worst:e}; {steps} steps monotone", graphs.len()))
}

fn compactness_gate() -> Check {
    let c1 = compactness(&[0.02; 40]).unwrap().value;
    let c5 = compactness(&[0.45; 40]).unwrap().value;
    let uniform: Vec<f64> = (0..100).map(|i| (i / 10) as f64 / 10.0 + 0.05).collect();
    let c3 = compactness(&uniform).unwrap().value;
    ensure!(c1 == 1.0 && c5 == 5.0 && c3 == 3.0, "C = {c1}, {c5}, {c3}");

    let bimodal: Vec<f64> = (0..100).map(|i| if i % 5 == 0 { 1.0 } else { 0.0 }).collect();
    let kept = compactness(&bimodal).unwrap();
    let routed = compactness(&[0.45; 40]).unwrap();
    let gate = GateOrientation::default();
    ensure!(kept.value == 1.0, "bimodal C = {}", kept.value);
    ensure!(!gate.routes(&kept, 1.6), "bimodal map was routed");
    ensure!(gate.routes(&routed, 1.6), "mid-value map was kept");

    let cfg = PipelineConfig::default();
    let fixture = &synthetic_suite()[1];
    let run = lps::pipeline::run_image(&fixture.image, &fixture.name, &cfg).map_err(|e| e.to_string())?;
    ensure!(run.record.route == Route::InnerOnly, "{} routed inter with C = {}", fixture.name, run.record.compactness);
    let mid = lps::pipeline::run_image(&mid_gray_gradient(), "gradient", &cfg).map_err(|e| e.to_string())?;
    ensure!(mid.record.route == Route::Inter, "gradient kept with C = {}", mid.record.compactness);
    Ok(format!(
        "C = 1, 5, 3 exact; gate keeps bimodal, routes C = 5; {} C = {}, gradient C = {:.3}",
        fixture.name, run.record.compactness, mid.record.compactness
    ))
}

fn metric_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut pairs = 0;
    while pairs < 1000 {
        let map: Vec<u8> = (0..64).map(|_| rng.gen()).collect();
        let fg = rng.gen_range(0.05..0.7);
        let gt_bytes: Vec<u8> = (0..64).map(|_| if rng.gen::<f64>() < fg { rng.gen_range(128..=255) } else { rng.gen_range(0..=127) }).collect();
        let truth: Vec<bool> = gt_bytes.iter().map(|&g| g > 127).collect();
        if !truth.iter().any(|&t| t) {
            continue;
        }
        pairs += 1;
        let gt = GroundTruth::from_gray(8, 8, &gt_bytes, "random").unwrap();
        let counts = confusion_counts(&map, &gt).unwrap();
        let metrics = evaluate_map("random", &map, &gt, &Default::default()).unwrap();
        for t in 0..=255u16 {
            let (mut tp, mut fp, mut fneg) = (0u64, 0u64, 0u64);
            for (&m, &g) in map.iter().zip(&truth) {
                let p = m as u16 >= t;
                tp += (p && g) as u64;
                fp += (p && !g) as u64;
                fneg += (!p && g) as u64;
            }
            let c = counts[t as usize];
            ensure!((c.tp, c.fp, c.fn_) == (tp, fp, fneg), "pair {pairs} t {t}: counts differ");
            let precision = if tp + fp == 0 { 1.0 } else { tp as f64 / (tp + fp) as f64 };
            let recall = tp as f64 / (tp + fneg) as f64;
            let d = (metrics.curve.precision[t as usize] - precision).abs().max((metrics.curve.recall[t as usize] - recall).abs());
            ensure!(d < 1e-12, "pair {pairs} t {t}: PR off by {d:e}");
        }
        let s: Vec<f64> = map.iter().map(|&m| m as f64 / 255.0).collect();
        let ta = 1.5 * s.iter().sum::<f64>() / 64.0;
        let pred: Vec<bool> = s.iter().map(|&v| v >= ta).collect();
        let (mut tp, mut fp, mut fneg, mut union) = (0.0, 0.0, 0.0, 0.0);
        for (&p, &g) in pred.iter().zip(&truth) {
            tp += (p && g) as u8 as f64;
            fp += (p && !g) as u8 as f64;
            fneg += (!p && g) as u8 as f64;
            union += (p || g) as u8 as f64;
        }
        let precision = if tp + fp == 0.0 { 1.0 } else { tp / (tp + fp) };
        let recall = tp / (tp + fneg);
        let f = if 0.3 * precision + recall == 0.0 { 0.0 } else { 1.3 * precision * recall / (0.3 * precision + recall) };
        let iou = if union == 0.0 { 0.0 } else { tp / union };
        let mae = s.iter().zip(&truth).map(|(&v, &g)| (v - g as u8 as f64).abs()).sum::<f64>() / 64.0;
        for (name, got, want) in [
            ("precision", metrics.precision, precision),
            ("recall", metrics.recall, recall),
            ("F", metrics.f_measure, f),
            ("IoU", metrics.overlap, iou),
            ("MAE", metrics.mae, mae),
        ] {
            ensure!((got - want).abs() < 1e-12, "pair {pairs}: {name} {got} vs {want}");
        }
    }
    let f = f_measure(0.8, 0.4, 0.3);
    ensure!((f - 0.65).abs() < 1e-12, "F(0.8, 0.4) = {f}");
    // 2x4 object inside a 4x4 prediction.
    let gt: Vec<bool> = (0..64).map(|i| (2..4).contains(&(i / 8)) && (2..6).contains(&(i % 8))).collect();
    let pred: Vec<bool> = (0..64).map(|i| (2..6).contains(&(i / 8)) && (2..6).contains(&(i % 8))).collect();
    let iou = overlap(&pred, &gt);
    ensure!((iou - 0.5).abs() < 1e-12, "dilated IoU = {iou}");
    Ok("1000 random 8x8 pairs match brute force; F(0.8, 0.4) = 0.65, dilated IoU = 0.5".to_string())
}

fn objectness_analytics() -> Check {
    let (w, h) = (160, 120);
    let score = |win: Window, p: f64| WindowScore {
        window: win,
        ms: 1.0,
        cc: 1.0,
        ed: p,
        p,
    };
    let p = 0.73;
    let single = pixel_objectness(&[score(Window::new(70, 50, 90, 70), p)], w, h);
    let center = single[60 * w + 80];
    let offset = single[60 * w + 120];
    ensure!((center - p).abs() < 1e-9, "center {center}");
    let want = p * (-0.5f64).exp();
    ensure!((offset - want).abs() < 1e-9, "offset {offset} vs {want}");

    let a = score(Window::new(10, 5, 60, 40), 0.4);
    let b = score(Window::new(100, 70, 150, 110), 0.9);
    let both = pixel_objectness(&[a, b], w, h);
    let (sa, sb) = (pixel_objectness(&[a], w, h), pixel_objectness(&[b], w, h));
    let d = both.iter().zip(sa.iter().zip(&sb)).map(|(x, (y, z))| (x - y - z).abs()).fold(0.0, f64::max);
    ensure!(d < 1e-12, "superposition off by {d:e}");
    Ok(format!("center {center}, offset ratio {:.12}, superposition {d:e}", offset / center))
}

fn end_to_end_suite() -> Check {
    let dir = fixtures_dir();
    for f in synthetic_suite() {
        let img = load_image(&dir.join("images").join(format!("{}.png", f.name))).map_err(|e| e.to_string())?;
        ensure!(img == f.image, "{} image on disk differs from the generator", f.name);
        let gt = GroundTruth::load(&dir.join("gt").join(format!("{}.png", f.name))).map_err(|e| e.to_string())?;
        let mask: Vec<bool> = f.mask.iter().map(|&m| m > 0).collect();
        ensure!(gt.mask == mask, "{} mask on disk differs from the generator", f.name);
    }
    let out = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = PipelineConfig::default();
    let start = Instant::now();
    let paths = list_images(&dir.join("images")).map_err(|e| e.to_string())?;
    let report = run_batch(&paths, out.path(), &cfg, 1, &RunOptions::default()).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    ensure!(report.failures.is_empty(), "failures: {:?}", report.failures);
    let metrics = evaluate_batch(&report, out.path(), &dir.join("gt"), &cfg).map_err(|e| e.to_string())?;
    ensure!(metrics.images.len() == 10, "{} images scored", metrics.images.len());
    let m = &metrics.mean;
    ensure!(m.overlap >= 0.80, "mean IoU {:.4} < 0.80", m.overlap);
    ensure!(m.mae <= 0.15, "mean MAE {:.4} > 0.15", m.mae);
    ensure!(secs < 60.0, "took {secs:.1} s");
    Ok(format!("mean IoU {:.4}, MAE {:.4}, F {:.4}, {secs:.2} s", m.overlap, m.mae, m.f_measure))
}

fn msra_report() -> Check {
    let (Ok(images), Ok(gt)) = (std::env::var("LPS_MSRA_IMAGES"), std::env::var("LPS_MSRA_GT")) else {
        return Ok("report only; LPS_MSRA_IMAGES / LPS_MSRA_GT not set, skipped (expected F in [0.80, 0.92])".to_string());
    };
    let out = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = PipelineConfig::default();
    let paths = list_images(Path::new(&images)).map_err(|e| e.to_string())?;
    let workers = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    let report = run_batch(&paths, out.path(), &cfg, workers, &RunOptions::default()).map_err(|e| e.to_string())?;
    let metrics = evaluate_dataset(out.path(), Path::new(&gt), &cfg.evaluation()).map_err(|e| e.to_string())?;
    let m = &metrics.mean;
    Ok(format!(
        "report only; {} images, precision {:.4}, F {:.4}, IoU {:.4}, MAE {:.4}, inter fraction {:.3} (expected F in [0.80, 0.92])",
        metrics.images.len(),
        m.precision,
        m.f_measure,
        m.overlap,
        m.mae,
        report.summary.inter_fraction
    ))
}

fn gate_consistency() -> Check {
    let dir = fixtures_dir();
    let out = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = PipelineConfig::default();
    let paths = list_images(&dir.join("images")).map_err(|e| e.to_string())?;
    let report = run_batch(&paths, out.path(), &cfg, 2, &RunOptions::default()).map_err(|e| e.to_string())?;
    ensure!(report.records.len() == 10, "{} records", report.records.len());
    let mut inter = 0;
    for r in &report.records {
        let img = load_image(&dir.join("images").join(format!("{}.png", r.id))).map_err(|e| e.to_string())?;
        let (_, _, _, labels, graph) = prepare(&img, &cfg).map_err(|e| e.to_string())?;
        let inner = propagate(&graph, &labels, &cfg.propagation()).map_err(|e| e.to_string())?;
        let c = compactness(&background_to_saliency(&inner.values)).unwrap().value;
        ensure!(c == r.compactness, "{}: offline C {c} vs reported {}", r.id, r.compactness);
        let gated = c >= cfg.gamma2;
        ensure!(gated == r.gate_passed, "{}: gate flag disagrees with C = {c}", r.id);
        match r.route {
            Route::Inter => {
                ensure!(gated && r.object_labels > 0, "{}: inter with C = {c}, |O| = {}", r.id, r.object_labels);
                inter += 1;
            }
            Route::InnerOnly => ensure!(!gated || r.object_labels == 0, "{}: kept with C = {c}", r.id),
        }
    }
    let fraction = inter as f64 / report.records.len() as f64;
    ensure!(
        fraction == report.summary.inter_fraction,
        "reported inter fraction {} vs offline {fraction}",
        report.summary.inter_fraction
    );
    Ok(format!("{inter}/10 inter, every inter route has C >= {}", cfg.gamma2))
}

fn determinism() -> Check {
    let dir = fixtures_dir();
    let cfg = PipelineConfig::default();
    let paths = list_images(&dir.join("images")).map_err(|e| e.to_string())?;
    let (a, b) = (tempfile::tempdir().map_err(|e| e.to_string())?, tempfile::tempdir().map_err(|e| e.to_string())?);
    run_batch(&paths, a.path(), &cfg, 1, &RunOptions::default()).map_err(|e| e.to_string())?;
    run_batch(&paths, b.path(), &cfg, 4, &RunOptions::default()).map_err(|e| e.to_string())?;
    let read_all = |d: &Path| -> BTreeMap<String, Vec<u8>> {
        std::fs::read_dir(d)
            .unwrap()
            .map(|e| e.unwrap().path())
            .filter(|p| p.file_name().unwrap() != "timings.csv")
            .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
            .collect()
    };
    let (fa, fb) = (read_all(a.path()), read_all(b.path()));
    ensure!(fa.keys().eq(fb.keys()), "file sets differ");
    for (name, bytes) in &fa {
        ensure!(&fb[name] == bytes, "{name} differs between runs");
    }
    ensure!(fa.contains_key("report.json") && fa.contains_key("runs.csv"), "reports missing");
    Ok(format!("{} files bit-identical across workers = 1 and 4", fa.len()))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("propagation matches dense oracles", propagation_oracle),
        ("harmonic limit and early-stop transient", harmonic_limit),
        ("row-stochastic affinity, monotone propagation", stochastic_and_monotone),
        ("compactness values and gate", compactness_gate),
        ("metrics match brute force", metric_oracle),
        ("pixel objectness analytics", objectness_analytics),
        ("synthetic suite IoU / MAE / runtime", end_to_end_suite),
        ("MSRA-1000 report", msra_report),
        ("gate consistency on the suite", gate_consistency),
        ("batch determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            Err(e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        match outcome {
            Ok(detail) => println!("acceptance {:02} PASS  {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("acceptance {:02} FAIL  {name}: {why}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
