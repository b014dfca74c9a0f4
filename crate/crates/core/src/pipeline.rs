//! End-to-end runs: smoothing, superpixels, inner propagation, the
//! compactness gate, optional co-transduction, and pixel coherence.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::coherence::{pixel_coherence, render, render_scaled, MapSource, PixelSaliencyMap};
use crate::config::{PipelineConfig, Smoother};
use crate::evaluation::{evaluate_map, images_by_stem, load_map_for, write_text, GroundTruth, MetricsReport};
use crate::fusion::{compactness, cotransduct_traced, trace_csv, CompactnessScore, TraceRow};
use crate::graph::{background_to_saliency, build_affinity, propagate, select_boundary_labels, AffinityGraph};
use crate::imaging::{l0_smooth, load_image, rgb_to_lab, LabRaster, RgbRaster};
use crate::objectness::{objectness, windows_csv, ObjectnessMaps};
use crate::segmentation::{boundary_nodes, slic_segment, SuperpixelMap};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Route {
    #[serde(rename = "inner")]
    InnerOnly,
    #[serde(rename = "inter")]
    Inter,
}

impl Route {
    pub fn as_str(self) -> &'static str {
        match self {
            Route::InnerOnly => "inner",
            Route::Inter => "inter",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StageTiming {
    pub stage: &'static str,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunRecord {
    pub id: String,
    pub width: usize,
    pub height: usize,
    pub route: Route,
    /// Compactness of the inner map.
    pub compactness: f64,
    /// Whether the compactness gate asked for inter propagation.
    pub gate_passed: bool,
    pub superpixels: usize,
    pub boundary_labels: usize,
    pub object_labels: usize,
    pub inner_iterations: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub inter_iterations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    #[serde(skip)]
    pub timings: Vec<StageTiming>,
}

/// Intermediate results kept for stage dumps and offline checks.
#[derive(Clone, Debug)]
pub struct Stages {
    pub smoothed: RgbRaster,
    pub lab: LabRaster,
    pub superpixels: SuperpixelMap,
    pub graph: AffinityGraph,
    pub boundary_labels: Vec<usize>,
    pub inner_values: Vec<f64>,
    pub inner_saliency: Vec<f64>,
    pub compactness: CompactnessScore,
    pub objectness: Option<ObjectnessMaps>,
    pub inter_trace: Vec<TraceRow>,
    pub regional: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub map: PixelSaliencyMap,
    pub record: RunRecord,
    pub stages: Stages,
}

struct Timer {
    timings: Vec<StageTiming>,
}

impl Timer {
    fn run<T>(&mut self, stage: &'static str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let start = Instant::now();
        let out = f().map_err(|e| e.at_stage(stage));
        self.timings.push(StageTiming {
            stage,
            seconds: start.elapsed().as_secs_f64(),
        });
        out
    }
}

/// Smoothing, LAB conversion, superpixels, boundary labels and affinity.
pub fn prepare(img: &RgbRaster, cfg: &PipelineConfig) -> Result<(RgbRaster, LabRaster, SuperpixelMap, Vec<usize>, AffinityGraph)> {
    let mut timer = Timer { timings: Vec::new() };
    prepare_timed(img, cfg, &mut timer)
}

fn prepare_timed(
    img: &RgbRaster,
    cfg: &PipelineConfig,
    timer: &mut Timer,
) -> Result<(RgbRaster, LabRaster, SuperpixelMap, Vec<usize>, AffinityGraph)> {
    let smoothed = timer.run("smooth", || match cfg.smoother {
        Smoother::L0 => l0_smooth(img, cfg.l0_lambda, cfg.l0_kappa),
        Smoother::None => Ok(img.clone()),
    })?;
    let lab = rgb_to_lab(&smoothed);
    let sp = timer.run("segment", || slic_segment(&lab, cfg.n_target, cfg.slic_compactness))?;
    let boundary = boundary_nodes(&sp);
    let labels = timer.run("boundary", || select_boundary_labels(&boundary, &sp, cfg.drop_frac))?;
    let graph = timer.run("affinity", || build_affinity(&sp, &boundary, cfg.sigma_c2))?;
    Ok((smoothed, lab, sp, labels, graph))
}

/// Runs the full pipeline on an in-memory image.
pub fn run_image(img: &RgbRaster, id: &str, cfg: &PipelineConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let mut timer = Timer { timings: Vec::new() };
    let (smoothed, lab, sp, boundary_labels, graph) = prepare_timed(img, cfg, &mut timer)?;
    let inner = timer.run("inner", || propagate(&graph, &boundary_labels, &cfg.propagation()))?;
    let inner_saliency = background_to_saliency(&inner.values);
    let score = compactness(&inner_saliency).map_err(|e| e.at_stage("gate"))?;
    let gate_passed = cfg.gate().routes(&score, cfg.gamma2);

    let mut route = Route::InnerOnly;
    let mut regional = inner_saliency.clone();
    let mut obj = None;
    let mut inter_iterations = None;
    let mut inter_trace = Vec::new();
    let mut object_labels = 0;
    if gate_passed {
        // Objectness cues read the unsmoothed image.
        let input_lab = rgb_to_lab(img);
        let maps = timer.run("objectness", || objectness(img, &input_lab, &sp, &cfg.objectness()))?;
        object_labels = maps.labels.len();
        let usable = !maps.labels.is_empty() && boundary_labels.iter().any(|b| maps.labels.binary_search(b).is_err());
        if usable {
            let result = timer.run("inter", || cotransduct_traced(&graph, &boundary_labels, &maps.labels, &cfg.cotransduction()))?;
            route = Route::Inter;
            regional = result.saliency;
            inter_iterations = Some(result.iterations);
            inter_trace = result.trace;
        }
        obj = Some(maps);
    }
    let source = match route {
        Route::InnerOnly => MapSource::Inner,
        Route::Inter => MapSource::Inter,
    };
    let map = timer
        .run("coherence", || pixel_coherence(&regional, &sp, &lab, cfg.k1, cfg.k2))?
        .with_source(source);
    let record = RunRecord {
        id: id.to_string(),
        width: img.width(),
        height: img.height(),
        route,
        compactness: score.value,
        gate_passed,
        superpixels: sp.n(),
        boundary_labels: boundary_labels.len(),
        object_labels,
        inner_iterations: inner.iterations,
        inter_iterations,
        output: None,
        timings: timer.timings,
    };
    Ok(RunOutput {
        map,
        record,
        stages: Stages {
            smoothed,
            lab,
            superpixels: sp,
            graph,
            boundary_labels,
            inner_values: inner.values,
            inner_saliency,
            compactness: score,
            objectness: obj,
            inter_trace,
            regional,
        },
    })
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Longest image side after loading; 0 keeps the original size.
    pub resize_max: usize,
    pub dump_stages: bool,
}

fn stem_of(path: &Path) -> String {
    path.file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("image")
        .to_string()
}

/// Loads, runs and writes `<out_dir>/<stem>.png` (plus stage dumps under
/// `<out_dir>/stages/` when requested).
pub fn run_single(path: &Path, out_dir: &Path, cfg: &PipelineConfig, opts: &RunOptions) -> Result<RunOutput> {
    let start = Instant::now();
    let img = load_image(path).map_err(|e| e.at_stage("load"))?;
    let img = img.resize_max_dim(opts.resize_max);
    let load_time = start.elapsed().as_secs_f64();
    let id = stem_of(path);
    let mut out = run_image(&img, &id, cfg)?;
    out.record.timings.insert(
        0,
        StageTiming {
            stage: "load",
            seconds: load_time,
        },
    );
    let name = format!("{id}.png");
    let start = Instant::now();
    render(&out.map, &out_dir.join(&name)).map_err(|e| e.at_stage("write"))?;
    if opts.dump_stages {
        dump_stages(&out, &img, &out_dir.join("stages")).map_err(|e| e.at_stage("write"))?;
    }
    out.record.timings.push(StageTiming {
        stage: "write",
        seconds: start.elapsed().as_secs_f64(),
    });
    out.record.output = Some(name);
    Ok(out)
}

fn paint_regions(values: &[f64], sp: &SuperpixelMap) -> Vec<f64> {
    sp.labels().iter().map(|&l| values[l]).collect()
}

/// Writes smoothed image, superpixel boundaries, inner map, objectness map
/// and window scores, co-transduction trace, and the final regional map.
pub fn dump_stages(out: &RunOutput, input: &RgbRaster, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let id = &out.record.id;
    let s = &out.stages;
    let sp = &s.superpixels;
    let (w, h) = (sp.width(), sp.height());
    s.smoothed.save_png(&dir.join(format!("{id}_smoothed.png")))?;
    let labels = sp.labels();
    let edges = RgbRaster::from_fn(w, h, |x, y| {
        let l = labels[y * w + x];
        let edge = (x + 1 < w && labels[y * w + x + 1] != l) || (y + 1 < h && labels[(y + 1) * w + x] != l);
        if edge {
            [255, 0, 0]
        } else {
            input.pixel(x, y)
        }
    });
    edges.save_png(&dir.join(format!("{id}_superpixels.png")))?;
    render_scaled(&paint_regions(&s.inner_saliency, sp), w, h, &dir.join(format!("{id}_inner.png")))?;
    render_scaled(&paint_regions(&s.regional, sp), w, h, &dir.join(format!("{id}_regional.png")))?;
    if let Some(obj) = &s.objectness {
        render_scaled(&obj.pixel, w, h, &dir.join(format!("{id}_objectness.png")))?;
        write_text(&dir.join(format!("{id}_windows.csv")), &windows_csv(&obj.windows))?;
    }
    if !s.inter_trace.is_empty() {
        write_text(&dir.join(format!("{id}_trace.csv")), &trace_csv(&s.inter_trace))?;
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Failure {
    pub input: String,
    pub error: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BatchSummary {
    pub images: usize,
    pub inner: usize,
    pub inter: usize,
    pub failed: usize,
    pub inter_fraction: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BatchReport {
    pub config: BTreeMap<String, String>,
    pub records: Vec<RunRecord>,
    pub failures: Vec<Failure>,
    pub summary: BatchSummary,
}

impl BatchReport {
    pub fn new(cfg: &PipelineConfig, mut records: Vec<RunRecord>, mut failures: Vec<Failure>) -> Self {
        records.sort_by(|a, b| a.id.cmp(&b.id));
        failures.sort_by(|a, b| a.input.cmp(&b.input));
        let inter = records.iter().filter(|r| r.route == Route::Inter).count();
        let summary = BatchSummary {
            images: records.len(),
            inner: records.len() - inter,
            inter,
            failed: failures.len(),
            inter_fraction: if records.is_empty() { 0.0 } else { inter as f64 / records.len() as f64 },
        };
        BatchReport {
            config: cfg.to_map(),
            records,
            failures,
            summary,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn runs_csv(&self) -> String {
        let mut out = String::from("id,route,compactness,gate_passed,superpixels,boundary_labels,object_labels,inner_iterations,inter_iterations\n");
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                r.id,
                r.route.as_str(),
                r.compactness,
                r.gate_passed,
                r.superpixels,
                r.boundary_labels,
                r.object_labels,
                r.inner_iterations,
                r.inter_iterations.map(|i| i.to_string()).unwrap_or_default()
            );
        }
        out
    }

    pub fn timings_csv(&self) -> String {
        let mut out = String::from("id,stage,seconds\n");
        for r in &self.records {
            for t in &r.timings {
                let _ = writeln!(out, "{},{},{}", r.id, t.stage, t.seconds);
            }
        }
        out
    }

    pub fn failures_csv(&self) -> String {
        let mut out = String::from("input,error\n");
        for f in &self.failures {
            let _ = writeln!(out, "{},\"{}\"", f.input, f.error.replace('"', "'"));
        }
        out
    }

    /// `report.json` and `runs.csv` are deterministic; wall-clock times go
    /// to `timings.csv`. `failures.csv` is written only when something failed.
    pub fn write(&self, dir: &Path) -> Result<()> {
        write_text(&dir.join("report.json"), &self.to_json())?;
        write_text(&dir.join("runs.csv"), &self.runs_csv())?;
        write_text(&dir.join("timings.csv"), &self.timings_csv())?;
        let manifest = dir.join("failures.csv");
        if self.failures.is_empty() {
            if manifest.exists() {
                std::fs::remove_file(&manifest).map_err(|source| Error::Io { path: manifest, source })?;
            }
        } else {
            write_text(&manifest, &self.failures_csv())?;
        }
        Ok(())
    }
}

/// Image files directly inside `dir`, sorted by path.
pub fn list_images(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut paths: Vec<PathBuf> = images_by_stem(dir)?.into_values().collect();
    paths.sort();
    Ok(paths)
}

/// Runs every image in `paths` on a pool of `workers` threads and writes
/// maps plus reports into `out_dir`. Per-image failures are collected, not
/// fatal.
pub fn run_batch(paths: &[PathBuf], out_dir: &Path, cfg: &PipelineConfig, workers: usize, opts: &RunOptions) -> Result<BatchReport> {
    cfg.validate()?;
    if paths.is_empty() {
        return Err(Error::EmptyInput(out_dir.to_path_buf()));
    }
    std::fs::create_dir_all(out_dir).map_err(|source| Error::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::invalid("workers", e.to_string()))?;
    let results: Vec<(PathBuf, Result<RunRecord>)> = pool.install(|| {
        paths
            .par_iter()
            .map(|p| {
                log::info!("processing {}", p.display());
                (p.clone(), run_single(p, out_dir, cfg, opts).map(|o| o.record))
            })
            .collect()
    });
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for (path, res) in results {
        match res {
            Ok(r) => records.push(r),
            Err(e) => {
                log::warn!("{}: {e}", path.display());
                failures.push(Failure {
                    input: path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default(),
                    error: e.to_string(),
                });
            }
        }
    }
    let report = BatchReport::new(cfg, records, failures);
    report.write(out_dir)?;
    Ok(report)
}

/// Scores the maps written by a batch against `gt_dir`, attaching routes.
pub fn evaluate_batch(report: &BatchReport, out_dir: &Path, gt_dir: &Path, cfg: &PipelineConfig) -> Result<MetricsReport> {
    let gts = images_by_stem(gt_dir)?;
    let mut images = Vec::new();
    for r in &report.records {
        let (Some(name), Some(gt_path)) = (&r.output, gts.get(&r.id.to_lowercase())) else {
            continue;
        };
        let gt = GroundTruth::load(gt_path)?;
        let map = load_map_for(&out_dir.join(name), &gt)?;
        let mut m = evaluate_map(&r.id, &map, &gt, &cfg.evaluation())?;
        m.route = Some(r.route.as_str().to_string());
        images.push(m);
    }
    if images.is_empty() {
        return Err(Error::NoMatchedPairs {
            maps: out_dir.to_path_buf(),
            gt: gt_dir.to_path_buf(),
        });
    }
    MetricsReport::from_images(images)
}
