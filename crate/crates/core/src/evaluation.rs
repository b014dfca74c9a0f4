//! Ground truth loading and saliency metrics: fixed-threshold PR curves,
//! adaptive-threshold precision/recall/F-measure, overlap (IoU) and MAE.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use image::{imageops, GrayImage, ImageReader};
use serde::Serialize;

use crate::{Error, Result};

pub const THRESHOLDS: usize = 256;

#[derive(Clone, Debug, PartialEq)]
pub struct GroundTruth {
    pub width: usize,
    pub height: usize,
    /// `true` for salient pixels.
    pub mask: Vec<bool>,
    pub path: PathBuf,
}

impl GroundTruth {
    /// Pixels above 127 are salient.
    pub fn from_gray(width: usize, height: usize, gray: &[u8], path: impl Into<PathBuf>) -> Result<Self> {
        if gray.len() != width * height {
            return Err(Error::DimensionMismatch {
                expected: (width, height),
                actual: (gray.len(), 1),
            });
        }
        Ok(GroundTruth {
            width,
            height,
            mask: gray.iter().map(|&g| g > 127).collect(),
            path: path.into(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let img = load_gray(path)?;
        GroundTruth::from_gray(img.width() as usize, img.height() as usize, img.as_raw(), path)
    }

    pub fn positives(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }
}

fn load_gray(path: &Path) -> Result<GrayImage> {
    if !path.exists() {
        return Err(Error::NotFound(path.to_path_buf()));
    }
    let decode = |source| Error::Decode {
        path: path.to_path_buf(),
        source,
    };
    let reader = ImageReader::open(path)
        .map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?
        .with_guessed_format()
        .map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
    Ok(reader.decode().map_err(decode)?.to_luma8())
}

fn check_dims(a: usize, gt: &GroundTruth) -> Result<()> {
    if a != gt.mask.len() {
        return Err(Error::DimensionMismatch {
            expected: (gt.width, gt.height),
            actual: (a, 1),
        });
    }
    Ok(())
}

/// True positive, false positive and false negative counts.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
}

impl Confusion {
    /// Precision of an empty prediction is 1.
    pub fn precision(&self) -> f64 {
        if self.tp + self.fp == 0 {
            1.0
        } else {
            self.tp as f64 / (self.tp + self.fp) as f64
        }
    }

    pub fn recall(&self) -> f64 {
        if self.tp + self.fn_ == 0 {
            0.0
        } else {
            self.tp as f64 / (self.tp + self.fn_) as f64
        }
    }
}

/// Confusion counts for `map >= t` at every `t` in `0..=255`, from
/// per-class value histograms.
pub fn confusion_counts(map: &[u8], gt: &GroundTruth) -> Result<Vec<Confusion>> {
    check_dims(map.len(), gt)?;
    let mut pos = [0u64; THRESHOLDS];
    let mut neg = [0u64; THRESHOLDS];
    for (&v, &m) in map.iter().zip(&gt.mask) {
        if m {
            pos[v as usize] += 1;
        } else {
            neg[v as usize] += 1;
        }
    }
    let total_pos: u64 = pos.iter().sum();
    let mut out = vec![Confusion::default(); THRESHOLDS];
    let (mut tp, mut fp) = (0, 0);
    for t in (0..THRESHOLDS).rev() {
        tp += pos[t];
        fp += neg[t];
        out[t] = Confusion {
            tp,
            fp,
            fn_: total_pos - tp,
        };
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PrCurve {
    pub precision: Vec<f64>,
    pub recall: Vec<f64>,
}

/// Precision and recall of `map >= t` for `t` in `0..=255`.
pub fn pr_curve(map: &[u8], gt: &GroundTruth) -> Result<PrCurve> {
    if gt.positives() == 0 {
        return Err(Error::EmptyGroundTruth(gt.path.display().to_string()));
    }
    let counts = confusion_counts(map, gt)?;
    Ok(PrCurve {
        precision: counts.iter().map(Confusion::precision).collect(),
        recall: counts.iter().map(Confusion::recall).collect(),
    })
}

/// `k` times the mean map value.
pub fn adaptive_threshold(map: &[f64], k: f64) -> f64 {
    if map.is_empty() {
        return 0.0;
    }
    k * map.iter().sum::<f64>() / map.len() as f64
}

/// `(1 + b2) P R / (b2 P + R)`, and 0 when both are 0.
pub fn f_measure(precision: f64, recall: f64, beta2: f64) -> f64 {
    let den = beta2 * precision + recall;
    if den <= 0.0 {
        0.0
    } else {
        (1.0 + beta2) * precision * recall / den
    }
}

/// Intersection over union; 0 for an empty union.
pub fn overlap(pred: &[bool], gt: &[bool]) -> f64 {
    let (mut inter, mut union) = (0usize, 0usize);
    for (&p, &g) in pred.iter().zip(gt) {
        inter += (p && g) as usize;
        union += (p || g) as usize;
    }
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

pub fn mae(map: &[f64], gt: &[bool]) -> f64 {
    if map.is_empty() {
        return 0.0;
    }
    map.iter()
        .zip(gt)
        .map(|(&s, &g)| (s - if g { 1.0 } else { 0.0 }).abs())
        .sum::<f64>()
        / map.len() as f64
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvalConfig {
    pub k_adaptive: f64,
    pub beta2: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            k_adaptive: 1.5,
            beta2: 0.3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ImageMetrics {
    pub id: String,
    pub adaptive_threshold: f64,
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
    pub overlap: f64,
    pub mae: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub route: Option<String>,
    #[serde(skip)]
    pub curve: PrCurve,
}

/// All metrics for one 8-bit map; continuous metrics use `byte / 255`.
pub fn evaluate_map(id: &str, map: &[u8], gt: &GroundTruth, cfg: &EvalConfig) -> Result<ImageMetrics> {
    let curve = pr_curve(map, gt)?;
    let s: Vec<f64> = map.iter().map(|&v| v as f64 / 255.0).collect();
    let t = adaptive_threshold(&s, cfg.k_adaptive);
    let pred: Vec<bool> = s.iter().map(|&v| v >= t).collect();
    let mut c = Confusion::default();
    for (&p, &g) in pred.iter().zip(&gt.mask) {
        match (p, g) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
            _ => {}
        }
    }
    let (precision, recall) = (c.precision(), c.recall());
    Ok(ImageMetrics {
        id: id.to_string(),
        adaptive_threshold: t,
        precision,
        recall,
        f_measure: f_measure(precision, recall, cfg.beta2),
        overlap: overlap(&pred, &gt.mask),
        mae: mae(&s, &gt.mask),
        route: None,
        curve,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MeanMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
    pub overlap: f64,
    pub mae: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricsReport {
    pub images: Vec<ImageMetrics>,
    pub mean: MeanMetrics,
    /// Unweighted per-threshold mean of the image curves.
    #[serde(skip)]
    pub curve: PrCurve,
}

impl MetricsReport {
    pub fn from_images(images: Vec<ImageMetrics>) -> Result<Self> {
        if images.is_empty() {
            return Err(Error::NoMatchedPairs {
                maps: PathBuf::new(),
                gt: PathBuf::new(),
            });
        }
        let n = images.len() as f64;
        let avg = |f: fn(&ImageMetrics) -> f64| images.iter().map(f).sum::<f64>() / n;
        let mean = MeanMetrics {
            precision: avg(|m| m.precision),
            recall: avg(|m| m.recall),
            f_measure: avg(|m| m.f_measure),
            overlap: avg(|m| m.overlap),
            mae: avg(|m| m.mae),
        };
        let curve = PrCurve {
            precision: (0..THRESHOLDS)
                .map(|t| images.iter().map(|m| m.curve.precision[t]).sum::<f64>() / n)
                .collect(),
            recall: (0..THRESHOLDS)
                .map(|t| images.iter().map(|m| m.curve.recall[t]).sum::<f64>() / n)
                .collect(),
        };
        Ok(MetricsReport { images, mean, curve })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("metrics serialize")
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("id,route,adaptive_threshold,precision,recall,f_measure,overlap,mae\n");
        for m in &self.images {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                m.id,
                m.route.as_deref().unwrap_or(""),
                m.adaptive_threshold,
                m.precision,
                m.recall,
                m.f_measure,
                m.overlap,
                m.mae
            );
        }
        out
    }

    pub fn pr_csv(&self) -> String {
        let mut out = String::from("threshold,precision,recall\n");
        for t in 0..THRESHOLDS {
            let _ = writeln!(out, "{},{},{}", t, self.curve.precision[t], self.curve.recall[t]);
        }
        out
    }

    /// Writes `metrics.json`, `metrics.csv` and `pr_curve.csv` into `dir`,
    /// creating it if needed.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|source| Error::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        for (name, body) in [
            ("metrics.json", self.to_json()),
            ("metrics.csv", self.to_csv()),
            ("pr_curve.csv", self.pr_csv()),
        ] {
            write_text(&dir.join(name), &body)?;
        }
        Ok(())
    }
}

pub(crate) fn write_text(path: &Path, body: &str) -> Result<()> {
    std::fs::write(path, body).map_err(|e| Error::Write {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

const IMAGE_EXTENSIONS: [&str; 4] = ["png", "jpg", "jpeg", "bmp"];

/// Image files in `dir` keyed by lower-cased stem; on stem clashes the
/// first path in sorted order wins.
pub fn images_by_stem(dir: &Path) -> Result<BTreeMap<String, PathBuf>> {
    let entries = std::fs::read_dir(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_file()
                && p.extension()
                    .and_then(|e| e.to_str())
                    .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
        })
        .collect();
    paths.sort();
    let mut out = BTreeMap::new();
    for p in paths {
        if let Some(stem) = p.file_stem().and_then(|s| s.to_str()) {
            out.entry(stem.to_lowercase()).or_insert(p);
        }
    }
    Ok(out)
}

/// Loads a map and resizes it to the ground-truth size when they differ.
pub fn load_map_for(path: &Path, gt: &GroundTruth) -> Result<Vec<u8>> {
    let img = load_gray(path)?;
    let img = if (img.width() as usize, img.height() as usize) == (gt.width, gt.height) {
        img
    } else {
        imageops::resize(&img, gt.width as u32, gt.height as u32, imageops::FilterType::Triangle)
    };
    Ok(img.into_raw())
}

/// Scores every map in `map_dir` that has a ground truth with the same
/// stem (case-insensitive) in `gt_dir`.
pub fn evaluate_dataset(map_dir: &Path, gt_dir: &Path, cfg: &EvalConfig) -> Result<MetricsReport> {
    let maps = images_by_stem(map_dir)?;
    let gts = images_by_stem(gt_dir)?;
    let mut images = Vec::new();
    for (stem, map_path) in &maps {
        let Some(gt_path) = gts.get(stem) else { continue };
        let gt = GroundTruth::load(gt_path)?;
        let map = load_map_for(map_path, &gt)?;
        let id = map_path.file_stem().and_then(|s| s.to_str()).unwrap_or(stem);
        images.push(evaluate_map(id, &map, &gt, cfg)?);
    }
    if images.is_empty() {
        return Err(Error::NoMatchedPairs {
            maps: map_dir.to_path_buf(),
            gt: gt_dir.to_path_buf(),
        });
    }
    MetricsReport::from_images(images)
}
