//! Window objectness from three cues and the objectness label set.
//!
//! Candidate windows are scored by multi-scale spectral residual saliency
//! (MS), center-surround color histogram contrast (CC) and edge density
//! near the window border (ED). Each cue is min-max normalized over the
//! sampled windows and the cues are multiplied into a window probability.
//! Window probabilities are spread over pixels with a Gaussian centered on
//! each window, averaged over superpixels, and thresholded into labels.

use std::fmt::Write as _;

use image::{imageops, ImageBuffer, Luma};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex64;
use serde::Serialize;

use crate::fft::Fft2;
use crate::graph::normalize;
use crate::imaging::{LabRaster, RgbRaster};
use crate::segmentation::SuperpixelMap;
use crate::{Error, Result};

pub const DEFAULT_MS_SCALES: [usize; 3] = [16, 32, 64];

/// Window bounds, inclusive on both ends.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Window {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl Window {
    pub fn new(x0: usize, y0: usize, x1: usize, y1: usize) -> Self {
        assert!(x0 <= x1 && y0 <= y1, "window corners out of order");
        Window { x0, y0, x1, y1 }
    }

    pub fn width(&self) -> usize {
        self.x1 - self.x0 + 1
    }

    pub fn height(&self) -> usize {
        self.y1 - self.y0 + 1
    }

    pub fn area(&self) -> usize {
        self.width() * self.height()
    }

    pub fn center(&self) -> (f64, f64) {
        ((self.x0 + self.x1) as f64 / 2.0, (self.y0 + self.y1) as f64 / 2.0)
    }

    /// Same center, each side scaled by `1/sqrt(2)` (half the area), kept at
    /// least one pixel smaller than the window per side when possible.
    pub fn shrunk(&self) -> Window {
        let shrink = |lo: usize, len: usize| -> (usize, usize) {
            if len < 2 {
                return (lo, lo + len - 1);
            }
            let inner = ((len as f64 / std::f64::consts::SQRT_2).round() as usize).clamp(1, len - 1);
            let start = lo + (len - inner) / 2;
            (start, start + inner - 1)
        };
        let (x0, x1) = shrink(self.x0, self.width());
        let (y0, y1) = shrink(self.y0, self.height());
        Window { x0, y0, x1, y1 }
    }

    /// Twice the size on each axis around the same center, clipped to `w x h`.
    pub fn dilated(&self, w: usize, h: usize) -> Window {
        let grow = |lo: usize, hi: usize, len: usize, limit: usize| -> (usize, usize) {
            let before = len / 2;
            let after = len - before;
            (lo.saturating_sub(before), (hi + after).min(limit - 1))
        };
        let (x0, x1) = grow(self.x0, self.x1, self.width(), w);
        let (y0, y1) = grow(self.y0, self.y1, self.height(), h);
        Window { x0, y0, x1, y1 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct WindowScore {
    pub window: Window,
    pub ms: f64,
    pub cc: f64,
    pub ed: f64,
    pub p: f64,
}

/// Summed-area table over a row-major raster.
#[derive(Clone, Debug)]
struct Integral {
    width: usize,
    sums: Vec<f64>,
}

impl Integral {
    fn new(values: &[f64], width: usize, height: usize) -> Self {
        let stride = width + 1;
        let mut sums = vec![0.0; stride * (height + 1)];
        for y in 0..height {
            let mut row = 0.0;
            for x in 0..width {
                row += values[y * width + x];
                sums[(y + 1) * stride + x + 1] = sums[y * stride + x + 1] + row;
            }
        }
        Integral { width, sums }
    }

    fn sum(&self, w: &Window) -> f64 {
        let s = self.width + 1;
        self.sums[(w.y1 + 1) * s + w.x1 + 1] - self.sums[w.y0 * s + w.x1 + 1] - self.sums[(w.y1 + 1) * s + w.x0]
            + self.sums[w.y0 * s + w.x0]
    }
}

/// Spectral residual saliency at one resolution, values in [0, 1].
#[derive(Clone, Debug)]
pub struct ScaleMap {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
    integral: Integral,
}

impl ScaleMap {
    fn new(width: usize, height: usize, values: Vec<f64>) -> Self {
        let integral = Integral::new(&values, width, height);
        ScaleMap {
            width,
            height,
            values,
            integral,
        }
    }

    /// Mean value over the part of the map covered by an image-space window.
    fn window_mean(&self, win: &Window, img_w: usize, img_h: usize) -> f64 {
        let map = |lo: usize, hi: usize, img: usize, len: usize| -> (usize, usize) {
            let a = (lo * len) / img;
            let b = (((hi + 1) * len).div_ceil(img)).saturating_sub(1).clamp(a, len - 1);
            (a, b)
        };
        let (x0, x1) = map(win.x0, win.x1, img_w, self.width);
        let (y0, y1) = map(win.y0, win.y1, img_h, self.height);
        let w = Window { x0, y0, x1, y1 };
        self.integral.sum(&w) / w.area() as f64
    }
}

fn box3_replicate(values: &[f64], w: usize, h: usize) -> Vec<f64> {
    let at = |x: i64, y: i64| values[(y.clamp(0, h as i64 - 1) as usize) * w + x.clamp(0, w as i64 - 1) as usize];
    let mut out = vec![0.0; w * h];
    for y in 0..h as i64 {
        for x in 0..w as i64 {
            let mut s = 0.0;
            for dy in -1..=1 {
                for dx in -1..=1 {
                    s += at(x + dx, y + dy);
                }
            }
            out[y as usize * w + x as usize] = s / 9.0;
        }
    }
    out
}

pub(crate) fn gaussian_blur(values: &[f64], w: usize, h: usize, sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil().max(1.0) as i64;
    let kernel: Vec<f64> = (-radius..=radius).map(|d| (-(d * d) as f64 / (2.0 * sigma * sigma)).exp()).collect();
    let total: f64 = kernel.iter().sum();
    let kernel: Vec<f64> = kernel.iter().map(|k| k / total).collect();
    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w as i64 {
            tmp[y * w + x as usize] = kernel
                .iter()
                .enumerate()
                .map(|(k, c)| c * values[y * w + (x + k as i64 - radius).clamp(0, w as i64 - 1) as usize])
                .sum();
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h as i64 {
        for x in 0..w {
            out[y as usize * w + x] = kernel
                .iter()
                .enumerate()
                .map(|(k, c)| c * tmp[(y + k as i64 - radius).clamp(0, h as i64 - 1) as usize * w + x])
                .sum();
        }
    }
    out
}

/// Spectrum bins weaker than this fraction of the peak are treated as empty:
/// they are left out of the residual, and the floor is added inside the log
/// so exact zeros (common in synthetic images) do not dominate the 3x3 mean.
const SPECTRUM_FLOOR: f64 = 1e-3;

/// Spectral residual saliency of a grayscale raster at its own resolution:
/// log-amplitude minus its 3x3 mean, recombined with the phase, inverse
/// transformed, squared, blurred and min-max normalized.
pub fn spectral_residual(gray: &[f64], w: usize, h: usize) -> Vec<f64> {
    let (lo, hi) = gray.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if hi - lo <= 1e-12 * hi.abs().max(1.0) {
        return vec![0.0; w * h];
    }
    let fft = Fft2::new(w, h);
    let mut spectrum: Vec<Complex64> = gray.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft.forward(&mut spectrum);
    let peak = spectrum.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let floor = peak * SPECTRUM_FLOOR;
    let log_amp: Vec<f64> = spectrum.iter().map(|c| (c.norm() + floor).ln()).collect();
    let smoothed = box3_replicate(&log_amp, w, h);
    for (i, c) in spectrum.iter_mut().enumerate() {
        *c = if c.norm() < floor {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::from_polar((log_amp[i] - smoothed[i]).exp(), c.arg())
        };
    }
    fft.inverse(&mut spectrum);
    let energy: Vec<f64> = spectrum.iter().map(|c| c.norm_sqr()).collect();
    let sigma = 2.5 * w.max(h) as f64 / 64.0;
    normalize(&gaussian_blur(&energy, w, h, sigma.max(0.5)))
}

/// One spectral residual map per resize width (height follows the aspect
/// ratio). Scales must be positive and no wider than the image.
pub fn spectral_residual_map(img: &RgbRaster, scales: &[usize]) -> Result<Vec<ScaleMap>> {
    if scales.is_empty() {
        return Err(Error::invalid("ms_scales", "at least one scale is required"));
    }
    let (w, h) = (img.width(), img.height());
    let gray = img.to_gray();
    scales
        .iter()
        .map(|&s| {
            if s == 0 || s > w {
                return Err(Error::invalid("ms_scales", format!("scale {s} does not fit an image {w} wide")));
            }
            let sh = ((s as f64 * h as f64 / w as f64).round() as usize).max(1);
            let resized = if s == w && sh == h {
                gray.clone()
            } else {
                let buf: ImageBuffer<Luma<f32>, Vec<f32>> =
                    ImageBuffer::from_raw(w as u32, h as u32, gray.iter().map(|&v| (v / 255.0) as f32).collect())
                        .expect("buffer length matches dimensions");
                imageops::resize(&buf, s as u32, sh as u32, imageops::FilterType::Triangle)
                    .into_raw()
                    .into_iter()
                    .map(|v| f64::from(v) * 255.0)
                    .collect()
            };
            Ok(ScaleMap::new(s, sh, spectral_residual(&resized, s, sh)))
        })
        .collect()
}

/// Max over scales of the mean spectral residual value inside the window.
pub fn score_ms(win: &Window, maps: &[ScaleMap], img_w: usize, img_h: usize) -> f64 {
    maps.iter().map(|m| m.window_mean(win, img_w, img_h)).fold(0.0, f64::max)
}

const CC_BINS: usize = 8;

/// Per-pixel index into an 8x8x8 histogram of unit-scaled LAB.
#[derive(Clone, Debug)]
pub struct ColorBins {
    width: usize,
    height: usize,
    bins: Vec<u16>,
}

impl ColorBins {
    pub fn new(lab: &LabRaster) -> Self {
        let q = |v: f64| ((v * CC_BINS as f64).floor() as usize).min(CC_BINS - 1);
        let bins = lab
            .unit_view()
            .iter()
            .map(|u| (q(u[0]) * CC_BINS * CC_BINS + q(u[1]) * CC_BINS + q(u[2])) as u16)
            .collect();
        ColorBins {
            width: lab.width(),
            height: lab.height(),
            bins,
        }
    }

    fn accumulate(&self, win: &Window, hist: &mut [f64], sign: f64) {
        for y in win.y0..=win.y1 {
            for &b in &self.bins[y * self.width + win.x0..=y * self.width + win.x1] {
                hist[b as usize] += sign;
            }
        }
    }
}

/// Chi-squared distance `0.5 * sum (p - q)^2 / (p + q)` between the
/// normalized color histograms of the window and its surround ring; lies in
/// [0, 1]. A window without surround scores 0.
pub fn score_cc(win: &Window, bins: &ColorBins) -> f64 {
    let outer = win.dilated(bins.width, bins.height);
    let ring_area = outer.area() - win.area();
    if ring_area == 0 {
        return 0.0;
    }
    let nb = CC_BINS * CC_BINS * CC_BINS;
    let mut inside = vec![0.0; nb];
    let mut ring = vec![0.0; nb];
    bins.accumulate(win, &mut inside, 1.0);
    bins.accumulate(&outer, &mut ring, 1.0);
    bins.accumulate(win, &mut ring, -1.0);
    let (ni, nr) = (win.area() as f64, ring_area as f64);
    let chi2: f64 = inside
        .iter()
        .zip(&ring)
        .filter(|(a, b)| **a + **b > 0.0)
        .map(|(a, b)| {
            let (p, q) = (a / ni, b / nr);
            if p + q > 0.0 {
                (p - q).powi(2) / (p + q)
            } else {
                0.0
            }
        })
        .sum();
    (0.5 * chi2).clamp(0.0, 1.0)
}

/// Binary edge raster with a summed-area table for ring counts.
#[derive(Clone, Debug)]
pub struct EdgeMap {
    width: usize,
    edges: Vec<bool>,
    integral: Integral,
}

impl EdgeMap {
    pub fn from_mask(width: usize, height: usize, edges: Vec<bool>) -> Self {
        assert_eq!(edges.len(), width * height);
        let as_f: Vec<f64> = edges.iter().map(|&e| if e { 1.0 } else { 0.0 }).collect();
        EdgeMap {
            width,
            integral: Integral::new(&as_f, width, height),
            edges,
        }
    }

    /// Sobel gradient magnitude of the luma, with the top 10% of nonzero
    /// magnitudes marked as edgels.
    pub fn sobel_top_decile(img: &RgbRaster) -> Self {
        let (w, h) = (img.width(), img.height());
        let gray = img.to_gray();
        let at = |x: i64, y: i64| gray[(y.clamp(0, h as i64 - 1) as usize) * w + x.clamp(0, w as i64 - 1) as usize];
        let mut mag = vec![0.0; w * h];
        for y in 0..h as i64 {
            for x in 0..w as i64 {
                let gx = at(x + 1, y - 1) + 2.0 * at(x + 1, y) + at(x + 1, y + 1)
                    - at(x - 1, y - 1)
                    - 2.0 * at(x - 1, y)
                    - at(x - 1, y + 1);
                let gy = at(x - 1, y + 1) + 2.0 * at(x, y + 1) + at(x + 1, y + 1)
                    - at(x - 1, y - 1)
                    - 2.0 * at(x, y - 1)
                    - at(x + 1, y - 1);
                mag[y as usize * w + x as usize] = (gx * gx + gy * gy).sqrt();
            }
        }
        let mut sorted = mag.clone();
        sorted.sort_by(f64::total_cmp);
        let cut = sorted[((sorted.len() as f64 * 0.9).floor() as usize).min(sorted.len() - 1)];
        let edges = mag.iter().map(|&m| m > 0.0 && m >= cut).collect();
        EdgeMap::from_mask(w, h, edges)
    }

    pub fn is_edge(&self, x: usize, y: usize) -> bool {
        self.edges[y * self.width + x]
    }

    fn count(&self, win: &Window) -> f64 {
        self.integral.sum(win)
    }
}

/// Edgel density in the ring between the window and its half-area shrink.
/// This is the raw density; sampling normalizes it across windows.
pub fn score_ed(win: &Window, edges: &EdgeMap) -> f64 {
    let inner = win.shrunk();
    let ring_area = (win.area() - inner.area()) as f64;
    if ring_area <= 0.0 {
        return 0.0;
    }
    ((edges.count(win) - edges.count(&inner)) / ring_area).max(0.0)
}

/// Naive-Bayes style product of independent cue scores.
pub fn combine_cues(ms: f64, cc: f64, ed: f64) -> f64 {
    ms * cc * ed
}

/// Min-max normalization over the window sample. A constant cue carries no
/// ranking information: it maps to 1 when positive and 0 when zero.
fn normalize_cue(values: &[f64]) -> Vec<f64> {
    let (lo, hi) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if hi - lo > 0.0 {
        values.iter().map(|&v| (v - lo) / (hi - lo)).collect()
    } else {
        vec![if hi > 0.0 { 1.0 } else { 0.0 }; values.len()]
    }
}

/// Precomputed per-image data shared by all window scorers.
pub struct CueContext {
    width: usize,
    height: usize,
    ms_maps: Vec<ScaleMap>,
    bins: ColorBins,
    edges: EdgeMap,
}

impl CueContext {
    pub fn new(img: &RgbRaster, lab: &LabRaster, scales: &[usize]) -> Result<Self> {
        if lab.width() != img.width() || lab.height() != img.height() {
            return Err(Error::DimensionMismatch {
                expected: (img.width(), img.height()),
                actual: (lab.width(), lab.height()),
            });
        }
        Ok(CueContext {
            width: img.width(),
            height: img.height(),
            ms_maps: spectral_residual_map(img, scales)?,
            bins: ColorBins::new(lab),
            edges: EdgeMap::sobel_top_decile(img),
        })
    }

    pub fn ms_maps(&self) -> &[ScaleMap] {
        &self.ms_maps
    }

    pub fn edges(&self) -> &EdgeMap {
        &self.edges
    }

    pub fn ms(&self, win: &Window) -> f64 {
        score_ms(win, &self.ms_maps, self.width, self.height)
    }

    pub fn cc(&self, win: &Window) -> f64 {
        score_cc(win, &self.bins)
    }

    pub fn ed(&self, win: &Window) -> f64 {
        score_ed(win, &self.edges)
    }
}

fn random_window(rng: &mut ChaCha8Rng, w: usize, h: usize) -> Window {
    let min_w = ((w as f64 * 0.1).ceil() as usize).clamp(2.min(w), w);
    let min_h = ((h as f64 * 0.1).ceil() as usize).clamp(2.min(h), h);
    let ww = rng.gen_range(min_w..=w);
    let wh = rng.gen_range(min_h..=h);
    let x0 = rng.gen_range(0..=w - ww);
    let y0 = rng.gen_range(0..=h - wh);
    Window::new(x0, y0, x0 + ww - 1, y0 + wh - 1)
}

/// Picks `m` indices without replacement with probability proportional to
/// `weights` (Efraimidis-Spirakis keys). Zero-weight items are only drawn
/// after every positive one, in random order.
fn weighted_sample(rng: &mut ChaCha8Rng, weights: &[f64], m: usize) -> Vec<usize> {
    let mut keys: Vec<(f64, f64, usize)> = weights
        .iter()
        .enumerate()
        .map(|(i, &wt)| {
            let u: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
            let tie: f64 = rng.gen();
            let key = if wt > 0.0 { u.ln() / wt } else { f64::NEG_INFINITY };
            (key, tie, i)
        })
        .collect();
    keys.sort_by(|a, b| b.0.total_cmp(&a.0).then(b.1.total_cmp(&a.1)).then(a.2.cmp(&b.2)));
    keys.into_iter().take(m).map(|k| k.2).collect()
}

/// Draws `10 m` uniform candidate windows (each side at least 10% of the
/// image side), keeps `m` of them sampled proportionally to their MS score,
/// then scores CC and ED and combines the normalized cues.
pub fn sample_windows(ctx: &CueContext, m: usize, seed: u64) -> Result<Vec<WindowScore>> {
    if m == 0 {
        return Err(Error::invalid("M", "window count must be >= 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let candidates: Vec<Window> = (0..10 * m).map(|_| random_window(&mut rng, ctx.width, ctx.height)).collect();
    let ms_raw: Vec<f64> = candidates.iter().map(|w| ctx.ms(w)).collect();
    let picked = weighted_sample(&mut rng, &ms_raw, m);

    let windows: Vec<Window> = picked.iter().map(|&i| candidates[i]).collect();
    let ms = normalize_cue(&picked.iter().map(|&i| ms_raw[i]).collect::<Vec<_>>());
    let cc = normalize_cue(&windows.iter().map(|w| ctx.cc(w)).collect::<Vec<_>>());
    let ed = normalize_cue(&windows.iter().map(|w| ctx.ed(w)).collect::<Vec<_>>());
    Ok(windows
        .into_iter()
        .enumerate()
        .map(|(k, window)| WindowScore {
            window,
            ms: ms[k],
            cc: cc[k],
            ed: ed[k],
            p: combine_cues(ms[k], cc[k], ed[k]),
        })
        .collect())
}

/// `O(p) = sum_m P_m exp(-((x - xc)^2 / 2 sx^2 + (y - yc)^2 / 2 sy^2))` with
/// `sx = W/4`, `sy = H/4`, summed over windows in sample order.
pub fn pixel_objectness(scores: &[WindowScore], width: usize, height: usize) -> Vec<f64> {
    let sx = 0.25 * width as f64;
    let sy = 0.25 * height as f64;
    let gx: Vec<Vec<f64>> = scores
        .iter()
        .map(|s| {
            let (cx, _) = s.window.center();
            (0..width).map(|x| (-(x as f64 - cx).powi(2) / (2.0 * sx * sx)).exp()).collect()
        })
        .collect();
    let gy: Vec<Vec<f64>> = scores
        .iter()
        .map(|s| {
            let (_, cy) = s.window.center();
            (0..height).map(|y| (-(y as f64 - cy).powi(2) / (2.0 * sy * sy)).exp()).collect()
        })
        .collect();
    let mut out = vec![0.0; width * height];
    for y in 0..height {
        let weights: Vec<f64> = scores.iter().zip(&gy).map(|(s, g)| s.p * g[y]).collect();
        for x in 0..width {
            out[y * width + x] = weights.iter().zip(&gx).fold(0.0, |acc, (wy, g)| acc + wy * g[x]);
        }
    }
    out
}

/// Mean pixel objectness per superpixel.
pub fn region_objectness(pixel: &[f64], sp: &SuperpixelMap) -> Vec<f64> {
    let mut sums = vec![0.0; sp.n()];
    for (&l, &v) in sp.labels().iter().zip(pixel) {
        sums[l] += v;
    }
    sums.iter()
        .zip(sp.regions())
        .map(|(s, r)| s / r.pixel_count as f64)
        .collect()
}

/// Regions whose min-max normalized objectness reaches `gamma1`.
pub fn select_object_labels(regional: &[f64], gamma1: f64) -> Vec<usize> {
    normalize(regional)
        .iter()
        .enumerate()
        .filter(|&(_, &v)| v >= gamma1)
        .map(|(i, _)| i)
        .collect()
}

#[derive(Clone, Debug)]
pub struct ObjectnessConfig {
    pub windows: usize,
    pub seed: u64,
    pub gamma1: f64,
    pub scales: Vec<usize>,
}

impl Default for ObjectnessConfig {
    fn default() -> Self {
        ObjectnessConfig {
            windows: 1000,
            seed: 7,
            gamma1: 0.8,
            scales: DEFAULT_MS_SCALES.to_vec(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ObjectnessMaps {
    pub width: usize,
    pub height: usize,
    pub pixel: Vec<f64>,
    pub regional: Vec<f64>,
    pub normalized: Vec<f64>,
    pub windows: Vec<WindowScore>,
    pub labels: Vec<usize>,
}

/// Full objectness stage for one image. MS scales wider than the image are
/// replaced by the image width.
pub fn objectness(img: &RgbRaster, lab: &LabRaster, sp: &SuperpixelMap, cfg: &ObjectnessConfig) -> Result<ObjectnessMaps> {
    let mut scales: Vec<usize> = cfg.scales.iter().map(|&s| s.min(img.width())).collect();
    scales.dedup();
    let ctx = CueContext::new(img, lab, &scales)?;
    let windows = sample_windows(&ctx, cfg.windows, cfg.seed)?;
    let pixel = pixel_objectness(&windows, img.width(), img.height());
    let regional = region_objectness(&pixel, sp);
    let normalized = normalize(&regional);
    let labels = select_object_labels(&regional, cfg.gamma1);
    Ok(ObjectnessMaps {
        width: img.width(),
        height: img.height(),
        pixel,
        regional,
        normalized,
        windows,
        labels,
    })
}

pub fn windows_csv(scores: &[WindowScore]) -> String {
    let mut out = String::from("x0,y0,x1,y1,ms,cc,ed,p\n");
    for s in scores {
        let w = s.window;
        let _ = writeln!(out, "{},{},{},{},{},{},{},{}", w.x0, w.y0, w.x1, w.y1, s.ms, s.cc, s.ed, s.p);
    }
    out
}
