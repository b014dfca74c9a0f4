//! Pixel-level saliency from regional saliency, and PNG rendering.

use std::path::Path;

use image::GrayImage;
use serde::Serialize;

use crate::graph::normalize;
use crate::imaging::LabRaster;
use crate::segmentation::SuperpixelMap;
use crate::{Error, Result};

/// Which regional map a pixel map descends from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MapSource {
    #[default]
    Inner,
    Inter,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PixelSaliencyMap {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
    pub source: MapSource,
}

impl PixelSaliencyMap {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != width * height {
            return Err(Error::DimensionMismatch {
                expected: (width, height),
                actual: (values.len(), 1),
            });
        }
        Ok(PixelSaliencyMap {
            width,
            height,
            values,
            source: MapSource::Inner,
        })
    }

    pub fn with_source(mut self, source: MapSource) -> Self {
        self.source = source;
        self
    }

    /// 8-bit quantization, `floor(255 s + 0.5)`.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.values.iter().map(|&v| quantize(v)).collect()
    }

    pub fn to_image(&self) -> GrayImage {
        GrayImage::from_raw(self.width as u32, self.height as u32, self.to_bytes()).expect("buffer length matches dimensions")
    }
}

pub fn quantize(v: f64) -> u8 {
    (255.0 * v.clamp(0.0, 1.0) + 0.5).floor() as u8
}

/// Weight-normalized average of regional saliency over the pixel's own
/// region and its direct neighbors, weighted by
/// `exp(-(k1 |c_p - c_i| + k2 |z_p - z_i|))` (LAB units, pixels).
pub fn pixel_coherence_raw(regional: &[f64], sp: &SuperpixelMap, lab: &LabRaster, k1: f64, k2: f64) -> Result<Vec<f64>> {
    if regional.len() != sp.n() {
        return Err(Error::invalid(
            "regional saliency",
            format!("{} values for {} regions", regional.len(), sp.n()),
        ));
    }
    if (lab.width(), lab.height()) != (sp.width(), sp.height()) {
        return Err(Error::DimensionMismatch {
            expected: (sp.width(), sp.height()),
            actual: (lab.width(), lab.height()),
        });
    }
    for (key, v) in [("k1", k1), ("k2", k2)] {
        if !(v.is_finite() && v >= 0.0) {
            return Err(Error::invalid(key, format!("{v} is not >= 0")));
        }
    }
    let w = sp.width();
    let regions = sp.regions();
    let out = sp
        .labels()
        .iter()
        .zip(lab.values())
        .enumerate()
        .map(|(p, (&own, c))| {
            let (x, y) = ((p % w) as f64, (p / w) as f64);
            let mut num = 0.0;
            let mut den = 0.0;
            for &i in std::iter::once(&own).chain(&regions[own].neighbors_1) {
                let r = &regions[i];
                let dc = ((c[0] - r.mean_lab[0]).powi(2) + (c[1] - r.mean_lab[1]).powi(2) + (c[2] - r.mean_lab[2]).powi(2)).sqrt();
                let dz = ((x - r.centroid[0]).powi(2) + (y - r.centroid[1]).powi(2)).sqrt();
                let weight = (-(k1 * dc + k2 * dz)).exp();
                num += weight * regional[i];
                den += weight;
            }
            // Weights underflow only for absurd distances; fall back to the own region.
            if den > 0.0 {
                num / den
            } else {
                regional[own]
            }
        })
        .collect();
    Ok(out)
}

/// [`pixel_coherence_raw`] followed by min-max normalization. A constant
/// result (up to rounding) is kept as is rather than collapsed to zero.
pub fn pixel_coherence(regional: &[f64], sp: &SuperpixelMap, lab: &LabRaster, k1: f64, k2: f64) -> Result<PixelSaliencyMap> {
    let raw = pixel_coherence_raw(regional, sp, lab, k1, k2)?;
    let (lo, hi) = raw.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let values = if hi - lo <= 1e-12 {
        raw.iter().map(|v| v.clamp(0.0, 1.0)).collect()
    } else {
        normalize(&raw)
    };
    PixelSaliencyMap::new(sp.width(), sp.height(), values)
}

/// Writes the map as an 8-bit grayscale PNG.
pub fn render(map: &PixelSaliencyMap, path: &Path) -> Result<()> {
    map.to_image().save(path).map_err(|e| Error::Write {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

/// Min-max scaled 8-bit rendering of an arbitrary raster (debug dumps).
pub fn render_scaled(values: &[f64], width: usize, height: usize, path: &Path) -> Result<()> {
    render(&PixelSaliencyMap::new(width, height, normalize(values))?, path)
}
