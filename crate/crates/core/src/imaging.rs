//! Image ingestion, sRGB to CIE LAB conversion and L0 gradient-minimization
//! smoothing.

use std::path::Path;

use image::{imageops, RgbImage};
use rustfft::num_complex::Complex64;

use crate::fft::Fft2;
use crate::segmentation::DisjointSets;
use crate::{Error, Result};

/// 8-bit RGB image stored row-major, three bytes per pixel.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RgbRaster {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl RgbRaster {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("dimensions", "width and height must be positive"));
        }
        if data.len() != width * height * 3 {
            return Err(Error::invalid(
                "data",
                format!("expected {} bytes, got {}", width * height * 3, data.len()),
            ));
        }
        Ok(RgbRaster { width, height, data })
    }

    /// Builds a raster by evaluating `f(x, y)` for every pixel.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> [u8; 3]) -> Self {
        assert!(width > 0 && height > 0, "raster dimensions must be positive");
        let mut data = Vec::with_capacity(width * height * 3);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(x, y));
            }
        }
        RgbRaster { width, height, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.data
    }

    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn pixels(&self) -> impl Iterator<Item = [u8; 3]> + '_ {
        self.data.chunks_exact(3).map(|c| [c[0], c[1], c[2]])
    }

    /// Luma in [0, 255] with Rec. 601 weights.
    pub fn to_gray(&self) -> Vec<f64> {
        self.pixels()
            .map(|[r, g, b]| 0.299 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64)
            .collect()
    }

    pub fn to_image(&self) -> RgbImage {
        RgbImage::from_raw(self.width as u32, self.height as u32, self.data.clone())
            .expect("buffer length matches dimensions")
    }

    pub fn from_image(img: &RgbImage) -> Self {
        RgbRaster {
            width: img.width() as usize,
            height: img.height() as usize,
            data: img.as_raw().clone(),
        }
    }

    /// Downscales so the longer side is at most `max_dim`; returns a copy when
    /// the image already fits.
    pub fn resize_max_dim(&self, max_dim: usize) -> RgbRaster {
        let longest = self.width.max(self.height);
        if max_dim == 0 || longest <= max_dim {
            return self.clone();
        }
        let scale = max_dim as f64 / longest as f64;
        let w = ((self.width as f64 * scale).round() as u32).max(1);
        let h = ((self.height as f64 * scale).round() as u32).max(1);
        let resized = imageops::resize(&self.to_image(), w, h, imageops::FilterType::Triangle);
        RgbRaster::from_image(&resized)
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        self.to_image().save(path).map_err(|e| Error::Write {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })
    }
}

/// Decodes a PNG/JPEG/BMP file into an RGB raster. Grayscale and alpha
/// inputs are promoted/flattened to RGB.
pub fn load_image(path: &Path) -> Result<RgbRaster> {
    if !path.exists() {
        return Err(Error::NotFound(path.to_path_buf()));
    }
    let reader = image::ImageReader::open(path)
        .map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?
        .with_guessed_format()
        .map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
    let decoded = reader.decode().map_err(|source| Error::Decode {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(RgbRaster::from_image(&decoded.to_rgb8()))
}

const XN: f64 = 0.950_47;
const YN: f64 = 1.0;
const ZN: f64 = 1.088_83;

/// CIE LAB image in native units: L in [0, 100], a and b in [-128, 127].
#[derive(Clone, Debug, PartialEq)]
pub struct LabRaster {
    width: usize,
    height: usize,
    data: Vec<[f64; 3]>,
}

impl LabRaster {
    pub fn from_vec(width: usize, height: usize, data: Vec<[f64; 3]>) -> Result<Self> {
        if width == 0 || height == 0 || data.len() != width * height {
            return Err(Error::invalid(
                "data",
                format!("{} values for a {}x{} raster", data.len(), width, height),
            ));
        }
        Ok(LabRaster { width, height, data })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, x: usize, y: usize) -> [f64; 3] {
        self.data[y * self.width + x]
    }

    pub fn values(&self) -> &[[f64; 3]] {
        &self.data
    }

    pub fn unit(&self, x: usize, y: usize) -> [f64; 3] {
        lab_to_unit(self.get(x, y))
    }

    /// Every pixel mapped affinely to [0, 1]^3.
    pub fn unit_view(&self) -> Vec<[f64; 3]> {
        self.data.iter().map(|&v| lab_to_unit(v)).collect()
    }
}

/// Maps native LAB to the unit cube: L/100, (a+128)/255, (b+128)/255.
pub fn lab_to_unit(lab: [f64; 3]) -> [f64; 3] {
    [lab[0] / 100.0, (lab[1] + 128.0) / 255.0, (lab[2] + 128.0) / 255.0]
}

fn srgb_to_linear(c: u8) -> f64 {
    let c = c as f64 / 255.0;
    if c <= 0.040_45 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

fn lab_f(t: f64) -> f64 {
    const DELTA: f64 = 6.0 / 29.0;
    if t > DELTA * DELTA * DELTA {
        t.cbrt()
    } else {
        t / (3.0 * DELTA * DELTA) + 4.0 / 29.0
    }
}

/// sRGB (D65) to CIE LAB for a single pixel.
pub fn srgb_to_lab(rgb: [u8; 3]) -> [f64; 3] {
    let r = srgb_to_linear(rgb[0]);
    let g = srgb_to_linear(rgb[1]);
    let b = srgb_to_linear(rgb[2]);
    let x = 0.412_456_4 * r + 0.357_576_1 * g + 0.180_437_5 * b;
    let y = 0.212_672_9 * r + 0.715_152_2 * g + 0.072_175_0 * b;
    let z = 0.019_333_9 * r + 0.119_192_0 * g + 0.950_304_1 * b;
    let (fx, fy, fz) = (lab_f(x / XN), lab_f(y / YN), lab_f(z / ZN));
    let l = (116.0 * fy - 16.0).clamp(0.0, 100.0);
    let a = (500.0 * (fx - fy)).clamp(-128.0, 127.0);
    let bb = (200.0 * (fy - fz)).clamp(-128.0, 127.0);
    [l, a, bb]
}

pub fn rgb_to_lab(img: &RgbRaster) -> LabRaster {
    LabRaster {
        width: img.width,
        height: img.height,
        data: img.pixels().map(srgb_to_lab).collect(),
    }
}

/// Upper bound of the penalty weight in the half-quadratic alternation.
const L0_BETA_MAX: f64 = 1e5;

/// L0 gradient minimization by half-quadratic splitting.
///
/// Alternates between hard-thresholding the auxiliary gradient field
/// (`|h|^2 + |v|^2 < lambda/beta` zeroes it) and an FFT solve of the
/// quadratic subproblem under periodic boundaries, multiplying `beta` by
/// `kappa` each round until it exceeds 1e5. Intensities are handled in
/// [0, 1] and rounded back to 8 bits.
pub fn l0_smooth(img: &RgbRaster, lambda: f64, kappa: f64) -> Result<RgbRaster> {
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(Error::invalid("l0_lambda", format!("{lambda} is not a finite value >= 0")));
    }
    if !kappa.is_finite() || kappa <= 1.0 {
        return Err(Error::invalid("l0_kappa", format!("{kappa} is not a finite value > 1")));
    }
    if lambda == 0.0 {
        return Ok(img.clone());
    }
    let (w, h) = (img.width, img.height);
    let n = w * h;
    let fft = Fft2::new(w, h);

    let mut channels: Vec<Vec<f64>> = (0..3)
        .map(|c| img.data.iter().skip(c).step_by(3).map(|&v| v as f64 / 255.0).collect())
        .collect();
    let spectra: Vec<Vec<Complex64>> = channels
        .iter()
        .map(|ch| {
            let mut buf: Vec<Complex64> = ch.iter().map(|&v| Complex64::new(v, 0.0)).collect();
            fft.forward(&mut buf);
            buf
        })
        .collect();

    // |F(dx)|^2 + |F(dy)|^2 for forward differences with wrap-around.
    let mut grad_energy = vec![0.0; n];
    for ky in 0..h {
        let cy = 2.0 - 2.0 * (2.0 * std::f64::consts::PI * ky as f64 / h as f64).cos();
        for kx in 0..w {
            let cx = 2.0 - 2.0 * (2.0 * std::f64::consts::PI * kx as f64 / w as f64).cos();
            grad_energy[ky * w + kx] = cx + cy;
        }
    }

    let mut dx = vec![vec![0.0; n]; 3];
    let mut dy = vec![vec![0.0; n]; 3];
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    // Gradient support only shrinks: a pair that is flat in the input or
    // was zeroed once stays zero.
    let mut live_x = vec![false; n];
    let mut live_y = vec![false; n];
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let p = img.pixel(x, y);
            live_x[i] = img.pixel((x + 1) % w, y) != p;
            live_y[i] = img.pixel(x, (y + 1) % h) != p;
        }
    }
    let mut beta = 2.0 * lambda;
    while beta < L0_BETA_MAX {
        for c in 0..3 {
            let s = &channels[c];
            for y in 0..h {
                let row = y * w;
                let below = ((y + 1) % h) * w;
                for x in 0..w {
                    let right = row + (x + 1) % w;
                    dx[c][row + x] = s[right] - s[row + x];
                    dy[c][row + x] = s[below + x] - s[row + x];
                }
            }
        }
        let cutoff = lambda / beta;
        for i in 0..n {
            let energy: f64 = (0..3).map(|c| dx[c][i] * dx[c][i] + dy[c][i] * dy[c][i]).sum();
            live_x[i] &= energy >= cutoff;
            live_y[i] &= energy >= cutoff;
            for c in 0..3 {
                if !live_x[i] {
                    dx[c][i] = 0.0;
                }
                if !live_y[i] {
                    dy[c][i] = 0.0;
                }
            }
        }
        for c in 0..3 {
            // Negative divergence of (dx, dy): the adjoint of the forward difference.
            for y in 0..h {
                let row = y * w;
                let above = ((y + h - 1) % h) * w;
                for x in 0..w {
                    let left = row + (x + w - 1) % w;
                    let div = dx[c][left] - dx[c][row + x] + dy[c][above + x] - dy[c][row + x];
                    buf[row + x] = Complex64::new(div, 0.0);
                }
            }
            fft.forward(&mut buf);
            for i in 0..n {
                buf[i] = (spectra[c][i] + buf[i] * beta) / (1.0 + beta * grad_energy[i]);
            }
            fft.inverse(&mut buf);
            for (dst, src) in channels[c].iter_mut().zip(&buf) {
                *dst = src.re;
            }
        }
        beta *= kappa;
    }
    flatten_zero_gradient_runs(&mut channels, &dx, &dy, w, h);

    let mut data = vec![0u8; n * 3];
    for (c, ch) in channels.iter().enumerate() {
        for (i, &v) in ch.iter().enumerate() {
            data[i * 3 + c] = (v * 255.0).round().clamp(0.0, 255.0) as u8;
        }
    }
    Ok(RgbRaster { width: w, height: h, data })
}

/// Number of 4-adjacent pixel pairs whose colors differ.
/// Replaces each group of pixels joined by zeroed (non-wrapping) gradients
/// with its mean, so the result is exactly piecewise constant on the final
/// L0 support instead of approximately so.
fn flatten_zero_gradient_runs(channels: &mut [Vec<f64>], dx: &[Vec<f64>], dy: &[Vec<f64>], w: usize, h: usize) {
    let n = w * h;
    let mut sets = DisjointSets::new(vec![1; n]);
    let zero = |g: &[Vec<f64>], i: usize| g.iter().all(|c| c[i] == 0.0);
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            if x + 1 < w && zero(dx, i) {
                sets.attach(i + 1, i);
            }
            if y + 1 < h && zero(dy, i) {
                sets.attach(i + w, i);
            }
        }
    }
    let roots: Vec<usize> = (0..n).map(|i| sets.find(i)).collect();
    for ch in channels.iter_mut() {
        let mut sum = vec![0.0; n];
        let mut count = vec![0usize; n];
        for (i, &r) in roots.iter().enumerate() {
            sum[r] += ch[i];
            count[r] += 1;
        }
        for (i, &r) in roots.iter().enumerate() {
            ch[i] = sum[r] / count[r] as f64;
        }
    }
}

pub fn nonzero_gradient_pairs(img: &RgbRaster) -> usize {
    let mut count = 0;
    for y in 0..img.height {
        for x in 0..img.width {
            let p = img.pixel(x, y);
            if x + 1 < img.width && img.pixel(x + 1, y) != p {
                count += 1;
            }
            if y + 1 < img.height && img.pixel(x, y + 1) != p {
                count += 1;
            }
        }
    }
    count
}
