//! Deterministic synthetic images with ground-truth masks.

use std::path::Path;

use image::GrayImage;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::imaging::RgbRaster;
use crate::{Error, Result};

pub const SUITE_WIDTH: usize = 160;
pub const SUITE_HEIGHT: usize = 120;

#[derive(Clone, Debug)]
pub struct Fixture {
    pub name: String,
    pub image: RgbRaster,
    /// 255 for object pixels, 0 elsewhere.
    pub mask: Vec<u8>,
}

impl Fixture {
    pub fn object_fraction(&self) -> f64 {
        self.mask.iter().filter(|&&m| m > 0).count() as f64 / self.mask.len() as f64
    }

    pub fn mask_image(&self) -> GrayImage {
        GrayImage::from_raw(self.image.width() as u32, self.image.height() as u32, self.mask.clone())
            .expect("mask matches image size")
    }
}

#[derive(Clone, Copy)]
enum Shape {
    Rect { x0: f64, y0: f64, x1: f64, y1: f64 },
    Ellipse { cx: f64, cy: f64, rx: f64, ry: f64 },
    Triangle { a: (f64, f64), b: (f64, f64), c: (f64, f64) },
    Cross { cx: f64, cy: f64, arm: f64, half: f64 },
}

impl Shape {
    fn contains(&self, x: f64, y: f64) -> bool {
        match *self {
            Shape::Rect { x0, y0, x1, y1 } => x >= x0 && x < x1 && y >= y0 && y < y1,
            Shape::Ellipse { cx, cy, rx, ry } => ((x - cx) / rx).powi(2) + ((y - cy) / ry).powi(2) <= 1.0,
            Shape::Triangle { a, b, c } => {
                let side = |p: (f64, f64), q: (f64, f64)| (q.0 - p.0) * (y - p.1) - (q.1 - p.1) * (x - p.0);
                let (d1, d2, d3) = (side(a, b), side(b, c), side(c, a));
                (d1 >= 0.0 && d2 >= 0.0 && d3 >= 0.0) || (d1 <= 0.0 && d2 <= 0.0 && d3 <= 0.0)
            }
            Shape::Cross { cx, cy, arm, half } => {
                let (dx, dy) = ((x - cx).abs(), (y - cy).abs());
                (dx <= arm && dy <= half) || (dx <= half && dy <= arm)
            }
        }
    }
}

#[derive(Clone, Copy)]
enum Background {
    Plain([u8; 3]),
    /// Base color with uniform per-pixel noise of the given amplitude.
    Noise([u8; 3], i32),
    /// Horizontal stripes alternating between two colors.
    Stripes([u8; 3], [u8; 3], usize),
    /// Vertical linear ramp between two colors.
    Ramp([u8; 3], [u8; 3]),
}

fn jitter(c: [u8; 3], rng: &mut ChaCha8Rng, amp: i32) -> [u8; 3] {
    let n = rng.gen_range(-amp..=amp);
    c.map(|v| (v as i32 + n).clamp(0, 255) as u8)
}

fn compose(name: &str, seed: u64, bg: Background, shape: Shape, color: [u8; 3], object_noise: i32) -> Fixture {
    let (w, h) = (SUITE_WIDTH, SUITE_HEIGHT);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mask = Vec::with_capacity(w * h);
    let image = RgbRaster::from_fn(w, h, |x, y| {
        let inside = shape.contains(x as f64 + 0.5, y as f64 + 0.5);
        mask.push(if inside { 255 } else { 0 });
        if inside {
            return if object_noise > 0 { jitter(color, &mut rng, object_noise) } else { color };
        }
        match bg {
            Background::Plain(c) => c,
            Background::Noise(c, amp) => jitter(c, &mut rng, amp),
            Background::Stripes(a, b, period) => {
                if (y / period) % 2 == 0 {
                    a
                } else {
                    b
                }
            }
            Background::Ramp(a, b) => {
                let t = y as f64 / (h - 1) as f64;
                [0, 1, 2].map(|i| (a[i] as f64 + t * (b[i] as f64 - a[i] as f64)).round() as u8)
            }
        }
    });
    Fixture {
        name: name.to_string(),
        image,
        mask,
    }
}

/// Ten 160x120 images, each with one high-contrast object covering
/// between 5% and 40% of the frame, on plain or textured backgrounds.
pub fn synthetic_suite() -> Vec<Fixture> {
    use Background::*;
    use Shape::*;
    vec![
        compose("01_red_square", 1, Plain([200, 200, 200]), Rect { x0: 50.0, y0: 30.0, x1: 110.0, y1: 90.0 }, [200, 20, 20], 0),
        compose("02_blue_disk", 2, Plain([235, 235, 225]), Ellipse { cx: 80.0, cy: 60.0, rx: 30.0, ry: 30.0 }, [30, 60, 200], 0),
        compose(
            "03_yellow_ellipse",
            3,
            Noise([40, 90, 50], 10),
            Ellipse { cx: 82.0, cy: 58.0, rx: 45.0, ry: 30.0 },
            [240, 220, 40],
            0,
        ),
        compose("04_small_dark_square", 4, Noise([200, 200, 190], 8), Rect { x0: 64.0, y0: 44.0, x1: 95.0, y1: 75.0 }, [40, 30, 60], 0),
        compose("05_large_rect", 5, Plain([70, 110, 160]), Rect { x0: 30.0, y0: 21.0, x1: 130.0, y1: 97.0 }, [250, 170, 60], 0),
        compose(
            "06_orange_triangle",
            6,
            Stripes([110, 120, 140], [120, 130, 150], 6),
            Triangle { a: (80.0, 22.0), b: (40.0, 98.0), c: (120.0, 98.0) },
            [240, 120, 20],
            0,
        ),
        compose("07_magenta_disk", 7, Plain([220, 205, 170]), Ellipse { cx: 70.0, cy: 55.0, rx: 25.0, ry: 25.0 }, [200, 30, 160], 0),
        compose("08_cyan_rect", 8, Noise([60, 60, 60], 12), Rect { x0: 45.0, y0: 35.0, x1: 115.0, y1: 85.0 }, [40, 210, 220], 6),
        compose(
            "09_green_ellipse",
            9,
            Ramp([190, 190, 190], [150, 150, 150]),
            Ellipse { cx: 80.0, cy: 60.0, rx: 48.0, ry: 38.0 },
            [30, 160, 50],
            0,
        ),
        compose(
            "10_white_cross",
            10,
            Noise([30, 40, 110], 10),
            Cross { cx: 80.0, cy: 60.0, arm: 36.0, half: 12.0 },
            [245, 245, 245],
            0,
        ),
    ]
}

/// Red square on light gray, 19% of the frame.
pub fn red_square_on_gray() -> Fixture {
    synthetic_suite().swap_remove(0)
}

/// Left half one color, right half another.
pub fn two_color(width: usize, height: usize, left: [u8; 3], right: [u8; 3]) -> RgbRaster {
    RgbRaster::from_fn(width, height, |x, _| if x < width / 2 { left } else { right })
}

/// Smooth mid-gray ramp with no distinct object; the inner map comes out
/// full of mid values.
pub fn mid_gray_gradient() -> RgbRaster {
    let (w, h) = (SUITE_WIDTH, SUITE_HEIGHT);
    let (cx, cy) = (w as f64 / 2.0, h as f64 / 2.0);
    let rmax = (cx * cx + cy * cy).sqrt();
    RgbRaster::from_fn(w, h, |x, y| {
        let r = ((x as f64 + 0.5 - cx).powi(2) + (y as f64 + 0.5 - cy).powi(2)).sqrt() / rmax;
        let v = (150.0 - 60.0 * r).round() as u8;
        [v, v, v]
    })
}

/// `cells x cells` checkerboard of `cell`-pixel squares.
pub fn checkerboard(cells: usize, cell: usize) -> RgbRaster {
    RgbRaster::from_fn(cells * cell, cells * cell, |x, y| {
        if (x / cell + y / cell).is_multiple_of(2) {
            [0, 0, 0]
        } else {
            [255, 255, 255]
        }
    })
}

/// Writes `images/<name>.png` and `gt/<name>.png` for each fixture.
pub fn write_suite(fixtures: &[Fixture], dir: &Path) -> Result<()> {
    let (images, gt) = (dir.join("images"), dir.join("gt"));
    for d in [&images, &gt] {
        std::fs::create_dir_all(d).map_err(|source| Error::Io {
            path: d.to_path_buf(),
            source,
        })?;
    }
    for f in fixtures {
        f.image.save_png(&images.join(format!("{}.png", f.name)))?;
        let path = gt.join(format!("{}.png", f.name));
        f.mask_image().save(&path).map_err(|e| Error::Write {
            path,
            reason: e.to_string(),
        })?;
    }
    Ok(())
}
