//! SLIC superpixels, region statistics, 1- and 2-layer adjacency, and the
//! set of regions touching the image border.

use std::collections::{BTreeSet, VecDeque};

use serde::Serialize;

use crate::imaging::{lab_to_unit, LabRaster};
use crate::{Error, Result};

const SLIC_ITERATIONS: usize = 10;

#[derive(Clone, Debug, Serialize)]
pub struct Region {
    pub id: usize,
    /// Mean CIE LAB in native units.
    pub mean_lab: [f64; 3],
    /// Mean CIE LAB in the unit-cube view.
    pub mean_unit: [f64; 3],
    /// (x, y) in pixels.
    pub centroid: [f64; 2],
    pub pixel_count: usize,
    /// Regions sharing at least one 4-adjacent pixel pair, ascending.
    pub neighbors_1: Vec<usize>,
    /// Regions within graph distance 2 in the `neighbors_1` graph, ascending, excluding self.
    pub neighbors_2: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct SuperpixelMap {
    width: usize,
    height: usize,
    labels: Vec<usize>,
    regions: Vec<Region>,
}

impl SuperpixelMap {
    /// Builds a map from a dense label raster (ids `0..N`, every id used),
    /// computing region statistics and adjacency.
    pub fn from_labels(labels: Vec<usize>, lab: &LabRaster) -> Result<Self> {
        let (width, height) = (lab.width(), lab.height());
        if labels.len() != width * height {
            return Err(Error::invalid(
                "labels",
                format!("{} labels for a {}x{} image", labels.len(), width, height),
            ));
        }
        let n = labels.iter().max().map_or(0, |&m| m + 1);
        let mut sums = vec![[0.0f64; 5]; n];
        let mut counts = vec![0usize; n];
        for (i, (&l, v)) in labels.iter().zip(lab.values()).enumerate() {
            let s = &mut sums[l];
            s[0] += v[0];
            s[1] += v[1];
            s[2] += v[2];
            s[3] += (i % width) as f64;
            s[4] += (i / width) as f64;
            counts[l] += 1;
        }
        if let Some(id) = counts.iter().position(|&c| c == 0) {
            return Err(Error::invalid("labels", format!("region id {id} has no pixels")));
        }
        let regions = sums
            .iter()
            .zip(&counts)
            .enumerate()
            .map(|(id, (s, &c))| {
                let c_f = c as f64;
                let mean_lab = [s[0] / c_f, s[1] / c_f, s[2] / c_f];
                Region {
                    id,
                    mean_lab,
                    mean_unit: lab_to_unit(mean_lab),
                    centroid: [s[3] / c_f, s[4] / c_f],
                    pixel_count: c,
                    neighbors_1: Vec::new(),
                    neighbors_2: Vec::new(),
                }
            })
            .collect();
        Ok(compute_adjacency(SuperpixelMap {
            width,
            height,
            labels,
            regions,
        }))
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn n(&self) -> usize {
        self.regions.len()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn label_at(&self, x: usize, y: usize) -> usize {
        self.labels[y * self.width + x]
    }

    pub fn regions(&self) -> &[Region] {
        &self.regions
    }

    pub fn region(&self, id: usize) -> &Region {
        &self.regions[id]
    }

    /// Pixel indices of every region, each list ascending.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut members = vec![Vec::new(); self.n()];
        for (i, &l) in self.labels.iter().enumerate() {
            members[l].push(i);
        }
        members
    }
}

/// Fills `neighbors_1` (4-adjacency between pixels of different regions) and
/// `neighbors_2` (distance ≤ 2 in the `neighbors_1` graph, self excluded).
pub fn compute_adjacency(mut sp: SuperpixelMap) -> SuperpixelMap {
    let n = sp.n();
    let (w, h) = (sp.width, sp.height);
    let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    for y in 0..h {
        for x in 0..w {
            let a = sp.labels[y * w + x];
            if x + 1 < w {
                let b = sp.labels[y * w + x + 1];
                if a != b {
                    adj[a].insert(b);
                    adj[b].insert(a);
                }
            }
            if y + 1 < h {
                let b = sp.labels[(y + 1) * w + x];
                if a != b {
                    adj[a].insert(b);
                    adj[b].insert(a);
                }
            }
        }
    }
    for i in 0..n {
        let mut two: BTreeSet<usize> = adj[i].clone();
        for &j in &adj[i] {
            two.extend(adj[j].iter().copied());
        }
        two.remove(&i);
        sp.regions[i].neighbors_1 = adj[i].iter().copied().collect();
        sp.regions[i].neighbors_2 = two.into_iter().collect();
    }
    sp
}

/// Ids of regions that own at least one pixel on the image border.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BoundarySet(Vec<usize>);

impl BoundarySet {
    pub fn from_ids(ids: impl IntoIterator<Item = usize>) -> Self {
        let set: BTreeSet<usize> = ids.into_iter().collect();
        BoundarySet(set.into_iter().collect())
    }

    pub fn ids(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, id: usize) -> bool {
        self.0.binary_search(&id).is_ok()
    }
}

pub fn boundary_nodes(sp: &SuperpixelMap) -> BoundarySet {
    let (w, h) = (sp.width, sp.height);
    let mut ids = BTreeSet::new();
    for x in 0..w {
        ids.insert(sp.label_at(x, 0));
        ids.insert(sp.label_at(x, h - 1));
    }
    for y in 0..h {
        ids.insert(sp.label_at(0, y));
        ids.insert(sp.label_at(w - 1, y));
    }
    BoundarySet(ids.into_iter().collect())
}

#[derive(Clone, Copy, Debug)]
struct Center {
    lab: [f64; 3],
    x: f64,
    y: f64,
}

fn lab_dist2(a: [f64; 3], b: [f64; 3]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)
}

/// SLIC: grid-seeded k-means in (L, a, b, x, y) with distance
/// `sqrt(dc^2 + (ds/S)^2 m^2)` in native LAB, followed by connectivity
/// enforcement that merges small fragments into their largest neighbor.
pub fn slic_segment(lab: &LabRaster, n_target: usize, compactness: f64) -> Result<SuperpixelMap> {
    if n_target < 4 {
        return Err(Error::invalid("n_target", format!("{n_target} is below the minimum of 4")));
    }
    if !(compactness.is_finite() && compactness > 0.0) {
        return Err(Error::invalid("slic_compactness", format!("{compactness} is not > 0")));
    }
    let (w, h) = (lab.width(), lab.height());
    let spacing = ((w * h) as f64 / n_target as f64).sqrt();
    if (w as f64) < spacing.floor() || (h as f64) < spacing.floor() {
        return Err(Error::ImageTooSmall {
            width: w,
            height: h,
            spacing,
        });
    }
    let nx = ((w as f64 / spacing).round() as usize).max(1);
    let ny = ((h as f64 / spacing).round() as usize).max(1);
    let step_x = w as f64 / nx as f64;
    let step_y = h as f64 / ny as f64;
    let step = 0.5 * (step_x + step_y);
    let pixels = lab.values();

    let gradient = |x: usize, y: usize| -> f64 {
        let xl = x.saturating_sub(1);
        let xr = (x + 1).min(w - 1);
        let yu = y.saturating_sub(1);
        let yd = (y + 1).min(h - 1);
        lab_dist2(lab.get(xr, y), lab.get(xl, y)) + lab_dist2(lab.get(x, yd), lab.get(x, yu))
    };

    let mut centers = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let cx = (i as f64 + 0.5) * step_x - 0.5;
            let cy = (j as f64 + 0.5) * step_y - 0.5;
            let px = (cx.round() as usize).min(w - 1);
            let py = (cy.round() as usize).min(h - 1);
            // Move the seed to the lowest-gradient pixel of its 3x3 neighbourhood.
            let mut best = (gradient(px, py), None);
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    let (qx, qy) = (px as i64 + dx, py as i64 + dy);
                    if qx < 0 || qy < 0 || qx >= w as i64 || qy >= h as i64 {
                        continue;
                    }
                    let g = gradient(qx as usize, qy as usize);
                    if g < best.0 {
                        best = (g, Some((qx as usize, qy as usize)));
                    }
                }
            }
            let (x, y) = match best.1 {
                Some((qx, qy)) => (qx as f64, qy as f64),
                None => (cx, cy),
            };
            let sx = (x.round() as usize).min(w - 1);
            let sy = (y.round() as usize).min(h - 1);
            centers.push(Center {
                lab: lab.get(sx, sy),
                x,
                y,
            });
        }
    }

    let m2_over_s2 = (compactness / step).powi(2);
    let radius = step_x.max(step_y).ceil() as i64;
    let mut labels = vec![usize::MAX; w * h];
    let mut dist = vec![f64::INFINITY; w * h];
    for _ in 0..SLIC_ITERATIONS {
        dist.iter_mut().for_each(|d| *d = f64::INFINITY);
        for (k, c) in centers.iter().enumerate() {
            let x0 = (c.x.round() as i64 - radius).max(0) as usize;
            let x1 = ((c.x.round() as i64 + radius).min(w as i64 - 1)).max(0) as usize;
            let y0 = (c.y.round() as i64 - radius).max(0) as usize;
            let y1 = ((c.y.round() as i64 + radius).min(h as i64 - 1)).max(0) as usize;
            for y in y0..=y1 {
                for x in x0..=x1 {
                    let i = y * w + x;
                    let ds2 = (x as f64 - c.x).powi(2) + (y as f64 - c.y).powi(2);
                    let d = lab_dist2(pixels[i], c.lab) + ds2 * m2_over_s2;
                    if d < dist[i] {
                        dist[i] = d;
                        labels[i] = k;
                    }
                }
            }
        }
        let mut sums = vec![[0.0f64; 6]; centers.len()];
        for (i, &l) in labels.iter().enumerate() {
            if l == usize::MAX {
                continue;
            }
            let s = &mut sums[l];
            let v = pixels[i];
            s[0] += v[0];
            s[1] += v[1];
            s[2] += v[2];
            s[3] += (i % w) as f64;
            s[4] += (i / w) as f64;
            s[5] += 1.0;
        }
        for (c, s) in centers.iter_mut().zip(&sums) {
            if s[5] > 0.0 {
                c.lab = [s[0] / s[5], s[1] / s[5], s[2] / s[5]];
                c.x = s[3] / s[5];
                c.y = s[4] / s[5];
            }
        }
    }
    // Pixels no window ever reached join the nearest center spatially.
    for (i, l) in labels.iter_mut().enumerate() {
        if *l == usize::MAX {
            let (x, y) = ((i % w) as f64, (i / w) as f64);
            *l = centers
                .iter()
                .enumerate()
                .map(|(k, c)| (k, (c.x - x).powi(2) + (c.y - y).powi(2)))
                .fold((0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best })
                .0;
        }
    }

    let min_size = ((w * h) / centers.len() / 4).max(1);
    let labels = enforce_connectivity(&labels, w, h, min_size);
    SuperpixelMap::from_labels(labels, lab)
}

pub(crate) struct DisjointSets {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl DisjointSets {
    pub(crate) fn new(sizes: Vec<usize>) -> Self {
        DisjointSets {
            parent: (0..sizes.len()).collect(),
            size: sizes,
        }
    }

    pub(crate) fn find(&mut self, mut a: usize) -> usize {
        while self.parent[a] != a {
            self.parent[a] = self.parent[self.parent[a]];
            a = self.parent[a];
        }
        a
    }

    /// Attaches `child`'s set to `root`'s set.
    pub(crate) fn attach(&mut self, child: usize, root: usize) {
        let (c, r) = (self.find(child), self.find(root));
        if c != r {
            self.parent[c] = r;
            self.size[r] += self.size[c];
        }
    }
}

/// Splits every label into its 4-connected components, merges components
/// smaller than `min_size` into the largest adjacent component, and returns
/// dense ids ordered by first pixel in scan order.
fn enforce_connectivity(labels: &[usize], w: usize, h: usize, min_size: usize) -> Vec<usize> {
    let (components, sizes) = connected_components(labels, w, h);
    let n = sizes.len();
    let mut comp_adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    for y in 0..h {
        for x in 0..w {
            let a = components[y * w + x];
            if x + 1 < w {
                let b = components[y * w + x + 1];
                if a != b {
                    comp_adj[a].insert(b);
                    comp_adj[b].insert(a);
                }
            }
            if y + 1 < h {
                let b = components[(y + 1) * w + x];
                if a != b {
                    comp_adj[a].insert(b);
                    comp_adj[b].insert(a);
                }
            }
        }
    }
    let mut sets = DisjointSets::new(sizes);
    for c in 0..n {
        let root = sets.find(c);
        if sets.size[root] >= min_size {
            continue;
        }
        let mut best: Option<(usize, usize)> = None;
        for &nb in &comp_adj[c] {
            let r = sets.find(nb);
            if r == root {
                continue;
            }
            let s = sets.size[r];
            if best.is_none_or(|(bs, br)| s > bs || (s == bs && r < br)) {
                best = Some((s, r));
            }
        }
        if let Some((_, target)) = best {
            sets.attach(root, target);
        }
    }
    let mut dense = vec![usize::MAX; n];
    let mut next = 0;
    components
        .iter()
        .map(|&c| {
            let r = sets.find(c);
            if dense[r] == usize::MAX {
                dense[r] = next;
                next += 1;
            }
            dense[r]
        })
        .collect()
}

/// 4-connected components of equal labels; returns per-pixel component ids
/// (scan order of discovery) and component sizes.
pub(crate) fn connected_components(labels: &[usize], w: usize, h: usize) -> (Vec<usize>, Vec<usize>) {
    let mut comp = vec![usize::MAX; w * h];
    let mut sizes = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..w * h {
        if comp[start] != usize::MAX {
            continue;
        }
        let id = sizes.len();
        let label = labels[start];
        comp[start] = id;
        queue.push_back(start);
        let mut size = 0;
        while let Some(i) = queue.pop_front() {
            size += 1;
            let (x, y) = (i % w, i / w);
            let mut visit = |j: usize| {
                if comp[j] == usize::MAX && labels[j] == label {
                    comp[j] = id;
                    queue.push_back(j);
                }
            };
            if x > 0 {
                visit(i - 1);
            }
            if x + 1 < w {
                visit(i + 1);
            }
            if y > 0 {
                visit(i - w);
            }
            if y + 1 < h {
                visit(i + w);
            }
        }
        sizes.push(size);
    }
    (comp, sizes)
}
