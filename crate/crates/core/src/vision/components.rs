use serde::Serialize;

use crate::model::GrayImage;

/// Foreground/background mask, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    pub width: usize,
    pub height: usize,
    pub data: Vec<bool>,
}

impl Mask {
    pub fn new(width: usize, height: usize) -> Self {
        Mask { width, height, data: vec![false; width * height] }
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> bool) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Mask { width, height, data }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.data[y * self.width + x] = v;
    }

    pub fn count(&self) -> u64 {
        self.data.iter().filter(|&&b| b).count() as u64
    }

    /// 255 for foreground, 0 for background.
    pub fn to_gray(&self) -> GrayImage {
        GrayImage {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&b| if b { 255 } else { 0 }).collect(),
        }
    }
}

/// Foreground iff intensity is strictly greater than `t`.
pub fn segment(g: &GrayImage, t: u8) -> Mask {
    Mask { width: g.width, height: g.height, data: g.data.iter().map(|&v| v > t).collect() }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelImage {
    pub width: usize,
    pub height: usize,
    /// 0 is background; components are 1..=K.
    pub labels: Vec<u32>,
}

impl LabelImage {
    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u32 {
        self.labels[y * self.width + x]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Component {
    pub label: u32,
    pub area: u64,
    /// Mean pixel coordinate as (row, col).
    pub centroid: (f64, f64),
    /// (min_row, min_col, max_row, max_col), inclusive.
    pub bbox: (usize, usize, usize, usize),
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct ComponentSet {
    pub components: Vec<Component>,
}

impl ComponentSet {
    pub fn total_area(&self) -> u64 {
        self.components.iter().map(|c| c.area).sum()
    }

    /// Drops components smaller than `min_area` pixels (sensor speckle).
    pub fn filter_min_area(&self, min_area: u64) -> ComponentSet {
        ComponentSet { components: self.components.iter().filter(|c| c.area >= min_area).cloned().collect() }
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }
}

fn find(parent: &mut [u32], mut x: u32) -> u32 {
    while parent[x as usize] != x {
        parent[x as usize] = parent[parent[x as usize] as usize];
        x = parent[x as usize];
    }
    x
}

fn union(parent: &mut [u32], a: u32, b: u32) -> u32 {
    let (ra, rb) = (find(parent, a), find(parent, b));
    let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
    parent[hi as usize] = lo;
    lo
}

/// Two-pass 8-connected labeling with union-find. Final labels are numbered
/// in the order components are first met in a row-major scan.
pub fn connected_components(mask: &Mask) -> (LabelImage, ComponentSet) {
    let (w, h) = (mask.width, mask.height);
    let mut provisional = vec![0u32; w * h];
    let mut parent: Vec<u32> = vec![0];

    for y in 0..h {
        for x in 0..w {
            if !mask.get(x, y) {
                continue;
            }
            // Already-visited 8-neighbours: W, NW, N, NE.
            let mut label = 0u32;
            let mut neighbours = [0u32; 4];
            if x > 0 {
                neighbours[0] = provisional[y * w + x - 1];
            }
            if y > 0 {
                if x > 0 {
                    neighbours[1] = provisional[(y - 1) * w + x - 1];
                }
                neighbours[2] = provisional[(y - 1) * w + x];
                if x + 1 < w {
                    neighbours[3] = provisional[(y - 1) * w + x + 1];
                }
            }
            for &n in neighbours.iter().filter(|&&n| n != 0) {
                label = if label == 0 { find(&mut parent, n) } else { union(&mut parent, label, n) };
            }
            if label == 0 {
                label = parent.len() as u32;
                parent.push(label);
            }
            provisional[y * w + x] = label;
        }
    }

    let mut remap = vec![0u32; parent.len()];
    let mut next = 0u32;
    let mut labels = vec![0u32; w * h];
    let mut stats: Vec<(u64, u64, u64, (usize, usize, usize, usize))> = Vec::new();
    for y in 0..h {
        for x in 0..w {
            let p = provisional[y * w + x];
            if p == 0 {
                continue;
            }
            let root = find(&mut parent, p) as usize;
            if remap[root] == 0 {
                next += 1;
                remap[root] = next;
                stats.push((0, 0, 0, (y, x, y, x)));
            }
            let l = remap[root];
            labels[y * w + x] = l;
            let s = &mut stats[(l - 1) as usize];
            s.0 += 1;
            s.1 += y as u64;
            s.2 += x as u64;
            s.3 = (s.3 .0.min(y), s.3 .1.min(x), s.3 .2.max(y), s.3 .3.max(x));
        }
    }

    let components = stats
        .into_iter()
        .enumerate()
        .map(|(i, (area, sum_r, sum_c, bbox))| Component {
            label: i as u32 + 1,
            area,
            centroid: (sum_r as f64 / area as f64, sum_c as f64 / area as f64),
            bbox,
        })
        .collect();
    (LabelImage { width: w, height: h, labels }, ComponentSet { components })
}
