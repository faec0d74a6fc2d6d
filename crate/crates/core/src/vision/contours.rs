use serde::Serialize;

use super::components::{connected_components, LabelImage, Mask};
use super::VisionError;
use crate::model::ColorImage;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct Pixel {
    pub x: usize,
    pub y: usize,
}

/// Closed walk along a component's outer border. Pixels on one-pixel-wide
/// spurs are visited on the way out and back, so a contour can list a pixel
/// twice; it never lists a pixel outside its component.
pub type Contour = Vec<Pixel>;

/// Red, the overlay color used for larval outlines.
pub const OVERLAY_RED: [u8; 3] = [255, 0, 0];

// Moore neighbourhood in clockwise screen order (y grows downward),
// starting from the west neighbour.
const RING: [(isize, isize); 8] = [(-1, 0), (-1, -1), (0, -1), (1, -1), (1, 0), (1, 1), (0, 1), (-1, 1)];

fn ring_index(dx: isize, dy: isize) -> usize {
    RING.iter().position(|&d| d == (dx, dy)).expect("offset is a Moore neighbour")
}

struct Tracer<'a> {
    labels: &'a LabelImage,
    label: u32,
}

impl Tracer<'_> {
    fn inside(&self, x: isize, y: isize) -> bool {
        x >= 0
            && y >= 0
            && (x as usize) < self.labels.width
            && (y as usize) < self.labels.height
            && self.labels.get(x as usize, y as usize) == self.label
    }

    /// Next border pixel clockwise from `p`, scanning from just after the
    /// backtrack direction. Returns the pixel and its new backtrack direction.
    fn step(&self, p: (isize, isize), back: usize) -> Option<((isize, isize), usize)> {
        for k in 1..=8 {
            let d = (back + k) % 8;
            let n = (p.0 + RING[d].0, p.1 + RING[d].1);
            if self.inside(n.0, n.1) {
                let prev = RING[(back + k - 1) % 8];
                let b = (p.0 + prev.0, p.1 + prev.1);
                return Some((n, ring_index(b.0 - n.0, b.1 - n.1)));
            }
        }
        None
    }

    /// Moore boundary trace from the component's top-left pixel. Stops when
    /// the walk is about to repeat its first move.
    fn trace(&self, start: (isize, isize)) -> Contour {
        let px = |p: (isize, isize)| Pixel { x: p.0 as usize, y: p.1 as usize };
        let mut contour = vec![px(start)];
        // The west neighbour of the top-left pixel is always outside.
        let Some(first) = self.step(start, 0) else {
            return contour;
        };
        let (mut cur, mut back) = first;
        let limit = 4 * self.labels.labels.len() + 8;
        for _ in 0..limit {
            if cur == start {
                match self.step(cur, back) {
                    Some(next) if next.0 == first.0 => break,
                    Some(next) => {
                        contour.push(px(cur));
                        (cur, back) = next;
                        continue;
                    }
                    None => break,
                }
            }
            contour.push(px(cur));
            match self.step(cur, back) {
                Some(next) => (cur, back) = next,
                None => break,
            }
        }
        contour
    }
}

/// Outer contour of every component of `labels`, in label order, each traced
/// clockwise from the component's topmost-leftmost pixel.
pub fn contours_from_labels(labels: &LabelImage) -> Vec<Contour> {
    let mut starts: Vec<Option<(isize, isize)>> = Vec::new();
    for y in 0..labels.height {
        for x in 0..labels.width {
            let l = labels.get(x, y) as usize;
            if l == 0 {
                continue;
            }
            if starts.len() < l {
                starts.resize(l, None);
            }
            if starts[l - 1].is_none() {
                starts[l - 1] = Some((x as isize, y as isize));
            }
        }
    }
    starts
        .into_iter()
        .enumerate()
        .filter_map(|(i, s)| s.map(|s| Tracer { labels, label: i as u32 + 1 }.trace(s)))
        .collect()
}

pub fn extract_contours(mask: &Mask) -> Vec<Contour> {
    contours_from_labels(&connected_components(mask).0)
}

/// Copy of `base` with every contour pixel set to `color`.
pub fn overlay_contours(base: &ColorImage, contours: &[Contour], color: [u8; 3]) -> Result<ColorImage, VisionError> {
    let mut out = base.clone();
    for p in contours.iter().flatten() {
        if p.x >= base.width || p.y >= base.height {
            return Err(VisionError::OutOfBounds { x: p.x, y: p.y, width: base.width, height: base.height });
        }
        out.set(p.x, p.y, color);
    }
    Ok(out)
}
