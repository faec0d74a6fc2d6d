//! Larvae density field: growth, clustering and spindle mixing.
//!
//! The clustering model is synthetic, tuned only so closed-loop tests see
//! clusters form between aerations. Each pair of 4-neighbour cells trades
//! mass at rate `cluster_rate · (ρᵢ·aⱼ − ρⱼ·aᵢ)`, where the attractiveness
//! `a = min((ρ/ρ̄)^β, cap) · (1 + noise)` favours denser neighbours. Every
//! exchange is pairwise, so mass is conserved exactly up to rounding.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::SimError;
use crate::model::{BinGeometry, SpindleSpec};
use crate::planner::{path_length, Point2, ToolPath};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubstrateState {
    pub nx: usize,
    pub ny: usize,
    /// Cell size, meters.
    pub resolution: f64,
    /// Larvae mass per cell (arbitrary units), row-major with row = y index.
    pub density: Vec<f64>,
    /// Substrate moisture per cell, 0..=1.
    pub moisture: Vec<f64>,
    pub total_mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BiologyParams {
    /// Exponential growth rate of total mass, per hour.
    pub growth_rate: f64,
    /// Pairwise exchange rate, per hour.
    pub cluster_rate: f64,
    pub cluster_exponent: f64,
    pub attractiveness_cap: f64,
    /// Relative amplitude of the per-step attractiveness noise.
    pub noise: f64,
    /// Fractional moisture loss per day.
    pub moisture_decay_per_day: f64,
}

impl Default for BiologyParams {
    fn default() -> Self {
        BiologyParams {
            // ×10 over 12 days
            growth_rate: std::f64::consts::LN_10 / (12.0 * 24.0),
            cluster_rate: 0.5,
            cluster_exponent: 2.0,
            attractiveness_cap: 9.0,
            noise: 0.2,
            moisture_decay_per_day: 0.05,
        }
    }
}

impl SubstrateState {
    pub fn grid_dims(g: &BinGeometry, resolution: f64) -> (usize, usize) {
        (((g.x_len / resolution).round() as usize).max(1), ((g.y_len / resolution).round() as usize).max(1))
    }

    pub fn uniform(g: &BinGeometry, resolution: f64, total_mass: f64, moisture: f64) -> Self {
        let (nx, ny) = Self::grid_dims(g, resolution);
        let n = nx * ny;
        SubstrateState {
            nx,
            ny,
            resolution,
            density: vec![total_mass / n as f64; n],
            moisture: vec![moisture; n],
            total_mass,
        }
    }

    /// Half the mass spread uniformly, half in `clusters` Gaussian clumps at
    /// random positions.
    pub fn seeded_clusters(
        g: &BinGeometry,
        resolution: f64,
        total_mass: f64,
        moisture: f64,
        clusters: usize,
        rng: &mut impl Rng,
    ) -> Self {
        let mut s = Self::uniform(g, resolution, 0.0, moisture);
        let n = s.density.len();
        let mut shape = vec![1.0; n];
        for _ in 0..clusters {
            let cx = rng.gen_range(0.15..0.85) * s.nx as f64;
            let cy = rng.gen_range(0.15..0.85) * s.ny as f64;
            let sigma = rng.gen_range(0.04..0.08) * s.nx.min(s.ny) as f64 * 2.0;
            let weight = rng.gen_range(0.5..1.5);
            for y in 0..s.ny {
                for x in 0..s.nx {
                    let d2 = (x as f64 + 0.5 - cx).powi(2) + (y as f64 + 0.5 - cy).powi(2);
                    shape[y * s.nx + x] += weight * n as f64 / (clusters.max(1) as f64 * 2.0 * std::f64::consts::PI * sigma * sigma)
                        * (-d2 / (2.0 * sigma * sigma)).exp();
                }
            }
        }
        let sum: f64 = shape.iter().sum();
        for (d, w) in s.density.iter_mut().zip(&shape) {
            *d = total_mass * w / sum;
        }
        s.total_mass = total_mass;
        s
    }

    pub fn cell_center(&self, x: usize, y: usize) -> Point2 {
        Point2::new((x as f64 + 0.5) * self.resolution, (y as f64 + 0.5) * self.resolution)
    }

    pub fn mass(&self) -> f64 {
        self.density.iter().sum()
    }

    pub fn mean_density(&self) -> f64 {
        self.total_mass / self.density.len() as f64
    }

    pub fn mean_moisture(&self) -> f64 {
        self.moisture.iter().sum::<f64>() / self.moisture.len() as f64
    }
}

/// Advances growth and clustering by `dt_hours`.
pub fn step_biology(
    s: &SubstrateState,
    dt_hours: f64,
    p: &BiologyParams,
    rng: &mut impl Rng,
) -> Result<SubstrateState, SimError> {
    if !(dt_hours.is_finite() && dt_hours > 0.0) {
        return Err(SimError::BadTimeStep(dt_hours));
    }
    let mut out = s.clone();
    let (nx, ny) = (s.nx, s.ny);
    let n = nx * ny;
    // Outflow per substep is bounded by rate·dt·4·cap·(1+noise)·ρ; keep it ≤ ρ/2.
    let worst = p.cluster_rate * 4.0 * p.attractiveness_cap * (1.0 + p.noise);
    let substeps = if worst > 0.0 { (dt_hours * worst / 0.5).ceil().max(1.0) as usize } else { 1 };
    let h = dt_hours / substeps as f64;
    let mut attract = vec![0.0; n];
    let mut delta = vec![0.0; n];

    if p.cluster_rate > 0.0 {
        for _ in 0..substeps {
            let mean = out.density.iter().sum::<f64>() / n as f64;
            if mean <= 0.0 {
                break;
            }
            for (a, &d) in attract.iter_mut().zip(&out.density) {
                let base = (d / mean).powf(p.cluster_exponent).min(p.attractiveness_cap);
                let jitter = if p.noise > 0.0 { rng.gen_range(-p.noise..=p.noise) } else { 0.0 };
                *a = base * (1.0 + jitter);
            }
            delta.iter_mut().for_each(|d| *d = 0.0);
            let k = p.cluster_rate * h;
            for y in 0..ny {
                for x in 0..nx {
                    let i = y * nx + x;
                    let mut exchange = |j: usize| {
                        let flow = k * (out.density[i] * attract[j] - out.density[j] * attract[i]);
                        delta[i] -= flow;
                        delta[j] += flow;
                    };
                    if x + 1 < nx {
                        exchange(i + 1);
                    }
                    if y + 1 < ny {
                        exchange(i + nx);
                    }
                }
            }
            for (d, dd) in out.density.iter_mut().zip(&delta) {
                *d = (*d + dd).max(0.0);
            }
        }
    }

    let factor = (p.growth_rate * dt_hours).exp();
    out.density.iter_mut().for_each(|d| *d *= factor);
    out.total_mass = s.total_mass * factor;
    let dry = (-p.moisture_decay_per_day * dt_hours / 24.0).exp();
    out.moisture.iter_mut().for_each(|m| *m = (*m * dry).clamp(0.0, 1.0));
    Ok(out)
}

fn segment_distance(q: Point2, a: Point2, b: Point2) -> f64 {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let l2 = dx * dx + dy * dy;
    let t = if l2 == 0.0 { 0.0 } else { (((q.x - a.x) * dx + (q.y - a.y) * dy) / l2).clamp(0.0, 1.0) };
    q.dist(Point2::new(a.x + t * dx, a.y + t * dy))
}

/// Cells whose centers lie within `radius` of the polyline.
pub fn swept_cells(s: &SubstrateState, waypoints: &[Point2], radius: f64) -> Vec<bool> {
    let mut swept = vec![false; s.nx * s.ny];
    if waypoints.is_empty() {
        return swept;
    }
    let segments: Vec<(Point2, Point2)> = if waypoints.len() == 1 {
        vec![(waypoints[0], waypoints[0])]
    } else {
        waypoints.windows(2).map(|w| (w[0], w[1])).collect()
    };
    for &(a, b) in &segments {
        // Only visit cells in the segment's padded bounding box.
        let lo_x = (((a.x.min(b.x) - radius) / s.resolution).floor().max(0.0)) as usize;
        let hi_x = (((a.x.max(b.x) + radius) / s.resolution).ceil() as usize).min(s.nx);
        let lo_y = (((a.y.min(b.y) - radius) / s.resolution).floor().max(0.0)) as usize;
        let hi_y = (((a.y.max(b.y) + radius) / s.resolution).ceil() as usize).min(s.ny);
        for y in lo_y..hi_y {
            for x in lo_x..hi_x {
                let i = y * s.nx + x;
                if !swept[i] && segment_distance(s.cell_center(x, y), a, b) <= radius + 1e-12 {
                    swept[i] = true;
                }
            }
        }
    }
    swept
}

/// Fraction of all cells within the spindle sweep of `path`.
pub fn swept_fraction(s: &SubstrateState, path: &ToolPath, spec: &SpindleSpec) -> f64 {
    let swept = swept_cells(s, &path.waypoints, spec.sweep_radius());
    swept.iter().filter(|&&b| b).count() as f64 / swept.len() as f64
}

/// Mixes the substrate along `waypoints`.
///
/// Each swept cell moves toward the mean of the `(2h+1)²` box around it,
/// where `h` is the sweep radius in cells:
/// `ρᵢ ← ρᵢ + Σⱼ (ρⱼ − ρᵢ) / K` over swept cells `j` in the box, `K = (2h+1)²`.
/// Deep inside the swept band this is exactly the box mean. Near the band's
/// edge, unswept neighbours are left out of the sum, which keeps every
/// exchange pairwise: mass is conserved, unswept cells are untouched and
/// the density variance cannot increase.
pub fn mix_along(s: &SubstrateState, waypoints: &[Point2], spec: &SpindleSpec) -> SubstrateState {
    let mut out = s.clone();
    let len: f64 = waypoints.windows(2).map(|w| w[0].dist(w[1])).sum();
    if waypoints.len() < 2 || len == 0.0 {
        return out;
    }
    let radius = spec.sweep_radius();
    let swept = swept_cells(s, waypoints, radius);
    let h = (radius / s.resolution).round() as usize;
    let k = ((2 * h + 1) * (2 * h + 1)) as f64;
    let (nx, ny) = (s.nx, s.ny);

    // Summed-area tables of swept density and swept count.
    let w = nx + 1;
    let mut sum = vec![0.0; w * (ny + 1)];
    let mut cnt = vec![0.0; w * (ny + 1)];
    for y in 0..ny {
        for x in 0..nx {
            let i = y * nx + x;
            let (v, c) = if swept[i] { (s.density[i], 1.0) } else { (0.0, 0.0) };
            sum[(y + 1) * w + x + 1] = v + sum[y * w + x + 1] + sum[(y + 1) * w + x] - sum[y * w + x];
            cnt[(y + 1) * w + x + 1] = c + cnt[y * w + x + 1] + cnt[(y + 1) * w + x] - cnt[y * w + x];
        }
    }
    let rect = |t: &[f64], x0: usize, y0: usize, x1: usize, y1: usize| {
        t[y1 * w + x1] - t[y0 * w + x1] - t[y1 * w + x0] + t[y0 * w + x0]
    };
    for y in 0..ny {
        for x in 0..nx {
            let i = y * nx + x;
            if !swept[i] {
                continue;
            }
            let (x0, y0) = (x.saturating_sub(h), y.saturating_sub(h));
            let (x1, y1) = ((x + h + 1).min(nx), (y + h + 1).min(ny));
            let box_sum = rect(&sum, x0, y0, x1, y1);
            let box_cnt = rect(&cnt, x0, y0, x1, y1);
            out.density[i] = (s.density[i] + (box_sum - box_cnt * s.density[i]) / k).max(0.0);
        }
    }
    out
}

pub fn apply_spindle(s: &SubstrateState, path: &ToolPath, spec: &SpindleSpec) -> SubstrateState {
    if path_length(path) == 0.0 {
        return s.clone();
    }
    mix_along(s, &path.waypoints, spec)
}

/// Coefficient of variation (stddev/mean) of the density grid.
pub fn dispersal_index(s: &SubstrateState) -> Result<f64, SimError> {
    let n = s.density.len() as f64;
    let mean = s.density.iter().sum::<f64>() / n;
    if !(mean > 0.0) {
        return Err(SimError::ZeroMass);
    }
    let var = s.density.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / n;
    Ok(var.sqrt() / mean)
}
