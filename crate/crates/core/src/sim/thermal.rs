use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::SubstrateState;
use crate::vision::thermal::celsius_to_raw;
use crate::vision::RawThermal;

/// Synthetic thermal camera. One pixel per grid cell; image row `r` is grid
/// row `y = r`, so `ImageToBin::for_grid` maps pixels back onto the bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThermalParams {
    pub ambient_c: f64,
    /// Temperature rise per unit of blurred density, °C.
    pub heat_per_density: f64,
    /// Gaussian blur sigma, cells.
    pub blur_sigma: f64,
    /// Uniform noise amplitude, °C; samples lie in `[-noise_c, noise_c]`.
    pub noise_c: f64,
}

impl Default for ThermalParams {
    fn default() -> Self {
        ThermalParams { ambient_c: 25.0, heat_per_density: 3.0, blur_sigma: 1.0, noise_c: 0.1 }
    }
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    if sigma <= 0.0 {
        return vec![1.0];
    }
    let r = (2.0 * sigma).ceil() as i64;
    let k: Vec<f64> = (-r..=r).map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp()).collect();
    let sum: f64 = k.iter().sum();
    k.into_iter().map(|v| v / sum).collect()
}

/// Separable blur with edge clamping.
fn blur(field: &[f64], nx: usize, ny: usize, sigma: f64) -> Vec<f64> {
    let k = gaussian_kernel(sigma);
    let r = (k.len() / 2) as i64;
    let clamp = |v: i64, n: usize| v.clamp(0, n as i64 - 1) as usize;
    let mut tmp = vec![0.0; nx * ny];
    for y in 0..ny {
        for x in 0..nx {
            tmp[y * nx + x] = k
                .iter()
                .enumerate()
                .map(|(i, w)| w * field[y * nx + clamp(x as i64 + i as i64 - r, nx)])
                .sum();
        }
    }
    let mut out = vec![0.0; nx * ny];
    for y in 0..ny {
        for x in 0..nx {
            out[y * nx + x] = k
                .iter()
                .enumerate()
                .map(|(i, w)| w * tmp[clamp(y as i64 + i as i64 - r, ny) * nx + x])
                .sum();
        }
    }
    out
}

pub fn render_thermal(s: &SubstrateState, p: &ThermalParams, noise_seed: u64) -> RawThermal {
    let mut rng = ChaCha8Rng::seed_from_u64(noise_seed);
    let heat = blur(&s.density, s.nx, s.ny, p.blur_sigma);
    let temps: Vec<f64> = heat
        .iter()
        .map(|h| {
            let noise = if p.noise_c > 0.0 { rng.gen_range(-p.noise_c..=p.noise_c) } else { 0.0 };
            p.ambient_c + p.heat_per_density * h + noise
        })
        .collect();
    RawThermal { width: s.nx, height: s.ny, data: temps.iter().map(|&t| celsius_to_raw(t)).collect() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::BinGeometry;

    fn empty() -> SubstrateState {
        SubstrateState::uniform(&BinGeometry::new(0.1, 0.08, 0.05, 0.01).unwrap(), 0.005, 0.0, 0.5)
    }

    #[test]
    fn zero_density_is_ambient_within_noise() {
        let p = ThermalParams::default();
        let f = render_thermal(&empty(), &p, 1);
        for y in 0..f.height {
            for x in 0..f.width {
                // centikelvin quantization adds at most 0.005 °C
                assert!((f.celsius(x, y) - 25.0).abs() <= p.noise_c + 0.005 + 1e-9);
            }
        }
    }

    #[test]
    fn hot_cluster_peaks_at_its_cell() {
        let mut s = empty();
        let i = 7 * s.nx + 11;
        s.density[i] = 20.0;
        s.total_mass = 20.0;
        let f = render_thermal(&s, &ThermalParams { noise_c: 0.0, ..Default::default() }, 0);
        let argmax = (0..f.data.len()).max_by_key(|&j| f.data[j]).unwrap();
        assert_eq!(argmax, i);
    }

    #[test]
    fn same_seed_same_frame() {
        let s = empty();
        let p = ThermalParams::default();
        assert_eq!(render_thermal(&s, &p, 42), render_thermal(&s, &p, 42));
        assert_ne!(render_thermal(&s, &p, 42), render_thermal(&s, &p, 43));
    }

    #[test]
    fn blur_preserves_interior_sum() {
        let (nx, ny) = (15, 15);
        let mut f = vec![0.0; nx * ny];
        f[7 * nx + 7] = 1.0;
        let b = blur(&f, nx, ny, 1.0);
        assert!((b.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
