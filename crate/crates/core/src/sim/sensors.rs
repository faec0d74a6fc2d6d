use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::SubstrateState;
use crate::model::SensorFrame;

/// Synthetic environmental sensor curves.
///
/// * temperature = `ambient_c + temp_per_density · mean density`
/// * humidity = `humidity_base + humidity_per_moisture · mean moisture`
/// * moisture = mean of the moisture grid
/// * pH = `ph_base + ph_amplitude · sin(2π · days / ph_period_days)`, clamped to 6..=9
/// * CO₂ = `co2_base_ppm + co2_per_mass · total_mass`
/// * NO₂ = `no2_base_ppm + no2_per_mass · total_mass`
///
/// Each reading then gets independent uniform noise in
/// `[-noise · scale, noise · scale]`, where the scales are 0.2 °C, 1 %RH,
/// 0.005 moisture, 0.05 pH, 10 ppm CO₂ and 0.005 ppm NO₂.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensorParams {
    pub ambient_c: f64,
    pub temp_per_density: f64,
    pub humidity_base: f64,
    pub humidity_per_moisture: f64,
    pub ph_base: f64,
    pub ph_amplitude: f64,
    pub ph_period_days: f64,
    pub co2_base_ppm: f64,
    pub co2_per_mass: f64,
    pub no2_base_ppm: f64,
    pub no2_per_mass: f64,
    /// 0 disables noise, 1 gives the nominal amplitudes above.
    pub noise: f64,
}

impl Default for SensorParams {
    fn default() -> Self {
        SensorParams {
            ambient_c: 25.0,
            temp_per_density: 0.5,
            humidity_base: 40.0,
            humidity_per_moisture: 40.0,
            ph_base: 7.5,
            ph_amplitude: 0.5,
            ph_period_days: 7.0,
            co2_base_ppm: 420.0,
            co2_per_mass: 0.05,
            no2_base_ppm: 0.02,
            no2_per_mass: 2e-6,
            noise: 1.0,
        }
    }
}

const NOISE_SCALE: [f64; 6] = [0.2, 1.0, 0.005, 0.05, 10.0, 0.005];

pub fn sample_sensors(s: &SubstrateState, t: i64, p: &SensorParams, seed: u64) -> SensorFrame {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (t as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    let mut jitter = [0.0; 6];
    if p.noise > 0.0 {
        for (j, scale) in jitter.iter_mut().zip(NOISE_SCALE) {
            let a = p.noise * scale;
            *j = rng.gen_range(-a..=a);
        }
    }
    let mass = s.total_mass.max(0.0);
    let days = t as f64 / 86_400.0;
    let ph = p.ph_base + p.ph_amplitude * (std::f64::consts::TAU * days / p.ph_period_days).sin();
    let moisture = s.mean_moisture();
    SensorFrame {
        timestamp: t,
        temperature: p.ambient_c + p.temp_per_density * s.mean_density() + jitter[0],
        humidity: (p.humidity_base + p.humidity_per_moisture * moisture + jitter[1]).clamp(0.0, 100.0),
        moisture: (moisture + jitter[2]).clamp(0.0, 1.0),
        ph: (ph + jitter[3]).clamp(6.0, 9.0),
        co2: (p.co2_base_ppm + p.co2_per_mass * mass + jitter[4]).max(0.0),
        no2: (p.no2_base_ppm + p.no2_per_mass * mass + jitter[5]).max(0.0),
    }
}
