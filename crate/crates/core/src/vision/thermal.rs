use std::sync::OnceLock;

use super::VisionError;
use crate::model::{ColorImage, ColorSpace, GrayImage};

const INFERNO_DATA: &str = include_str!("../../data/inferno.txt");

/// Radiometric frame in centikelvin (value = T[K] × 100), the linear output
/// format of common uncooled microbolometer cores.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawThermal {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u16>,
}

impl RawThermal {
    pub fn from_celsius(width: usize, height: usize, temps: &[f64]) -> Self {
        assert_eq!(temps.len(), width * height);
        RawThermal { width, height, data: temps.iter().map(|&t| celsius_to_raw(t)).collect() }
    }

    pub fn celsius(&self, x: usize, y: usize) -> f64 {
        raw_to_celsius(self.data[y * self.width + x])
    }
}

pub fn celsius_to_raw(t: f64) -> u16 {
    ((t + 273.15) * 100.0).round().clamp(0.0, u16::MAX as f64) as u16
}

pub fn raw_to_celsius(raw: u16) -> f64 {
    raw as f64 / 100.0 - 273.15
}

/// Linear map of `[t_lo, t_hi]` °C onto 0..=255, clamped outside the window
/// and rounded half away from zero (the window midpoint maps to 128).
pub fn normalize_thermal(raw: &RawThermal, t_lo: f64, t_hi: f64) -> Result<GrayImage, VisionError> {
    if !(t_lo.is_finite() && t_hi.is_finite() && t_lo < t_hi) {
        return Err(VisionError::DegenerateRange { t_lo, t_hi });
    }
    // Work in centikelvin so window endpoints land on exact raw values.
    let snap = |t: f64| ((t + 273.15) * 100.0 * 1e6).round() / 1e6;
    let (lo, hi) = (snap(t_lo), snap(t_hi));
    let span = hi - lo;
    let data = raw
        .data
        .iter()
        .map(|&v| {
            let frac = ((v as f64 - lo) / span).clamp(0.0, 1.0);
            (frac * 255.0).round() as u8
        })
        .collect();
    Ok(GrayImage { width: raw.width, height: raw.height, data })
}

/// The 256-entry inferno colormap shipped in `data/inferno.txt`.
pub fn inferno_table() -> &'static [[u8; 3]; 256] {
    static TABLE: OnceLock<[[u8; 3]; 256]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut table = [[0u8; 3]; 256];
        let rows = INFERNO_DATA.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty());
        let mut n = 0;
        for (entry, line) in table.iter_mut().zip(rows) {
            let v: Vec<u8> = line.split_whitespace().map(|t| t.parse().expect("inferno table entry")).collect();
            *entry = [v[0], v[1], v[2]];
            n += 1;
        }
        assert_eq!(n, 256, "inferno table must have 256 rows");
        table
    })
}

pub fn apply_inferno(g: &GrayImage) -> ColorImage {
    let table = inferno_table();
    let mut data = Vec::with_capacity(3 * g.data.len());
    for &v in &g.data {
        data.extend_from_slice(&table[v as usize]);
    }
    ColorImage { width: g.width, height: g.height, data, space: ColorSpace::Rgb }
}

/// BT.601 luma of an RGB triplet.
pub fn luma(px: [u8; 3]) -> f64 {
    0.299 * px[0] as f64 + 0.587 * px[1] as f64 + 0.114 * px[2] as f64
}

/// Luma image of an RGB (or BGR) color image, rounded to 8 bits.
pub fn to_luma(c: &ColorImage) -> Result<GrayImage, VisionError> {
    let data = match c.space {
        ColorSpace::Rgb => c.pixels().map(|p| luma(p).round() as u8).collect(),
        ColorSpace::Bgr => c.pixels().map(|p| luma([p[2], p[1], p[0]]).round() as u8).collect(),
        found => return Err(VisionError::WrongColorSpace { expected: "RGB or BGR", found }),
    };
    Ok(GrayImage { width: c.width, height: c.height, data })
}
