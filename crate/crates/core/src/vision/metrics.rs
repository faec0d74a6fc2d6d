//! Pixel-mass growth proxy and mixing metrics.

use serde::{Deserialize, Serialize};

use super::components::{ComponentSet, Mask};
use super::VisionError;
use crate::model::GrayImage;

/// Total segmented warm-pixel area, used as a stand-in for larval biomass.
pub fn growth_proxy(cs: &ComponentSet) -> u64 {
    cs.total_area()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixReport {
    pub mixed_pixels: u64,
    pub unmixed_pixels: u64,
    pub coverage_fraction: f64,
    /// Mixed pixels relative to a manually mixed baseline.
    pub efficacy_ratio: Option<f64>,
}

pub fn mix_report(mixed: u64, unmixed: u64, baseline_mixed: Option<u64>) -> Result<MixReport, VisionError> {
    let total = mixed + unmixed;
    if total == 0 {
        return Err(VisionError::ZeroDenominator("mixed + unmixed"));
    }
    let efficacy_ratio = match baseline_mixed {
        Some(0) => return Err(VisionError::ZeroDenominator("baseline")),
        Some(b) => Some(mixed as f64 / b as f64),
        None => None,
    };
    Ok(MixReport {
        mixed_pixels: mixed,
        unmixed_pixels: unmixed,
        coverage_fraction: mixed as f64 / total as f64,
        efficacy_ratio,
    })
}

/// Pixels whose absolute intensity change between frames exceeds `delta`.
/// Only pixels inside `roi` (when given) can be set.
pub fn change_mask(before: &GrayImage, after: &GrayImage, delta: u8, roi: Option<&Mask>) -> Result<Mask, VisionError> {
    if (before.width, before.height) != (after.width, after.height) {
        return Err(VisionError::SizeMismatch);
    }
    if let Some(r) = roi {
        if (r.width, r.height) != (before.width, before.height) {
            return Err(VisionError::SizeMismatch);
        }
    }
    let data = before
        .data
        .iter()
        .zip(&after.data)
        .enumerate()
        .map(|(i, (&a, &b))| a.abs_diff(b) > delta && roi.is_none_or(|r| r.data[i]))
        .collect();
    Ok(Mask { width: before.width, height: before.height, data })
}

/// Counts (mixed, unmixed) pixels in the region of interest.
pub fn count_mixed(before: &GrayImage, after: &GrayImage, delta: u8, roi: Option<&Mask>) -> Result<(u64, u64), VisionError> {
    let changed = change_mask(before, after, delta, roi)?;
    let roi_px = roi.map_or((before.width * before.height) as u64, Mask::count);
    let mixed = changed.count();
    Ok((mixed, roi_px - mixed))
}

/// Compares a before/after pair, optionally against a manually mixed
/// baseline frame taken from the same starting state.
pub fn analyze_mixing(
    before: &GrayImage,
    after: &GrayImage,
    baseline_after: Option<&GrayImage>,
    delta: u8,
    roi: Option<&Mask>,
) -> Result<MixReport, VisionError> {
    let (mixed, unmixed) = count_mixed(before, after, delta, roi)?;
    let baseline = match baseline_after {
        Some(b) => Some(count_mixed(before, b, delta, roi)?.0),
        None => None,
    };
    mix_report(mixed, unmixed, baseline)
}
