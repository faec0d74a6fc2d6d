//! Thermal larvae-growth perception.
//!
//! A radiometric frame is normalized to 8 bits, rendered through the inferno
//! colormap, thresholded with Otsu's method on the heat map's luma, and split
//! into 8-connected components. Component areas give the pixel-mass growth
//! proxy; component borders are drawn over the thermal or visible frame.

pub mod color;
pub mod components;
pub mod contours;
pub mod metrics;
pub mod otsu;
pub mod thermal;

pub use color::{rgb_to_hsv, rgb_to_yuv, swap_rb};
pub use components::{connected_components, segment, Component, ComponentSet, LabelImage, Mask};
pub use contours::{contours_from_labels, extract_contours, overlay_contours, Contour, Pixel, OVERLAY_RED};
pub use metrics::{analyze_mixing, change_mask, count_mixed, growth_proxy, mix_report, MixReport};
pub use otsu::{otsu_threshold, Histogram256};
pub use thermal::{apply_inferno, normalize_thermal, to_luma, RawThermal};

use thiserror::Error;

use crate::model::{ColorImage, ColorSpace, GrayImage, VisionSettings};

#[derive(Debug, Error, PartialEq)]
pub enum VisionError {
    #[error("degenerate temperature window [{t_lo}, {t_hi}]")]
    DegenerateRange { t_lo: f64, t_hi: f64 },
    #[error("expected {expected} input, got {found:?}")]
    WrongColorSpace { expected: &'static str, found: ColorSpace },
    #[error("degenerate histogram: fewer than two distinct intensities")]
    DegenerateHistogram,
    #[error("contour pixel ({x}, {y}) outside {width}x{height} image")]
    OutOfBounds { x: usize, y: usize, width: usize, height: usize },
    #[error("zero denominator: {0}")]
    ZeroDenominator(&'static str),
    #[error("image sizes differ")]
    SizeMismatch,
}

/// Everything the perception pipeline derives from one thermal frame.
#[derive(Debug, Clone)]
pub struct FrameAnalysis {
    pub normalized: GrayImage,
    pub heatmap: ColorImage,
    pub hsv: ColorImage,
    /// Otsu threshold on the heat map's luma; `None` for a flat frame.
    pub threshold: Option<u8>,
    pub mask: Mask,
    pub labels: LabelImage,
    /// Components at or above the minimum area.
    pub components: ComponentSet,
    pub contours: Vec<Contour>,
    pub overlay: ColorImage,
    pub growth_proxy: u64,
}

pub fn analyze_frame(raw: &RawThermal, settings: &VisionSettings) -> Result<FrameAnalysis, VisionError> {
    let normalized = normalize_thermal(raw, settings.t_lo, settings.t_hi)?;
    let heatmap = apply_inferno(&normalized);
    let hsv = rgb_to_hsv(&heatmap)?;
    let luma = to_luma(&heatmap)?;
    let threshold = match otsu_threshold(&Histogram256::from_gray(&luma)) {
        Ok(t) => Some(t),
        Err(VisionError::DegenerateHistogram) => None,
        Err(e) => return Err(e),
    };
    let mask = match threshold {
        Some(t) => segment(&luma, t),
        None => Mask::new(luma.width, luma.height),
    };
    let (labels, all) = connected_components(&mask);
    let components = all.filter_min_area(settings.min_component_area as u64);
    let keep: Vec<u32> = components.components.iter().map(|c| c.label).collect();
    let contours: Vec<Contour> = contours_from_labels(&labels)
        .into_iter()
        .enumerate()
        .filter(|(i, _)| keep.contains(&(*i as u32 + 1)))
        .map(|(_, c)| c)
        .collect();
    let overlay = overlay_contours(&heatmap, &contours, OVERLAY_RED)?;
    let growth_proxy = growth_proxy(&components);
    Ok(FrameAnalysis { normalized, heatmap, hsv, threshold, mask, labels, components, contours, overlay, growth_proxy })
}
