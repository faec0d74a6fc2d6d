//! Colorspace transforms used to inspect thermal and visible frames.
//!
//! Conventions (frozen for golden tests):
//! * HSV: H = round(hue° · 255/360), S = round(255 · (max−min)/max), V = max.
//!   Gray pixels have H = S = 0.
//! * YUV: BT.601 analog weights with a 128 chroma offset,
//!   Y = 0.299R + 0.587G + 0.114B, U = 0.492(B−Y) + 128, V = 0.877(R−Y) + 128,
//!   each rounded and clamped to 0..=255.

use super::VisionError;
use crate::model::{ColorImage, ColorSpace};

fn rgb_pixels(c: &ColorImage) -> Result<Box<dyn Iterator<Item = [u8; 3]> + '_>, VisionError> {
    match c.space {
        ColorSpace::Rgb => Ok(Box::new(c.pixels())),
        ColorSpace::Bgr => Ok(Box::new(c.pixels().map(|p| [p[2], p[1], p[0]]))),
        found => Err(VisionError::WrongColorSpace { expected: "RGB or BGR", found }),
    }
}

fn map_pixels(c: &ColorImage, space: ColorSpace, f: impl Fn([u8; 3]) -> [u8; 3]) -> Result<ColorImage, VisionError> {
    let mut data = Vec::with_capacity(c.data.len());
    for p in rgb_pixels(c)? {
        data.extend_from_slice(&f(p));
    }
    Ok(ColorImage { width: c.width, height: c.height, data, space })
}

pub fn hsv_pixel([r, g, b]: [u8; 3]) -> [u8; 3] {
    let (r, g, b) = (r as f64, g as f64, b as f64);
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let hue = if delta == 0.0 {
        0.0
    } else if max == r {
        (60.0 * (g - b) / delta).rem_euclid(360.0)
    } else if max == g {
        60.0 * (b - r) / delta + 120.0
    } else {
        60.0 * (r - g) / delta + 240.0
    };
    let s = if max == 0.0 { 0.0 } else { 255.0 * delta / max };
    [(hue * 255.0 / 360.0).round() as u8, s.round() as u8, max as u8]
}

pub fn yuv_pixel([r, g, b]: [u8; 3]) -> [u8; 3] {
    let (r, g, b) = (r as f64, g as f64, b as f64);
    let y = 0.299 * r + 0.587 * g + 0.114 * b;
    let u = 0.492 * (b - y) + 128.0;
    let v = 0.877 * (r - y) + 128.0;
    let q = |x: f64| x.round().clamp(0.0, 255.0) as u8;
    [q(y), q(u), q(v)]
}

pub fn rgb_to_hsv(c: &ColorImage) -> Result<ColorImage, VisionError> {
    map_pixels(c, ColorSpace::Hsv, hsv_pixel)
}

pub fn rgb_to_yuv(c: &ColorImage) -> Result<ColorImage, VisionError> {
    map_pixels(c, ColorSpace::Yuv, yuv_pixel)
}

/// Reorders channels between RGB and BGR.
pub fn swap_rb(c: &ColorImage) -> Result<ColorImage, VisionError> {
    let space = match c.space {
        ColorSpace::Rgb => ColorSpace::Bgr,
        ColorSpace::Bgr => ColorSpace::Rgb,
        found => return Err(VisionError::WrongColorSpace { expected: "RGB or BGR", found }),
    };
    let mut out = c.clone();
    out.space = space;
    for px in out.data.chunks_exact_mut(3) {
        px.swap(0, 2);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one(px: [u8; 3], space: ColorSpace) -> ColorImage {
        ColorImage::from_raw(1, 1, px.to_vec(), space).unwrap()
    }

    #[test]
    fn hsv_reference_values() {
        assert_eq!(rgb_to_hsv(&one([255, 0, 0], ColorSpace::Rgb)).unwrap().get(0, 0), [0, 255, 255]);
        assert_eq!(rgb_to_hsv(&one([255, 255, 255], ColorSpace::Rgb)).unwrap().get(0, 0), [0, 0, 255]);
        // green 120° → 85, blue 240° → 170, magenta 300° → 213
        assert_eq!(hsv_pixel([0, 255, 0]), [85, 255, 255]);
        assert_eq!(hsv_pixel([0, 0, 255]), [170, 255, 255]);
        assert_eq!(hsv_pixel([255, 0, 255]), [213, 255, 255]);
        assert_eq!(hsv_pixel([0, 0, 0]), [0, 0, 0]);
    }

    #[test]
    fn bgr_input_is_reordered() {
        // pure red stored as BGR
        assert_eq!(rgb_to_hsv(&one([0, 0, 255], ColorSpace::Bgr)).unwrap().get(0, 0), [0, 255, 255]);
    }

    #[test]
    fn yuv_gray_has_no_chroma() {
        let out = rgb_to_yuv(&one([128, 128, 128], ColorSpace::Rgb)).unwrap();
        assert_eq!(out.get(0, 0), [128, 128, 128]);
        assert_eq!(out.space, ColorSpace::Yuv);
        assert_eq!(yuv_pixel([255, 255, 255]), [255, 128, 128]);
    }

    #[test]
    fn wrong_tag_rejected() {
        let hsv = one([1, 2, 3], ColorSpace::Hsv);
        assert!(matches!(rgb_to_hsv(&hsv), Err(VisionError::WrongColorSpace { .. })));
        assert!(rgb_to_yuv(&hsv).is_err());
    }

    #[test]
    fn swap_twice_is_identity() {
        let c = one([1, 2, 3], ColorSpace::Rgb);
        let b = swap_rb(&c).unwrap();
        assert_eq!(b.get(0, 0), [3, 2, 1]);
        assert_eq!(swap_rb(&b).unwrap(), c);
    }
}
