//! Static highlight overlay for the comparison view.
//!
//! Each suspect region is filled with a translucent highlight and ringed by an
//! opaque-ish outline. Pixels outside every mask and outline are copied through
//! untouched, so the output diff is confined to the regions themselves.

use std::io::Cursor;

use image::codecs::png::{CompressionType, FilterType, PngEncoder};
use image::{ImageEncoder, RgbaImage};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::RegionFinding;
use crate::mask::{rle_decode, BinaryMask, MaskError};

#[derive(Debug, Error)]
pub enum OverlayError {
    #[error("dimension mismatch: image is {image:?}, mask for {label:?} is {mask:?}")]
    DimensionMismatch { image: (u32, u32), mask: (u32, u32), label: String },
    #[error(transparent)]
    Mask(#[from] MaskError),
    #[error("png encoding failed: {0}")]
    Encode(#[from] image::ImageError),
}

/// Opacity in basis points (1/10000), so blending stays in exact integer arithmetic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "f64", into = "f64")]
pub struct Opacity(u16);

impl Opacity {
    pub const fn from_basis_points(bp: u16) -> Self {
        Self(if bp > 10_000 { 10_000 } else { bp })
    }

    pub fn basis_points(self) -> u16 {
        self.0
    }

    /// `round(α·highlight + (1−α)·src)` with halves rounded up.
    pub fn blend(self, highlight: u8, src: u8) -> u8 {
        let a = self.0 as u32;
        ((a * highlight as u32 + (10_000 - a) * src as u32 + 5_000) / 10_000) as u8
    }
}

impl From<f64> for Opacity {
    fn from(value: f64) -> Self {
        Self::from_basis_points((value.clamp(0.0, 1.0) * 10_000.0).round() as u16)
    }
}

impl From<Opacity> for f64 {
    fn from(value: Opacity) -> Self {
        value.0 as f64 / 10_000.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct OverlayStyle {
    pub color: [u8; 3],
    pub fill_opacity: Opacity,
    pub outline_opacity: Opacity,
    pub outline_px: u32,
}

impl Default for OverlayStyle {
    fn default() -> Self {
        Self {
            color: [255, 64, 64],
            fill_opacity: Opacity::from_basis_points(3_500),
            outline_opacity: Opacity::from_basis_points(9_000),
            outline_px: 2,
        }
    }
}

/// Fill and outline regions, both as masks over the image raster.
pub fn overlay_regions(
    dims: (u32, u32),
    findings: &[RegionFinding],
    style: &OverlayStyle,
) -> Result<(BinaryMask, BinaryMask), OverlayError> {
    let mut fill = BinaryMask::empty(dims.0, dims.1);
    let mut ring = BinaryMask::empty(dims.0, dims.1);
    for finding in findings {
        if finding.mask().dimensions() != dims {
            return Err(OverlayError::DimensionMismatch {
                image: dims,
                mask: finding.mask().dimensions(),
                label: finding.label().to_string(),
            });
        }
        let mask = rle_decode(finding.mask())?;
        let outline = mask.dilate(style.outline_px).difference(&mask)?;
        fill = fill.union(&mask)?;
        ring = ring.union(&outline)?;
    }
    // a pixel inside any region gets the fill, never both treatments
    let ring = ring.difference(&fill)?;
    Ok((fill, ring))
}

pub fn render_overlay(
    image: &RgbaImage,
    findings: &[RegionFinding],
    style: &OverlayStyle,
) -> Result<RgbaImage, OverlayError> {
    let (fill, ring) = overlay_regions(image.dimensions(), findings, style)?;
    let mut out = image.clone();
    let [r, g, b] = style.color;
    let highlight = [r, g, b, 255];
    for (x, y, px) in out.enumerate_pixels_mut() {
        let opacity = if fill.get(x, y) {
            style.fill_opacity
        } else if ring.get(x, y) {
            style.outline_opacity
        } else {
            continue;
        };
        for (c, hl) in px.0.iter_mut().zip(highlight) {
            *c = opacity.blend(hl, *c);
        }
    }
    Ok(out)
}

/// 8-bit RGBA, non-interlaced PNG.
pub fn encode_png(image: &RgbaImage) -> Result<Vec<u8>, OverlayError> {
    let mut out = Vec::new();
    PngEncoder::new_with_quality(Cursor::new(&mut out), CompressionType::Default, FilterType::Adaptive).write_image(
        image.as_raw(),
        image.width(),
        image.height(),
        image::ExtendedColorType::Rgba8,
    )?;
    Ok(out)
}

pub fn compose_overlay(
    image: &RgbaImage,
    findings: &[RegionFinding],
    style: &OverlayStyle,
) -> Result<Vec<u8>, OverlayError> {
    encode_png(&render_overlay(image, findings, style)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mask::rle_encode;

    fn textured(w: u32, h: u32) -> RgbaImage {
        RgbaImage::from_fn(w, h, |x, y| image::Rgba([(x * 7 % 200) as u8, (y * 5 % 180) as u8, 90, 255]))
    }

    fn blend_oracle(alpha_pct: u32, hl: u8, src: u8) -> u8 {
        // exact rational alpha/100, rounded half up
        let num = alpha_pct * hl as u32 + (100 - alpha_pct) * src as u32;
        let q = num / 100;
        if (num % 100) * 2 >= 100 {
            (q + 1) as u8
        } else {
            q as u8
        }
    }

    #[test]
    fn blend_matches_rational_oracle() {
        let fill = Opacity::from(0.35);
        let outline = Opacity::from(0.9);
        for hl in [0u8, 64, 255] {
            for src in 0..=255u8 {
                assert_eq!(fill.blend(hl, src), blend_oracle(35, hl, src));
                assert_eq!(outline.blend(hl, src), blend_oracle(90, hl, src));
            }
        }
        // half-up: 0.35*255 + 0.65*5 = 92.5
        assert_eq!(fill.blend(255, 5), 93);
    }

    #[test]
    fn no_findings_is_identity() {
        let img = textured(20, 10);
        assert_eq!(render_overlay(&img, &[], &OverlayStyle::default()).unwrap(), img);
    }

    #[test]
    fn full_mask_blends_every_pixel() {
        let img = textured(16, 16);
        let finding = RegionFinding::new("all", rle_encode(&BinaryMask::full(16, 16))).unwrap();
        let out = render_overlay(&img, &[finding], &OverlayStyle::default()).unwrap();
        for (x, y, px) in out.enumerate_pixels() {
            let src = img.get_pixel(x, y).0;
            let expected = [
                blend_oracle(35, 255, src[0]),
                blend_oracle(35, 64, src[1]),
                blend_oracle(35, 64, src[2]),
                blend_oracle(35, 255, src[3]),
            ];
            assert_eq!(px.0, expected);
        }
    }

    #[test]
    fn square_region_changes_square_and_outline_only() {
        let img = RgbaImage::from_pixel(100, 100, image::Rgba([0, 200, 0, 255]));
        let square = BinaryMask::rect(100, 100, 40, 40, 50, 50);
        let finding = RegionFinding::new("sq", rle_encode(&square)).unwrap();
        let out = render_overlay(&img, &[finding], &OverlayStyle::default()).unwrap();
        let mut diffs = 0;
        for (x, y, px) in out.enumerate_pixels() {
            let changed = px != img.get_pixel(x, y);
            let in_band = (38..52).contains(&x) && (38..52).contains(&y);
            assert_eq!(changed, in_band, "pixel ({x},{y})");
            diffs += changed as u32;
        }
        // 14x14 dilated box
        assert_eq!(diffs, 196);
    }

    #[test]
    fn mismatched_mask_is_rejected() {
        let img = textured(10, 10);
        let finding = RegionFinding::new("x", rle_encode(&BinaryMask::full(5, 5))).unwrap();
        assert!(matches!(
            render_overlay(&img, &[finding], &OverlayStyle::default()),
            Err(OverlayError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn png_output_is_rgba8_and_decodes_back() {
        let img = textured(12, 9);
        let bytes = compose_overlay(&img, &[], &OverlayStyle::default()).unwrap();
        let decoded = image::load_from_memory_with_format(&bytes, image::ImageFormat::Png).unwrap();
        assert_eq!(decoded.color(), image::ColorType::Rgba8);
        assert_eq!(decoded.to_rgba8(), img);
        // IHDR interlace byte sits at offset 28
        assert_eq!(bytes[28], 0);
    }
}
