//! Binary masks and their run-length wire encoding.
//!
//! Runs are row-major and background-first. A mask that starts with a
//! foreground pixel encodes a leading zero-length background run; no other
//! run may be zero.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MaskError {
    #[error("run-sum mismatch: runs sum to {actual}, expected {expected}")]
    RunSumMismatch { expected: u64, actual: u64 },
    #[error("interior zero-length run at index {0}")]
    InteriorZeroRun(usize),
    #[error("mask has a zero dimension")]
    ZeroDimension,
    #[error("bit count {actual} does not match {width}x{height}")]
    BitCount { width: u32, height: u32, actual: usize },
    #[error("dimension mismatch: {a:?} vs {b:?}")]
    DimensionMismatch { a: (u32, u32), b: (u32, u32) },
}

/// Inclusive pixel bounds, serialized as `[x_min, y_min, x_max, y_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "[u32; 4]", into = "[u32; 4]")]
pub struct BBox {
    pub x_min: u32,
    pub y_min: u32,
    pub x_max: u32,
    pub y_max: u32,
}

impl From<[u32; 4]> for BBox {
    fn from([x_min, y_min, x_max, y_max]: [u32; 4]) -> Self {
        Self { x_min, y_min, x_max, y_max }
    }
}

impl From<BBox> for [u32; 4] {
    fn from(b: BBox) -> Self {
        [b.x_min, b.y_min, b.x_max, b.y_max]
    }
}

/// Row-major boolean raster.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    width: u32,
    height: u32,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: u32, height: u32, bits: Vec<bool>) -> Result<Self, MaskError> {
        if bits.len() as u64 != width as u64 * height as u64 {
            return Err(MaskError::BitCount { width, height, actual: bits.len() });
        }
        Ok(Self { width, height, bits })
    }

    pub fn empty(width: u32, height: u32) -> Self {
        Self { width, height, bits: vec![false; width as usize * height as usize] }
    }

    pub fn full(width: u32, height: u32) -> Self {
        Self { width, height, bits: vec![true; width as usize * height as usize] }
    }

    /// Foreground is the half-open rectangle `[x0, x1) × [y0, y1)`, clipped to the raster.
    pub fn rect(width: u32, height: u32, x0: u32, y0: u32, x1: u32, y1: u32) -> Self {
        let mut m = Self::empty(width, height);
        for y in y0..y1.min(height) {
            for x in x0..x1.min(width) {
                m.set(x, y, true);
            }
        }
        m
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dimensions(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    fn index(&self, x: u32, y: u32) -> usize {
        y as usize * self.width as usize + x as usize
    }

    pub fn get(&self, x: u32, y: u32) -> bool {
        self.bits[self.index(x, y)]
    }

    pub fn set(&mut self, x: u32, y: u32, value: bool) {
        let i = self.index(x, y);
        self.bits[i] = value;
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    fn check_same_dims(&self, other: &BinaryMask) -> Result<(), MaskError> {
        if self.dimensions() != other.dimensions() {
            return Err(MaskError::DimensionMismatch { a: self.dimensions(), b: other.dimensions() });
        }
        Ok(())
    }

    pub fn union(&self, other: &BinaryMask) -> Result<BinaryMask, MaskError> {
        self.check_same_dims(other)?;
        let bits = self.bits.iter().zip(&other.bits).map(|(&a, &b)| a || b).collect();
        Ok(BinaryMask { width: self.width, height: self.height, bits })
    }

    /// Pixels set here and clear in `other`.
    pub fn difference(&self, other: &BinaryMask) -> Result<BinaryMask, MaskError> {
        self.check_same_dims(other)?;
        let bits = self.bits.iter().zip(&other.bits).map(|(&a, &b)| a && !b).collect();
        Ok(BinaryMask { width: self.width, height: self.height, bits })
    }

    /// Dilation by a `(2r+1)×(2r+1)` square, i.e. `r` rounds of 8-neighbour
    /// one-pixel dilation. Computed as two separable running-max passes.
    pub fn dilate(&self, radius: u32) -> BinaryMask {
        if radius == 0 || self.bits.is_empty() {
            return self.clone();
        }
        let (w, h) = (self.width as usize, self.height as usize);
        let r = radius as usize;
        let mut horizontal = vec![false; w * h];
        for y in 0..h {
            let row = &self.bits[y * w..(y + 1) * w];
            // prefix counts make each window query O(1)
            let mut prefix = vec![0u32; w + 1];
            for x in 0..w {
                prefix[x + 1] = prefix[x] + row[x] as u32;
            }
            for x in 0..w {
                let lo = x.saturating_sub(r);
                let hi = (x + r + 1).min(w);
                horizontal[y * w + x] = prefix[hi] > prefix[lo];
            }
        }
        let mut out = vec![false; w * h];
        for x in 0..w {
            let mut prefix = vec![0u32; h + 1];
            for y in 0..h {
                prefix[y + 1] = prefix[y] + horizontal[y * w + x] as u32;
            }
            for y in 0..h {
                let lo = y.saturating_sub(r);
                let hi = (y + r + 1).min(h);
                out[y * w + x] = prefix[hi] > prefix[lo];
            }
        }
        BinaryMask { width: self.width, height: self.height, bits: out }
    }
}

/// Run-length encoded mask as sent over the wire:
/// `{"width":int,"height":int,"runs":[int,...]}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawMaskRle")]
pub struct MaskRle {
    width: u32,
    height: u32,
    runs: Vec<u32>,
}

#[derive(Deserialize)]
struct RawMaskRle {
    width: u32,
    height: u32,
    runs: Vec<u32>,
}

impl TryFrom<RawMaskRle> for MaskRle {
    type Error = MaskError;
    fn try_from(raw: RawMaskRle) -> Result<Self, Self::Error> {
        MaskRle::new(raw.width, raw.height, raw.runs)
    }
}

impl MaskRle {
    pub fn new(width: u32, height: u32, runs: Vec<u32>) -> Result<Self, MaskError> {
        if width == 0 || height == 0 {
            return Err(MaskError::ZeroDimension);
        }
        let expected = width as u64 * height as u64;
        let actual: u64 = runs.iter().map(|&r| r as u64).sum();
        if actual != expected {
            return Err(MaskError::RunSumMismatch { expected, actual });
        }
        if let Some(i) = runs.iter().skip(1).position(|&r| r == 0) {
            return Err(MaskError::InteriorZeroRun(i + 1));
        }
        Ok(Self { width, height, runs })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dimensions(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn runs(&self) -> &[u32] {
        &self.runs
    }

    /// Sum of the odd-indexed (foreground) runs.
    pub fn foreground_count(&self) -> u64 {
        self.runs.iter().skip(1).step_by(2).map(|&r| r as u64).sum()
    }
}

pub fn rle_encode(mask: &BinaryMask) -> MaskRle {
    let mut runs = Vec::new();
    let mut current = false;
    let mut length = 0u32;
    for &bit in &mask.bits {
        if bit == current {
            length += 1;
        } else {
            runs.push(length);
            current = bit;
            length = 1;
        }
    }
    runs.push(length);
    MaskRle { width: mask.width, height: mask.height, runs }
}

/// Decodes runs, re-checking the invariants so hand-built values cannot slip through.
pub fn rle_decode(rle: &MaskRle) -> Result<BinaryMask, MaskError> {
    let checked = MaskRle::new(rle.width, rle.height, rle.runs.clone())?;
    let mut bits = Vec::with_capacity(checked.width as usize * checked.height as usize);
    for (i, &run) in checked.runs.iter().enumerate() {
        bits.extend(std::iter::repeat_n(i % 2 == 1, run as usize));
    }
    Ok(BinaryMask { width: checked.width, height: checked.height, bits })
}

/// Tight inclusive bounding box of the foreground, or `None` for an empty mask.
pub fn bbox_of(mask: &BinaryMask) -> Option<BBox> {
    let w = mask.width as usize;
    let mut out: Option<BBox> = None;
    for (i, _) in mask.bits.iter().enumerate().filter(|(_, &b)| b) {
        let (x, y) = ((i % w) as u32, (i / w) as u32);
        out = Some(match out {
            None => BBox { x_min: x, y_min: y, x_max: x, y_max: y },
            Some(b) => BBox {
                x_min: b.x_min.min(x),
                y_min: b.y_min.min(y),
                x_max: b.x_max.max(x),
                y_max: b.y_max.max(y),
            },
        });
    }
    out
}

pub fn mask_area(mask: &BinaryMask) -> u64 {
    mask.bits.iter().filter(|&&b| b).count() as u64
}

/// Intersection over union; 1.0 when both masks are empty.
pub fn mask_iou(a: &BinaryMask, b: &BinaryMask) -> Result<f64, MaskError> {
    a.check_same_dims(b)?;
    let (mut inter, mut union) = (0u64, 0u64);
    for (&x, &y) in a.bits.iter().zip(&b.bits) {
        inter += (x && y) as u64;
        union += (x || y) as u64;
    }
    if union == 0 {
        return Ok(1.0);
    }
    Ok(inter as f64 / union as f64)
}
