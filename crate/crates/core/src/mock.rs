//! Deterministic stand-ins for the detector, simplifier and editor.
//!
//! All pseudo-randomness is drawn from the SHA-256 digest of the input, so
//! identical inputs give byte-identical outputs on every platform.

use std::fmt;
use std::io::Cursor;
use std::str::FromStr;

use image::RgbaImage;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{Sha256Digest, Verdict};
use crate::mask::{rle_encode, BBox, BinaryMask, MaskError};
use crate::overlay::{encode_png, OverlayError};
use crate::protocol::{DetectResponse, DetectedRegion, EditRequest, SimplifyRequest};

#[derive(Debug, Error)]
pub enum MockError {
    #[error("undecodable image: {0}")]
    Undecodable(String),
    #[error("nothing to edit: union mask is empty")]
    EmptyMask,
    #[error(transparent)]
    Mask(#[from] MaskError),
    #[error(transparent)]
    Encode(#[from] OverlayError),
    #[error("invalid mock config: {0}")]
    Config(String),
}

/// How a mock backend misbehaves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum FaultMode {
    #[default]
    None,
    Fenced,
    ProseWrapped,
    TrailingCommas,
    BadEmoji,
    Garbage,
    /// Answer the first `first_n` calls with HTTP 503.
    #[serde(rename = "flaky_5xx")]
    Flaky5xx { first_n: u32 },
}

impl fmt::Display for FaultMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FaultMode::None => f.write_str("none"),
            FaultMode::Fenced => f.write_str("fenced"),
            FaultMode::ProseWrapped => f.write_str("prose_wrapped"),
            FaultMode::TrailingCommas => f.write_str("trailing_commas"),
            FaultMode::BadEmoji => f.write_str("bad_emoji"),
            FaultMode::Garbage => f.write_str("garbage"),
            FaultMode::Flaky5xx { first_n } => write!(f, "flaky_5xx:{first_n}"),
        }
    }
}

/// Accepts `none`, `fenced`, ..., and `flaky_5xx:N` / `flaky_5xx(N)`.
impl FromStr for FaultMode {
    type Err = MockError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if let Some(rest) = s.strip_prefix("flaky_5xx") {
            let n = rest.trim_start_matches([':', '(']).trim_end_matches(')');
            let first_n: u32 = n.parse().map_err(|_| MockError::Config(format!("bad flaky_5xx count in {s:?}")))?;
            if first_n == 0 {
                return Err(MockError::Config("flaky_5xx needs first_n >= 1".into()));
            }
            return Ok(FaultMode::Flaky5xx { first_n });
        }
        Ok(match s {
            "none" => FaultMode::None,
            "fenced" => FaultMode::Fenced,
            "prose_wrapped" => FaultMode::ProseWrapped,
            "trailing_commas" => FaultMode::TrailingCommas,
            "bad_emoji" => FaultMode::BadEmoji,
            "garbage" => FaultMode::Garbage,
            other => return Err(MockError::Config(format!("unknown fault mode {other:?}"))),
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MockConfig {
    #[serde(default)]
    pub fault_mode: FaultMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region_count_override: Option<u8>,
    /// Artificial per-call delay, for progress and cancellation tests.
    #[serde(default, skip_serializing_if = "is_zero")]
    pub latency_ms: u64,
}

fn is_zero(v: &u64) -> bool {
    *v == 0
}

impl MockConfig {
    pub fn with_fault(fault_mode: FaultMode) -> Self {
        Self { fault_mode, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), MockError> {
        if let FaultMode::Flaky5xx { first_n: 0 } = self.fault_mode {
            return Err(MockError::Config("flaky_5xx needs first_n >= 1".into()));
        }
        if let Some(k) = self.region_count_override {
            if !(1..=3).contains(&k) {
                return Err(MockError::Config(format!("region_count_override {k} outside 1-3")));
            }
        }
        Ok(())
    }
}

fn dimensions(bytes: &[u8]) -> Result<(u32, u32), MockError> {
    image::ImageReader::new(Cursor::new(bytes))
        .with_guessed_format()
        .map_err(|e| MockError::Undecodable(e.to_string()))?
        .into_dimensions()
        .map_err(|e| MockError::Undecodable(e.to_string()))
}

const LABELS: [&str; 3] = ["Region A", "Region B", "Region C"];

/// Rectangle for region `i`: four digest bytes pick the size (8 px plus up to
/// a quarter of the side) and the offset within the remaining room.
fn region_rect(d: &[u8; 32], i: usize, (w, h): (u32, u32)) -> (u32, u32, u32, u32) {
    let b = &d[2 + 4 * i..6 + 4 * i];
    let rw = (8 + b[2] as u32 * w / 1024).min(w);
    let rh = (8 + b[3] as u32 * h / 1024).min(h);
    let x0 = b[0] as u32 * (w - rw) / 255;
    let y0 = b[1] as u32 * (h - rh) / 255;
    (x0, y0, rw, rh)
}

fn confidence_from(byte: u8) -> f64 {
    0.5 + byte as f64 / 510.0
}

pub fn mock_detect(image: &[u8], cfg: &MockConfig) -> Result<DetectResponse, MockError> {
    let dims = dimensions(image)?;
    let d = *Sha256Digest::of(image).as_bytes();
    if d[0] % 2 == 1 {
        return Ok(DetectResponse {
            verdict: Verdict::Real,
            confidence: Some(confidence_from(d[31])),
            technical_explanation: "No manipulation cues were found: lighting, shadows and resolution are \
                                    consistent across the image."
                .into(),
            regions: Vec::new(),
        });
    }
    let k = cfg.region_count_override.map(|k| k.clamp(1, 3) as usize).unwrap_or(1 + d[1] as usize % 3);
    let mut regions = Vec::with_capacity(k);
    let mut technical = format!("The image shows signs of manipulation in {k} region(s).");
    for (i, label) in LABELS.iter().enumerate().take(k) {
        let (x0, y0, rw, rh) = region_rect(&d, i, dims);
        let mask = BinaryMask::rect(dims.0, dims.1, x0, y0, x0 + rw, y0 + rh);
        let bbox = BBox { x_min: x0, y_min: y0, x_max: x0 + rw - 1, y_max: y0 + rh - 1 };
        technical.push_str(&format!(
            " {label} (pixels {},{} to {},{}): lighting on this area is inconsistent with the dominant light \
             source; its cast shadow points in a different direction from the rest of the scene; local \
             resolution and noise differ from the surrounding pixels.",
            bbox.x_min, bbox.y_min, bbox.x_max, bbox.y_max
        ));
        regions.push(DetectedRegion { label: label.to_string(), mask: rle_encode(&mask), bbox });
    }
    Ok(DetectResponse { verdict: Verdict::Fake, confidence: Some(confidence_from(d[30])), technical_explanation: technical, regions })
}

/// Foreground of every region the mock detector would report, or `None` for a "real" image.
pub fn mock_union_mask(image: &[u8], cfg: &MockConfig) -> Result<Option<BinaryMask>, MockError> {
    let response = mock_detect(image, cfg)?;
    let dims = dimensions(image)?;
    if response.regions.is_empty() {
        return Ok(None);
    }
    let mut union = BinaryMask::empty(dims.0, dims.1);
    for r in &response.regions {
        union = union.union(&crate::mask::rle_decode(&r.mask)?)?;
    }
    Ok(Some(union))
}

const PHRASES: [&str; 8] = [
    "The light on this part does not match the rest of the photo.",
    "This area looks pasted in: its edges are too sharp.",
    "The shadow here points the wrong way.",
    "This part is blurrier than everything around it.",
    "The colours here do not blend with the background.",
    "This object looks flat, as if it was cut out and stuck on.",
    "The texture here repeats in an unnatural way.",
    "This spot is sharper than the rest of the picture.",
];

const EMOJIS: [&str; 8] = ["💡", "✂️", "🌗", "🌫️", "🎨", "🧩", "🔁", "🔎"];

#[derive(Serialize)]
struct MockEntry<'a> {
    region: &'a str,
    simple_explanation: &'a str,
    emoji: &'a str,
    edit_instruction: String,
}

#[derive(Serialize)]
struct MockDocument<'a> {
    regions: Vec<MockEntry<'a>>,
    overall_summary: String,
}

const GARBAGE: &str = "I am sorry, but I cannot provide a structured analysis of this image right now.";

pub fn mock_simplify(req: &SimplifyRequest, cfg: &MockConfig) -> String {
    let mut regions: Vec<MockEntry> = req
        .region_labels
        .iter()
        .map(|label| {
            let h = Sha256Digest::of(label.as_bytes());
            let h = h.as_bytes();
            MockEntry {
                region: label,
                simple_explanation: PHRASES[h[0] as usize % PHRASES.len()],
                emoji: EMOJIS[h[1] as usize % EMOJIS.len()],
                edit_instruction: format!("Remove the {label} and restore the background."),
            }
        })
        .collect();
    if cfg.fault_mode == FaultMode::BadEmoji {
        if let Some(first) = regions.first_mut() {
            first.emoji = "xx";
        }
    }
    let n = regions.len();
    let doc = MockDocument {
        regions,
        overall_summary: format!("{n} part(s) of this picture look edited."),
    };
    let json = serde_json::to_string_pretty(&doc).unwrap_or_default();
    match cfg.fault_mode {
        FaultMode::Fenced => format!("```json\n{json}\n```"),
        FaultMode::ProseWrapped => format!(
            "Here is the simplified explanation you asked for.\n\n{json}\n\nLet me know if you would like more detail."
        ),
        FaultMode::TrailingCommas => {
            // pretty output ends with "\n}"; slip a comma after the last member
            let body = json.strip_suffix("\n}").unwrap_or(&json);
            format!("{body},\n}}")
        }
        FaultMode::Garbage => GARBAGE.to_string(),
        FaultMode::None | FaultMode::BadEmoji | FaultMode::Flaky5xx { .. } => json,
    }
}

/// Fills the masked pixels with the mean colour of the ring just outside the
/// mask (radius-5 square dilation minus the mask). A mask covering the whole
/// image leaves no ring, so mid-grey is used instead.
pub fn mock_edit(req: &EditRequest, mask: &BinaryMask) -> Result<Vec<u8>, MockError> {
    let img = image::load_from_memory(&req.image).map_err(|e| MockError::Undecodable(e.to_string()))?;
    let mut img: RgbaImage = img.to_rgba8();
    if img.dimensions() != mask.dimensions() {
        return Err(MaskError::DimensionMismatch { a: img.dimensions(), b: mask.dimensions() }.into());
    }
    if mask.is_empty() {
        return Err(MockError::EmptyMask);
    }
    let ring = mask.dilate(5).difference(mask)?;
    let fill = ring_mean(&img, &ring).unwrap_or([128, 128, 128, 255]);
    for (x, y, px) in img.enumerate_pixels_mut() {
        if mask.get(x, y) {
            px.0 = fill;
        }
    }
    Ok(encode_png(&img)?)
}

fn ring_mean(img: &RgbaImage, ring: &BinaryMask) -> Option<[u8; 4]> {
    let mut sums = [0u64; 4];
    let mut n = 0u64;
    for (x, y, px) in img.enumerate_pixels() {
        if ring.get(x, y) {
            for (s, c) in sums.iter_mut().zip(px.0) {
                *s += c as u64;
            }
            n += 1;
        }
    }
    (n > 0).then(|| sums.map(|s| ((s + n / 2) / n) as u8))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::explain::{parse_simplifier_output, RepairKind};

    fn png(img: &RgbaImage) -> Vec<u8> {
        encode_png(img).unwrap()
    }

    fn request(labels: &[&str]) -> SimplifyRequest {
        SimplifyRequest {
            image: vec![],
            technical_explanation: "t".into(),
            region_labels: labels.iter().map(|s| s.to_string()).collect(),
        }
    }

    #[test]
    fn fault_mode_parsing() {
        assert_eq!("flaky_5xx:3".parse::<FaultMode>().unwrap(), FaultMode::Flaky5xx { first_n: 3 });
        assert_eq!("flaky_5xx(2)".parse::<FaultMode>().unwrap(), FaultMode::Flaky5xx { first_n: 2 });
        assert!("flaky_5xx:0".parse::<FaultMode>().is_err());
        assert_eq!("garbage".parse::<FaultMode>().unwrap(), FaultMode::Garbage);
        assert!("nope".parse::<FaultMode>().is_err());
        let json = serde_json::to_string(&FaultMode::Flaky5xx { first_n: 3 }).unwrap();
        assert_eq!(json, r#"{"mode":"flaky_5xx","first_n":3}"#);
    }

    #[test]
    fn config_validation() {
        assert!(MockConfig { region_count_override: Some(4), ..Default::default() }.validate().is_err());
        assert!(MockConfig::with_fault(FaultMode::Flaky5xx { first_n: 0 }).validate().is_err());
        assert!(MockConfig::default().validate().is_ok());
    }

    #[test]
    fn detect_is_deterministic_and_valid() {
        for seed in 0..40u8 {
            let img = RgbaImage::from_fn(64, 48, |x, y| image::Rgba([seed, x as u8, y as u8, 255]));
            let bytes = png(&img);
            let a = mock_detect(&bytes, &MockConfig::default()).unwrap();
            let b = mock_detect(&bytes, &MockConfig::default()).unwrap();
            assert_eq!(serde_json::to_vec(&a).unwrap(), serde_json::to_vec(&b).unwrap());
            let findings = a.validate((64, 48)).unwrap();
            let d = Sha256Digest::of(&bytes);
            let fake = d.as_bytes()[0] % 2 == 0;
            assert_eq!(a.verdict == Verdict::Fake, fake);
            if fake {
                assert_eq!(findings.len(), 1 + d.as_bytes()[1] as usize % 3);
                for f in &findings {
                    let b = f.bbox();
                    assert!(b.x_max - b.x_min + 1 >= 8 && b.y_max - b.y_min + 1 >= 8);
                }
            } else {
                assert!(findings.is_empty());
            }
        }
    }

    #[test]
    fn tiny_images_clamp_regions() {
        // search for a fake-verdict 5x5 image
        let bytes = (0..=255u8)
            .map(|s| png(&RgbaImage::from_pixel(5, 5, image::Rgba([s, 0, 0, 255]))))
            .find(|b| Sha256Digest::of(b).as_bytes()[0] % 2 == 0)
            .unwrap();
        let r = mock_detect(&bytes, &MockConfig::default()).unwrap();
        assert!(!r.regions.is_empty());
        r.validate((5, 5)).unwrap();
    }

    #[test]
    fn simplify_templates() {
        let out = mock_simplify(&request(&["Region A"]), &MockConfig::default());
        let (parsed, report) = parse_simplifier_output(&out).unwrap();
        assert!(report.applied.is_empty());
        assert_eq!(parsed.entries.len(), 1);
        assert_eq!(parsed.entries[0].edit_instruction, "Remove the Region A and restore the background.");

        let garbage = mock_simplify(&request(&["Region A"]), &MockConfig::with_fault(FaultMode::Garbage));
        assert!(!garbage.contains('{') && !garbage.contains('}'));
    }

    #[test]
    fn trailing_comma_fault_needs_exactly_that_repair() {
        let out = mock_simplify(&request(&["Region A", "Region B"]), &MockConfig::with_fault(FaultMode::TrailingCommas));
        assert!(serde_json::from_str::<serde_json::Value>(&out).is_err());
        let (parsed, report) = parse_simplifier_output(&out).unwrap();
        assert_eq!(report.applied, vec![RepairKind::RemoveTrailingCommas]);
        assert_eq!(parsed.entries.len(), 2);
    }

    #[test]
    fn wrapping_faults_map_to_their_repairs() {
        let fenced = mock_simplify(&request(&["Region A"]), &MockConfig::with_fault(FaultMode::Fenced));
        assert_eq!(parse_simplifier_output(&fenced).unwrap().1.applied, vec![RepairKind::StripCodeFences]);
        let prose = mock_simplify(&request(&["Region A"]), &MockConfig::with_fault(FaultMode::ProseWrapped));
        assert_eq!(parse_simplifier_output(&prose).unwrap().1.applied, vec![RepairKind::TrimSurroundingProse]);
        let bad = mock_simplify(&request(&["Region A"]), &MockConfig::with_fault(FaultMode::BadEmoji));
        assert_eq!(parse_simplifier_output(&bad).unwrap().0.entries[0].emoji, "🔍");
    }

    #[test]
    fn emoji_table_is_valid() {
        for e in EMOJIS {
            assert!(crate::explain::validate_emoji(e).is_valid(), "{e}");
        }
    }

    #[test]
    fn edit_on_uniform_image_is_identity() {
        let img = RgbaImage::from_pixel(32, 32, image::Rgba([90, 120, 30, 255]));
        let req = EditRequest { image: png(&img), instruction: "Remove it.".into() };
        let mask = BinaryMask::rect(32, 32, 8, 8, 20, 20);
        let out = image::load_from_memory(&mock_edit(&req, &mask).unwrap()).unwrap().to_rgba8();
        assert_eq!(out, img);
    }

    #[test]
    fn edit_fills_square_from_black_ring() {
        let mut img = RgbaImage::from_pixel(40, 40, image::Rgba([0, 0, 0, 255]));
        for y in 15..25 {
            for x in 15..25 {
                img.put_pixel(x, y, image::Rgba([255, 255, 255, 255]));
            }
        }
        let mask = BinaryMask::rect(40, 40, 15, 15, 25, 25);
        let req = EditRequest { image: png(&img), instruction: "Remove the square.".into() };
        let out = image::load_from_memory(&mock_edit(&req, &mask).unwrap()).unwrap().to_rgba8();
        assert!(out.pixels().all(|p| p.0 == [0, 0, 0, 255]));
    }

    #[test]
    fn edit_with_two_tone_ring_uses_per_pixel_mean() {
        // left half dark, right half light; mask straddles the seam
        let img = RgbaImage::from_fn(30, 30, |x, _| if x < 15 { image::Rgba([10, 20, 30, 255]) } else { image::Rgba([200, 100, 51, 255]) });
        let mask = BinaryMask::rect(30, 30, 10, 10, 20, 20);
        let req = EditRequest { image: png(&img), instruction: "x".into() };
        let out = image::load_from_memory(&mock_edit(&req, &mask).unwrap()).unwrap().to_rgba8();
        // oracle: enumerate the ring directly with Chebyshev distance
        let (mut n, mut sum) = (0u64, [0u64; 4]);
        for y in 0..30i32 {
            for x in 0..30i32 {
                let in_mask = (10..20).contains(&x) && (10..20).contains(&y);
                let dx = (10 - x).max(x - 19).max(0);
                let dy = (10 - y).max(y - 19).max(0);
                if !in_mask && dx.max(dy) <= 5 {
                    n += 1;
                    for (s, c) in sum.iter_mut().zip(img.get_pixel(x as u32, y as u32).0) {
                        *s += c as u64;
                    }
                }
            }
        }
        let mean = sum.map(|s| ((s as f64 / n as f64) + 0.5).floor() as u8);
        assert_eq!(out.get_pixel(12, 12).0, mean);
        assert_eq!(out.get_pixel(0, 0).0, img.get_pixel(0, 0).0);
    }

    #[test]
    fn full_mask_falls_back_to_grey() {
        let img = RgbaImage::from_pixel(6, 6, image::Rgba([1, 2, 3, 255]));
        let req = EditRequest { image: png(&img), instruction: "x".into() };
        let out = image::load_from_memory(&mock_edit(&req, &BinaryMask::full(6, 6)).unwrap()).unwrap().to_rgba8();
        assert!(out.pixels().all(|p| p.0 == [128, 128, 128, 255]));
    }

    #[test]
    fn edit_rejects_empty_or_mismatched_masks() {
        let img = RgbaImage::from_pixel(6, 6, image::Rgba([1, 2, 3, 255]));
        let req = EditRequest { image: png(&img), instruction: "x".into() };
        assert!(matches!(mock_edit(&req, &BinaryMask::empty(6, 6)), Err(MockError::EmptyMask)));
        assert!(matches!(mock_edit(&req, &BinaryMask::full(5, 6)), Err(MockError::Mask(_))));
    }
}
