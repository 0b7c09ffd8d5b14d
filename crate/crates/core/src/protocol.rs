//! JSON bodies exchanged with model backends.
//!
//! Every backend implements `POST {base}/v1/detect`, `POST {base}/v1/simplify`,
//! `POST {base}/v1/edit` and `GET {base}/v1/health`. Images travel as
//! standard base64 inside the JSON body.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{DomainError, RegionFinding, Verdict};
use crate::mask::{BBox, MaskRle};

pub const DETECT_PATH: &str = "/v1/detect";
pub const SIMPLIFY_PATH: &str = "/v1/simplify";
pub const EDIT_PATH: &str = "/v1/edit";
pub const HEALTH_PATH: &str = "/v1/health";

/// Upper bound on instructions accepted by editors.
pub const MAX_INSTRUCTION_CHARS: usize = 480;

mod b64 {
    use base64::engine::general_purpose::STANDARD;
    use base64::Engine;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&STANDARD.encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        let text = String::deserialize(d)?;
        STANDARD.decode(text.as_bytes()).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectRequest {
    #[serde(with = "b64")]
    pub image: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectedRegion {
    pub label: String,
    pub mask: MaskRle,
    pub bbox: BBox,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectResponse {
    pub verdict: Verdict,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence: Option<f64>,
    pub technical_explanation: String,
    #[serde(default)]
    pub regions: Vec<DetectedRegion>,
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ProtocolViolation {
    #[error("verdict \"real\" must not carry regions")]
    RealWithRegions,
    #[error("confidence {0} outside [0,1]")]
    Confidence(String),
    #[error("region {index} mask is {mask:?}, image is {image:?}")]
    MaskDimensions { index: usize, mask: (u32, u32), image: (u32, u32) },
    #[error("region {index}: {source}")]
    Region { index: usize, source: DomainError },
    #[error("technical explanation is empty for a fake verdict")]
    EmptyExplanation,
    #[error("instruction must be 1-{MAX_INSTRUCTION_CHARS} characters, got {0}")]
    InstructionLength(usize),
    #[error("technical explanation must be non-empty")]
    EmptyTechnicalExplanation,
}

impl DetectResponse {
    /// Checks every response invariant against the submitted image size and
    /// returns the findings as domain values.
    pub fn validate(&self, image_dims: (u32, u32)) -> Result<Vec<RegionFinding>, ProtocolViolation> {
        if self.verdict == Verdict::Real && !self.regions.is_empty() {
            return Err(ProtocolViolation::RealWithRegions);
        }
        if let Some(c) = self.confidence {
            if !(0.0..=1.0).contains(&c) {
                return Err(ProtocolViolation::Confidence(c.to_string()));
            }
        }
        if self.verdict == Verdict::Fake && self.technical_explanation.trim().is_empty() {
            return Err(ProtocolViolation::EmptyExplanation);
        }
        self.regions
            .iter()
            .enumerate()
            .map(|(index, r)| {
                if r.mask.dimensions() != image_dims {
                    return Err(ProtocolViolation::MaskDimensions {
                        index,
                        mask: r.mask.dimensions(),
                        image: image_dims,
                    });
                }
                RegionFinding::with_bbox(r.label.clone(), r.mask.clone(), r.bbox)
                    .map_err(|source| ProtocolViolation::Region { index, source })
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimplifyRequest {
    #[serde(with = "b64")]
    pub image: Vec<u8>,
    pub technical_explanation: String,
    pub region_labels: Vec<String>,
}

impl SimplifyRequest {
    pub fn validate(&self) -> Result<(), ProtocolViolation> {
        if self.technical_explanation.trim().is_empty() {
            return Err(ProtocolViolation::EmptyTechnicalExplanation);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimplifyResponse {
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EditRequest {
    #[serde(with = "b64")]
    pub image: Vec<u8>,
    pub instruction: String,
}

impl EditRequest {
    pub fn validate(&self) -> Result<(), ProtocolViolation> {
        let len = self.instruction.chars().count();
        if self.instruction.trim().is_empty() || len > MAX_INSTRUCTION_CHARS {
            return Err(ProtocolViolation::InstructionLength(len));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EditResponse {
    #[serde(with = "b64")]
    pub image: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HealthResponse {
    pub status: String,
}
