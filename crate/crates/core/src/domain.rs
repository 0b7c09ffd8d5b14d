//! Value types shared by every LayLens component.
//!
//! Everything here is an immutable value with a canonical snake_case JSON
//! form. Unknown fields are ignored on input; `None` optionals are omitted on
//! output.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Cursor;
use std::str::FromStr;

use chrono::{DateTime, SecondsFormat, TimeZone, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest as _, Sha256};
use thiserror::Error;

use crate::mask::{bbox_of, rle_decode, BBox, MaskError, MaskRle};

/// Largest accepted width or height, in pixels.
pub const MAX_DIMENSION: u32 = 4096;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DomainError {
    #[error("dimension limit exceeded: {width}x{height} (max {MAX_DIMENSION})")]
    DimensionLimit { width: u32, height: u32 },
    #[error("image has a zero dimension")]
    ZeroDimension,
    #[error("digest mismatch: expected {expected}, computed {actual}")]
    DigestMismatch { expected: Sha256Digest, actual: Sha256Digest },
    #[error("invalid sha256 hex digest: {0:?}")]
    InvalidDigest(String),
    #[error("invalid job id: {0:?}")]
    InvalidJobId(String),
    #[error("undecodable image: {0}")]
    Undecodable(String),
    #[error("unsupported media type: {0:?}")]
    UnsupportedMediaType(String),
    #[error("invalid timestamp: {0}")]
    InvalidTimestamp(String),
    #[error("invalid region finding: {0}")]
    InvalidFinding(String),
    #[error(transparent)]
    Mask(#[from] MaskError),
}

/// A SHA-256 digest, rendered as 64 lowercase hex characters.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Sha256Digest([u8; 32]);

impl Sha256Digest {
    pub fn of(bytes: &[u8]) -> Self {
        Self(Sha256::digest(bytes).into())
    }

    pub fn from_bytes(bytes: [u8; 32]) -> Self {
        Self(bytes)
    }

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }
}

impl fmt::Display for Sha256Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl fmt::Debug for Sha256Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Sha256Digest({})", self.to_hex())
    }
}

impl FromStr for Sha256Digest {
    type Err = DomainError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lowercase_hex = s.len() == 64 && s.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f'));
        if !lowercase_hex {
            return Err(DomainError::InvalidDigest(s.to_string()));
        }
        let mut out = [0u8; 32];
        hex::decode_to_slice(s, &mut out).map_err(|_| DomainError::InvalidDigest(s.to_string()))?;
        Ok(Self(out))
    }
}

impl TryFrom<String> for Sha256Digest {
    type Error = DomainError;
    fn try_from(value: String) -> Result<Self, Self::Error> {
        value.parse()
    }
}

impl From<Sha256Digest> for String {
    fn from(value: Sha256Digest) -> Self {
        value.to_hex()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MediaType {
    #[serde(rename = "image/png")]
    Png,
    #[serde(rename = "image/jpeg")]
    Jpeg,
}

impl MediaType {
    pub fn as_str(&self) -> &'static str {
        match self {
            MediaType::Png => "image/png",
            MediaType::Jpeg => "image/jpeg",
        }
    }

    fn image_format(&self) -> image::ImageFormat {
        match self {
            MediaType::Png => image::ImageFormat::Png,
            MediaType::Jpeg => image::ImageFormat::Jpeg,
        }
    }
}

impl FromStr for MediaType {
    type Err = DomainError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        // Parameters such as "; charset=binary" are irrelevant for images.
        let essence = s.split(';').next().unwrap_or("").trim().to_ascii_lowercase();
        match essence.as_str() {
            "image/png" => Ok(MediaType::Png),
            "image/jpeg" | "image/jpg" => Ok(MediaType::Jpeg),
            _ => Err(DomainError::UnsupportedMediaType(s.to_string())),
        }
    }
}

impl fmt::Display for MediaType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

fn check_dimensions(width: u32, height: u32) -> Result<(), DomainError> {
    if width == 0 || height == 0 {
        return Err(DomainError::ZeroDimension);
    }
    if width > MAX_DIMENSION || height > MAX_DIMENSION {
        return Err(DomainError::DimensionLimit { width, height });
    }
    Ok(())
}

/// Reference to an image blob held in the content-addressed store.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawImageRef")]
pub struct ImageRef {
    pub sha256: Sha256Digest,
    pub media_type: MediaType,
    pub width: u32,
    pub height: u32,
}

#[derive(Deserialize)]
struct RawImageRef {
    sha256: Sha256Digest,
    media_type: MediaType,
    width: u32,
    height: u32,
}

impl TryFrom<RawImageRef> for ImageRef {
    type Error = DomainError;
    fn try_from(raw: RawImageRef) -> Result<Self, Self::Error> {
        ImageRef::new(raw.sha256, raw.media_type, raw.width, raw.height)
    }
}

impl ImageRef {
    pub fn new(sha256: Sha256Digest, media_type: MediaType, width: u32, height: u32) -> Result<Self, DomainError> {
        check_dimensions(width, height)?;
        Ok(Self { sha256, media_type, width, height })
    }

    /// Builds a reference by hashing `bytes` and reading the image header.
    ///
    /// Only the header is decoded, so this is cheap even for large files.
    pub fn from_bytes(bytes: &[u8], media_type: MediaType) -> Result<Self, DomainError> {
        let reader = image::ImageReader::with_format(Cursor::new(bytes), media_type.image_format());
        let (width, height) = reader
            .into_dimensions()
            .map_err(|e| DomainError::Undecodable(e.to_string()))?;
        Self::new(Sha256Digest::of(bytes), media_type, width, height)
    }

    /// Recomputes the digest of `bytes` and checks it against this reference.
    pub fn verify(&self, bytes: &[u8]) -> Result<(), DomainError> {
        check_dimensions(self.width, self.height)?;
        let actual = Sha256Digest::of(bytes);
        if actual != self.sha256 {
            return Err(DomainError::DigestMismatch { expected: self.sha256, actual });
        }
        Ok(())
    }
}

/// A localized suspect region. Always has at least one foreground pixel and a
/// tight inclusive bounding box.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawFinding")]
pub struct RegionFinding {
    label: String,
    mask: MaskRle,
    bbox: BBox,
}

#[derive(Deserialize)]
struct RawFinding {
    label: String,
    mask: MaskRle,
    bbox: BBox,
}

impl TryFrom<RawFinding> for RegionFinding {
    type Error = DomainError;
    fn try_from(raw: RawFinding) -> Result<Self, Self::Error> {
        RegionFinding::with_bbox(raw.label, raw.mask, raw.bbox)
    }
}

impl RegionFinding {
    /// Derives the bounding box from the mask.
    pub fn new(label: impl Into<String>, mask: MaskRle) -> Result<Self, DomainError> {
        let bbox = bbox_of(&rle_decode(&mask)?)
            .ok_or_else(|| DomainError::InvalidFinding("mask has no foreground pixels".into()))?;
        Ok(Self { label: label.into(), mask, bbox })
    }

    /// Accepts a caller-supplied box, rejecting it unless it is the tight box.
    pub fn with_bbox(label: impl Into<String>, mask: MaskRle, bbox: BBox) -> Result<Self, DomainError> {
        let finding = Self::new(label, mask)?;
        if finding.bbox != bbox {
            return Err(DomainError::InvalidFinding(format!(
                "bbox {bbox:?} is not the tight box {:?}",
                finding.bbox
            )));
        }
        Ok(finding)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn mask(&self) -> &MaskRle {
        &self.mask
    }

    pub fn bbox(&self) -> BBox {
        self.bbox
    }

    pub fn area(&self) -> u64 {
        self.mask.foreground_count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Fake,
    Real,
}

/// One simplified-tier entry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegionExplanation {
    pub region: String,
    pub simple_explanation: String,
    pub emoji: String,
    pub edit_instruction: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matched_region_index: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExplanationTiers {
    pub technical: String,
    #[serde(default)]
    pub simplified: Vec<RegionExplanation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub overall_summary: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum JobState {
    Created,
    Detecting,
    Simplifying,
    Reconstructing,
    Completed,
    CompletedPartial,
    Failed,
    Cancelled,
}

impl JobState {
    pub fn is_terminal(self) -> bool {
        matches!(
            self,
            JobState::Completed | JobState::CompletedPartial | JobState::Failed | JobState::Cancelled
        )
    }

    /// The pipeline's transition graph. Any live state may fail or be cancelled.
    pub fn can_transition_to(self, to: JobState) -> bool {
        use JobState::*;
        if self.is_terminal() {
            return false;
        }
        if matches!(to, Failed | Cancelled) {
            return true;
        }
        matches!(
            (self, to),
            (Created, Detecting)
                | (Detecting, Completed)
                | (Detecting, Simplifying)
                | (Simplifying, Reconstructing)
                | (Simplifying, CompletedPartial)
                | (Reconstructing, Completed)
                | (Reconstructing, CompletedPartial)
        )
    }

    pub fn as_str(self) -> &'static str {
        match self {
            JobState::Created => "CREATED",
            JobState::Detecting => "DETECTING",
            JobState::Simplifying => "SIMPLIFYING",
            JobState::Reconstructing => "RECONSTRUCTING",
            JobState::Completed => "COMPLETED",
            JobState::CompletedPartial => "COMPLETED_PARTIAL",
            JobState::Failed => "FAILED",
            JobState::Cancelled => "CANCELLED",
        }
    }
}

impl fmt::Display for JobState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// 32 lowercase hex characters drawn from the thread RNG.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct JobId(String);

impl JobId {
    pub fn random() -> Self {
        Self(hex::encode(rand::random::<[u8; 16]>()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl FromStr for JobId {
    type Err = DomainError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.len() == 32 && s.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f')) {
            Ok(Self(s.to_string()))
        } else {
            Err(DomainError::InvalidJobId(s.to_string()))
        }
    }
}

impl TryFrom<String> for JobId {
    type Error = DomainError;
    fn try_from(value: String) -> Result<Self, Self::Error> {
        value.parse()
    }
}

impl From<JobId> for String {
    fn from(value: JobId) -> Self {
        value.0
    }
}

impl fmt::Display for JobId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// UTC instant with millisecond precision, encoded as RFC 3339.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Timestamp(DateTime<Utc>);

impl Timestamp {
    pub fn now() -> Self {
        Self::from_millis(Utc::now().timestamp_millis())
    }

    pub fn from_millis(millis: i64) -> Self {
        Self(Utc.timestamp_millis_opt(millis).single().unwrap_or_default())
    }

    pub fn epoch_millis(&self) -> i64 {
        self.0.timestamp_millis()
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0.to_rfc3339_opts(SecondsFormat::Millis, true))
    }
}

impl TryFrom<String> for Timestamp {
    type Error = DomainError;
    fn try_from(value: String) -> Result<Self, Self::Error> {
        let parsed = DateTime::parse_from_rfc3339(&value).map_err(|e| DomainError::InvalidTimestamp(e.to_string()))?;
        Ok(Self::from_millis(parsed.timestamp_millis()))
    }
}

impl From<Timestamp> for String {
    fn from(value: Timestamp) -> Self {
        value.to_string()
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum JobError {
    #[error("terminal immutable: job is {0}")]
    TerminalImmutable(JobState),
    #[error("illegal transition {from} -> {to}")]
    IllegalTransition { from: JobState, to: JobState },
    #[error("job invariant violated: {0}")]
    Invariant(String),
}

/// One image's journey through the pipeline.
///
/// Fields are only reachable through accessors; every mutator refuses to
/// touch a job whose state is terminal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisJob {
    job_id: JobId,
    input: ImageRef,
    state: JobState,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    verdict: Option<Verdict>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    confidence: Option<f64>,
    #[serde(default)]
    findings: Vec<RegionFinding>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    explanations: Option<ExplanationTiers>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    reconstruction: Option<ImageRef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    overlay: Option<ImageRef>,
    #[serde(default)]
    stage_errors: BTreeMap<String, String>,
    created_at: Timestamp,
    updated_at: Timestamp,
    config_digest: Sha256Digest,
}

impl AnalysisJob {
    /// Creates a job in `CREATED` after re-validating the input against its bytes.
    pub fn new(input: ImageRef, image_bytes: &[u8], config_digest: Sha256Digest) -> Result<Self, DomainError> {
        input.verify(image_bytes)?;
        let now = Timestamp::now();
        Ok(Self {
            job_id: JobId::random(),
            input,
            state: JobState::Created,
            verdict: None,
            confidence: None,
            findings: Vec::new(),
            explanations: None,
            reconstruction: None,
            overlay: None,
            stage_errors: BTreeMap::new(),
            created_at: now,
            updated_at: now,
            config_digest,
        })
    }

    pub fn job_id(&self) -> &JobId {
        &self.job_id
    }
    pub fn input(&self) -> &ImageRef {
        &self.input
    }
    pub fn state(&self) -> JobState {
        self.state
    }
    pub fn verdict(&self) -> Option<Verdict> {
        self.verdict
    }
    pub fn confidence(&self) -> Option<f64> {
        self.confidence
    }
    pub fn findings(&self) -> &[RegionFinding] {
        &self.findings
    }
    pub fn explanations(&self) -> Option<&ExplanationTiers> {
        self.explanations.as_ref()
    }
    pub fn reconstruction(&self) -> Option<&ImageRef> {
        self.reconstruction.as_ref()
    }
    pub fn overlay(&self) -> Option<&ImageRef> {
        self.overlay.as_ref()
    }
    pub fn stage_errors(&self) -> &BTreeMap<String, String> {
        &self.stage_errors
    }
    pub fn created_at(&self) -> Timestamp {
        self.created_at
    }
    pub fn updated_at(&self) -> Timestamp {
        self.updated_at
    }
    pub fn config_digest(&self) -> &Sha256Digest {
        &self.config_digest
    }
    pub fn is_terminal(&self) -> bool {
        self.state.is_terminal()
    }

    fn ensure_live(&self) -> Result<(), JobError> {
        if self.state.is_terminal() {
            Err(JobError::TerminalImmutable(self.state))
        } else {
            Ok(())
        }
    }

    fn touch(&mut self) {
        // Keep updated_at monotone even if the wall clock steps backwards.
        self.updated_at = Timestamp::now().max(self.updated_at);
    }

    pub fn transition(&mut self, to: JobState) -> Result<(), JobError> {
        self.ensure_live()?;
        if !self.state.can_transition_to(to) {
            return Err(JobError::IllegalTransition { from: self.state, to });
        }
        match (self.state, to) {
            (JobState::Detecting, JobState::Completed) if self.verdict != Some(Verdict::Real) => {
                return Err(JobError::Invariant("only a real verdict completes after detection".into()));
            }
            (JobState::Detecting, JobState::Simplifying) if self.verdict != Some(Verdict::Fake) => {
                return Err(JobError::Invariant("simplification requires a fake verdict".into()));
            }
            _ => {}
        }
        if self.reconstruction.is_some() && !matches!(to, JobState::Completed) {
            return Err(JobError::Invariant("a reconstruction may only accompany COMPLETED".into()));
        }
        self.state = to;
        self.touch();
        Ok(())
    }

    pub fn set_detection(
        &mut self,
        verdict: Verdict,
        confidence: Option<f64>,
        findings: Vec<RegionFinding>,
    ) -> Result<(), JobError> {
        self.ensure_live()?;
        if verdict == Verdict::Real && !findings.is_empty() {
            return Err(JobError::Invariant("a real verdict carries no findings".into()));
        }
        if let Some(c) = confidence {
            if !(0.0..=1.0).contains(&c) {
                return Err(JobError::Invariant(format!("confidence {c} outside [0,1]")));
            }
        }
        self.verdict = Some(verdict);
        self.confidence = confidence;
        self.findings = findings;
        self.touch();
        Ok(())
    }

    pub fn set_overlay(&mut self, overlay: ImageRef) -> Result<(), JobError> {
        self.ensure_live()?;
        self.overlay = Some(overlay);
        self.touch();
        Ok(())
    }

    pub fn set_explanations(&mut self, tiers: ExplanationTiers) -> Result<(), JobError> {
        self.ensure_live()?;
        if self.verdict == Some(Verdict::Fake) && tiers.technical.trim().is_empty() {
            return Err(JobError::Invariant("technical tier must be non-empty for a fake verdict".into()));
        }
        self.explanations = Some(tiers);
        self.touch();
        Ok(())
    }

    pub fn set_reconstruction(&mut self, reconstruction: ImageRef) -> Result<(), JobError> {
        self.ensure_live()?;
        if self.verdict != Some(Verdict::Fake) || self.state != JobState::Reconstructing {
            return Err(JobError::Invariant("reconstruction requires a fake verdict in RECONSTRUCTING".into()));
        }
        self.reconstruction = Some(reconstruction);
        self.touch();
        Ok(())
    }

    pub fn record_stage_error(&mut self, stage: &str, detail: impl Into<String>) -> Result<(), JobError> {
        self.ensure_live()?;
        self.stage_errors.insert(stage.to_string(), detail.into());
        self.touch();
        Ok(())
    }
}

/// Shorthand for [`AnalysisJob::new`].
pub fn new_job(input: ImageRef, image_bytes: &[u8], config_digest: Sha256Digest) -> Result<AnalysisJob, DomainError> {
    AnalysisJob::new(input, image_bytes, config_digest)
}
