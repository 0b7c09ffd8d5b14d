//! Core building blocks for LayLens, an explainable deepfake-analysis service.
//!
//! The crate is free of I/O: the service crate wires these pieces into an
//! HTTP pipeline.

pub mod domain;
pub mod explain;
pub mod mask;
pub mod mock;
pub mod overlay;
pub mod protocol;
pub mod survey;

pub use domain::{
    new_job, AnalysisJob, DomainError, ExplanationTiers, ImageRef, JobError, JobId, JobState, MediaType,
    RegionExplanation, RegionFinding, Sha256Digest, Timestamp, Verdict, MAX_DIMENSION,
};
pub use mask::{bbox_of, mask_area, mask_iou, rle_decode, rle_encode, BBox, BinaryMask, MaskError, MaskRle};
