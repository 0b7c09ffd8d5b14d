//! Turning simplifier output into validated per-region explanations.
//!
//! The flow is: [`extract_json_block`] (bounded repairs) →
//! [`parse_region_explanations`] (schema, per-entry salvage, emoji fallback) →
//! [`match_region_label`] against detector findings →
//! [`compose_edit_instruction`] for the editor.

mod emoji;
mod instruction;
mod matching;
mod readability;
mod repair;
mod schema;

use serde::{Deserialize, Serialize};

pub use emoji::{validate_emoji, EmojiValidity, FALLBACK_EMOJI};
pub use instruction::{compose_edit_instruction, ComposeError};
pub use matching::{jaccard, match_region_label, normalize_label};
pub use readability::{readability_score, ReadabilityError};
pub use repair::{extract_json_block, ExtractError, RepairKind, RepairReport};
pub use schema::{
    parse_region_explanations, parse_simplifier_output, EntryIssue, ParseFailure, ParsedExplanations, SchemaError,
};

/// Tunables that change parser behaviour; part of the pipeline config digest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParserConfig {
    pub jaccard_threshold: f64,
    pub instruction_cap: usize,
}

impl Default for ParserConfig {
    fn default() -> Self {
        Self { jaccard_threshold: 0.5, instruction_cap: 480 }
    }
}
