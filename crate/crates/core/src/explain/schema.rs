use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use super::emoji::{validate_emoji, FALLBACK_EMOJI};
use super::repair::{extract_json_block, RepairKind, RepairReport};
use crate::domain::RegionExplanation;

/// Something that went wrong with a single entry without sinking the others.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EntryIssue {
    Rejected {
        index: usize,
        reason: String,
    },
    EmojiSubstituted {
        index: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        original: Option<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedExplanations {
    pub entries: Vec<RegionExplanation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub overall_summary: Option<String>,
    #[serde(default)]
    pub issues: Vec<EntryIssue>,
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum SchemaError {
    #[error("shape: {0}")]
    Shape(String),
    #[error("all {} entries invalid", issues.len())]
    AllEntriesInvalid { issues: Vec<EntryIssue> },
}

impl SchemaError {
    pub fn class(&self) -> &'static str {
        match self {
            SchemaError::Shape(_) => "shape",
            SchemaError::AllEntriesInvalid { .. } => "all_entries_invalid",
        }
    }
}

fn required_text(entry: &Map<String, Value>, field: &str) -> Option<String> {
    match entry.get(field) {
        Some(Value::String(s)) if !s.trim().is_empty() => Some(s.clone()),
        _ => None,
    }
}

fn parse_entry(index: usize, value: &Value, issues: &mut Vec<EntryIssue>) -> Option<RegionExplanation> {
    let reject = |reason: &str| EntryIssue::Rejected { index, reason: reason.to_string() };
    let Some(entry) = value.as_object() else {
        issues.push(reject("not_an_object"));
        return None;
    };
    let mut fields = Vec::with_capacity(3);
    for field in ["region", "simple_explanation", "edit_instruction"] {
        match required_text(entry, field) {
            Some(text) => fields.push(text),
            None => {
                issues.push(reject(&format!("missing_{field}")));
                return None;
            }
        }
    }
    let [region, simple_explanation, edit_instruction]: [String; 3] = fields.try_into().ok()?;

    let raw_emoji = entry.get("emoji");
    let emoji = match raw_emoji {
        Some(Value::String(e)) if validate_emoji(e).is_valid() => e.clone(),
        other => {
            let original = match other {
                Some(Value::String(s)) => Some(s.clone()),
                Some(v) => Some(v.to_string()),
                None => None,
            };
            issues.push(EntryIssue::EmojiSubstituted { index, original });
            FALLBACK_EMOJI.to_string()
        }
    };
    let matched_region_index = entry.get("matched_region_index").and_then(Value::as_u64).map(|i| i as usize);

    Some(RegionExplanation { region, simple_explanation, emoji, edit_instruction, matched_region_index })
}

/// Validates `{"regions":[...], "overall_summary"?}` entry by entry.
///
/// Invalid entries are dropped with a recorded reason; a bad emoji becomes
/// [`FALLBACK_EMOJI`]. Only a wrong top-level shape, or a non-empty list in
/// which nothing survives, is an error.
pub fn parse_region_explanations(candidate: &str) -> Result<ParsedExplanations, SchemaError> {
    let value: Value = serde_json::from_str(candidate).map_err(|e| SchemaError::Shape(format!("not JSON: {e}")))?;
    let Value::Object(root) = value else {
        return Err(SchemaError::Shape("top level is not an object".into()));
    };
    let Some(Value::Array(regions)) = root.get("regions") else {
        return Err(SchemaError::Shape("missing \"regions\" array".into()));
    };
    let overall_summary = match root.get("overall_summary") {
        Some(Value::String(s)) if !s.trim().is_empty() => Some(s.clone()),
        _ => None,
    };

    let mut issues = Vec::new();
    let entries: Vec<RegionExplanation> = regions
        .iter()
        .enumerate()
        .filter_map(|(i, v)| parse_entry(i, v, &mut issues))
        .collect();
    if entries.is_empty() && !regions.is_empty() {
        return Err(SchemaError::AllEntriesInvalid { issues });
    }
    Ok(ParsedExplanations { entries, overall_summary, issues })
}

/// Why raw simplifier text yielded no explanations. `class` is one of
/// `unrecoverable`, `shape`, `all_entries_invalid`.
#[derive(Debug, Clone, Error, PartialEq, Eq, Serialize, Deserialize)]
#[error("{class}: {detail}")]
pub struct ParseFailure {
    pub class: String,
    pub repairs: Vec<RepairKind>,
    pub detail: String,
}

/// Extraction followed by schema validation.
pub fn parse_simplifier_output(raw: &str) -> Result<(ParsedExplanations, RepairReport), ParseFailure> {
    let (candidate, report) = extract_json_block(raw).map_err(|e| ParseFailure {
        class: "unrecoverable".into(),
        repairs: e.report.applied.clone(),
        detail: format!("no JSON object found after repairs {:?}", e.report.applied),
    })?;
    let parsed = parse_region_explanations(&candidate).map_err(|e| ParseFailure {
        class: e.class().into(),
        repairs: report.applied.clone(),
        detail: e.to_string(),
    })?;
    Ok((parsed, report))
}
