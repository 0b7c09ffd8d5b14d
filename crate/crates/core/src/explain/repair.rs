//! Bounded, ordered repair passes for JSON embedded in model output.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RepairKind {
    StripCodeFences,
    TrimSurroundingProse,
    RemoveTrailingCommas,
    NormalizeCurlyQuotes,
}

impl RepairKind {
    /// Application order. Each pass runs at most once.
    pub const ORDER: [RepairKind; 4] = [
        RepairKind::StripCodeFences,
        RepairKind::TrimSurroundingProse,
        RepairKind::RemoveTrailingCommas,
        RepairKind::NormalizeCurlyQuotes,
    ];

    /// Returns `None` when the pass would leave the text unchanged.
    fn apply(self, text: &str) -> Option<String> {
        match self {
            RepairKind::StripCodeFences => strip_code_fences(text),
            RepairKind::TrimSurroundingProse => trim_surrounding_prose(text),
            RepairKind::RemoveTrailingCommas => remove_trailing_commas(text),
            RepairKind::NormalizeCurlyQuotes => normalize_curly_quotes(text),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepairReport {
    pub applied: Vec<RepairKind>,
    pub recovered: bool,
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("unrecoverable: no JSON object found after repairs {:?}", report.applied)]
pub struct ExtractError {
    pub report: RepairReport,
}

fn parses_as_object(text: &str) -> bool {
    matches!(serde_json::from_str::<serde_json::Value>(text), Ok(serde_json::Value::Object(_)))
}

/// Finds the first balanced JSON object in `raw`, applying repairs only while
/// the text still fails to parse.
pub fn extract_json_block(raw: &str) -> Result<(String, RepairReport), ExtractError> {
    let mut text = raw.trim().to_string();
    let mut report = RepairReport::default();
    if parses_as_object(&text) {
        report.recovered = true;
        return Ok((text, report));
    }
    for kind in RepairKind::ORDER {
        if let Some(next) = kind.apply(&text) {
            text = next.trim().to_string();
            report.applied.push(kind);
            if parses_as_object(&text) {
                report.recovered = true;
                return Ok((text, report));
            }
        }
    }
    Err(ExtractError { report })
}

fn strip_code_fences(text: &str) -> Option<String> {
    let open = text.find("```")?;
    let after = &text[open + 3..];
    // skip the info string ("json", "JSON", ...) up to the end of the line
    let body_start = after.find('\n').map(|i| i + 1).unwrap_or(after.len());
    let body = &after[body_start..];
    let inner = match body.find("```") {
        Some(close) => &body[..close],
        None => body,
    };
    Some(inner.to_string())
}

/// Byte range of the balanced object opening at `start`, honouring string literals.
fn balanced_object_at(text: &str, start: usize) -> Option<usize> {
    let bytes = text.as_bytes();
    let mut depth = 0usize;
    let mut in_string = false;
    let mut escaped = false;
    for (offset, &b) in bytes[start..].iter().enumerate() {
        if in_string {
            match b {
                _ if escaped => escaped = false,
                b'\\' => escaped = true,
                b'"' => in_string = false,
                _ => {}
            }
            continue;
        }
        match b {
            b'"' => in_string = true,
            b'{' => depth += 1,
            b'}' => {
                depth = depth.checked_sub(1)?;
                if depth == 0 {
                    return Some(start + offset + 1);
                }
            }
            _ => {}
        }
    }
    None
}

fn first_balanced_object(text: &str) -> Option<&str> {
    text.match_indices('{')
        .find_map(|(start, _)| balanced_object_at(text, start).map(|end| &text[start..end]))
}

fn trim_surrounding_prose(text: &str) -> Option<String> {
    let object = first_balanced_object(text)?;
    (object != text.trim()).then(|| object.to_string())
}

fn remove_trailing_commas(text: &str) -> Option<String> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = String::with_capacity(text.len());
    let mut in_string = false;
    let mut escaped = false;
    let mut removed = false;
    for (i, &c) in chars.iter().enumerate() {
        if in_string {
            match c {
                _ if escaped => escaped = false,
                '\\' => escaped = true,
                '"' => in_string = false,
                _ => {}
            }
            out.push(c);
            continue;
        }
        if c == '"' {
            in_string = true;
        } else if c == ',' {
            let next = chars[i + 1..].iter().find(|c| !c.is_whitespace());
            if matches!(next, Some('}') | Some(']')) {
                removed = true;
                continue;
            }
        }
        out.push(c);
    }
    removed.then_some(out)
}

fn normalize_curly_quotes(text: &str) -> Option<String> {
    let mut changed = false;
    let out = text
        .chars()
        .map(|c| match c {
            '\u{201C}' | '\u{201D}' | '\u{201E}' | '\u{201F}' => {
                changed = true;
                '"'
            }
            '\u{2018}' | '\u{2019}' | '\u{201A}' | '\u{201B}' => {
                changed = true;
                '\''
            }
            other => other,
        })
        .collect();
    changed.then_some(out)
}
