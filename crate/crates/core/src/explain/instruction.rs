use thiserror::Error;

use crate::domain::{RegionExplanation, RegionFinding};

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ComposeError {
    #[error("no explanations to compose an edit instruction from")]
    Empty,
}

const SEPARATOR: &str = "; ";

/// Joins per-region edit instructions into the single instruction sent to the
/// editor. Larger matched regions come first; unmatched entries keep their
/// input order at the end. The result never exceeds `cap` characters.
pub fn compose_edit_instruction(
    explanations: &[RegionExplanation],
    findings: &[RegionFinding],
    cap: usize,
) -> Result<String, ComposeError> {
    if explanations.is_empty() {
        return Err(ComposeError::Empty);
    }
    let area_of = |e: &RegionExplanation| e.matched_region_index.and_then(|i| findings.get(i)).map(|f| f.area());
    let mut matched: Vec<(u64, &RegionExplanation)> =
        explanations.iter().filter_map(|e| area_of(e).map(|a| (a, e))).collect();
    matched.sort_by(|a, b| b.0.cmp(&a.0));
    let unmatched = explanations.iter().filter(|e| area_of(e).is_none());

    let joined = matched
        .into_iter()
        .map(|(_, e)| e)
        .chain(unmatched)
        .map(|e| e.edit_instruction.trim())
        .filter(|s| !s.is_empty())
        .collect::<Vec<_>>()
        .join(SEPARATOR);
    Ok(truncate_at_clause(&joined, cap))
}

/// Cuts `text` to at most `cap` characters. Prefers ending after a whole
/// per-region instruction, then after a sentence, then after a comma-like
/// break, then at a word boundary; a hard cut is the last resort.
fn truncate_at_clause(text: &str, cap: usize) -> String {
    if text.chars().count() <= cap {
        return text.to_string();
    }
    let limit = text.char_indices().nth(cap).map(|(i, _)| i).unwrap_or(text.len());
    let window = &text[..limit];
    let next_is_space = |i: usize| text[i..].chars().next().is_none_or(char::is_whitespace);
    let last_after = |terminators: &[char]| {
        window
            .char_indices()
            .filter(|&(i, c)| terminators.contains(&c) && next_is_space(i + c.len_utf8()))
            .map(|(i, c)| i + c.len_utf8())
            .last()
    };

    let whole_instruction = text.match_indices(SEPARATOR).map(|(i, _)| i).filter(|&i| i <= limit).last();
    let candidates = [
        whole_instruction,
        last_after(&['.', '!', '?']),
        last_after(&[',', ';', ':']).map(|end| end - 1),
        window.rfind(char::is_whitespace),
    ];
    for end in candidates.into_iter().flatten() {
        let cut = text[..end].trim_end();
        if !cut.is_empty() {
            return cut.to_string();
        }
    }
    window.to_string()
}
