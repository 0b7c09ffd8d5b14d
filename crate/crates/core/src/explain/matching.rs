use std::collections::BTreeSet;

use crate::domain::RegionFinding;

/// Lowercase, drop punctuation, collapse whitespace.
pub fn normalize_label(label: &str) -> String {
    let cleaned: String = label
        .chars()
        .filter_map(|c| {
            if c.is_whitespace() {
                Some(' ')
            } else if c.is_alphanumeric() {
                Some(c)
            } else {
                None
            }
        })
        .flat_map(char::to_lowercase)
        .collect();
    cleaned.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn tokens(normalized: &str) -> BTreeSet<&str> {
    normalized.split(' ').filter(|t| !t.is_empty()).collect()
}

/// Token-set Jaccard similarity of two normalized labels; 0 when both are empty.
pub fn jaccard(a: &str, b: &str) -> f64 {
    let (ta, tb) = (tokens(a), tokens(b));
    let union = ta.union(&tb).count();
    if union == 0 {
        return 0.0;
    }
    ta.intersection(&tb).count() as f64 / union as f64
}

/// Exact normalized match first, then the best Jaccard score at or above
/// `threshold`. Ties go to the lowest index.
pub fn match_region_label(label: &str, findings: &[RegionFinding], threshold: f64) -> Option<usize> {
    let wanted = normalize_label(label);
    if wanted.is_empty() {
        return None;
    }
    let normalized: Vec<String> = findings.iter().map(|f| normalize_label(f.label())).collect();
    if let Some(i) = normalized.iter().position(|n| *n == wanted) {
        return Some(i);
    }
    let mut best: Option<(usize, f64)> = None;
    for (i, candidate) in normalized.iter().enumerate() {
        let score = jaccard(&wanted, candidate);
        if score >= threshold && best.is_none_or(|(_, s)| score > s) {
            best = Some((i, score));
        }
    }
    best.map(|(i, _)| i)
}
