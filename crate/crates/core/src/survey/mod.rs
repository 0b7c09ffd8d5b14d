//! User-study analytics: Likert distributions, agreement proportions and the
//! paired Wilcoxon tests comparing complex and simplified explanations.

mod wilcoxon;

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use wilcoxon::{
    wilcoxon_signed_rank, wilcoxon_signed_rank_using, WilcoxonError, WilcoxonMethod, WilcoxonResult, EXACT_MAX_N,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuestionId {
    EaseComplex,
    EaseSimplified,
    ClarityComplex,
    ClaritySimplified,
    AccuracyComplex,
    AccuracySimplified,
    Preference,
    CognitiveLoadReduced,
    ComparisonHelpful,
    ConfidenceImproved,
    WouldUse,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuestionKind {
    Likert,
    Preference,
    YesNo,
}

impl QuestionId {
    pub const LIKERT: [QuestionId; 6] = [
        QuestionId::EaseComplex,
        QuestionId::EaseSimplified,
        QuestionId::ClarityComplex,
        QuestionId::ClaritySimplified,
        QuestionId::AccuracyComplex,
        QuestionId::AccuracySimplified,
    ];

    pub fn kind(self) -> QuestionKind {
        match self {
            QuestionId::Preference => QuestionKind::Preference,
            QuestionId::CognitiveLoadReduced
            | QuestionId::ComparisonHelpful
            | QuestionId::ConfidenceImproved
            | QuestionId::WouldUse => QuestionKind::YesNo,
            _ => QuestionKind::Likert,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            QuestionId::EaseComplex => "ease_complex",
            QuestionId::EaseSimplified => "ease_simplified",
            QuestionId::ClarityComplex => "clarity_complex",
            QuestionId::ClaritySimplified => "clarity_simplified",
            QuestionId::AccuracyComplex => "accuracy_complex",
            QuestionId::AccuracySimplified => "accuracy_simplified",
            QuestionId::Preference => "preference",
            QuestionId::CognitiveLoadReduced => "cognitive_load_reduced",
            QuestionId::ComparisonHelpful => "comparison_helpful",
            QuestionId::ConfidenceImproved => "confidence_improved",
            QuestionId::WouldUse => "would_use",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Choice {
    Simplified,
    Complex,
}

/// One answer from one participant. Exactly one of `rating`, `choice` and
/// `answer` is present, matching the question's kind.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SurveyResponse {
    pub participant_id: String,
    pub item_id: String,
    pub question_id: QuestionId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rating: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub choice: Option<Choice>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer: Option<bool>,
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum SurveyError {
    #[error("invalid rating {0}: must be 1-5")]
    RatingOutOfRange(i64),
    #[error("{question} expects {expected}")]
    WrongAnswerKind { question: &'static str, expected: &'static str },
    #[error("participant_id must be non-empty")]
    MissingParticipant,
    #[error("no preference responses")]
    NoPreferenceResponses,
}

impl SurveyResponse {
    pub fn validate(&self) -> Result<(), SurveyError> {
        if self.participant_id.trim().is_empty() {
            return Err(SurveyError::MissingParticipant);
        }
        let question = self.question_id.as_str();
        let present = (self.rating.is_some(), self.choice.is_some(), self.answer.is_some());
        match self.question_id.kind() {
            QuestionKind::Likert => {
                let (true, false, false) = present else {
                    return Err(SurveyError::WrongAnswerKind { question, expected: "a rating only" });
                };
                let rating = self.rating.unwrap_or_default();
                if !(1..=5).contains(&rating) {
                    return Err(SurveyError::RatingOutOfRange(rating));
                }
            }
            QuestionKind::Preference if present != (false, true, false) => {
                return Err(SurveyError::WrongAnswerKind { question, expected: "a choice only" });
            }
            QuestionKind::YesNo if present != (false, false, true) => {
                return Err(SurveyError::WrongAnswerKind { question, expected: "a boolean answer only" });
            }
            _ => {}
        }
        Ok(())
    }
}

/// Counts of ratings 1..=5 for one Likert question.
pub fn likert_distribution(responses: &[SurveyResponse], question: QuestionId) -> [u64; 5] {
    let mut counts = [0u64; 5];
    for r in responses.iter().filter(|r| r.question_id == question) {
        if let Some(rating @ 1..=5) = r.rating {
            counts[rating as usize - 1] += 1;
        }
    }
    counts
}

/// Share of preference responses choosing the simplified tier.
pub fn preference_proportion(responses: &[SurveyResponse]) -> Result<f64, SurveyError> {
    let choices: Vec<Choice> = responses
        .iter()
        .filter(|r| r.question_id == QuestionId::Preference)
        .filter_map(|r| r.choice)
        .collect();
    if choices.is_empty() {
        return Err(SurveyError::NoPreferenceResponses);
    }
    let simplified = choices.iter().filter(|&&c| c == Choice::Simplified).count();
    Ok(simplified as f64 / choices.len() as f64)
}

fn yes_counts(responses: &[SurveyResponse], question: QuestionId) -> (u64, u64) {
    responses
        .iter()
        .filter(|r| r.question_id == question)
        .filter_map(|r| r.answer)
        .fold((0, 0), |(yes, total), a| (yes + a as u64, total + 1))
}

/// `(complex, simplified)` rating pairs joined on participant and item.
pub fn paired_ratings(responses: &[SurveyResponse], complex: QuestionId, simplified: QuestionId) -> Vec<(f64, f64)> {
    let collect = |q: QuestionId| -> BTreeMap<(&str, &str), i64> {
        responses
            .iter()
            .filter(|r| r.question_id == q)
            .filter_map(|r| r.rating.map(|v| ((r.participant_id.as_str(), r.item_id.as_str()), v)))
            .collect()
    };
    let complex = collect(complex);
    let simplified = collect(simplified);
    complex
        .iter()
        .filter_map(|(key, &a)| simplified.get(key).map(|&b| (a as f64, b as f64)))
        .collect()
}

/// The three complex-vs-simplified comparisons, keyed by dimension.
pub const PAIRED_TESTS: [(&str, QuestionId, QuestionId); 3] = [
    ("ease", QuestionId::EaseComplex, QuestionId::EaseSimplified),
    ("clarity", QuestionId::ClarityComplex, QuestionId::ClaritySimplified),
    ("accuracy", QuestionId::AccuracyComplex, QuestionId::AccuracySimplified),
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Proportion {
    pub fraction: f64,
    pub count: u64,
    pub total: u64,
}

impl Proportion {
    fn new(count: u64, total: u64) -> Self {
        let fraction = if total == 0 { 0.0 } else { count as f64 / total as f64 };
        Self { fraction, count, total }
    }

    pub fn percent(&self) -> String {
        format!("{:.1}%", self.fraction * 100.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurveySummary {
    pub responses: usize,
    pub distributions: BTreeMap<QuestionId, [u64; 5]>,
    pub preference_simplified: Proportion,
    pub cognitive_load_reduced: Proportion,
    pub comparison_helpful: Proportion,
    pub confidence_improved: Proportion,
    pub would_use: Proportion,
    pub wilcoxon: BTreeMap<String, WilcoxonResult>,
}

pub fn summary_report(responses: &[SurveyResponse]) -> SurveySummary {
    let distributions = QuestionId::LIKERT.iter().map(|&q| (q, likert_distribution(responses, q))).collect();
    let preference = {
        let choices: Vec<Choice> = responses
            .iter()
            .filter(|r| r.question_id == QuestionId::Preference)
            .filter_map(|r| r.choice)
            .collect();
        let simplified = choices.iter().filter(|&&c| c == Choice::Simplified).count() as u64;
        Proportion::new(simplified, choices.len() as u64)
    };
    let yes = |q| {
        let (count, total) = yes_counts(responses, q);
        Proportion::new(count, total)
    };
    let wilcoxon = PAIRED_TESTS
        .iter()
        .filter_map(|&(name, complex, simplified)| {
            let pairs = paired_ratings(responses, complex, simplified);
            wilcoxon_signed_rank(&pairs).ok().map(|r| (name.to_string(), r))
        })
        .collect();
    SurveySummary {
        responses: responses.len(),
        distributions,
        preference_simplified: preference,
        cognitive_load_reduced: yes(QuestionId::CognitiveLoadReduced),
        comparison_helpful: yes(QuestionId::ComparisonHelpful),
        confidence_improved: yes(QuestionId::ConfidenceImproved),
        would_use: yes(QuestionId::WouldUse),
        wilcoxon,
    }
}

impl SurveySummary {
    /// Long-format `question,rating,count` rows for stacked-bar plots.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("question,rating,count\n");
        for (q, counts) in &self.distributions {
            for (i, c) in counts.iter().enumerate() {
                let _ = writeln!(out, "{},{},{}", q.as_str(), i + 1, c);
            }
        }
        out
    }

    /// Plain-text report with one-decimal percentages.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "responses: {}", self.responses);
        let _ = writeln!(out, "\nlikert distributions (counts of 1..5):");
        for (q, c) in &self.distributions {
            let total: u64 = c.iter().sum();
            let _ = writeln!(out, "  {:<20} {:?} n={}", q.as_str(), c, total);
        }
        let _ = writeln!(out, "\nproportions:");
        for (name, p) in [
            ("preference_simplified", &self.preference_simplified),
            ("cognitive_load_reduced", &self.cognitive_load_reduced),
            ("comparison_helpful", &self.comparison_helpful),
            ("confidence_improved", &self.confidence_improved),
            ("would_use", &self.would_use),
        ] {
            let _ = writeln!(out, "  {:<24} {:>6} ({}/{})", name, p.percent(), p.count, p.total);
        }
        let _ = writeln!(out, "\nwilcoxon signed-rank (complex vs simplified):");
        if self.wilcoxon.is_empty() {
            let _ = writeln!(out, "  (no paired ratings)");
        }
        for (name, r) in &self.wilcoxon {
            let method = match r.method {
                WilcoxonMethod::Exact => "exact",
                WilcoxonMethod::NormalApprox => "normal_approx",
            };
            let _ = writeln!(
                out,
                "  {:<9} n_used={} w_plus={} w_minus={} method={} p={:.3e}",
                name, r.n_used, r.w_plus, r.w_minus, method, r.p_two_sided
            );
        }
        out
    }
}
