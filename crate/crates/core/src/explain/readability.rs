use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ReadabilityError {
    #[error("text contains no words")]
    Empty,
}

fn syllables(word: &str) -> usize {
    let mut groups = 0;
    let mut in_group = false;
    for c in word.chars().flat_map(char::to_lowercase) {
        let vowel = matches!(c, 'a' | 'e' | 'i' | 'o' | 'u' | 'y');
        if vowel && !in_group {
            groups += 1;
        }
        in_group = vowel;
    }
    groups.max(1)
}

fn sentence_count(text: &str) -> usize {
    let mut count = 0;
    let mut in_run = false;
    for c in text.chars() {
        let terminator = matches!(c, '.' | '!' | '?');
        if terminator && !in_run {
            count += 1;
        }
        in_run = terminator;
    }
    count.max(1)
}

/// Flesch Reading Ease with vowel-group syllable counting.
pub fn readability_score(text: &str) -> Result<f64, ReadabilityError> {
    let words: Vec<&str> = text
        .split_whitespace()
        .filter(|w| w.chars().any(char::is_alphanumeric))
        .collect();
    if words.is_empty() {
        return Err(ReadabilityError::Empty);
    }
    let word_count = words.len() as f64;
    let syllable_count = words.iter().map(|w| syllables(w)).sum::<usize>() as f64;
    let sentences = sentence_count(text) as f64;
    Ok(206.835 - 1.015 * (word_count / sentences) - 84.6 * (syllable_count / word_count))
}
