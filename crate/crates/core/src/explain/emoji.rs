use unicode_segmentation::UnicodeSegmentation;

/// Substituted whenever a model supplies an unusable emoji.
pub const FALLBACK_EMOJI: &str = "🔍";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmojiValidity {
    Valid,
    Invalid,
}

impl EmojiValidity {
    pub fn is_valid(self) -> bool {
        self == EmojiValidity::Valid
    }
}

fn in_emoji_block(c: char) -> bool {
    matches!(c as u32, 0x1F300..=0x1FAFF | 0x2600..=0x27BF | 0x1F000..=0x1F2FF)
}

/// Exactly one extended grapheme cluster whose first scalar sits in a
/// pictographic block. ZWJ sequences, skin tones and variation selectors are
/// fine as long as they stay inside the one cluster.
pub fn validate_emoji(candidate: &str) -> EmojiValidity {
    let mut clusters = candidate.graphemes(true);
    let (Some(cluster), None) = (clusters.next(), clusters.next()) else {
        return EmojiValidity::Invalid;
    };
    match cluster.chars().next() {
        Some(first) if in_emoji_block(first) => EmojiValidity::Valid,
        _ => EmojiValidity::Invalid,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Deliberately tiny segmenter: joins ZWJ neighbours, VS16, skin tones,
    /// keycaps and regional-indicator pairs. Enough to cross-check emoji input.
    fn oracle_cluster_count(s: &str) -> usize {
        let chars: Vec<char> = s.chars().collect();
        let mut count = 0;
        let mut i = 0;
        while i < chars.len() {
            count += 1;
            let ri = |c: char| (0x1F1E6..=0x1F1FF).contains(&(c as u32));
            let start_ri = ri(chars[i]);
            i += 1;
            if start_ri && i < chars.len() && ri(chars[i]) {
                i += 1;
            }
            loop {
                match chars.get(i).map(|&c| c as u32) {
                    Some(0xFE0F) | Some(0x20E3) | Some(0x1F3FB..=0x1F3FF) => i += 1,
                    Some(0x200D) if i + 1 < chars.len() => i += 2,
                    _ => break,
                }
            }
        }
        count
    }

    #[test]
    fn examples() {
        assert_eq!(validate_emoji("🧸"), EmojiValidity::Valid);
        assert_eq!(validate_emoji("ab"), EmojiValidity::Invalid);
        assert_eq!(validate_emoji("👩‍🔬"), EmojiValidity::Valid);
        assert!(validate_emoji(FALLBACK_EMOJI).is_valid());
    }

    #[test]
    fn edge_cases() {
        for bad in ["", "a", "xx", "not-an-emoji", "🧸🧸", " 🧸", "1", "©"] {
            assert_eq!(validate_emoji(bad), EmojiValidity::Invalid, "{bad:?}");
        }
        for good in ["☀️", "✂", "🇦🇺", "👍🏽", "🀄", "🫠"] {
            assert_eq!(validate_emoji(good), EmojiValidity::Valid, "{good:?}");
        }
    }

    #[test]
    fn segmentation_agrees_with_oracle() {
        for s in ["👩‍🔬", "🧸", "👍🏽", "🇦🇺", "☀️", "🧸🧸", "👨‍👩‍👧‍👦", "🔍x"] {
            assert_eq!(s.graphemes(true).count(), oracle_cluster_count(s), "{s:?}");
        }
        assert_eq!(oracle_cluster_count("👩‍🔬"), 1);
    }
}
