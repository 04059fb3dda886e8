use std::ops::Range;

/// Splits text into tokens, reported as byte ranges.
pub trait Tokenizer: Send + Sync {
    fn tokenize(&self, text: &str) -> Vec<Range<usize>>;

    fn count(&self, text: &str) -> usize {
        self.tokenize(text).len()
    }
}

/// Approximate word-level tokenizer: runs of alphanumeric characters form
/// one token, every other non-whitespace character is a token of its own.
#[derive(Debug, Clone, Copy, Default)]
pub struct ApproxTokenizer;

impl Tokenizer for ApproxTokenizer {
    fn tokenize(&self, text: &str) -> Vec<Range<usize>> {
        let mut out = Vec::new();
        let mut word: Option<usize> = None;
        for (i, ch) in text.char_indices() {
            if ch.is_alphanumeric() || ch == '_' {
                word.get_or_insert(i);
                continue;
            }
            if let Some(start) = word.take() {
                out.push(start..i);
            }
            if !ch.is_whitespace() {
                out.push(i..i + ch.len_utf8());
            }
        }
        if let Some(start) = word {
            out.push(start..text.len());
        }
        out
    }

    fn count(&self, text: &str) -> usize {
        // same rule as `tokenize` without allocating
        let mut n = 0;
        let mut in_word = false;
        for ch in text.chars() {
            if ch.is_alphanumeric() || ch == '_' {
                if !in_word {
                    n += 1;
                    in_word = true;
                }
            } else {
                in_word = false;
                if !ch.is_whitespace() {
                    n += 1;
                }
            }
        }
        n
    }
}

/// Token count under the default tokenizer.
pub fn count_tokens(text: &str) -> usize {
    ApproxTokenizer.count(text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn examples() {
        assert_eq!(count_tokens(""), 0);
        assert_eq!(count_tokens("Cooperate."), 2);
        assert_eq!(count_tokens("ACTION: Defect"), 3);
        assert_eq!(count_tokens("  payoff 2.5 "), 4);
    }

    proptest! {
        #[test]
        fn concatenation_is_monotone(a in "\\PC{0,40}", b in "\\PC{0,40}") {
            let joined = format!("{a}{b}");
            prop_assert!(count_tokens(&joined) >= count_tokens(&a).max(count_tokens(&b)));
        }

        #[test]
        fn count_matches_spans(s in "\\PC{0,80}") {
            let spans = ApproxTokenizer.tokenize(&s);
            prop_assert_eq!(spans.len(), count_tokens(&s));
            for w in spans.windows(2) {
                prop_assert!(w[0].end <= w[1].start);
            }
        }
    }
}
