use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::protocol::{ApproxTokenizer, Stage, Tokenizer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChunkSource {
    pub stage: Stage,
    pub iteration: u32,
}

impl Default for ChunkSource {
    fn default() -> Self {
        ChunkSource { stage: Stage::Reflection, iteration: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chunk {
    pub text: String,
    pub token_count: usize,
    pub source: ChunkSource,
    pub seq: u32,
    /// Byte range of `text` within the source.
    pub span: Range<usize>,
    /// Leading bytes shared with the previous chunk.
    pub overlap: usize,
}

impl Chunk {
    /// A chunk holding `text` whole.
    pub fn whole(text: &str, source: ChunkSource) -> Chunk {
        Chunk {
            text: text.to_string(),
            token_count: ApproxTokenizer.count(text),
            source,
            seq: 0,
            span: 0..text.len(),
            overlap: 0,
        }
    }
}

fn is_terminator(c: char) -> bool {
    matches!(c, '.' | '!' | '?')
}

/// Token indices `i` such that a sentence ends right after token `i - 1`:
/// that token is a terminator followed by whitespace or end of text.
fn sentence_ends(text: &str, tokens: &[Range<usize>]) -> Vec<usize> {
    tokens
        .iter()
        .enumerate()
        .filter(|(_, r)| {
            let tok = &text[r.start..r.end];
            tok.chars().count() == 1
                && tok.chars().next().is_some_and(is_terminator)
                && text[r.end..].chars().next().is_none_or(char::is_whitespace)
        })
        .map(|(i, _)| i + 1)
        .collect()
}

/// Split `text` into windows of at most `max_tokens` tokens. A window ends
/// at the last sentence boundary inside it; when there is none it grows to
/// the next boundary, and only cuts mid-sentence when the rest of the text
/// has no boundary at all. Consecutive chunks share `overlap_tokens`
/// tokens, widened back to the start of the sentence containing them.
///
/// Stripping each chunk's `overlap` prefix and concatenating reproduces the
/// source exactly.
pub fn chunk_text(text: &str, max_tokens: usize, overlap_tokens: usize) -> Vec<Chunk> {
    chunk_text_from(text, max_tokens, overlap_tokens, ChunkSource::default())
}

pub fn chunk_text_from(text: &str, max_tokens: usize, overlap_tokens: usize, source: ChunkSource) -> Vec<Chunk> {
    assert!(max_tokens > overlap_tokens, "max_tokens must exceed overlap_tokens");
    let tok = ApproxTokenizer;
    let tokens = tok.tokenize(text);
    let n = tokens.len();
    if n == 0 {
        return Vec::new();
    }
    let ends = sentence_ends(text, &tokens);
    let mut chunks = Vec::new();
    let mut start = 0usize; // first token of the current chunk
    let mut prev_end = 0usize; // end token of the previous chunk
    let mut prev_end_byte = 0usize;
    loop {
        let limit = start + max_tokens;
        let end = if limit >= n {
            n
        } else {
            let inside = ends.iter().rev().find(|&&b| b > prev_end.max(start) && b <= limit);
            match inside {
                Some(&b) => b,
                None => ends
                    .iter()
                    .find(|&&b| b > limit.max(prev_end))
                    .copied()
                    .unwrap_or(limit.max(prev_end + 1).min(n)),
            }
        };
        let byte_start = if chunks.is_empty() {
            0
        } else if start == prev_end {
            prev_end_byte
        } else {
            tokens[start].start
        };
        let byte_end = if end == n { text.len() } else { tokens[end - 1].end };
        let body = &text[byte_start..byte_end];
        chunks.push(Chunk {
            text: body.to_string(),
            token_count: tok.count(body),
            source,
            seq: chunks.len() as u32,
            span: byte_start..byte_end,
            overlap: prev_end_byte.saturating_sub(byte_start).min(body.len()),
        });
        if end == n {
            break;
        }
        let mut next = end.saturating_sub(overlap_tokens).max(start + 1);
        if overlap_tokens > 0 {
            // Widen the overlap back to a sentence start when one is available.
            if let Some(&b) = ends.iter().rev().find(|&&b| b <= next && b > start) {
                next = b;
            }
        }
        prev_end = end;
        prev_end_byte = byte_end;
        start = next.min(end);
    }
    chunks
}

/// Inverse of [`chunk_text`].
pub fn reassemble(chunks: &[Chunk]) -> String {
    chunks.iter().map(|c| &c.text[c.overlap..]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn empty_text() {
        assert!(chunk_text("", 10, 2).is_empty());
        assert!(chunk_text("   ", 10, 2).is_empty());
    }

    #[test]
    fn short_text_single_chunk() {
        let t = "One. Two! Three?";
        let c = chunk_text(t, 50, 5);
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].text, t);
    }

    #[test]
    fn splits_end_at_sentences() {
        let t: String = (0..10).map(|i| format!("Sentence number {i} is here.\n")).collect();
        let c = chunk_text(&t, 14, 0);
        assert!(c.len() > 1);
        for ch in &c {
            assert!(ch.text.trim_end().ends_with('.'), "{:?}", ch.text);
            assert!(ch.token_count <= 14);
        }
        assert_eq!(reassemble(&c), t);
    }

    #[test]
    fn zero_overlap_partitions() {
        let t = "Alpha beta. Gamma delta epsilon. Zeta! Eta theta iota kappa? Lambda.";
        let c = chunk_text(t, 5, 0);
        let mut pos = 0;
        for ch in &c {
            assert_eq!(ch.span.start, pos);
            assert_eq!(ch.overlap, 0);
            pos = ch.span.end;
        }
        assert_eq!(pos, t.len());
    }

    #[test]
    fn overlap_repeats_previous_sentence() {
        let t = "Aa bb. Cc dd. Ee ff. Gg hh.";
        let c = chunk_text(t, 6, 2);
        assert!(c.len() >= 2);
        assert!(c[1].overlap > 0);
        assert_eq!(&c[1].text[..c[1].overlap], &t[c[1].span.start..c[0].span.end]);
        assert_eq!(reassemble(&c), t);
    }

    #[test]
    fn no_boundaries_hard_cut() {
        let t = "a b c d e f g h i j";
        let c = chunk_text(t, 3, 1);
        assert_eq!(reassemble(&c), t);
        assert!(c.iter().all(|ch| ch.token_count <= 3));
    }

    proptest! {
        #[test]
        fn reassembly_is_exact(
            sentences in proptest::collection::vec("[a-z]{1,6}( [a-z]{1,6}){0,8}[.!?]", 1..12),
            seps in proptest::collection::vec("[ \n]{1,2}", 12),
            max in 2usize..20,
            overlap_frac in 0usize..100,
        ) {
            let mut text = String::new();
            for (i, s) in sentences.iter().enumerate() {
                text.push_str(s);
                text.push_str(&seps[i]);
            }
            let overlap = overlap_frac * (max - 1) / 100;
            let chunks = chunk_text(&text, max, overlap);
            prop_assert_eq!(reassemble(&chunks), text);
        }
    }
}
