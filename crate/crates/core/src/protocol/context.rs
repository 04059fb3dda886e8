use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::tokenizer::{ApproxTokenizer, Tokenizer};
use crate::PlayerId;

/// Stage of the prompt chain, in execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    System,
    Thinking,
    Comm,
    Action,
    Reflection,
    Recall,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::System => "system",
            Stage::Thinking => "thinking",
            Stage::Comm => "comm",
            Stage::Action => "action",
            Stage::Reflection => "reflection",
            Stage::Recall => "recall",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Author {
    Player(PlayerId),
    Designer,
    Environment,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub stage: Stage,
    pub author: Author,
    pub text: String,
    pub token_count: usize,
    /// True iff an agent backend produced the text.
    pub generated: bool,
    pub iteration: u32,
    /// Period within the iteration (dynamic games); 1 for matrix games.
    pub step: u32,
    /// Communication round, for `Comm` segments.
    pub round: Option<u32>,
}

/// Position of a segment inside the chain; used when appending.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Cursor {
    pub iteration: u32,
    pub step: u32,
    pub round: Option<u32>,
}

impl Cursor {
    pub fn new(iteration: u32, step: u32) -> Self {
        Cursor { iteration, step, round: None }
    }

    pub fn with_round(self, round: u32) -> Self {
        Cursor { round: Some(round), ..self }
    }
}

/// The ordered text a single agent conditions on.
#[derive(Clone, Serialize, Deserialize)]
pub struct ContextWindow {
    segments: Vec<Segment>,
    #[serde(skip, default = "default_tokenizer")]
    tokenizer: Arc<dyn Tokenizer>,
}

fn default_tokenizer() -> Arc<dyn Tokenizer> {
    Arc::new(ApproxTokenizer)
}

impl Default for ContextWindow {
    fn default() -> Self {
        ContextWindow::new()
    }
}

impl fmt::Debug for ContextWindow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ContextWindow")
            .field("segments", &self.segments)
            .field("total_tokens", &self.total_tokens())
            .finish()
    }
}

impl PartialEq for ContextWindow {
    fn eq(&self, other: &Self) -> bool {
        self.segments == other.segments
    }
}

impl ContextWindow {
    pub fn new() -> Self {
        ContextWindow { segments: Vec::new(), tokenizer: default_tokenizer() }
    }

    pub fn with_tokenizer(tokenizer: Arc<dyn Tokenizer>) -> Self {
        ContextWindow { segments: Vec::new(), tokenizer }
    }

    /// Rebuild a window from stored segments, recounting tokens.
    pub fn from_segments(segments: Vec<Segment>) -> Self {
        let mut w = ContextWindow::new();
        for mut s in segments {
            s.token_count = w.tokenizer.count(&s.text);
            w.segments.push(s);
        }
        w
    }

    pub fn push(&mut self, stage: Stage, author: Author, text: impl Into<String>, generated: bool, at: Cursor) -> &Segment {
        let text = text.into();
        let token_count = self.tokenizer.count(&text);
        self.segments.push(Segment {
            stage,
            author,
            text,
            token_count,
            generated,
            iteration: at.iteration,
            step: at.step,
            round: at.round,
        });
        self.segments.last().expect("just pushed")
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn clear(&mut self) {
        self.segments.clear();
    }

    pub fn total_tokens(&self) -> usize {
        self.segments.iter().map(|s| s.token_count).sum()
    }

    pub fn tokenizer(&self) -> &Arc<dyn Tokenizer> {
        &self.tokenizer
    }

    /// Concatenated text of all segments, one per paragraph.
    pub fn render(&self) -> String {
        self.segments.iter().map(|s| s.text.as_str()).collect::<Vec<_>>().join("\n\n")
    }

    /// The window up to (not including) the first segment matching `pred`.
    pub fn prefix_until(&self, pred: impl Fn(&Segment) -> bool) -> ContextWindow {
        let end = self.segments.iter().position(pred).unwrap_or(self.segments.len());
        ContextWindow { segments: self.segments[..end].to_vec(), tokenizer: self.tokenizer.clone() }
    }

    pub fn segments_of(&self, iteration: u32) -> impl Iterator<Item = &Segment> {
        self.segments.iter().filter(move |s| s.iteration == iteration)
    }

    /// Checks that within each (iteration, step) the stage tags never go
    /// backwards; `System` segments open an iteration and are exempt.
    pub fn stage_order_holds(&self) -> bool {
        let mut last: Option<(u32, u32, Stage)> = None;
        for s in self.segments.iter().filter(|s| s.stage != Stage::System) {
            if let Some((it, step, stage)) = last {
                if it == s.iteration && step == s.step && s.stage < stage {
                    return false;
                }
            }
            last = Some((s.iteration, s.step, s.stage));
        }
        true
    }
}
