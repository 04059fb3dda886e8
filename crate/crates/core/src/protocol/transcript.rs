use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::context::{Author, Segment, Stage};
use crate::PlayerId;

/// One transcript segment as stored in JSON lines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptLine {
    pub world_id: String,
    pub player_id: PlayerId,
    pub iteration: u32,
    pub step: u32,
    pub stage: Stage,
    pub round: Option<u32>,
    pub author: Author,
    pub text: String,
    pub tokens: usize,
    pub generated: bool,
}

impl TranscriptLine {
    pub fn from_segment(world_id: &str, player: PlayerId, s: &Segment) -> Self {
        TranscriptLine {
            world_id: world_id.to_string(),
            player_id: player,
            iteration: s.iteration,
            step: s.step,
            stage: s.stage,
            round: s.round,
            author: s.author,
            text: s.text.clone(),
            tokens: s.token_count,
            generated: s.generated,
        }
    }

    pub fn to_segment(&self) -> Segment {
        Segment {
            stage: self.stage,
            author: self.author,
            text: self.text.clone(),
            token_count: self.tokens,
            generated: self.generated,
            iteration: self.iteration,
            step: self.step,
            round: self.round,
        }
    }
}

pub fn write_transcript(path: &Path, lines: &[TranscriptLine], append: bool) -> std::io::Result<()> {
    let file = OpenOptions::new().create(true).write(true).append(append).truncate(!append).open(path)?;
    let mut w = BufWriter::new(file);
    for l in lines {
        serde_json::to_writer(&mut w, l)?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

pub fn read_transcript(path: &Path) -> std::io::Result<Vec<TranscriptLine>> {
    let r = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for line in r.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::{ContextWindow, Cursor};

    #[test]
    fn round_trip() {
        let mut w = ContextWindow::new();
        w.push(Stage::Comm, Author::Player(PlayerId::B), "MESSAGE from Player B (round 1): hi", false, Cursor::new(2, 1).with_round(1));
        w.push(Stage::Action, Author::Player(PlayerId::A), "ACTION: Defect", true, Cursor::new(2, 1));
        let lines: Vec<_> = w.segments().iter().map(|s| TranscriptLine::from_segment("w0", PlayerId::A, s)).collect();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.jsonl");
        write_transcript(&path, &lines[..1], false).unwrap();
        write_transcript(&path, &lines[1..], true).unwrap();
        let back = read_transcript(&path).unwrap();
        assert_eq!(back, lines);
        assert_eq!(back[1].to_segment(), w.segments()[1]);
        let raw = std::fs::read_to_string(&path).unwrap();
        for key in ["world_id", "player_id", "iteration", "stage", "round", "text", "tokens", "generated"] {
            assert!(raw.lines().all(|l| l.contains(&format!("\"{key}\""))));
        }
    }
}
