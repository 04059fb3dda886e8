use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ActionSupervisionItem, AlignmentError, FeedbackScore, PreferencePair, QAItem};
use crate::equilibrium::{MixedProfile, SolutionConcept};
use crate::game::GameSpec;
use crate::PlayerId;

pub const DATASET_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetKind {
    Qa,
    ActionSupervision,
    FormatReward,
    Feedback,
    Preference,
    Negative,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "data", rename_all = "snake_case")]
pub enum DatasetItem {
    Qa(QAItem),
    ActionSupervision(ActionSupervisionItem),
    FormatReward { player: PlayerId, iteration: u32, response: String, reward: i32 },
    Feedback(FeedbackScore),
    Preference(PreferencePair),
    Negative { target: Vec<SolutionConcept>, profile: MixedProfile },
}

impl DatasetItem {
    pub fn kind(&self) -> DatasetKind {
        match self {
            DatasetItem::Qa(_) => DatasetKind::Qa,
            DatasetItem::ActionSupervision(_) => DatasetKind::ActionSupervision,
            DatasetItem::FormatReward { .. } => DatasetKind::FormatReward,
            DatasetItem::Feedback(_) => DatasetKind::Feedback,
            DatasetItem::Preference(_) => DatasetKind::Preference,
            DatasetItem::Negative { .. } => DatasetKind::Negative,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub schema_version: u32,
    pub kind: DatasetKind,
    pub game: Option<GameSpec>,
    pub generator_version: String,
    pub seed: u64,
}

impl DatasetHeader {
    pub fn new(kind: DatasetKind, game: Option<GameSpec>, seed: u64) -> Self {
        DatasetHeader {
            schema_version: DATASET_SCHEMA_VERSION,
            kind,
            game,
            generator_version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
enum Line {
    Header(DatasetHeader),
    Item(DatasetItem),
}

/// Write one shard: a header line then one item per line. With `append`
/// an existing shard must carry the same kind; its header is kept.
pub fn export_dataset(
    items: &[DatasetItem],
    header: &DatasetHeader,
    path: &Path,
    append: bool,
) -> Result<(), AlignmentError> {
    if let Some(bad) = items.iter().find(|i| i.kind() != header.kind) {
        return Err(AlignmentError::MixedKinds { expected: header.kind, found: bad.kind() });
    }
    let existing = append && path.exists() && std::fs::metadata(path)?.len() > 0;
    if existing {
        let (old, _) = import_dataset(path)?;
        if old.kind != header.kind {
            return Err(AlignmentError::MixedKinds { expected: old.kind, found: header.kind });
        }
    }
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let file = OpenOptions::new().create(true).write(true).append(existing).truncate(!existing).open(path)?;
    let mut w = BufWriter::new(file);
    if !existing {
        serde_json::to_writer(&mut w, &Line::Header(header.clone()))?;
        w.write_all(b"\n")?;
    }
    for item in items {
        serde_json::to_writer(&mut w, &Line::Item(item.clone()))?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn import_dataset(path: &Path) -> Result<(DatasetHeader, Vec<DatasetItem>), AlignmentError> {
    let mut header = None;
    let mut items = Vec::new();
    for line in BufReader::new(File::open(path)?).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<Line>(&line)? {
            Line::Header(h) if header.is_none() => header = Some(h),
            Line::Header(_) => {
                return Err(AlignmentError::InvalidBatch("duplicate header record".into()));
            }
            Line::Item(i) => items.push(i),
        }
    }
    let header = header.ok_or_else(|| AlignmentError::InvalidBatch("missing header record".into()))?;
    if let Some(bad) = items.iter().find(|i| i.kind() != header.kind) {
        return Err(AlignmentError::MixedKinds { expected: header.kind, found: bad.kind() });
    }
    Ok((header, items))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{GameKind, JointAction, PayoffParams};

    fn neg(r: usize) -> DatasetItem {
        DatasetItem::Negative {
            target: vec![SolutionConcept::PureNash],
            profile: MixedProfile::pure(JointAction::new(r, 0)),
        }
    }

    #[test]
    fn round_trip_and_append() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("neg.jsonl");
        let header = DatasetHeader::new(
            DatasetKind::Negative,
            Some(GameSpec::matrix(GameKind::PrisonersDilemma, PayoffParams::default())),
            9,
        );
        export_dataset(&[neg(0)], &header, &path, false).unwrap();
        export_dataset(&[neg(1)], &header, &path, true).unwrap();
        let (h, items) = import_dataset(&path).unwrap();
        assert_eq!(h, header);
        assert_eq!(items, vec![neg(0), neg(1)]);
    }

    #[test]
    fn mixed_kinds_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.jsonl");
        let header = DatasetHeader::new(DatasetKind::Qa, None, 0);
        assert!(matches!(
            export_dataset(&[neg(0)], &header, &path, false),
            Err(AlignmentError::MixedKinds { .. })
        ));
        let neg_header = DatasetHeader::new(DatasetKind::Negative, None, 0);
        export_dataset(&[neg(0)], &neg_header, &path, false).unwrap();
        assert!(matches!(
            export_dataset(&[], &header, &path, true),
            Err(AlignmentError::MixedKinds { .. })
        ));
    }
}
