use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tracing::warn;

use super::{ExperimentConfig, RunnerError};
use crate::alignment::{
    check_format, export_dataset, gen_action_supervision, gen_negative_samples, gen_qa_items, joint_prefer,
    AlignmentError, DatasetHeader, DatasetItem, DatasetKind,
};
use crate::equilibrium::MixedProfile;
use crate::game::{GameInstance, JointAction};
use crate::protocol::{read_transcript, Author, ContextWindow, ParseRules, Stage, ACTION_FORMAT};
use crate::{PlayerId, DEFAULT_TOL};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentExportOptions {
    /// Q/A items per (world, player) window.
    pub qa_per_player: usize,
    pub negatives: usize,
    pub seed: u64,
}

impl Default for AlignmentExportOptions {
    fn default() -> Self {
        AlignmentExportOptions { qa_per_player: 8, negatives: 8, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportedShard {
    pub kind: DatasetKind,
    pub path: PathBuf,
    pub items: usize,
}

fn mix(seed: u64, world: &str, player: PlayerId) -> u64 {
    world.bytes().fold(seed ^ (player.index() as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15), |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01B3)
    })
}

/// Turn recorded transcripts into one dataset shard per kind: Q/A items,
/// action supervision, format rewards, negative samples and preference
/// pairs over pure profiles. Matrix-only kinds are skipped for wars.
pub fn export_alignment(
    config: &ExperimentConfig,
    transcripts: &Path,
    out_dir: &Path,
    options: &AlignmentExportOptions,
) -> Result<Vec<ExportedShard>, RunnerError> {
    config.validate()?;
    let game = config.game.build().map_err(|e| RunnerError::ConfigInvalid(e.to_string()))?;
    let mut windows: BTreeMap<(String, PlayerId), Vec<_>> = BTreeMap::new();
    for line in read_transcript(transcripts)? {
        windows.entry((line.world_id.clone(), line.player_id)).or_default().push(line.to_segment());
    }
    let windows: BTreeMap<(String, PlayerId), ContextWindow> =
        windows.into_iter().map(|(k, s)| (k, ContextWindow::from_segments(s))).collect();

    let mut shards: BTreeMap<DatasetKind, Vec<DatasetItem>> = BTreeMap::new();
    let mut push = |kind: DatasetKind, item: DatasetItem| shards.entry(kind).or_default().push(item);

    for ((world, player), window) in &windows {
        let labels = game.labels(*player);
        let refs: Vec<&str> = labels.iter().map(String::as_str).collect();
        let rules = ParseRules::new(&refs, ACTION_FORMAT, None).map_err(|e| RunnerError::ConfigInvalid(e.to_string()))?;
        for seg in window.segments() {
            if seg.stage == Stage::Action && seg.generated && seg.author == Author::Player(*player) {
                push(
                    DatasetKind::FormatReward,
                    DatasetItem::FormatReward {
                        player: *player,
                        iteration: seg.iteration,
                        response: seg.text.clone(),
                        reward: check_format(&seg.text, &rules),
                    },
                );
            }
        }
        let GameInstance::Matrix(g) = &game else { continue };
        match gen_qa_items(g, *player, window, options.qa_per_player, mix(options.seed, world, *player)) {
            Ok(items) => items.into_iter().for_each(|i| push(DatasetKind::Qa, DatasetItem::Qa(i))),
            Err(AlignmentError::ExhaustedTemplates) => warn!(%world, %player, "every Q/A template leaks; skipped"),
            Err(e) => return Err(e.into()),
        }
        match gen_action_supervision(g, window, *player, config.target(*player), None) {
            Ok(items) => items.into_iter().for_each(|i| push(DatasetKind::ActionSupervision, DatasetItem::ActionSupervision(i))),
            Err(AlignmentError::UnachievableConcept(c)) => warn!(%player, ?c, "target has no profiles; supervision skipped"),
            Err(e) => return Err(e.into()),
        }
    }

    if let GameInstance::Matrix(g) = &game {
        let mut targets = vec![config.target(PlayerId::A), config.target(PlayerId::B)];
        targets.dedup();
        match gen_negative_samples(g, &targets, options.negatives, options.seed) {
            Ok(ps) => ps.into_iter().for_each(|profile| {
                push(DatasetKind::Negative, DatasetItem::Negative { target: targets.clone(), profile })
            }),
            Err(AlignmentError::EmptyComplement) => warn!("targets cover every profile; no negatives"),
            Err(e) => return Err(e.into()),
        }
        let cells = JointAction::cells();
        for designated in PlayerId::both() {
            let target = [config.target(designated)];
            for i in 0..cells.len() {
                for j in i + 1..cells.len() {
                    let pair = (MixedProfile::pure(cells[i]), MixedProfile::pure(cells[j]));
                    push(DatasetKind::Preference, DatasetItem::Preference(joint_prefer(pair, g, &target, designated, DEFAULT_TOL)));
                }
            }
        }
    }

    let mut out = Vec::new();
    for (kind, items) in shards {
        let path = out_dir.join(format!("{}.jsonl", serde_json::to_value(kind)?.as_str().unwrap_or("items")));
        let header = DatasetHeader::new(kind, Some(config.game.clone()), options.seed);
        export_dataset(&items, &header, &path, false)?;
        out.push(ExportedShard { kind, path, items: items.len() });
    }
    Ok(out)
}
