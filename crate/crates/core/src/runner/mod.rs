//! Declarative experiments: many isolated worlds run in parallel, metric
//! aggregation, cross-play, parameter sweeps and plot-ready tables.

mod config;
mod crossplay;
mod export;
mod metrics;
mod plots;
mod run;
mod sweep;

pub use config::{
    load_config, CommSection, CrossPlaySection, ExperimentConfig, MechanismSection, MemorySection, PlayerConfig,
    SweepSection, WorldOverride,
};
pub use crossplay::{cross_play, pairings, Pairing, PairingResult, PoolMember};
pub use export::{export_alignment, AlignmentExportOptions, ExportedShard};
pub use metrics::{Aggregate, FrequencyRow, HistogramRow, IterationMetrics, RunMetrics, WorldMetrics, WorldStatus};
pub use plots::{emit_plots, plot_table, PlotKind};
pub use run::{artifact_dir, replay, run_experiment, world_id, world_seed, DESIGNER_FILE, METRICS_FILE, TRANSCRIPT_FILE};
pub use sweep::{comparison_table, set_path, sweep, SweepPoint, SweepResult, SWEEPABLE};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum RunnerError {
    #[error("invalid config: {0}")]
    ConfigInvalid(String),
    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Alignment(#[from] crate::alignment::AlignmentError),
    #[error(transparent)]
    Memory(#[from] crate::memory::MemoryError),
}
