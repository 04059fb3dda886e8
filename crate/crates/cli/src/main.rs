use std::path::{Path, PathBuf};

use agora::agents::BackendSpec;
use agora::runner::{
    artifact_dir, comparison_table, cross_play, emit_plots, export_alignment, load_config, replay, run_experiment, sweep,
    AlignmentExportOptions, ExperimentConfig, RunMetrics,
};
use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use tracing_subscriber::EnvFilter;

#[derive(Parser)]
#[command(name = "agora", version, about = "Run multi-agent game experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (TOML).
    #[arg(short, long)]
    config: PathBuf,
    /// Replace the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Replace the config's output directory.
    #[arg(short, long)]
    out: Option<PathBuf>,
    /// Chat endpoint for remote backends that leave theirs empty.
    #[arg(long, env = "AGORA_ENDPOINT")]
    endpoint: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment.
    Run(Common),
    /// Run one experiment per value of a config path.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Dotted config path, e.g. comm.rounds; defaults to the config's [sweep] section.
        #[arg(long)]
        axis: Option<String>,
        /// Comma-separated values; each is read as JSON, else as a string.
        #[arg(long, value_delimiter = ',')]
        values: Vec<String>,
    },
    /// Evaluate every pairing of the config's [crossplay] pool.
    Crossplay(Common),
    /// Turn recorded transcripts into alignment datasets.
    ExportAlignment {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        transcripts: PathBuf,
        #[arg(long, default_value_t = 8)]
        qa_per_player: usize,
        #[arg(long, default_value_t = 8)]
        negatives: usize,
    },
    /// Re-run a config against recorded transcripts.
    Replay {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        transcripts: PathBuf,
    },
}

fn fill_endpoint(spec: &mut BackendSpec, endpoint: &str) {
    if let BackendSpec::Remote(r) = spec {
        if r.endpoint_url.is_empty() {
            r.endpoint_url = endpoint.to_string();
        }
    }
}

fn load(common: &Common) -> Result<ExperimentConfig> {
    let mut config = load_config(&common.config).with_context(|| format!("loading {}", common.config.display()))?;
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    if let Some(out) = &common.out {
        config.output_dir = Some(out.clone());
    }
    if let Some(e) = &common.endpoint {
        for p in &mut config.players {
            fill_endpoint(&mut p.backend, e);
        }
        for o in &mut config.world_overrides {
            fill_endpoint(&mut o.backend, e);
        }
        if let Some(d) = &mut config.mechanism.designer {
            fill_endpoint(d, e);
        }
        if let Some(x) = &mut config.crossplay {
            for m in x.pool.iter_mut().chain(x.partners.iter_mut()) {
                fill_endpoint(&mut m.backend, e);
            }
        }
    }
    config.validate()?;
    Ok(config)
}

fn summary(m: &RunMetrics) -> serde_json::Value {
    serde_json::json!({
        "name": m.name,
        "config_hash": m.config_hash,
        "aggregate": m.aggregate,
    })
}

fn print(v: &serde_json::Value) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn out_dir(config: &ExperimentConfig) -> Option<PathBuf> {
    artifact_dir(config)
}

fn write(dir: &Path, name: &str, text: &str) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn main() -> Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .with_writer(std::io::stderr)
        .init();
    match Cli::parse().command {
        Command::Run(common) => {
            let config = load(&common)?;
            let metrics = run_experiment(&config)?;
            print(&summary(&metrics))?;
        }
        Command::Sweep { common, axis, values } => {
            let config = load(&common)?;
            let (axis, values) = match (axis, config.sweep.clone()) {
                (Some(a), _) => {
                    let v = values.iter().map(|s| serde_json::from_str(s).unwrap_or_else(|_| serde_json::Value::String(s.clone())));
                    (a, v.collect())
                }
                (None, Some(s)) => (s.axis, s.values),
                (None, None) => bail!("no --axis given and the config has no [sweep] section"),
            };
            let result = sweep(&config, &axis, &values)?;
            if let Some(dir) = out_dir(&config) {
                let tag = axis.replace('.', "_");
                write(&dir, &format!("sweep_{tag}.csv"), &comparison_table(&result))?;
                write(&dir, &format!("sweep_{tag}_frequency.csv"), &result.frequency_grid())?;
                let conditions: Vec<(String, &RunMetrics)> =
                    result.points.iter().map(|p| (p.value.to_string(), &p.metrics)).collect();
                emit_plots(&conditions, &dir.join(format!("sweep_{tag}")))?;
            } else {
                print!("{}", comparison_table(&result));
            }
            print(&serde_json::Value::Array(result.points.iter().map(|p| summary(&p.metrics)).collect()))?;
        }
        Command::Crossplay(common) => {
            let config = load(&common)?;
            let Some(section) = config.crossplay.clone() else { bail!("the config has no [crossplay] section") };
            let results = cross_play(&config, &section.pool, &section.partners, section.mode)?;
            if let Some(dir) = out_dir(&config) {
                let conditions: Vec<(String, &RunMetrics)> =
                    results.iter().map(|r| (format!("{}-vs-{}", r.row, r.col), &r.metrics)).collect();
                emit_plots(&conditions, &dir.join("crossplay"))?;
            }
            let rows = results.iter().map(|r| serde_json::json!({"row": r.row, "col": r.col, "metrics": summary(&r.metrics)}));
            print(&serde_json::Value::Array(rows.collect()))?;
        }
        Command::ExportAlignment { common, transcripts, qa_per_player, negatives } => {
            let config = load(&common)?;
            let dir = common.out.clone().unwrap_or_else(|| PathBuf::from("alignment"));
            let options = AlignmentExportOptions { qa_per_player, negatives, seed: config.seed };
            let shards = export_alignment(&config, &transcripts, &dir, &options)?;
            print(&serde_json::to_value(&shards)?)?;
        }
        Command::Replay { common, transcripts } => {
            let mut config = load(&common)?;
            // keep the recorded run's artifacts intact
            config.output_dir = config.output_dir.map(|d| d.join("replay"));
            let metrics = replay(&config, &transcripts)?;
            print(&summary(&metrics))?;
        }
    }
    Ok(())
}
