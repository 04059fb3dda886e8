use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{RunMetrics, RunnerError};
use crate::game::{GameSpec, JointAction, TerminationClass};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlotKind {
    /// Rows are joint actions, columns are conditions.
    StrategyFrequency,
    /// Rows are (period, termination class), columns are conditions.
    WoAHistogram,
    /// Rows are iteration numbers, two columns per condition.
    TokenSeries,
}

impl PlotKind {
    pub const ALL: [PlotKind; 3] = [PlotKind::StrategyFrequency, PlotKind::WoAHistogram, PlotKind::TokenSeries];

    pub fn file_name(self) -> &'static str {
        match self {
            PlotKind::StrategyFrequency => "strategy_frequency.csv",
            PlotKind::WoAHistogram => "woa_histogram.csv",
            PlotKind::TokenSeries => "tokens.csv",
        }
    }
}

fn field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn row(cells: impl IntoIterator<Item = String>) -> String {
    let mut line = cells.into_iter().map(|c| field(&c)).collect::<Vec<_>>().join(",");
    line.push('\n');
    line
}

/// One CSV table over named conditions, columns in the given order.
pub fn plot_table(kind: PlotKind, conditions: &[(String, &RunMetrics)]) -> String {
    let names = conditions.iter().map(|(n, _)| n.clone());
    let any_events = conditions.iter().any(|(_, m)| m.aggregate.events > 0);
    match kind {
        PlotKind::StrategyFrequency => {
            let mut out = row(["row_action".to_string(), "col_action".to_string()].into_iter().chain(names));
            if !any_events {
                return out;
            }
            let (_, first) = conditions.iter().find(|(_, m)| m.aggregate.events > 0).expect("some condition has events");
            for cell in JointAction::cells() {
                let labels = first.aggregate.frequencies.iter().find(|r| r.joint == cell);
                let (r, c) = labels.map_or((cell.row.to_string(), cell.col.to_string()), |l| (l.row_label.clone(), l.col_label.clone()));
                out += &row([r, c].into_iter().chain(conditions.iter().map(|(_, m)| m.frequency(cell).to_string())));
            }
            out
        }
        PlotKind::WoAHistogram => {
            let mut out = row(["period".to_string(), "class".to_string()].into_iter().chain(names));
            let horizon = conditions
                .iter()
                .filter(|(_, m)| m.aggregate.events > 0)
                .filter_map(|(_, m)| match &m.game {
                    GameSpec::Attrition(w) => Some(w.terminal_t),
                    GameSpec::Matrix(_) => None,
                })
                .max();
            let Some(horizon) = horizon else { return out };
            for period in 1..=horizon {
                for class in TerminationClass::ALL {
                    out += &row(
                        [period.to_string(), class.as_str().to_string()]
                            .into_iter()
                            .chain(conditions.iter().map(|(_, m)| m.histogram_count(period, class).to_string())),
                    );
                }
            }
            out
        }
        PlotKind::TokenSeries => {
            let header = conditions.iter().flat_map(|(n, _)| [format!("{n}_player_a"), format!("{n}_player_b")]);
            let mut out = row(std::iter::once("iteration".to_string()).chain(header));
            let len = conditions.iter().map(|(_, m)| m.aggregate.mean_tokens_by_iteration.len()).max().unwrap_or(0);
            for i in 0..len {
                let cells = conditions.iter().flat_map(|(_, m)| match m.aggregate.mean_tokens_by_iteration.get(i) {
                    Some(t) => [t[0].to_string(), t[1].to_string()],
                    None => [String::new(), String::new()],
                });
                out += &row(std::iter::once((i + 1).to_string()).chain(cells));
            }
            out
        }
    }
}

/// Write every table into `dir`.
pub fn emit_plots(conditions: &[(String, &RunMetrics)], dir: &Path) -> Result<Vec<PathBuf>, RunnerError> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for kind in PlotKind::ALL {
        let path = dir.join(kind.file_name());
        std::fs::write(&path, plot_table(kind, conditions))?;
        written.push(path);
    }
    Ok(written)
}
