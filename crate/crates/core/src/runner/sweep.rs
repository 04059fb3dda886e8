use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::plots::PlotKind;
use super::{plot_table, run_experiment, ExperimentConfig, RunMetrics, RunnerError};

/// Config paths a sweep may vary.
pub const SWEEPABLE: &[&str] = &[
    "comm.rounds",
    "repetition",
    "repetition.n",
    "repetition.lo",
    "repetition.hi",
    "game.params.a",
    "game.params.b",
    "game.params.c",
    "game.params.d",
    "memory.mode",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub value: Value,
    pub metrics: RunMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub axis: String,
    pub points: Vec<SweepPoint>,
}

/// A copy of `config` with the dotted `axis` set to `value`.
pub fn set_path(config: &ExperimentConfig, axis: &str, value: &Value) -> Result<ExperimentConfig, RunnerError> {
    if !SWEEPABLE.contains(&axis) {
        return Err(RunnerError::ConfigInvalid(format!("{axis} is not sweepable; choose one of {}", SWEEPABLE.join(", "))));
    }
    let mut doc = serde_json::to_value(config)?;
    let keys: Vec<&str> = axis.split('.').collect();
    let (last, parents) = keys.split_last().expect("axis is nonempty");
    let mut node = &mut doc;
    for k in parents {
        node = node
            .get_mut(*k)
            .filter(|n| n.is_object())
            .ok_or_else(|| RunnerError::ConfigInvalid(format!("{axis}: no {k} section in this config")))?;
    }
    node.as_object_mut().expect("checked above").insert(last.to_string(), value.clone());
    let out: ExperimentConfig =
        serde_json::from_value(doc).map_err(|e| RunnerError::ConfigInvalid(format!("{axis} = {value}: {e}")))?;
    out.validate()?;
    Ok(out)
}

/// One run per value with everything else, seeds included, unchanged.
pub fn sweep(config: &ExperimentConfig, axis: &str, values: &[Value]) -> Result<SweepResult, RunnerError> {
    let configs = values.iter().map(|v| set_path(config, axis, v).map(|c| (v, c))).collect::<Result<Vec<_>, _>>()?;
    let mut points = Vec::with_capacity(configs.len());
    for (value, mut cfg) in configs {
        cfg.name = format!("{}-{}={}", config.name, axis, value_name(value));
        cfg.crossplay = None;
        cfg.sweep = None;
        points.push(SweepPoint { value: value.clone(), metrics: run_experiment(&cfg)? });
    }
    Ok(SweepResult { axis: axis.to_string(), points })
}

fn value_name(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// The merged comparison: one row per swept value.
pub fn comparison_table(result: &SweepResult) -> String {
    let mut out = format!(
        "{},events,target_probability,mean_welfare,total_tokens_a,total_tokens_b,parse_failures_a,parse_failures_b,interventions,failed_worlds\n",
        result.axis
    );
    for p in &result.points {
        let a = &p.metrics.aggregate;
        let name = value_name(&p.value);
        let name = if name.contains([',', '"']) { format!("\"{}\"", name.replace('"', "\"\"")) } else { name };
        out += &format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            name,
            a.events,
            opt(a.target_probability),
            opt(a.mean_welfare),
            a.total_tokens[0],
            a.total_tokens[1],
            a.parse_failures[0],
            a.parse_failures[1],
            a.interventions_applied,
            a.failed_worlds.len()
        );
    }
    out
}

impl SweepResult {
    /// Strategy-frequency grid with one column per swept value.
    pub fn frequency_grid(&self) -> String {
        let conditions: Vec<(String, &RunMetrics)> =
            self.points.iter().map(|p| (value_name(&p.value), &p.metrics)).collect();
        plot_table(PlotKind::StrategyFrequency, &conditions)
    }
}
