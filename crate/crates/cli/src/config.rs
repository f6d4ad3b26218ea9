use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use timing_core::env::EnvConfig;
use timing_core::nn::NetworkSpec;
use timing_core::train::{TrainConfig, TrainSetup};

use crate::CliError;

/// Environment variable that roots relative output directories.
pub const OUTPUT_ROOT_VAR: &str = "TIMING_LAB_OUTPUT_ROOT";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    /// Intervals evaluated but never trained on.
    pub held_out_intervals: Vec<u32>,
    pub bin_width: u32,
    /// Trailing share of records used for the performance table.
    pub final_fraction: f64,
    /// Frame offsets around the Ready cue for the PCA time course.
    pub ready_window: [i64; 2],
    /// Frame offsets around the Set cue.
    pub set_window: [i64; 2],
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        let mut held_out: Vec<u32> = (15..=95).step_by(10).collect();
        held_out.extend([105, 110]);
        Self {
            held_out_intervals: held_out,
            bin_width: 5,
            final_fraction: 1.0,
            ready_window: [-10, 60],
            set_window: [-40, 20],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub env: EnvConfig,
    pub agent: NetworkSpec,
    pub train: TrainConfig,
    pub analysis: AnalysisConfig,
    pub output_dir: PathBuf,
    /// Master seed; copied into `train.seed` on resolution.
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            env: EnvConfig::default(),
            agent: NetworkSpec::default(),
            train: TrainConfig::default(),
            analysis: AnalysisConfig::default(),
            output_dir: PathBuf::from("runs/default"),
            seed: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn setup(&self) -> TrainSetup {
        TrainSetup {
            env: self.env.clone(),
            network: self.agent.clone(),
            train: self.train.clone(),
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.setup().validate()?;
        if let Some(t) = self.analysis.held_out_intervals.iter().find(|t| self.env.sample_intervals.contains(t)) {
            return Err(CliError::Config(format!(
                "analysis.held_out_intervals must be disjoint from env.sample_intervals; {t} is in both"
            )));
        }
        if self.analysis.held_out_intervals.contains(&0) {
            return Err(CliError::Config("analysis.held_out_intervals must be positive".into()));
        }
        if self.analysis.bin_width == 0 {
            return Err(CliError::Config("analysis.bin_width must be >= 1".into()));
        }
        if !(self.analysis.final_fraction > 0.0 && self.analysis.final_fraction <= 1.0) {
            return Err(CliError::Config("analysis.final_fraction must lie in (0, 1]".into()));
        }
        for (name, w) in [("ready_window", self.analysis.ready_window), ("set_window", self.analysis.set_window)] {
            if w[0] > w[1] {
                return Err(CliError::Config(format!("analysis.{name} must be [start, end] with start <= end")));
            }
        }
        Ok(())
    }

    /// Training plus held-out intervals, sorted.
    pub fn eval_intervals(&self) -> Vec<u32> {
        let mut v: Vec<u32> = self.env.sample_intervals.iter().chain(&self.analysis.held_out_intervals).copied().collect();
        v.sort_unstable();
        v.dedup();
        v
    }
}

/// Sets `path` (dot separated) inside `root` to `raw`, parsed as JSON when
/// possible and as a string otherwise. Only existing keys may be set.
pub fn apply_override(root: &mut Value, path: &str, raw: &str) -> Result<(), CliError> {
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = root;
    let parts: Vec<&str> = path.split('.').collect();
    for (i, key) in parts.iter().enumerate() {
        let here = node;
        node = match here {
            Value::Object(map) => map
                .get_mut(*key)
                .ok_or_else(|| CliError::Config(format!("unknown config key `{}`", parts[..=i].join("."))))?,
            Value::Array(items) => {
                let idx: usize = key
                    .parse()
                    .map_err(|_| CliError::Config(format!("`{}` indexes a list; use a number", parts[..=i].join("."))))?;
                let len = items.len();
                items
                    .get_mut(idx)
                    .ok_or_else(|| CliError::Config(format!("index {idx} out of range for `{}` (len {len})", parts[..i].join("."))))?
            }
            _ => return Err(CliError::Config(format!("`{}` is not a table", parts[..i].join(".")))),
        };
    }
    *node = value;
    Ok(())
}

/// Loads `path` (or the defaults), applies `key=value` overrides, roots a
/// relative output directory under the output-root variable and validates.
pub fn resolve(path: Option<&Path>, overrides: &[String]) -> Result<ExperimentConfig, CliError> {
    let base: ExperimentConfig = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", p.display())))?;
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("config {}: {e}", p.display())))?
        }
        None => ExperimentConfig::default(),
    };
    let mut tree = serde_json::to_value(&base).expect("config serialises");
    for o in overrides {
        let (k, v) = o
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("override `{o}` must look like key.path=value")))?;
        apply_override(&mut tree, k.trim(), v.trim())?;
    }
    let mut cfg: ExperimentConfig =
        serde_json::from_value(tree).map_err(|e| CliError::Config(format!("after overrides: {e}")))?;
    cfg.train.seed = cfg.seed;
    if cfg.output_dir.is_relative() {
        if let Some(root) = std::env::var_os(OUTPUT_ROOT_VAR) {
            cfg.output_dir = PathBuf::from(root).join(&cfg.output_dir);
        }
    }
    cfg.validate()?;
    Ok(cfg)
}
