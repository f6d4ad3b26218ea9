use serde::{Deserialize, Serialize};

use super::EvalRecord;
use crate::error::{usage_err, Result};

/// Counts of production intervals in bins `[edge, edge + width)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub bin_width: u32,
    /// Lower bin edges, starting at zero.
    pub edges: Vec<u32>,
    pub counts: Vec<usize>,
}

impl Histogram {
    fn of(values: &[u32], bin_width: u32) -> Self {
        let bins = values.iter().map(|&v| (v / bin_width) as usize + 1).max().unwrap_or(0);
        let mut counts = vec![0; bins];
        for &v in values {
            counts[(v / bin_width) as usize] += 1;
        }
        Self {
            bin_width,
            edges: (0..bins as u32).map(|i| i * bin_width).collect(),
            counts,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntervalPerformance {
    pub t_s: u32,
    pub held_out: bool,
    pub trials: usize,
    pub completed: usize,
    pub rewarded: usize,
    /// Rewarded over all trials, aborts included.
    pub reward_rate: f64,
    pub mean_t_p: Option<f64>,
    /// Sample standard deviation; needs two completed trials.
    pub std_t_p: Option<f64>,
    /// Over completed trials, so the counts sum to `completed`.
    pub histogram: Histogram,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerformanceTable {
    pub bin_width: u32,
    pub rows: Vec<IntervalPerformance>,
}

impl PerformanceTable {
    /// Reward rate pooled over intervals that were not held out.
    pub fn trained_reward_rate(&self) -> Option<f64> {
        let (r, n) = self
            .rows
            .iter()
            .filter(|r| !r.held_out)
            .fold((0, 0), |(r, n), row| (r + row.rewarded, n + row.trials));
        (n > 0).then(|| r as f64 / n as f64)
    }

    pub fn row(&self, t_s: u32) -> Option<&IntervalPerformance> {
        self.rows.iter().find(|r| r.t_s == t_s)
    }
}

pub(crate) fn mean_and_sd(values: &[f64]) -> (Option<f64>, Option<f64>) {
    let n = values.len();
    if n == 0 {
        return (None, None);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let sd = (n > 1).then(|| (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt());
    (Some(mean), sd)
}

/// Per-interval production statistics, sorted by sample interval.
pub fn performance_table(records: &[EvalRecord], bin_width: u32, held_out: &[u32]) -> Result<PerformanceTable> {
    if records.is_empty() {
        return Err(usage_err("performance table needs at least one record"));
    }
    if bin_width == 0 {
        return Err(usage_err("histogram bin width must be positive"));
    }
    let mut intervals: Vec<u32> = records.iter().map(|r| r.t_s).collect();
    intervals.sort_unstable();
    intervals.dedup();
    let rows = intervals
        .into_iter()
        .map(|t_s| {
            let group: Vec<&EvalRecord> = records.iter().filter(|r| r.t_s == t_s).collect();
            let t_ps: Vec<u32> = group.iter().filter_map(|r| r.t_p).collect();
            let as_f: Vec<f64> = t_ps.iter().map(|&v| v as f64).collect();
            let (mean_t_p, std_t_p) = mean_and_sd(&as_f);
            let rewarded = group.iter().filter(|r| r.rewarded).count();
            IntervalPerformance {
                t_s,
                held_out: held_out.contains(&t_s),
                trials: group.len(),
                completed: t_ps.len(),
                rewarded,
                reward_rate: rewarded as f64 / group.len() as f64,
                mean_t_p,
                std_t_p,
                histogram: Histogram::of(&t_ps, bin_width),
            }
        })
        .collect();
    Ok(PerformanceTable { bin_width, rows })
}

/// The last `fraction` of records in their given order, at least one.
pub fn final_fraction(records: &[EvalRecord], fraction: f64) -> &[EvalRecord] {
    let keep = ((records.len() as f64 * fraction.clamp(0.0, 1.0)).ceil() as usize).clamp(1.min(records.len()), records.len());
    &records[records.len() - keep..]
}
