use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::env::{AbortReason, TrialOutcome};
use crate::error::{usage_err, Result};

/// One evaluated trial with its frame-by-frame traces. Frame 0 of every
/// trace is the frame on which fixation was acquired.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub t_s: u32,
    pub t_p: Option<u32>,
    pub rewarded: bool,
    pub gamma: f64,
    pub abort_reason: AbortReason,
    pub gaze: Vec<[f64; 2]>,
    /// LSTM cell state, otherwise the controller output. Empty when hidden
    /// recording was off.
    pub hidden: Vec<Vec<f32>>,
    pub ready_onset: Option<u32>,
    pub set_onset: Option<u32>,
    pub go_arrival: Option<u32>,
    pub seed: u64,
    pub agent_id: String,
    pub episode: u32,
    pub trial_index: u32,
    /// Parameter version that produced the trial.
    pub version: u64,
}

impl EvalRecord {
    /// Builds a record from an outcome and per-episode frame traces indexed
    /// by episode frame.
    pub fn from_outcome(
        outcome: &TrialOutcome,
        gaze_by_frame: &[[f64; 2]],
        hidden_by_frame: &[Vec<f32>],
        seed: u64,
        agent_id: &str,
        episode: u32,
        version: u64,
    ) -> Self {
        let start = outcome.fixation_frame as usize;
        let end = outcome.end_frame as usize;
        let rel = |f: Option<u32>| f.map(|f| f - outcome.fixation_frame);
        let hidden = if hidden_by_frame.len() > end {
            hidden_by_frame[start..=end].to_vec()
        } else {
            Vec::new()
        };
        Self {
            t_s: outcome.t_s,
            t_p: outcome.t_p,
            rewarded: outcome.rewarded,
            gamma: outcome.gamma_used,
            abort_reason: outcome.abort_reason,
            gaze: gaze_by_frame[start..=end].to_vec(),
            hidden,
            ready_onset: rel(outcome.ready_frame),
            set_onset: rel(outcome.set_frame),
            go_arrival: outcome.t_p.map(|_| outcome.end_frame - outcome.fixation_frame),
            seed,
            agent_id: agent_id.to_string(),
            episode,
            trial_index: outcome.trial_index,
            version,
        }
    }

    pub fn completed(&self) -> bool {
        self.t_p.is_some()
    }

    pub fn frames(&self) -> usize {
        self.gaze.len()
    }

    /// Checks the trace and event-ordering invariants.
    pub fn validate(&self) -> Result<()> {
        if !self.hidden.is_empty() && self.hidden.len() != self.gaze.len() {
            return Err(usage_err("hidden trace length differs from gaze trace"));
        }
        let events: Vec<u32> = [self.ready_onset, self.set_onset, self.go_arrival]
            .into_iter()
            .flatten()
            .collect();
        if events.windows(2).any(|w| w[0] >= w[1]) {
            return Err(usage_err("event indices are not strictly increasing"));
        }
        if events.last().is_some_and(|&e| e as usize >= self.gaze.len()) {
            return Err(usage_err("event index beyond trace"));
        }
        Ok(())
    }
}

pub fn write_records<W: Write>(mut out: W, records: &[EvalRecord]) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_records<R: BufRead>(input: R) -> Result<Vec<EvalRecord>> {
    let mut out = Vec::new();
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line)?);
    }
    Ok(out)
}
