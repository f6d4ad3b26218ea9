use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::trajectory::{cast_obs, greedy_action, sample_action, stream_rng, EVAL_STREAM};
use super::EvalConfig;
use crate::analysis::EvalRecord;
use crate::env::{Action, EnvConfig, TimingEnv, TrialOutcome};
use crate::error::Result;
use crate::nn::{AgentParams, HiddenState, Scalar};

/// Aggregate of one evaluation run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub step: u64,
    pub frames: u64,
    pub version: u64,
    pub trials: usize,
    pub rewarded: usize,
    pub reward_rate: f64,
    pub eval_frames: u64,
}

pub const EVAL_CSV_HEADER: &str = "step,frames,version,trials,rewarded,reward_rate,eval_frames";

impl EvalSummary {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.step, self.frames, self.version, self.trials, self.rewarded, self.reward_rate, self.eval_frames
        )
    }
}

#[derive(Clone, Debug)]
pub struct EvalRun {
    pub records: Vec<EvalRecord>,
    pub frames: u64,
    /// Trials asked for; fewer finish when the frame cap is hit.
    pub requested: usize,
}

impl EvalRun {
    pub fn rewarded(&self) -> usize {
        self.records.iter().filter(|r| r.rewarded).count()
    }

    /// Rewarded fraction of the requested trials, aborts included. Trials
    /// never started before the frame cap count as unrewarded, so a policy
    /// that stops engaging cannot score on a handful of lucky trials.
    pub fn reward_rate(&self) -> f64 {
        let n = self.records.len().max(self.requested);
        if n == 0 {
            0.0
        } else {
            self.rewarded() as f64 / n as f64
        }
    }

    pub fn summary(&self, step: u64, frames: u64, version: u64) -> EvalSummary {
        EvalSummary {
            step,
            frames,
            version,
            trials: self.records.len(),
            rewarded: self.rewarded(),
            reward_rate: self.reward_rate(),
            eval_frames: self.frames,
        }
    }
}

/// Environment settings used for evaluation.
pub fn eval_env_config(base: &EnvConfig, eval: &EvalConfig) -> EnvConfig {
    let mut cfg = base.clone();
    if let Some(iv) = &eval.intervals {
        cfg.sample_intervals = iv.clone();
    }
    if let Some(g) = eval.gamma {
        cfg.gamma_schedule = vec![g];
    }
    cfg
}

/// Runs whole episodes until `eval.trials` trials finish or the frame cap
/// is hit. Carries start at zero each episode.
pub fn evaluate<F: Scalar>(
    params: &AgentParams<F>,
    env_config: &EnvConfig,
    eval: &EvalConfig,
    seed: u64,
    agent_id: &str,
) -> Result<EvalRun> {
    let cfg = eval_env_config(env_config, eval);
    let mut rng = stream_rng(seed, EVAL_STREAM);
    let mut env = TimingEnv::new(cfg, rng.next_u64())?;
    let mut run = EvalRun {
        records: Vec::new(),
        frames: 0,
        requested: eval.trials,
    };
    let mut episode = 0u32;
    'episodes: loop {
        let mut obs: Vec<F> = cast_obs(&env.restart().0);
        let mut hidden = HiddenState::zeros(&params.spec.controller);
        let mut gaze = vec![env.gaze()];
        let mut hid: Vec<Vec<f32>> = Vec::new();
        let mut pending: Vec<TrialOutcome> = Vec::new();
        loop {
            let rec = params.unroll(&hidden, &obs, 1)?;
            if eval.record_hidden {
                hid.push(rec.analysis_state_at(0).iter().map(|v| v.as_f64() as f32).collect());
            }
            for outcome in pending.drain(..) {
                run.records.push(EvalRecord::from_outcome(
                    &outcome,
                    &gaze,
                    &hid,
                    seed,
                    agent_id,
                    episode,
                    params.version,
                ));
            }
            if run.records.len() >= eval.trials || run.frames >= eval.max_frames {
                break 'episodes;
            }
            if env.is_done() {
                break;
            }
            let logits: Vec<f64> = rec.logits.iter().map(|v| v.as_f64()).collect();
            let action = if eval.greedy {
                greedy_action(&logits)
            } else {
                sample_action(&logits, &mut rng).0
            };
            let step = env.step(Action::ALL[action])?;
            run.frames += 1;
            gaze.push(env.gaze());
            pending.extend(step.trial_event);
            obs = cast_obs(&step.observation.0);
            hidden = rec.final_hidden;
        }
        episode += 1;
    }
    run.records.truncate(eval.trials);
    Ok(run)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::ObsMode;
    use crate::nn::{init_params, ControllerKind, ControllerSpec, NetworkSpec};

    #[test]
    fn records_are_consistent() {
        let spec = NetworkSpec::new(ControllerSpec::new(ControllerKind::Lstm, 8), ObsMode::Symbolic);
        let p: AgentParams<f64> = init_params(&spec, 3);
        let eval = EvalConfig {
            trials: 5,
            max_frames: 20_000,
            greedy: false,
            record_hidden: true,
            ..EvalConfig::default()
        };
        let run = evaluate(&p, &EnvConfig::default(), &eval, 1, "a").unwrap();
        assert!(!run.records.is_empty());
        for r in &run.records {
            r.validate().unwrap();
            assert_eq!(r.hidden.len(), r.gaze.len());
            assert_eq!(r.hidden[0].len(), 8);
            assert_eq!(r.gamma, 1.5);
        }
        let again = evaluate(&p, &EnvConfig::default(), &eval, 1, "a").unwrap();
        assert_eq!(run.records, again.records);
    }

    #[test]
    fn frame_cap_stops_idle_policy() {
        let spec = NetworkSpec::new(ControllerSpec::new(ControllerKind::Feedforward, 4), ObsMode::Symbolic);
        let mut p: AgentParams<f64> = init_params(&spec, 3);
        p.for_each_tensor_mut(|_, t| t.fill_zero());
        // Always "Right": leaves fixation and never comes back.
        p.policy.b.data_mut()[4] = 5.0;
        let eval = EvalConfig {
            trials: 10,
            max_frames: 500,
            ..EvalConfig::default()
        };
        let run = evaluate(&p, &EnvConfig::default(), &eval, 0, "idle").unwrap();
        assert_eq!(run.frames, 500);
        assert!(run.records.len() < 10);
        assert_eq!(run.reward_rate(), run.rewarded() as f64 / 10.0);
    }
}
