//! Interval reproduction task: fixate, watch Ready and Set cues separated by
//! a sample interval, then wait that long again before gazing at the target.
//!
//! The environment is a deterministic-given-seed state machine advanced one
//! frame per [`TimingEnv::step`].

mod config;
mod render;
pub mod scripted;

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{usage_err, Result};

pub use config::{EnvConfig, ObsMode, TIMEOUT_FLOOR_FRAMES};
pub use render::{render_pixels, Visibility, VIEW_SPAN};

pub const SYMBOLIC_OBS_LEN: usize = 8;
pub const NUM_ACTIONS: usize = 5;

/// Indices into the symbolic observation vector.
pub mod obs_index {
    pub const GAZE_X: usize = 0;
    pub const GAZE_Y: usize = 1;
    pub const FIXATION_VISIBLE: usize = 2;
    pub const TARGET_VISIBLE: usize = 3;
    pub const TARGET_DX: usize = 4;
    pub const TARGET_DY: usize = 5;
    pub const READY_CUE: usize = 6;
    pub const SET_CUE: usize = 7;
}

/// Discrete eye movements.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Noop,
    Up,
    Down,
    Left,
    Right,
}

impl Action {
    pub const ALL: [Action; NUM_ACTIONS] =
        [Action::Noop, Action::Up, Action::Down, Action::Left, Action::Right];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Action> {
        Self::ALL.get(i).copied()
    }

    /// Unit direction on screen; `Up` increases y.
    pub fn direction(self) -> [f64; 2] {
        match self {
            Action::Noop => [0.0, 0.0],
            Action::Up => [0.0, 1.0],
            Action::Down => [0.0, -1.0],
            Action::Left => [-1.0, 0.0],
            Action::Right => [1.0, 0.0],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialPhase {
    AwaitFixation,
    PreReady,
    SampleInterval,
    Production,
    InterTrial,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AbortReason {
    None,
    Timeout,
    EpisodeEnd,
}

impl AbortReason {
    pub fn as_str(self) -> &'static str {
        match self {
            AbortReason::None => "none",
            AbortReason::Timeout => "timeout",
            AbortReason::EpisodeEnd => "episode_end",
        }
    }
}

/// Result of one trial. Frame indices count episode frames, where frame `k`
/// is the state after the `k`-th step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub trial_index: u32,
    pub t_s: u32,
    pub t_p: Option<u32>,
    pub rewarded: bool,
    pub gamma_used: f64,
    pub tolerance: f64,
    pub abort_reason: AbortReason,
    pub fixation_frame: u32,
    pub ready_frame: Option<u32>,
    pub set_frame: Option<u32>,
    pub end_frame: u32,
}

pub const TRIAL_CSV_HEADER: &str = "trial_index,t_s,t_p,rewarded,gamma_used,abort_reason";

impl TrialOutcome {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.trial_index,
            self.t_s,
            self.t_p.map(|v| v.to_string()).unwrap_or_default(),
            u8::from(self.rewarded),
            self.gamma_used,
            self.abort_reason.as_str()
        )
    }
}

/// Writes trial outcomes as CSV with a header row.
pub fn write_trials_csv<W: Write>(mut out: W, trials: &[TrialOutcome]) -> Result<()> {
    writeln!(out, "{TRIAL_CSV_HEADER}")?;
    for t in trials {
        writeln!(out, "{}", t.csv_row())?;
    }
    Ok(())
}

/// Outcome of the reward rule for one production.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Judgement {
    pub rewarded: bool,
    pub tolerance: f64,
}

/// Applies the tolerance rule `|t_p - t_s| <= gamma * (alpha + beta * t_s)`.
///
/// The comparison is non-strict so that `gamma = 0` demands an exact frame
/// match instead of being unrewardable.
pub fn judge_production(t_s: u32, t_p: u32, alpha: f64, beta: f64, gamma: f64) -> Judgement {
    let tolerance = gamma * (alpha + beta * t_s as f64);
    let error = (t_p as f64 - t_s as f64).abs();
    Judgement {
        rewarded: error <= tolerance,
        tolerance,
    }
}

/// Per-sample-interval curriculum progress.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CurriculumStage {
    pub gamma_index: usize,
    pub rewards_at_stage: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Observation(pub Vec<f64>);

impl Observation {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Clone, Debug)]
pub struct StepResult {
    pub observation: Observation,
    pub reward: f64,
    pub episode_done: bool,
    pub trial_event: Option<TrialOutcome>,
}

#[derive(Clone, Debug)]
struct TrialInProgress {
    t_s: u32,
    pre_ready: u32,
    fixation_frame: u32,
    ready_frame: Option<u32>,
    set_frame: Option<u32>,
}

/// The environment instance. Owned by exactly one actor.
#[derive(Clone, Debug)]
pub struct TimingEnv {
    config: EnvConfig,
    gaze: [f64; 2],
    phase: TrialPhase,
    frames_in_phase: u32,
    episode_frame: u32,
    trial_index: u32,
    trial: Option<TrialInProgress>,
    curriculum: Vec<CurriculumStage>,
    done: bool,
    rng: ChaCha8Rng,
}

impl TimingEnv {
    /// Builds an environment and resets it with `seed`.
    pub fn new(config: EnvConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let curriculum = vec![CurriculumStage::default(); config.sample_intervals.len()];
        let mut env = Self {
            gaze: config.fixation_pos,
            config,
            phase: TrialPhase::AwaitFixation,
            frames_in_phase: 0,
            episode_frame: 0,
            trial_index: 0,
            trial: None,
            curriculum,
            done: false,
            rng: ChaCha8Rng::seed_from_u64(seed),
        };
        env.reset(seed);
        Ok(env)
    }

    /// Reseeds and starts a fresh episode.
    pub fn reset(&mut self, seed: u64) -> Observation {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
        self.restart()
    }

    /// Starts a fresh episode continuing the current random stream.
    pub fn restart(&mut self) -> Observation {
        self.gaze = self.config.fixation_pos;
        self.phase = TrialPhase::AwaitFixation;
        self.frames_in_phase = 0;
        self.episode_frame = 0;
        self.trial_index = 0;
        self.trial = None;
        self.done = false;
        self.curriculum
            .iter_mut()
            .for_each(|c| *c = CurriculumStage::default());
        self.observe()
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn gaze(&self) -> [f64; 2] {
        self.gaze
    }

    pub fn phase(&self) -> TrialPhase {
        self.phase
    }

    pub fn frames_in_phase(&self) -> u32 {
        self.frames_in_phase
    }

    pub fn episode_frame(&self) -> u32 {
        self.episode_frame
    }

    /// Number of trials judged or aborted so far this episode.
    pub fn trial_index(&self) -> u32 {
        self.trial_index
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    /// Sample interval of the trial in progress.
    pub fn current_ts(&self) -> Option<u32> {
        self.trial.as_ref().map(|t| t.t_s)
    }

    pub fn curriculum(&self) -> &[CurriculumStage] {
        &self.curriculum
    }

    /// Tolerance multiplier currently applied to trials with sample interval `t_s`.
    pub fn gamma_for(&self, t_s: u32) -> Option<f64> {
        let i = self.config.sample_intervals.iter().position(|&s| s == t_s)?;
        Some(self.config.gamma_schedule[self.curriculum[i].gamma_index])
    }

    /// Uniform draw from the configured sample intervals.
    pub fn draw_sample_interval(&mut self) -> u32 {
        let n = self.config.sample_intervals.len();
        self.config.sample_intervals[self.rng.random_range(0..n)]
    }

    fn inside(&self, center: [f64; 2], radius: f64) -> bool {
        let dx = self.gaze[0] - center[0];
        let dy = self.gaze[1] - center[1];
        dx * dx + dy * dy <= radius * radius
    }

    fn enter(&mut self, phase: TrialPhase) {
        self.phase = phase;
        self.frames_in_phase = 0;
    }

    /// Advances one frame.
    pub fn step(&mut self, action: Action) -> Result<StepResult> {
        if self.done {
            return Err(usage_err("step called after episode_done; reset first"));
        }
        let [dx, dy] = action.direction();
        let delta = self.config.action_delta;
        self.gaze[0] = (self.gaze[0] + dx * delta).clamp(0.0, 1.0);
        self.gaze[1] = (self.gaze[1] + dy * delta).clamp(0.0, 1.0);
        self.episode_frame += 1;
        self.frames_in_phase += 1;

        let mut reward = 0.0;
        let mut event = None;
        match self.phase {
            TrialPhase::AwaitFixation => {
                if self.inside(self.config.fixation_pos, self.config.fixation_radius) {
                    let t_s = self.draw_sample_interval();
                    let [lo, hi] = self.config.pre_ready_delay;
                    let pre_ready = self.rng.random_range(lo..=hi);
                    self.trial = Some(TrialInProgress {
                        t_s,
                        pre_ready,
                        fixation_frame: self.episode_frame,
                        ready_frame: None,
                        set_frame: None,
                    });
                    self.enter(TrialPhase::PreReady);
                }
            }
            TrialPhase::PreReady => {
                let trial = self.trial.as_mut().expect("trial in progress");
                if self.frames_in_phase >= trial.pre_ready {
                    trial.ready_frame = Some(self.episode_frame);
                    self.enter(TrialPhase::SampleInterval);
                }
            }
            TrialPhase::SampleInterval => {
                let trial = self.trial.as_mut().expect("trial in progress");
                if self.frames_in_phase >= trial.t_s {
                    trial.set_frame = Some(self.episode_frame);
                    self.enter(TrialPhase::Production);
                }
            }
            TrialPhase::Production => {
                let t_s = self.trial.as_ref().expect("trial in progress").t_s;
                if self.inside(self.config.target_pos, self.config.target_radius) {
                    let outcome = self.finish_trial(Some(self.frames_in_phase), AbortReason::None);
                    if outcome.rewarded {
                        reward = 1.0;
                    }
                    event = Some(outcome);
                } else if self.frames_in_phase >= self.config.timeout_frames(t_s) {
                    event = Some(self.finish_trial(None, AbortReason::Timeout));
                }
            }
            TrialPhase::InterTrial => {
                if self.frames_in_phase >= self.config.inter_trial_frames {
                    self.enter(TrialPhase::AwaitFixation);
                }
            }
        }

        if event.is_some() && self.trial_index >= self.config.episode_max_trials {
            self.done = true;
        }
        if !self.done && self.episode_frame >= self.config.episode_max_frames {
            self.done = true;
            if self.trial.is_some() {
                event = Some(self.finish_trial(None, AbortReason::EpisodeEnd));
            }
        }

        Ok(StepResult {
            observation: self.observe(),
            reward,
            episode_done: self.done,
            trial_event: event,
        })
    }

    fn finish_trial(&mut self, t_p: Option<u32>, abort: AbortReason) -> TrialOutcome {
        let trial = self.trial.take().expect("trial in progress");
        let idx = self
            .config
            .sample_intervals
            .iter()
            .position(|&s| s == trial.t_s)
            .expect("drawn interval is configured");
        let stage = self.curriculum[idx];
        let gamma = self.config.gamma_schedule[stage.gamma_index];
        let judgement = t_p.map(|t_p| {
            judge_production(trial.t_s, t_p, self.config.alpha, self.config.beta, gamma)
        });
        let rewarded = judgement.is_some_and(|j| j.rewarded);
        if rewarded {
            self.advance_curriculum(idx);
        }
        let outcome = TrialOutcome {
            trial_index: self.trial_index,
            t_s: trial.t_s,
            t_p,
            rewarded,
            gamma_used: gamma,
            tolerance: gamma * (self.config.alpha + self.config.beta * trial.t_s as f64),
            abort_reason: abort,
            fixation_frame: trial.fixation_frame,
            ready_frame: trial.ready_frame,
            set_frame: trial.set_frame,
            end_frame: self.episode_frame,
        };
        self.trial_index += 1;
        self.enter(TrialPhase::InterTrial);
        outcome
    }

    fn advance_curriculum(&mut self, idx: usize) {
        let last = self.config.gamma_schedule.len() - 1;
        let stage = &mut self.curriculum[idx];
        stage.rewards_at_stage += 1;
        if stage.rewards_at_stage >= self.config.rewards_to_advance && stage.gamma_index < last {
            stage.gamma_index += 1;
            stage.rewards_at_stage = 0;
        }
    }

    fn ready_visible(&self) -> bool {
        self.phase == TrialPhase::SampleInterval && self.frames_in_phase < self.config.cue_flash_frames
    }

    fn set_visible(&self) -> bool {
        self.phase == TrialPhase::Production && self.frames_in_phase < self.config.cue_flash_frames
    }

    fn fixation_visible(&self) -> bool {
        self.phase != TrialPhase::InterTrial
    }

    fn target_visible(&self) -> bool {
        matches!(
            self.phase,
            TrialPhase::PreReady | TrialPhase::SampleInterval | TrialPhase::Production
        )
    }

    /// What the agent sees after the latest frame.
    pub fn observe(&self) -> Observation {
        match self.config.observation_mode {
            ObsMode::Symbolic => {
                let target = self.target_visible();
                let (tdx, tdy) = if target {
                    (
                        self.config.target_pos[0] - self.gaze[0],
                        self.config.target_pos[1] - self.gaze[1],
                    )
                } else {
                    (0.0, 0.0)
                };
                Observation(vec![
                    self.gaze[0],
                    self.gaze[1],
                    f64::from(u8::from(self.fixation_visible())),
                    f64::from(u8::from(target)),
                    tdx,
                    tdy,
                    f64::from(u8::from(self.ready_visible())),
                    f64::from(u8::from(self.set_visible())),
                ])
            }
            ObsMode::Pixel => Observation(render_pixels(
                &self.config,
                self.gaze,
                Visibility {
                    fixation: self.fixation_visible(),
                    target: self.target_visible(),
                    ready: self.ready_visible(),
                    set: self.set_visible(),
                },
            )),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::scripted::ScriptedPolicy;

    fn env(seed: u64) -> TimingEnv {
        TimingEnv::new(EnvConfig::default(), seed).unwrap()
    }

    #[test]
    fn reset_shows_fixation_only() {
        let e = env(0);
        let o = e.observe();
        assert_eq!(o.0[obs_index::FIXATION_VISIBLE], 1.0);
        assert_eq!(o.0[obs_index::TARGET_VISIBLE], 0.0);
        assert_eq!(o.0[obs_index::READY_CUE], 0.0);
        assert_eq!(o.0[obs_index::SET_CUE], 0.0);
        assert_eq!(e.phase(), TrialPhase::AwaitFixation);
        assert_eq!(e.episode_frame(), 0);
    }

    #[test]
    fn fixating_noop_starts_trial() {
        let mut e = env(0);
        let r = e.step(Action::Noop).unwrap();
        assert_eq!(e.phase(), TrialPhase::PreReady);
        assert_eq!(r.observation.0[obs_index::TARGET_VISIBLE], 1.0);
        let dx = r.observation.0[obs_index::TARGET_DX];
        assert!((dx - 0.3).abs() < 1e-12);
    }

    #[test]
    fn same_seed_same_episode() {
        let mut a = env(7);
        let mut b = env(7);
        let actions = [Action::Up, Action::Noop, Action::Left, Action::Right, Action::Down];
        for k in 0..3000 {
            let act = actions[(k * 7 + k / 13) % 5];
            let ra = a.step(act).unwrap();
            let rb = b.step(act).unwrap();
            assert_eq!(ra.observation, rb.observation);
            assert_eq!(ra.reward, rb.reward);
            assert_eq!(ra.trial_event, rb.trial_event);
        }
    }

    #[test]
    fn judge_examples() {
        let j = judge_production(50, 65, 8.0, 0.0, 2.5);
        assert_eq!(j.tolerance, 20.0);
        assert!(j.rewarded);
        let j = judge_production(50, 50, 8.0, 0.0, 0.0);
        assert_eq!(j.tolerance, 0.0);
        assert!(j.rewarded);
        let j = judge_production(100, 81, 8.0, 0.1, 1.0);
        assert!((j.tolerance - 18.0).abs() < 1e-12);
        assert!(!j.rewarded);
    }

    #[test]
    fn singleton_interval_always_drawn() {
        let cfg = EnvConfig {
            sample_intervals: vec![30],
            ..EnvConfig::default()
        };
        let mut e = TimingEnv::new(cfg, 3).unwrap();
        assert!((0..200).all(|_| e.draw_sample_interval() == 30));
    }

    #[test]
    fn draws_are_reproducible() {
        let mut a = env(11);
        let mut b = env(11);
        let xa: Vec<u32> = (0..100).map(|_| a.draw_sample_interval()).collect();
        let xb: Vec<u32> = (0..100).map(|_| b.draw_sample_interval()).collect();
        assert_eq!(xa, xb);
    }

    #[test]
    fn step_after_done_is_usage_error() {
        let cfg = EnvConfig {
            episode_max_frames: 3,
            ..EnvConfig::default()
        };
        let mut e = TimingEnv::new(cfg, 0).unwrap();
        for _ in 0..3 {
            e.step(Action::Noop).unwrap();
        }
        assert!(e.is_done());
        assert!(matches!(e.step(Action::Noop), Err(crate::Error::Usage(_))));
    }

    #[test]
    fn episode_end_aborts_open_trial() {
        let cfg = EnvConfig {
            episode_max_frames: 5,
            ..EnvConfig::default()
        };
        let mut e = TimingEnv::new(cfg, 0).unwrap();
        let mut last = None;
        for _ in 0..5 {
            last = Some(e.step(Action::Noop).unwrap());
        }
        let r = last.unwrap();
        assert!(r.episode_done);
        let ev = r.trial_event.unwrap();
        assert_eq!(ev.abort_reason, AbortReason::EpisodeEnd);
        assert_eq!(ev.t_p, None);
        assert!(!ev.rewarded);
    }

    #[test]
    fn immediate_go_with_long_interval_is_unrewarded() {
        // t_s = 100; arriving right after Set takes ~10 frames, far below
        // t_s - tolerance = 80 at gamma 2.5.
        let cfg = EnvConfig {
            sample_intervals: vec![100],
            ..EnvConfig::default()
        };
        let mut e = TimingEnv::new(cfg, 5).unwrap();
        let policy = ScriptedPolicy::ImmediateGo;
        let outcome = loop {
            let a = policy.act(&e);
            if let Some(ev) = e.step(a).unwrap().trial_event {
                break ev;
            }
        };
        let t_p = outcome.t_p.unwrap();
        assert_eq!(t_p, 10);
        assert!(!outcome.rewarded);
    }

    #[test]
    fn timeout_aborts_production() {
        let cfg = EnvConfig {
            sample_intervals: vec![10],
            pre_ready_delay: [20, 20],
            ..EnvConfig::default()
        };
        let mut e = TimingEnv::new(cfg, 0).unwrap();
        let mut frames = 0;
        let outcome = loop {
            frames += 1;
            if let Some(ev) = e.step(Action::Noop).unwrap().trial_event {
                break ev;
            }
        };
        assert_eq!(outcome.abort_reason, AbortReason::Timeout);
        // 1 fixation frame + 20 pre-ready + 10 sample + 110 production.
        assert_eq!(frames, 1 + 20 + 10 + 110);
    }

    #[test]
    fn csv_row_layout() {
        let o = TrialOutcome {
            trial_index: 3,
            t_s: 40,
            t_p: Some(44),
            rewarded: true,
            gamma_used: 1.5,
            tolerance: 12.0,
            abort_reason: AbortReason::None,
            fixation_frame: 0,
            ready_frame: None,
            set_frame: None,
            end_frame: 0,
        };
        assert_eq!(o.csv_row(), "3,40,44,1,1.5,none");
        let mut buf = Vec::new();
        write_trials_csv(&mut buf, &[o]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with(TRIAL_CSV_HEADER));
    }
}
