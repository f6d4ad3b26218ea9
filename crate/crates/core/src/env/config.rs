use serde::{Deserialize, Serialize};

use crate::error::{config_err, Result};

/// How the environment encodes what is on screen.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ObsMode {
    #[default]
    Symbolic,
    Pixel,
}

/// Task parameters for the interval reproduction environment.
///
/// All durations are in frames. Positions and radii are in screen units on
/// the unit square.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    pub sample_intervals: Vec<u32>,
    pub alpha: f64,
    pub beta: f64,
    pub gamma_schedule: Vec<f64>,
    pub rewards_to_advance: u32,
    pub episode_max_frames: u32,
    pub episode_max_trials: u32,
    pub cue_flash_frames: u32,
    /// Inclusive range of the fixation-to-Ready delay.
    pub pre_ready_delay: [u32; 2],
    pub action_delta: f64,
    pub fixation_pos: [f64; 2],
    pub target_pos: [f64; 2],
    pub fixation_radius: f64,
    pub target_radius: f64,
    pub trial_timeout_factor: f64,
    /// Blank frames between the end of a trial and the next fixation cross.
    pub inter_trial_frames: u32,
    pub observation_mode: ObsMode,
    pub pixel_size: usize,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            sample_intervals: (1..=10).map(|k| 10 * k).collect(),
            alpha: 8.0,
            beta: 0.0,
            gamma_schedule: vec![2.5, 1.5, 0.0],
            rewards_to_advance: 2,
            episode_max_frames: 18_000,
            episode_max_trials: 50,
            cue_flash_frames: 6,
            pre_ready_delay: [20, 40],
            action_delta: 0.05,
            fixation_pos: [0.5, 0.5],
            target_pos: [0.8, 0.8],
            fixation_radius: 0.08,
            target_radius: 0.08,
            trial_timeout_factor: 3.0,
            inter_trial_frames: 10,
            observation_mode: ObsMode::Symbolic,
            pixel_size: 16,
        }
    }
}

/// Frames of production after which a trial is aborted.
pub const TIMEOUT_FLOOR_FRAMES: u32 = 100;

impl EnvConfig {
    /// Checks every invariant and names the first one violated.
    pub fn validate(&self) -> Result<()> {
        if self.sample_intervals.is_empty() {
            return Err(config_err("sample_intervals must be non-empty"));
        }
        if self.sample_intervals.contains(&0) {
            return Err(config_err("sample_intervals must all be positive"));
        }
        if self.sample_intervals.windows(2).any(|w| w[0] >= w[1]) {
            return Err(config_err(
                "sample_intervals must be distinct and sorted ascending",
            ));
        }
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return Err(config_err("alpha must be finite and >= 0"));
        }
        if !(self.beta.is_finite() && self.beta >= 0.0) {
            return Err(config_err("beta must be finite and >= 0"));
        }
        if self.gamma_schedule.is_empty() {
            return Err(config_err("gamma_schedule must be non-empty"));
        }
        if self.gamma_schedule.iter().any(|g| !g.is_finite()) {
            return Err(config_err("gamma_schedule entries must be finite"));
        }
        if self.gamma_schedule.windows(2).any(|w| w[1] > w[0]) {
            return Err(config_err("gamma_schedule must be non-increasing"));
        }
        if *self.gamma_schedule.last().unwrap() < 0.0 {
            return Err(config_err("gamma_schedule final entry must be >= 0"));
        }
        if self.rewards_to_advance == 0 {
            return Err(config_err("rewards_to_advance must be >= 1"));
        }
        if self.episode_max_frames == 0 || self.episode_max_trials == 0 {
            return Err(config_err(
                "episode_max_frames and episode_max_trials must be >= 1",
            ));
        }
        if self.cue_flash_frames == 0 {
            return Err(config_err("cue_flash_frames must be >= 1"));
        }
        let [lo, hi] = self.pre_ready_delay;
        if lo == 0 || lo > hi {
            return Err(config_err(
                "pre_ready_delay must satisfy 1 <= low <= high",
            ));
        }
        if !(self.action_delta.is_finite() && self.action_delta > 0.0) {
            return Err(config_err("action_delta must be > 0"));
        }
        let inside = |p: [f64; 2]| p.iter().all(|v| (0.0..=1.0).contains(v));
        if !inside(self.fixation_pos) {
            return Err(config_err("fixation_pos must lie inside the unit square"));
        }
        if !inside(self.target_pos) {
            return Err(config_err("target_pos must lie inside the unit square"));
        }
        for (name, r) in [
            ("fixation_radius", self.fixation_radius),
            ("target_radius", self.target_radius),
        ] {
            if !(r > 0.0 && r < 0.5) {
                return Err(config_err(format!("{name} must lie in (0, 0.5)")));
            }
        }
        if !(self.trial_timeout_factor.is_finite() && self.trial_timeout_factor > 0.0) {
            return Err(config_err("trial_timeout_factor must be > 0"));
        }
        if self.pixel_size < 4 {
            return Err(config_err("pixel_size must be >= 4"));
        }
        Ok(())
    }

    /// Production frames allowed before a trial with this sample interval
    /// is aborted.
    pub fn timeout_frames(&self, t_s: u32) -> u32 {
        let scaled = (self.trial_timeout_factor * t_s as f64).ceil() as u32;
        scaled.max(t_s + TIMEOUT_FLOOR_FRAMES)
    }

    /// Length of the observation vector produced in the configured mode.
    pub fn observation_len(&self) -> usize {
        match self.observation_mode {
            ObsMode::Symbolic => super::SYMBOLIC_OBS_LEN,
            ObsMode::Pixel => 3 * self.pixel_size * self.pixel_size,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_is_valid() {
        EnvConfig::default().validate().unwrap();
    }

    #[test]
    fn violations_are_named() {
        let cases: Vec<(Box<dyn Fn(&mut EnvConfig)>, &str)> = vec![
            (Box::new(|c| c.sample_intervals = vec![20, 10]), "sorted"),
            (Box::new(|c| c.sample_intervals = vec![10, 10]), "distinct"),
            (Box::new(|c| c.sample_intervals = vec![0, 10]), "positive"),
            (Box::new(|c| c.gamma_schedule = vec![1.0, 2.0]), "non-increasing"),
            (Box::new(|c| c.gamma_schedule = vec![1.0, -0.5]), "final entry"),
            (Box::new(|c| c.fixation_pos = [1.2, 0.5]), "fixation_pos"),
            (Box::new(|c| c.target_radius = 0.5), "target_radius"),
            (Box::new(|c| c.action_delta = 0.0), "action_delta"),
            (Box::new(|c| c.cue_flash_frames = 0), "cue_flash_frames"),
        ];
        for (mutate, needle) in cases {
            let mut cfg = EnvConfig::default();
            mutate(&mut cfg);
            let msg = cfg.validate().unwrap_err().to_string();
            assert!(msg.contains(needle), "{msg} should mention {needle}");
        }
    }

    #[test]
    fn json_round_trip_uses_field_names() {
        let cfg = EnvConfig::default();
        let text = serde_json::to_string(&cfg).unwrap();
        assert!(text.contains("\"gamma_schedule\""));
        assert!(text.contains("\"observation_mode\":\"symbolic\""));
        let back: EnvConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, cfg);
        let partial: EnvConfig = serde_json::from_str(r#"{"alpha": 4.0}"#).unwrap();
        assert_eq!(partial.alpha, 4.0);
        assert_eq!(partial.sample_intervals, cfg.sample_intervals);
    }

    #[test]
    fn timeout_has_floor() {
        let cfg = EnvConfig::default();
        assert_eq!(cfg.timeout_frames(10), 110);
        assert_eq!(cfg.timeout_frames(100), 300);
    }
}
