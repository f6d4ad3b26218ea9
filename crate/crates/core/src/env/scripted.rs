//! Hand-written policies with privileged access to the trial state. They
//! serve as oracles for the reward rule and as reference behaviour for the
//! analysis pipeline.

use super::{Action, EnvConfig, TimingEnv, TrialPhase};

/// Scripted behaviours.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ScriptedPolicy {
    /// Sits on the fixation cross until Set, then walks so that it arrives
    /// `offset` frames after `t_s` (or as soon as possible).
    Timed { offset: i64 },
    /// Parks one step outside the target during the trial, then steps in at
    /// `t_s + offset` frames after Set.
    PrePositioned { offset: i64 },
    /// Walks to the target as soon as Set appears.
    ImmediateGo,
}

impl ScriptedPolicy {
    /// The optimal fixation-holding policy.
    pub fn optimal() -> Self {
        ScriptedPolicy::Timed { offset: 0 }
    }

    pub fn act(&self, env: &TimingEnv) -> Action {
        let cfg = env.config();
        let gaze = env.gaze();
        match env.phase() {
            TrialPhase::AwaitFixation | TrialPhase::InterTrial => {
                step_toward(cfg, gaze, cfg.fixation_pos, cfg.fixation_radius)
            }
            TrialPhase::PreReady | TrialPhase::SampleInterval => match self {
                ScriptedPolicy::PrePositioned { .. } => {
                    if steps_to_target(cfg, gaze) > 1 {
                        step_toward(cfg, gaze, cfg.target_pos, cfg.target_radius)
                    } else {
                        Action::Noop
                    }
                }
                _ => Action::Noop,
            },
            TrialPhase::Production => {
                let t_s = env.current_ts().expect("trial in progress") as i64;
                let offset = match *self {
                    ScriptedPolicy::Timed { offset } | ScriptedPolicy::PrePositioned { offset } => offset,
                    ScriptedPolicy::ImmediateGo => i64::MIN / 2,
                };
                let elapsed = env.frames_in_phase() as i64;
                let remaining = t_s + offset - elapsed;
                let needed = steps_to_target(cfg, gaze) as i64;
                if needed >= remaining {
                    step_toward(cfg, gaze, cfg.target_pos, cfg.target_radius)
                } else {
                    Action::Noop
                }
            }
        }
    }
}

fn inside(p: [f64; 2], center: [f64; 2], radius: f64) -> bool {
    let dx = p[0] - center[0];
    let dy = p[1] - center[1];
    dx * dx + dy * dy <= radius * radius
}

/// Greedy axis move reducing the larger coordinate gap; `Noop` once inside.
pub fn step_toward(cfg: &EnvConfig, gaze: [f64; 2], goal: [f64; 2], radius: f64) -> Action {
    if inside(gaze, goal, radius) {
        return Action::Noop;
    }
    let dx = goal[0] - gaze[0];
    let dy = goal[1] - gaze[1];
    let half = cfg.action_delta / 2.0;
    if dx.abs() >= dy.abs() && dx.abs() > half {
        if dx > 0.0 {
            Action::Right
        } else {
            Action::Left
        }
    } else if dy.abs() > half {
        if dy > 0.0 {
            Action::Up
        } else {
            Action::Down
        }
    } else if dx.abs() > 0.0 {
        if dx > 0.0 {
            Action::Right
        } else {
            Action::Left
        }
    } else if dy > 0.0 {
        Action::Up
    } else {
        Action::Down
    }
}

/// Frames the greedy walk needs to land inside the target from `gaze`.
pub fn steps_to_target(cfg: &EnvConfig, gaze: [f64; 2]) -> u32 {
    let mut p = gaze;
    let mut n = 0;
    while !inside(p, cfg.target_pos, cfg.target_radius) && n < 1000 {
        let [dx, dy] = step_toward(cfg, p, cfg.target_pos, cfg.target_radius).direction();
        p[0] = (p[0] + dx * cfg.action_delta).clamp(0.0, 1.0);
        p[1] = (p[1] + dy * cfg.action_delta).clamp(0.0, 1.0);
        n += 1;
    }
    n
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::TrialOutcome;

    fn run_trials(cfg: EnvConfig, policy: ScriptedPolicy, n: usize, seed: u64) -> Vec<TrialOutcome> {
        let mut env = TimingEnv::new(cfg, seed).unwrap();
        let mut out = Vec::new();
        while out.len() < n {
            if env.is_done() {
                env.restart();
            }
            let r = env.step(policy.act(&env)).unwrap();
            out.extend(r.trial_event);
        }
        out
    }

    #[test]
    fn travel_from_fixation_is_ten_frames() {
        let cfg = EnvConfig::default();
        assert_eq!(steps_to_target(&cfg, cfg.fixation_pos), 10);
    }

    #[test]
    fn optimal_policy_hits_every_interval_exactly_when_possible() {
        let cfg = EnvConfig {
            gamma_schedule: vec![2.5],
            ..EnvConfig::default()
        };
        for t in run_trials(cfg, ScriptedPolicy::optimal(), 200, 1) {
            assert!(t.rewarded);
            assert_eq!(t.t_p, Some(t.t_s.max(10)));
        }
    }

    #[test]
    fn pre_positioned_policy_matches_exactly() {
        let cfg = EnvConfig {
            gamma_schedule: vec![0.0],
            ..EnvConfig::default()
        };
        for t in run_trials(cfg, ScriptedPolicy::PrePositioned { offset: 0 }, 200, 2) {
            assert_eq!(t.t_p, Some(t.t_s));
            assert!(t.rewarded);
        }
    }

    #[test]
    fn phases_follow_the_fixed_order() {
        let mut env = TimingEnv::new(EnvConfig::default(), 9).unwrap();
        let policy = ScriptedPolicy::optimal();
        let order = [
            TrialPhase::AwaitFixation,
            TrialPhase::PreReady,
            TrialPhase::SampleInterval,
            TrialPhase::Production,
            TrialPhase::InterTrial,
        ];
        let mut prev = env.phase();
        let mut sample_frames = 0;
        for _ in 0..5000 {
            let r = env.step(policy.act(&env)).unwrap();
            let now = env.phase();
            if now != prev {
                let pi = order.iter().position(|&p| p == prev).unwrap();
                assert_eq!(order[(pi + 1) % 5], now, "{prev:?} -> {now:?}");
                if prev == TrialPhase::SampleInterval {
                    assert_eq!(sample_frames, env.current_ts().unwrap());
                }
                sample_frames = 0;
            }
            if now == TrialPhase::SampleInterval {
                sample_frames += 1;
            }
            if let Some(ev) = r.trial_event {
                let ready = ev.ready_frame.unwrap();
                let set = ev.set_frame.unwrap();
                assert_eq!(set - ready, ev.t_s);
                assert_eq!(ev.end_frame - set, ev.t_p.unwrap());
            }
            prev = now;
            if r.episode_done {
                break;
            }
        }
    }
}
