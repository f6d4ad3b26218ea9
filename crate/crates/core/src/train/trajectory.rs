use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::env::{Action, EnvConfig, TimingEnv, TrialOutcome, NUM_ACTIONS};
use crate::error::{numeric_err, Result};
use crate::nn::{AgentParams, HiddenState, Scalar};
use crate::rl::log_softmax;

/// One unroll of experience.
#[derive(Clone, Debug)]
pub struct Trajectory<F> {
    /// `T + 1` stacked observations; the last one bootstraps.
    pub observations: Vec<F>,
    pub actions: Vec<usize>,
    pub rewards: Vec<f64>,
    pub behavior_log_probs: Vec<f64>,
    pub initial_hidden: HiddenState<F>,
    /// 0 where the episode ended on that step.
    pub discount_mask: Vec<f64>,
    pub actor_id: usize,
    pub param_version: u64,
    /// Trials that finished inside this unroll.
    pub trials: Vec<TrialOutcome>,
}

impl<F: Scalar> Trajectory<F> {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    /// Carry reset flags for re-unrolling all `T + 1` observations.
    pub fn reset_flags(&self) -> Vec<bool> {
        let mut r = vec![false; self.len() + 1];
        for (t, &m) in self.discount_mask.iter().enumerate() {
            r[t + 1] = m == 0.0;
        }
        r
    }

    pub fn total_reward(&self) -> f64 {
        self.rewards.iter().sum()
    }
}

/// Samples from the softmax of `logits`; returns the action and its log
/// probability.
pub fn sample_action<R: Rng>(logits: &[f64], rng: &mut R) -> (usize, f64) {
    let lp = log_softmax(logits);
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, l) in lp.iter().enumerate() {
        acc += l.exp();
        if u < acc {
            return (i, *l);
        }
    }
    (NUM_ACTIONS - 1, lp[NUM_ACTIONS - 1])
}

/// Index of the largest logit; ties go to the lowest index.
pub fn greedy_action(logits: &[f64]) -> usize {
    let mut best = 0;
    for (i, &l) in logits.iter().enumerate() {
        if l > logits[best] {
            best = i;
        }
    }
    best
}

/// Environment, carry and random streams owned by one actor.
#[derive(Clone, Debug)]
pub struct Actor<F> {
    pub id: usize,
    env: TimingEnv,
    hidden: HiddenState<F>,
    observation: Vec<F>,
    rng: ChaCha8Rng,
    /// Greedy acting for debugging; the recorded log-probabilities are still
    /// those of the softmax policy.
    pub greedy: bool,
    episodes: u64,
}

/// Independent stream `stream` of the generator seeded with `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub(crate) const ACTOR_STREAM_BASE: u64 = 1 << 32;
pub(crate) const EVAL_STREAM: u64 = 7;

impl<F: Scalar> Actor<F> {
    pub fn new(id: usize, env_config: EnvConfig, hidden: HiddenState<F>, seed: u64) -> Result<Self> {
        let mut rng = stream_rng(seed, ACTOR_STREAM_BASE + id as u64);
        let env = TimingEnv::new(env_config, rng.next_u64())?;
        let observation = cast_obs(&env.observe().0);
        Ok(Self {
            id,
            env,
            hidden,
            observation,
            rng,
            greedy: false,
            episodes: 0,
        })
    }

    pub fn env(&self) -> &TimingEnv {
        &self.env
    }

    pub fn hidden(&self) -> &HiddenState<F> {
        &self.hidden
    }

    pub fn episodes(&self) -> u64 {
        self.episodes
    }

    /// Takes `steps` environment steps under `params`. Episodes restart
    /// inside the unroll with the carry zeroed; the carry at the end is kept
    /// for the next call.
    pub fn collect(&mut self, params: &AgentParams<F>, steps: usize) -> Result<Trajectory<F>> {
        let obs_len = self.observation.len();
        let mut traj = Trajectory {
            observations: Vec::with_capacity((steps + 1) * obs_len),
            actions: Vec::with_capacity(steps),
            rewards: Vec::with_capacity(steps),
            behavior_log_probs: Vec::with_capacity(steps),
            initial_hidden: self.hidden.clone(),
            discount_mask: Vec::with_capacity(steps),
            actor_id: self.id,
            param_version: params.version,
            trials: Vec::new(),
        };
        for _ in 0..steps {
            traj.observations.extend_from_slice(&self.observation);
            let (logits, _, next_hidden) = params.act(&self.hidden, &self.observation)?;
            let logits: Vec<f64> = logits.iter().map(|v| v.as_f64()).collect();
            let (action, log_prob) = if self.greedy {
                let a = greedy_action(&logits);
                (a, log_softmax(&logits)[a])
            } else {
                sample_action(&logits, &mut self.rng)
            };
            if !log_prob.is_finite() {
                return Err(numeric_err(format!("actor {} produced a non-finite log-probability", self.id)));
            }
            let step = self.env.step(Action::ALL[action])?;
            traj.actions.push(action);
            traj.rewards.push(step.reward);
            traj.behavior_log_probs.push(log_prob);
            traj.trials.extend(step.trial_event);
            if step.episode_done {
                traj.discount_mask.push(0.0);
                self.observation = cast_obs(&self.env.restart().0);
                self.hidden = HiddenState::zeros(&params.spec.controller);
                self.episodes += 1;
            } else {
                traj.discount_mask.push(1.0);
                self.observation = cast_obs(&step.observation.0);
                self.hidden = next_hidden;
            }
        }
        traj.observations.extend_from_slice(&self.observation);
        Ok(traj)
    }
}

pub(crate) fn cast_obs<F: Scalar>(obs: &[f64]) -> Vec<F> {
    obs.iter().map(|&v| F::of(v)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::ObsMode;
    use crate::nn::{init_params, ControllerKind, ControllerSpec, NetworkSpec};

    fn setup(kind: ControllerKind) -> (AgentParams<f64>, EnvConfig) {
        let spec = NetworkSpec::new(ControllerSpec::new(kind, 8), ObsMode::Symbolic);
        (init_params(&spec, 1), EnvConfig::default())
    }

    #[test]
    fn greedy_collection_is_reproducible() {
        let (p, env) = setup(ControllerKind::Lstm);
        let run = || {
            let mut a = Actor::new(0, env.clone(), p.initial_hidden(), 9).unwrap();
            a.greedy = true;
            let t = a.collect(&p, 40).unwrap();
            (t.actions, t.observations)
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn uniform_policy_rarely_earns_reward_in_a_hundred_steps() {
        let (p, env) = setup(ControllerKind::Feedforward);
        let uniform = p.zeros_like();
        let runs = 1000;
        let policy_reward: f64 = (0..runs)
            .map(|i| {
                let mut a = Actor::new(i, env.clone(), uniform.initial_hidden(), 11).unwrap();
                a.collect(&uniform, 100).unwrap().total_reward()
            })
            .sum();
        // Oracle: the same environment driven by independent uniform draws.
        let mut rng = stream_rng(11, 0);
        let mut walk_reward = 0.0;
        for _ in 0..runs {
            let mut e = TimingEnv::new(env.clone(), rng.next_u64()).unwrap();
            for _ in 0..100 {
                walk_reward += e.step(Action::ALL[rng.random_range(0..5)]).unwrap().reward;
            }
        }
        let (policy, walk) = (policy_reward / runs as f64, walk_reward / runs as f64);
        // About one trial in fifty episodes lands by chance.
        assert!(policy < 0.05 && walk < 0.05, "{policy} {walk}");
        assert!((policy - walk).abs() < 0.02, "{policy} {walk}");
    }

    #[test]
    fn single_step_has_bootstrap() {
        let (p, env) = setup(ControllerKind::Gru);
        let mut a = Actor::new(0, env, p.initial_hidden(), 2).unwrap();
        let t = a.collect(&p, 1).unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t.observations.len(), 2 * crate::env::SYMBOLIC_OBS_LEN);
        assert_eq!(t.reset_flags(), vec![false, false]);
    }

    #[test]
    fn episode_end_masks_and_resets() {
        let (p, mut env) = setup(ControllerKind::Lstm);
        env.episode_max_frames = 15;
        let mut a = Actor::new(0, env, p.initial_hidden(), 3).unwrap();
        let t = a.collect(&p, 40).unwrap();
        let terminals: Vec<usize> = (0..40).filter(|&i| t.discount_mask[i] == 0.0).collect();
        assert_eq!(terminals, vec![14, 29]);
        let flags = t.reset_flags();
        assert!(flags[15] && flags[30] && !flags[14]);
        assert_eq!(a.episodes(), 2);
    }

    #[test]
    fn carry_continues_across_calls() {
        let (p, env) = setup(ControllerKind::Lstm);
        let mut a = Actor::new(0, env, p.initial_hidden(), 4).unwrap();
        let t1 = a.collect(&p, 5).unwrap();
        let end = a.hidden().clone();
        let t2 = a.collect(&p, 5).unwrap();
        assert_eq!(t2.initial_hidden, end);
        assert_ne!(t1.initial_hidden, end);
        let n = crate::env::SYMBOLIC_OBS_LEN;
        assert_eq!(&t1.observations[5 * n..], &t2.observations[..n]);
    }

    #[test]
    fn sampling_matches_softmax() {
        let logits = [0.0, 1.0, -1.0, 0.5, 2.0];
        let lp = log_softmax(&logits);
        let mut rng = stream_rng(0, 0);
        let mut counts = [0usize; 5];
        let n = 200_000;
        for _ in 0..n {
            let (a, l) = sample_action(&logits, &mut rng);
            assert_eq!(l, lp[a]);
            counts[a] += 1;
        }
        for i in 0..5 {
            let p = lp[i].exp();
            let se = (p * (1.0 - p) / n as f64).sqrt();
            assert!((counts[i] as f64 / n as f64 - p).abs() < 5.0 * se);
        }
    }

    #[test]
    fn greedy_prefers_lowest_on_ties() {
        assert_eq!(greedy_action(&[1.0, 3.0, 3.0, 0.0, 0.0]), 1);
    }
}
