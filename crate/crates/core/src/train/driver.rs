use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, RwLock};

use crossbeam_channel::bounded;
use log::{info, warn};

use super::eval::{evaluate, EvalRun, EvalSummary, EVAL_CSV_HEADER};
use super::learner::{learner_step, StepMetrics, METRICS_CSV_HEADER};
use super::trajectory::{Actor, Trajectory};
use super::{ExecutionMode, TrainConfig};
use crate::env::EnvConfig;
use crate::error::{usage_err, Result};
use crate::nn::{init_params, AdamState, AgentParams, Checkpoint, NetworkSpec, Scalar};
use crate::par;

/// Whether training should go on after an event.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Control {
    Continue,
    Stop,
}

pub enum TrainEvent<'a, F> {
    Step(&'a StepMetrics),
    Eval {
        summary: &'a EvalSummary,
        run: &'a EvalRun,
        params: &'a AgentParams<F>,
    },
}

#[derive(Clone, Debug)]
pub struct TrainOutcome<F> {
    pub params: AgentParams<F>,
    pub adam: AdamState<F>,
    pub metrics: Vec<StepMetrics>,
    pub evals: Vec<EvalSummary>,
    pub frames: u64,
    /// True when an observer asked to stop before the budget was used.
    pub stopped_early: bool,
}

/// Everything that defines a training run.
#[derive(Clone, Debug)]
pub struct TrainSetup {
    pub env: EnvConfig,
    pub network: NetworkSpec,
    pub train: TrainConfig,
}

impl TrainSetup {
    pub fn validate(&self) -> Result<()> {
        self.env.validate()?;
        self.network.validate()?;
        self.train.validate()?;
        if self.network.obs_mode != self.env.observation_mode {
            return Err(crate::error::config_err(
                "agent observation mode must match env.observation_mode",
            ));
        }
        if self.network.obs_mode == crate::env::ObsMode::Pixel && self.network.pixel_size != self.env.pixel_size {
            return Err(crate::error::config_err("agent.pixel_size must match env.pixel_size"));
        }
        Ok(())
    }
}

pub const METRICS_FILE: &str = "metrics.csv";
pub const EVAL_FILE: &str = "eval_summary.csv";
pub const FINAL_CHECKPOINT: &str = "checkpoint_final.json";
pub const PARTIAL_CHECKPOINT: &str = "checkpoint_partial.json";

struct Sink {
    dir: PathBuf,
    metrics: BufWriter<File>,
    evals: BufWriter<File>,
}

impl Sink {
    fn open(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir.join("checkpoints"))?;
        let mut metrics = BufWriter::new(File::create(dir.join(METRICS_FILE))?);
        writeln!(metrics, "{METRICS_CSV_HEADER}")?;
        let mut evals = BufWriter::new(File::create(dir.join(EVAL_FILE))?);
        writeln!(evals, "{EVAL_CSV_HEADER}")?;
        Ok(Self {
            dir: dir.to_path_buf(),
            metrics,
            evals,
        })
    }
}

struct Learner<'a, F: Scalar> {
    setup: &'a TrainSetup,
    params: AgentParams<F>,
    adam: AdamState<F>,
    metrics: Vec<StepMetrics>,
    evals: Vec<EvalSummary>,
    frames: u64,
    last_eval: u64,
    sink: Option<Sink>,
    stopped: bool,
}

impl<'a, F: Scalar> Learner<'a, F> {
    fn budget_left(&self) -> bool {
        !self.stopped && self.frames < self.setup.train.total_env_frames
    }

    fn checkpoint(&self, name: &str) -> Result<()> {
        if let Some(sink) = &self.sink {
            Checkpoint::capture(&self.params, &self.adam, None, self.frames).save(&sink.dir.join(name))?;
        }
        Ok(())
    }

    fn step(
        &mut self,
        batch: &[Trajectory<F>],
        observer: &mut dyn FnMut(&TrainEvent<'_, F>) -> Control,
    ) -> Result<()> {
        let cfg = &self.setup.train;
        let n = self.metrics.len() as u64;
        let m = learner_step(batch, &mut self.params, &mut self.adam, cfg, n, self.frames)?;
        self.frames = m.frames;
        if let Some(sink) = &mut self.sink {
            writeln!(sink.metrics, "{}", m.csv_row())?;
        }
        if observer(&TrainEvent::Step(&m)) == Control::Stop {
            self.stopped = true;
        }
        self.metrics.push(m);
        if cfg.eval_every > 0 && self.frames - self.last_eval >= cfg.eval_every {
            self.eval(observer)?;
        }
        Ok(())
    }

    fn eval(&mut self, observer: &mut dyn FnMut(&TrainEvent<'_, F>) -> Control) -> Result<()> {
        let cfg = &self.setup.train;
        self.last_eval = self.frames;
        let seed = cfg.seed.wrapping_add(self.evals.len() as u64);
        let run = evaluate(&self.params, &self.setup.env, &cfg.eval, seed, "learner")?;
        let summary = run.summary(self.metrics.len() as u64, self.frames, self.params.version);
        info!(
            "frames {} version {} eval reward rate {:.3} over {} trials",
            self.frames, summary.version, summary.reward_rate, summary.trials
        );
        if let Some(sink) = &mut self.sink {
            writeln!(sink.evals, "{}", summary.csv_row())?;
            sink.metrics.flush()?;
            sink.evals.flush()?;
        }
        self.checkpoint(&format!("checkpoints/checkpoint_{:010}.json", self.frames))?;
        let ctl = observer(&TrainEvent::Eval {
            summary: &summary,
            run: &run,
            params: &self.params,
        });
        self.evals.push(summary);
        if ctl == Control::Stop {
            self.stopped = true;
        }
        Ok(())
    }

    fn finish(mut self, observer: &mut dyn FnMut(&TrainEvent<'_, F>) -> Control) -> Result<TrainOutcome<F>> {
        if self.setup.train.eval_every > 0 && !self.metrics.is_empty() && self.last_eval != self.frames {
            self.eval(observer)?;
        }
        self.checkpoint(FINAL_CHECKPOINT)?;
        if let Some(sink) = &mut self.sink {
            sink.metrics.flush()?;
            sink.evals.flush()?;
        }
        Ok(TrainOutcome {
            stopped_early: self.stopped,
            params: self.params,
            adam: self.adam,
            metrics: self.metrics,
            evals: self.evals,
            frames: self.frames,
        })
    }
}

/// Trains from freshly initialised parameters.
pub fn train<F: Scalar>(
    setup: &TrainSetup,
    out_dir: Option<&Path>,
    observer: &mut dyn FnMut(&TrainEvent<'_, F>) -> Control,
) -> Result<TrainOutcome<F>> {
    setup.validate()?;
    let params: AgentParams<F> = init_params(&setup.network, setup.train.seed);
    let adam = AdamState::new(&params);
    train_from(setup, params, adam, out_dir, observer)
}

/// Trains from the given parameters and optimizer state. On failure a
/// partial checkpoint is written before the error is returned.
pub fn train_from<F: Scalar>(
    setup: &TrainSetup,
    params: AgentParams<F>,
    adam: AdamState<F>,
    out_dir: Option<&Path>,
    observer: &mut dyn FnMut(&TrainEvent<'_, F>) -> Control,
) -> Result<TrainOutcome<F>> {
    setup.validate()?;
    if params.spec != setup.network {
        return Err(usage_err("parameters do not match the configured network"));
    }
    let sink = out_dir.map(Sink::open).transpose()?;
    let mut learner = Learner {
        setup,
        params,
        adam,
        metrics: Vec::new(),
        evals: Vec::new(),
        frames: 0,
        last_eval: 0,
        sink,
        stopped: false,
    };
    let result = match setup.train.mode {
        ExecutionMode::Deterministic => run_deterministic(&mut learner, observer),
        ExecutionMode::Threaded => run_threaded(&mut learner, observer),
    };
    if let Err(e) = result {
        warn!("training failed at frame {}: {e}", learner.frames);
        if let Err(ck) = learner.checkpoint(PARTIAL_CHECKPOINT) {
            warn!("could not write partial checkpoint: {ck}");
        }
        if let Some(sink) = &mut learner.sink {
            sink.metrics.flush().ok();
            sink.evals.flush().ok();
        }
        return Err(e);
    }
    learner.finish(observer)
}

fn make_actors<F: Scalar>(setup: &TrainSetup, params: &AgentParams<F>) -> Result<Vec<Actor<F>>> {
    (0..setup.train.num_actors)
        .map(|i| Actor::new(i, setup.env.clone(), params.initial_hidden(), setup.train.seed))
        .collect()
}

/// Actors take turns in a fixed rotation; each round runs the scheduled
/// actors in parallel since they share nothing.
fn run_deterministic<F: Scalar>(
    learner: &mut Learner<'_, F>,
    observer: &mut dyn FnMut(&TrainEvent<'_, F>) -> Control,
) -> Result<()> {
    let cfg = learner.setup.train.clone();
    let mut actors = make_actors(learner.setup, &learner.params)?;
    let n_actors = actors.len();
    let mut cursor = 0usize;
    while learner.budget_left() {
        let mut batch = Vec::with_capacity(cfg.batch_size);
        while batch.len() < cfg.batch_size {
            let take = (cfg.batch_size - batch.len()).min(n_actors);
            let order: Vec<usize> = (0..take).map(|k| (cursor + k) % n_actors).collect();
            cursor = (cursor + take) % n_actors;
            let params = &learner.params;
            let mut collected: Vec<Option<Result<Trajectory<F>>>> = par::map_mut(&mut actors, |a| {
                order.contains(&a.id).then(|| a.collect(params, cfg.unroll_length))
            });
            for &i in &order {
                batch.push(collected[i].take().expect("scheduled actor")?);
            }
        }
        learner.step(&batch, observer)?;
    }
    Ok(())
}

fn run_threaded<F: Scalar>(
    learner: &mut Learner<'_, F>,
    observer: &mut dyn FnMut(&TrainEvent<'_, F>) -> Control,
) -> Result<()> {
    let cfg = learner.setup.train.clone();
    let actors = make_actors(learner.setup, &learner.params)?;
    let snapshot = RwLock::new(Arc::new(learner.params.clone()));
    let stop = AtomicBool::new(false);
    let (tx, rx) = bounded::<Result<Trajectory<F>>>(cfg.queue_capacity());
    std::thread::scope(|scope| {
        for mut actor in actors {
            let tx = tx.clone();
            let (snapshot, stop) = (&snapshot, &stop);
            let t = cfg.unroll_length;
            scope.spawn(move || {
                while !stop.load(Ordering::Acquire) {
                    let params = snapshot.read().expect("snapshot lock").clone();
                    let res = actor.collect(&params, t);
                    let failed = res.is_err();
                    if tx.send(res).is_err() || failed {
                        break;
                    }
                }
            });
        }
        drop(tx);
        let result = (|| {
            while learner.budget_left() {
                let mut batch = Vec::with_capacity(cfg.batch_size);
                while batch.len() < cfg.batch_size {
                    let traj = rx.recv().map_err(|_| usage_err("all actors stopped"))??;
                    batch.push(traj);
                }
                learner.step(&batch, observer)?;
                *snapshot.write().expect("snapshot lock") = Arc::new(learner.params.clone());
            }
            Ok(())
        })();
        stop.store(true, Ordering::Release);
        drop(rx);
        result
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::ObsMode;
    use crate::nn::{ControllerKind, ControllerSpec};
    use crate::train::EvalConfig;

    fn setup(mode: ExecutionMode, frames: u64) -> TrainSetup {
        TrainSetup {
            env: EnvConfig {
                sample_intervals: vec![5, 10],
                ..EnvConfig::default()
            },
            network: NetworkSpec::new(ControllerSpec::new(ControllerKind::Lstm, 8), ObsMode::Symbolic),
            train: TrainConfig {
                num_actors: 2,
                unroll_length: 10,
                batch_size: 4,
                total_env_frames: frames,
                eval_every: 80,
                eval: EvalConfig {
                    trials: 3,
                    max_frames: 400,
                    ..EvalConfig::default()
                },
                mode,
                ..TrainConfig::default()
            },
        }
    }

    #[test]
    fn deterministic_runs_repeat() {
        let s = setup(ExecutionMode::Deterministic, 200);
        let a = train::<f32>(&s, None, &mut |_| Control::Continue).unwrap();
        let b = train::<f32>(&s, None, &mut |_| Control::Continue).unwrap();
        assert_eq!(a.metrics, b.metrics);
        assert_eq!(a.params, b.params);
        assert_eq!(a.frames, 200);
        assert_eq!(a.metrics.len(), 5);
        assert!(a.metrics.iter().all(|m| m.policy_lag == 0.0));
        assert_eq!(a.evals.len(), 3);
    }

    #[test]
    fn zero_budget_writes_initial_checkpoint_only() {
        let s = setup(ExecutionMode::Deterministic, 0);
        let dir = std::env::temp_dir().join(format!("train-zero-{}", std::process::id()));
        let out = train::<f32>(&s, Some(&dir), &mut |_| Control::Continue).unwrap();
        assert!(out.metrics.is_empty() && out.evals.is_empty());
        let ck: Checkpoint<f32> = Checkpoint::load(&dir.join(FINAL_CHECKPOINT)).unwrap();
        assert_eq!(ck.params().unwrap(), init_params(&s.network, s.train.seed));
        let csv = fs::read_to_string(dir.join(METRICS_FILE)).unwrap();
        assert_eq!(csv.trim(), METRICS_CSV_HEADER);
        assert_eq!(fs::read_dir(dir.join("checkpoints")).unwrap().count(), 0);
        fs::remove_dir_all(dir).ok();
    }

    #[test]
    fn threaded_run_consumes_budget() {
        let s = setup(ExecutionMode::Threaded, 160);
        let out = train::<f32>(&s, None, &mut |_| Control::Continue).unwrap();
        assert_eq!(out.frames, 160);
        for (i, m) in out.metrics.iter().enumerate() {
            assert!(m.policy_lag >= 0.0);
            assert_eq!(m.frames, 40 * (i as u64 + 1));
            assert_eq!(m.version, i as u64 + 1);
        }
    }

    #[test]
    fn observer_can_stop() {
        let s = setup(ExecutionMode::Deterministic, 10_000);
        let out = train::<f32>(&s, None, &mut |e| match e {
            TrainEvent::Step(m) if m.step >= 2 => Control::Stop,
            _ => Control::Continue,
        })
        .unwrap();
        assert!(out.stopped_early);
        assert_eq!(out.metrics.len(), 3);
    }
}
