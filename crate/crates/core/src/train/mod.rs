//! Actor-learner training: actors generate unrolls under parameter
//! snapshots, a single learner applies V-trace corrected updates.

mod config;
mod driver;
mod eval;
mod learner;
mod trajectory;

pub use config::{EvalConfig, ExecutionMode, TrainConfig};
pub use driver::{
    train, train_from, Control, TrainEvent, TrainOutcome, TrainSetup, EVAL_FILE, FINAL_CHECKPOINT, METRICS_FILE,
    PARTIAL_CHECKPOINT,
};
pub use eval::{eval_env_config, evaluate, EvalRun, EvalSummary, EVAL_CSV_HEADER};
pub use learner::{learner_step, trajectory_gradient, trajectory_loss, trajectory_targets, TrajectoryTargets, StepMetrics, TrajectoryGrad, METRICS_CSV_HEADER};
pub use trajectory::{greedy_action, sample_action, stream_rng, Actor, Trajectory};
