//! V-trace value targets and actor-critic losses. Everything here runs at
//! 64-bit regardless of the training precision.

mod loss;
mod vtrace;

pub use loss::{entropy, log_softmax, rl_losses, LossBundle, LossCoefs};
pub use vtrace::{chunked_vtrace_targets, vtrace_double_sum, vtrace_targets, ChunkMode, VTraceConfig, VTraceResult};
