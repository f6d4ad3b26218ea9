//! Fixed-architecture network stack with hand-written reverse mode.

mod adam;
mod agent;
mod checkpoint;
mod controller;
mod conv;
mod gradcheck;
mod linear;
mod scalar;
mod tensor;

pub use adam::{AdamConfig, AdamState};
pub use agent::{init_params, AgentParams, Embedding, NetworkSpec, ParamGroup, UnrollRecord};
pub use checkpoint::{Checkpoint, NamedTensor, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use controller::{ControllerKind, ControllerParams, ControllerSpec, HiddenState};
pub use conv::PixelEncoder;
pub use gradcheck::{relative_error, GradCheck, GradCheckReport, RELATIVE_FLOOR};
pub use linear::Linear;
pub use scalar::Scalar;
pub use tensor::Tensor;
