//! Minimal differentiable compute core.

pub mod gradcheck;
pub mod graph;
pub mod loss;
pub mod optim;
pub mod tensor;

pub use gradcheck::{gradient_check, GradCheckConfig, GradCheckReport};
pub use graph::{Grads, Graph, NodeId, ParamId, ParamStore};
pub use loss::label_smoothed_xent;
pub use optim::{lr_schedule, Adam, GradAccumulator, TrainHyper};
pub use tensor::{Scalar, Tensor};
