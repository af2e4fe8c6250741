//! Score functions, the negative-sampling softmax loss, Adagrad and
//! parameter initialization.

mod adagrad;
mod init;
mod loss;
mod negatives;
mod score;

pub use adagrad::{adagrad_delta, adagrad_step, apply_delta, GradientDelta, ParameterSlice};
pub use init::{init_bound, init_uniform};
pub use loss::{loss_and_grad, BatchGrad, BatchInput, LocalEdge};
pub use negatives::{sample_negatives, NegativePool, NegativeSampleSpec};
pub use score::{score, ModelKind};
