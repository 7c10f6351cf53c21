//! From-scratch dense, convolutional, and recurrent networks with exact
//! backpropagation, plus SGD/Adam training.

mod arch;
mod network;
mod optimizer;
pub mod rnn;
pub mod stack;
mod train;

pub use arch::{Activation, ArchSpec, CnnFields, Family, OutputHead};
pub use network::{Loss, Network};
pub use optimizer::{OptimizerKind, OptimizerState, ADAM_BETA1, ADAM_BETA2, ADAM_EPS};
pub use train::{train, TrainConfig};
