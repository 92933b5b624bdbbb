//! Two-layer networks, their training step, and Barron-space constants.

pub mod activation;
pub mod barron;
pub mod sgd;
pub mod two_layer;

pub use activation::{logistic, Activation};
pub use barron::{activation_constant, path_norm, ActivationConstant};
pub use sgd::{sgd_step, Minibatch, SgdConfig};
pub use two_layer::{Loss, TwoLayerNet};
