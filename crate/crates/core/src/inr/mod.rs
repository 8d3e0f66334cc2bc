//! Sine-activated coordinate networks and their training.
//!
//! The first hidden layer computes `sin(omega0 * (W x + b))`, later hidden
//! layers `sin(W h + b)`, and the output layer applies either a sigmoid (mask
//! network) or the identity (depth network). Gradients are exact reverse-mode
//! derivatives; training is full batch with Adam.

pub mod loss;
pub mod mlp;
pub mod optim;
pub mod train;

pub use loss::{bce_loss, mse_loss, LossKind};
pub use mlp::{sigmoid, Gradients, Mlp, MlpArchitecture, OutputActivation};
pub use optim::{adam_step, AdamConfig, AdamState, LrSchedule};
pub use train::{
    depth_grid_inputs, fit, mask_grid_inputs, train_depth_inr, train_mask_inr, NormalizationSpec,
    TrainConfig, TrainReport, TrainingSet,
};
