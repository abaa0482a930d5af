//! Minimal dense numerical core: matrices, tanh MLPs with reverse-mode
//! gradients, Adam, distribution math and running moments. Everything is
//! `f64`.

mod adam;
mod dist;
mod gradcheck;
mod matrix;
mod mlp;
mod moments;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use dist::{
    argmax, categorical_entropy, gaussian_logprob_entropy, log_softmax, sample_categorical, sample_gaussian,
    softmax, HALF_LN_2PI,
};
pub use gradcheck::{finite_difference, max_relative_error};
pub use matrix::{affine_forward, dot, Matrix};
pub use mlp::{mlp_forward_backward, Activation, BatchTrace, Dense, MlpGrads, MlpParams, Params};
pub use moments::RunningMoments;
