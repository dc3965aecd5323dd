//! Dense `f64` kernels with hand-written gradients, parameter storage,
//! initialization, Adam and finite-difference gradient checking.

pub mod checkpoint;
pub mod gradcheck;
pub mod kernels;
pub mod optim;
pub mod params;
pub mod tensor;

pub use gradcheck::{grad_check, FnObjective, GradCheckReport, Objective};
pub use optim::{adam_step, AdamConfig};
pub use params::{rng_for, xavier_init, xavier_uniform, Parameter, ParameterStore, Stream};
pub use tensor::Tensor2;
