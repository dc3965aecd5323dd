//! Multi-relational graph embeddings from scratch.
//!
//! * [`kg`] loads triple files and builds the augmented message-passing graph.
//! * [`numerics`] holds the dense kernels, parameter store, Adam and gradient checking.
//! * [`encoder`] implements CompGCN layers and their reductions.
//! * [`decoders`] implements TransE, DistMult, HolE, ConvE and InteractE scoring.
//! * [`interaction`] counts feature interactions of reshaped embeddings exactly.
//! * [`model`] pairs an optional encoder with a decoder.
//! * [`train`] and [`eval`] run 1-vs-all training and filtered ranking.
//! * [`synthetic`] builds small seeded graphs.
//! * [`checks`] bundles the gradient and interaction self-checks.

pub mod checks;
pub mod decoders;
pub mod encoder;
pub mod error;
pub mod eval;
pub mod interaction;
pub mod kg;
pub mod model;
pub mod numerics;
pub mod synthetic;
pub mod train;

pub use error::{KgeError, Result};
