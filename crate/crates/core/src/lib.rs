//! Differentiable statevector simulation of variational quantum circuits whose
//! measurement observables are trainable Hermitian matrices, plus a training
//! harness for two-moons classification.

pub mod cli;
pub mod data;
pub mod engine;
pub mod error;
pub mod experiment;
pub mod gradcheck;
pub mod gradients;
pub mod io;
pub mod observable;
pub mod optim;

pub use error::{Error, Result};
