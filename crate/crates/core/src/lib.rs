//! Simulation and verification toolkit for multi-species interacting diffusions
//! on a periodic lattice and their coupled stochastic Burgers limit.

pub mod error;
pub mod fields;
pub mod gibbs;
pub mod harness;
pub mod lattice;
pub mod potential;
pub mod sbe;
pub mod seed;
pub mod stats;
pub mod tensor;
pub mod tensors;

pub use error::{Error, Result};
pub use potential::{PotentialKind, PotentialSpec};
pub use tensor::SymTensor;
