//! Inference on invariant subspaces of nonsymmetric matrix estimates.

pub mod error;
pub mod matcore;
pub mod perturb;
pub mod inference;
pub mod centrality;
pub mod simlab;

pub use error::{Error, Result};
pub use matcore::{Mat, Tolerances};
