//! Batch experiment harness for validation-set hyperparameter selection.
//!
//! The crate trains small networks from scratch over a finite hyperparameter
//! grid, selects the grid point with the lowest validation MSE, and compares
//! the oracle loss of the selected point against the best point in the grid.
//! Synthetic data generators expose the true conditional mean so that the
//! oracle loss is computable exactly.

pub mod datagen;
pub mod error;
pub mod experiment;
pub mod image;
pub mod metrics;
pub mod nn;
pub mod oracles;
pub mod seed;

pub use error::{Error, Result};
