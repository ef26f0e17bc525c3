//! Monomer-dimer models on finite graphs.
//!
//! Exact partition functions by enumeration and by vertex-deletion
//! recursion, Gaussian moment representations, matching-polynomial zeros,
//! the mean-field phase diagram of the imitative model on the complete
//! graph, finite-size limit laws, and quenched solvers for sparse random
//! graphs and random monomer activities.

pub mod er;
pub mod error;
pub mod fluctuations;
pub mod gaussian;
pub mod graph;
pub mod io;
pub mod logspace;
pub mod meanfield;
pub mod polynomial;
pub mod rf;
pub mod rng;

pub use error::{Error, Result};
