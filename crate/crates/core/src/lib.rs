//! Ordinal embedding from triplet comparisons.
//!
//! Build triplet tables, reconstruct configurations by hinge-loss descent,
//! align reconstructions by similarity transforms, check the constructive
//! 1-D error bound, generate arithmetic-progression-free lower-bound
//! instances, and run convergence experiments.

pub mod bounds;
pub mod constructions;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod plot;
pub mod seeds;
pub mod solver;
pub mod triplets;

pub use error::{Error, Result};
pub use geometry::{PointConfig, Similarity};
pub use triplets::{Sign, TripletTable};
