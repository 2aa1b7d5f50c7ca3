//! Distill black-box predictors into structurally stable decision trees.
//!
//! The pipeline samples pseudo data inside nested covariate regions, labels
//! it with the teacher model, repeats greedy stump fits to measure two-level
//! split stability, and assembles a hybrid tree whose upper interpretable
//! nodes carry quantified stability and explanation indices while frontier
//! nodes hold ordinary CART subtrees for accuracy.

pub mod config;
pub mod criteria;
pub mod dataset;
pub mod dot;
pub mod error;
pub mod explanation;
pub mod induction;
pub mod kde;
pub mod schema;
pub mod stability;
pub mod stump;
pub mod teacher;
pub mod validate;

pub use error::{DdtError, Result};
