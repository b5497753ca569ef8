//! Localized boundary laws, tree-indexed Markov-chain Gibbs measures, and
//! delocalized gradient measures for gradient models on d-regular trees.

pub mod check;
pub mod cli;
pub mod config;
pub mod constants;
pub mod error;
pub mod gibbs;
pub mod gradient;
pub mod potentials;
pub mod seqspace;
pub mod solver;
pub mod verify;
pub mod zeta;

pub use error::{Error, Result};
