//! Neuro-encoded expression programming for symbolic regression.

pub mod bench;
pub mod cli;
pub mod config;
pub mod encoder;
pub mod error;
pub mod experiment;
pub mod expr;
pub mod gep;
pub mod kexpr;
pub mod optim;
pub mod seed;
pub mod stats;

pub use error::{Error, Result};
