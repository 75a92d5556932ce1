#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Evaluation sweeps, result tables, rating correlation and the scene
//! annotation service.

pub mod commands;
pub mod correlate;
pub mod error;
pub mod fixture;
pub mod report;
pub mod serve;
pub mod sweep;

pub use error::CliError;
