//! File formats, scenario configs, reports and subcommands for `isotrack`.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
mod error;
pub mod grid;
pub mod output;
pub mod report;
pub mod sweep;

pub use error::{Error, Result};
