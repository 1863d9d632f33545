//! File formats, external services and the command-line driver around
//! `spanprobe-core`.

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod dataset;
pub mod error;
pub mod extract;
pub mod fsio;
pub mod htrc;
pub mod judge_http;
pub mod manifest;
pub mod pipeline;
pub mod render;
pub mod scores;

pub use error::{Error, Result};
