//! Core algorithms for token-level hallucination probes.
//!
//! Everything in this crate is pure computation over in-memory values and
//! builds without `std` (only `alloc` is required). File formats, the judge
//! transport and the command line live in the `spanprobe` crate.
//!
//! Module map:
//!
//! - [`corpus`]: labeled samples, byte tokenizer, span alignment, token targets
//! - [`trace`]: per-token activation records exported from a model
//! - [`refmodel`]: a small decoder-only transformer with LoRA adapters and
//!   exact gradients
//! - [`probe`]: the value head, the composite objective and the training loop
//! - [`baselines`]: token entropy, perplexity and semantic entropy
//! - [`evalproto`]: span scoring protocols, ROC/AUC, recall at FPR,
//!   selective answering curves
//! - [`annotate`]: judge prompt/response contract, the exact-match safeguard
//!   and the synthetic error injection harness
//! - [`guard`]: streaming abstention monitor

#![no_std]
#![allow(clippy::needless_range_loop)]

extern crate alloc;

pub mod annotate;
pub mod baselines;
pub mod corpus;
pub mod error;
pub mod evalproto;
pub mod guard;
pub mod math;
pub mod probe;
pub mod refmodel;
pub mod seed;
pub mod tensor;
pub mod trace;

pub use error::{Error, Result};
