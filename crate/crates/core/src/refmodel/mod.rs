//! A small pre-norm decoder-only transformer with LoRA adapters on the
//! attention projections and hand-written backpropagation.
//!
//! Residual stream `k` is the state after `k` blocks: stream 0 is the
//! embedding sum, stream `n_layers` feeds the final norm. A probe at layer
//! `ℓ` reads stream `ℓ`, and adapters live on blocks `0..ℓ`.

mod backward;
mod config;
mod forward;
mod generate;
pub(crate) mod kl;
mod lora;
mod params;

pub use backward::{backward, AdapterGrads, Upstream};
pub use config::{default_probe_layer, ModelConfig};
pub use forward::{forward, Forward, ModelInput};
pub use generate::{generate, GenerateConfig, Generation, StepView, StopReason};
pub use kl::{kl_rows, kl_to_base, lm_loss_rows};
pub use lora::{AdapterSet, AttnMatrix, LoraAdapter, LoraConfig, LoraTarget};
pub use params::{init_model, LayerParams, ModelParams};
