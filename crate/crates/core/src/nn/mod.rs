//! Minimal dense networks with reverse-mode gradients, and Adam.

mod adam;
mod mlp;

pub use adam::Adam;
pub use mlp::{param_count, Mlp, Trace};
