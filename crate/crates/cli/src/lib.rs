//! Pipeline behind the `downwash` binary: dataset generation, training,
//! benchmark evaluation and plot-ready report export.

pub mod config;
mod error;
pub mod pipeline;

pub use config::RunConfig;
pub use error::CliError;
