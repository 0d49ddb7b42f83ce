//! Aggregate multirotor downwash: synthetic ground-truth fields for
//! formations flying over a fixed "sufferer" vehicle, three aggregation
//! models (naive grid summation, learnt linear summation, Deep Sets) and the
//! metrics used to compare them.
//!
//! Everything is expressed in the NED frame; a neighbour above the sufferer
//! has a negative relative D.

pub mod dataset;
pub mod error;
pub mod eval;
pub mod field;
pub mod formations;
pub mod frame;
pub mod models;
pub mod nn;
pub mod oracle;
pub mod predictor;
pub mod seed;

pub use error::{Error, Result};
pub use frame::{relative_state, FormationSnapshot, RelativeState, Vec3, VehicleState, Wrench6};
pub use predictor::{WrenchModel, ZeroModel};
