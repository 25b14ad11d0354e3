//! Detection performance of MRC fusion of binary sensor decisions over a
//! Rayleigh multiple-access channel to a multi-antenna fusion center.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod deflection;
pub mod error;
pub mod experiment;
pub mod gc;
pub mod ic;
pub mod mgf;
pub mod model;
pub mod montecarlo;
pub mod table;
pub mod validation;

pub use error::{Error, Result};
pub use model::{Hypothesis, PowerMode, SensorEnsemble, SystemConfig};
