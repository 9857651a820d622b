//! Simulation and certification of high-dimensional entanglement between a
//! photon and a spatially multiplexed atomic memory.
//!
//! The crate models the signal/idler state over D spatial modes, builds
//! local measurement bases in the mode (X) and Fourier (K) spaces, samples
//! coincidence counts with accidental background, and evaluates a dimension
//! witness, an entanglement-of-formation bound, CGLMP Bell expressions and
//! two-qubit tomography on the resulting data.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bases;
pub mod certify;
pub mod config;
pub mod counting;
pub mod error;
pub mod linalg;
pub mod observations;
pub mod plan;
pub mod report;
pub mod rng;
pub mod run;
pub mod source;
pub mod tomo;

pub use bases::{Axis, MeasurementBasis, ModeSpace, Side};
pub use certify::{CglmpResult, EofResult, WitnessResult};
pub use config::{RunConfig, Trials};
pub use counting::{Acquisition, CoincidenceTable, CountRecord, TableMetadata};
pub use error::{Error, Result};
pub use linalg::{DensityOperator, OutcomeModel, StateVector};
pub use observations::{CountMode, Observations};
pub use plan::Setting;
pub use report::{CertificationReport, Provenance};
pub use source::SourceConfig;
pub use tomo::TomoResult;
