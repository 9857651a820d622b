//! Entanglement certification from measured or exact correlations.

pub mod cglmp;
pub mod eof;
pub mod witness;

pub use cglmp::{cglmp, cglmp_exact, CglmpResult};
pub use eof::{eof_bound_from_observations, eof_bound_from_state, eof_from_b, EofResult};
pub use witness::{certified_dimension, visibility, witness, witness_bound, witness_exact, WitnessResult};
