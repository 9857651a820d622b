//! Machine-readable certification report.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bases::ModeSpace;
use crate::certify::eof::CurvePoint;
use crate::certify::witness::PairVisibility;
use crate::certify::{eof_bound_from_observations, witness};
use crate::config::SCHEMA_VERSION;
use crate::error::Result;
use crate::observations::{ObservationKind, Observations};
use crate::run::{available_bell_dimensions, violation_curve, CurveEntry};

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Provenance {
    pub input_sha256: Option<String>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundEntry {
    pub d: usize,
    pub f: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificationReport {
    pub schema_version: u32,
    pub space: ModeSpace,
    pub counts: ObservationKind,
    #[serde(rename = "D")]
    pub d_total: usize,
    #[serde(rename = "W")]
    pub w: f64,
    #[serde(rename = "W_err")]
    pub w_err: f64,
    pub margin: f64,
    pub f_table: Vec<BoundEntry>,
    pub certified_dimension: usize,
    pub pair_visibilities: Vec<PairVisibility>,
    pub zero_weight_pairs: Vec<(usize, usize)>,
    /// `null` when the bound could not be evaluated.
    #[serde(rename = "B")]
    pub b: Option<f64>,
    #[serde(rename = "E_F_lower")]
    pub e_f_lower: Option<f64>,
    pub eof_curve: Vec<CurvePoint>,
    /// CGLMP values for every dimension whose settings are present.
    pub cglmp: Vec<CurveEntry>,
    pub provenance: Provenance,
}

/// Witness, E_F bound and any available CGLMP values for one mode space.
pub fn certification_report(
    obs: &Observations,
    space: ModeSpace,
    d_total: usize,
    margin: f64,
    provenance: Provenance,
) -> Result<CertificationReport> {
    let w = witness(obs, space, d_total, margin)?;
    let eof = eof_bound_from_observations(obs, space, d_total, None).ok();
    let cglmp = violation_curve(obs, &available_bell_dimensions(obs, d_total))?;
    Ok(CertificationReport {
        schema_version: SCHEMA_VERSION,
        space,
        counts: obs.kind(),
        d_total,
        w: w.w,
        w_err: w.w_err,
        margin,
        f_table: w.bounds.iter().enumerate().map(|(i, &f)| BoundEntry { d: i + 1, f }).collect(),
        certified_dimension: w.certified_dimension,
        pair_visibilities: w.pairs,
        zero_weight_pairs: w.zero_weight_pairs,
        b: eof.as_ref().map(|e| e.b),
        e_f_lower: eof.as_ref().map(|e| e.e_f_lower),
        eof_curve: eof.map(|e| e.curve).unwrap_or_default(),
        cglmp,
        provenance,
    })
}
