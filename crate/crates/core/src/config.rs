//! Run configuration: source, acquisition, per-experiment trial counts and
//! the calibration that ties them to the reported operating point.

use serde::{Deserialize, Serialize};

use crate::bases::ModeSpace;
use crate::counting::Acquisition;
use crate::error::{Error, Result};
use crate::source::{fit_noise_to_visibility, SourceConfig};

pub const SCHEMA_VERSION: u32 = 1;

/// Per-mode phase mismatch of the default source, degrees. The 17° step
/// sits on the tomography pair (0, 6).
pub const DEFAULT_PHASES_DEG: [f64; 10] = [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 17.0, -25.0, 30.0, -30.0];

/// Witness targets of the default calibration.
pub const RAW_WITNESS_TARGET: f64 = 111.6;
pub const SUBTRACTED_WITNESS_TARGET: f64 = 126.5;

/// Fidelity of the tomography pair the default calibration aims for.
pub const TOMOGRAPHY_FIDELITY_TARGET: f64 = 0.878;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Trials {
    pub witness: u64,
    pub bell: u64,
    pub tomography: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TomographyPair {
    pub space: ModeSpace,
    pub modes: (usize, usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub seed: u64,
    pub source: SourceConfig,
    pub acquisition: Acquisition,
    pub repetition_rate_hz: f64,
    pub trials: Trials,
    pub spaces: Vec<ModeSpace>,
    pub bell_dimensions: Vec<usize>,
    pub tomography_pairs: Vec<TomographyPair>,
    #[serde(default = "default_margin")]
    pub margin: f64,
    #[serde(default = "default_resamples")]
    pub bootstrap_resamples: usize,
}

fn default_margin() -> f64 {
    1.0
}

fn default_resamples() -> usize {
    200
}

/// Splits the operating point into state noise and accidental background.
///
/// With uniform local marginals the accidental coincidences of every pair
/// setting are flat, exactly like the white-noise part of the state. Raw
/// counts then follow a state with noise `(q + r)/(1 + r)`, where `q` is
/// the state noise and `r = P_I/η_r` the background-to-signal ratio, and
/// subtraction leaves noise `q`. Fitting `q` to the subtracted witness and
/// `(q + r)/(1 + r)` to the raw witness fixes both.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub state_noise: f64,
    pub raw_noise: f64,
    pub background_ratio: f64,
}

pub fn calibrate(source: &SourceConfig, raw_target: f64, subtracted_target: f64) -> Result<Calibration> {
    if raw_target >= subtracted_target {
        return Err(Error::InvalidArgument("raw witness target must be below the subtracted one".into()));
    }
    let settings = (3 * source.d() * (source.d() - 1) / 2) as f64;
    let q = fit_noise_to_visibility(subtracted_target / settings, source)?;
    let p = fit_noise_to_visibility(raw_target / settings, source)?;
    Ok(Calibration { state_noise: q, raw_noise: p, background_ratio: (p - q) / (1.0 - p) })
}

impl Calibration {
    /// Acquisition parameters reproducing the calibration for given `P_S`, `η_r`.
    pub fn acquisition(&self, p_s: f64, eta_r: f64) -> Result<Acquisition> {
        let p_bg = eta_r * (self.background_ratio - p_s);
        if p_bg < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "P_S = {p_s} alone exceeds the calibrated background ratio {}",
                self.background_ratio
            )));
        }
        Acquisition::new(p_s, eta_r, p_bg)
    }
}

impl RunConfig {
    /// Default operating point. The numbers are the output of
    /// [`calibrate`] with the witness targets above, `P_S = 0.006` and
    /// `η_r = 0.01`; a unit test keeps them in sync. Trial counts give
    /// σ_W ≈ 0.8 on the raw witness and σ_S ≈ 0.015 at d = 6. The same
    /// configuration ships as `configs/default.json`.
    pub fn default_calibrated() -> Self {
        let source = SourceConfig::uniform(10)
            .and_then(|s| s.with_phases_deg(&DEFAULT_PHASES_DEG))
            .and_then(|s| s.with_noise(DEFAULT_STATE_NOISE))
            .expect("default source is valid");
        RunConfig {
            schema_version: SCHEMA_VERSION,
            seed: 20200521,
            source,
            acquisition: Acquisition { p_s: 0.006, eta_r: 0.01, p_bg_idler: DEFAULT_P_BG },
            repetition_rate_hz: 16000.0,
            trials: Trials { witness: 5_000_000, bell: 200_000_000, tomography: 20_000_000 },
            spaces: vec![ModeSpace::X, ModeSpace::K],
            bell_dimensions: (2..=10).collect(),
            tomography_pairs: vec![
                TomographyPair { space: ModeSpace::X, modes: (0, 6) },
                TomographyPair { space: ModeSpace::K, modes: (0, 5) },
            ],
            margin: 1.0,
            bootstrap_resamples: 200,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::InvalidArgument(format!(
                "schema_version {} unsupported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        self.acquisition.validate()?;
        let d = self.source.d();
        if !(self.repetition_rate_hz > 0.0) {
            return Err(Error::InvalidArgument("repetition_rate_hz must be positive".into()));
        }
        if self.trials.witness == 0 || self.trials.bell == 0 || self.trials.tomography == 0 {
            return Err(Error::InvalidArgument("trials must be positive".into()));
        }
        if let Some(bad) = self.bell_dimensions.iter().find(|&&b| b < 2 || b > d) {
            return Err(Error::InvalidArgument(format!("bell_dimensions entry {bad} outside 2..={d}")));
        }
        for t in &self.tomography_pairs {
            let (j, k) = t.modes;
            if j == k || j >= d || k >= d {
                return Err(Error::InvalidArgument(format!("tomography pair ({j},{k}) invalid for D = {d}")));
            }
        }
        if !(self.margin >= 0.0) {
            return Err(Error::InvalidArgument("margin must be non-negative".into()));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

const DEFAULT_STATE_NOISE: f64 = 0.022_204_4;
const DEFAULT_P_BG: f64 = 0.006_497_0;
