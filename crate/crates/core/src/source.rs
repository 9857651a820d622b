//! Photon-memory source model: the ideal multimode state
//! `Σ_i C_i e^{iφ_i} |i⟩_s |i⟩_i` and its white-noise mixture.

use serde::{Deserialize, Serialize};

use crate::bases::{pair_basis, Axis, ModeSpace, Side, MAX_MODES};
use crate::error::{Error, Result};
use crate::linalg::{DensityOperator, OutcomeModel, StateVector, C64, STATE_TOL, ZERO};

/// Source parameters. The JSON form uses the keys `D`, `coefficients_re`,
/// `coefficients_im`, `phases_deg` and `noise_fraction`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SourceJson", into = "SourceJson")]
pub struct SourceConfig {
    d: usize,
    coefficients: Vec<C64>,
    /// Phase mismatch per mode, radians.
    phases: Vec<f64>,
    noise_fraction: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SourceJson {
    #[serde(rename = "D")]
    d: usize,
    coefficients_re: Vec<f64>,
    #[serde(default)]
    coefficients_im: Option<Vec<f64>>,
    #[serde(default)]
    phases_deg: Option<Vec<f64>>,
    #[serde(default)]
    noise_fraction: f64,
}

impl TryFrom<SourceJson> for SourceConfig {
    type Error = Error;

    fn try_from(j: SourceJson) -> Result<Self> {
        let im = j.coefficients_im.unwrap_or_else(|| vec![0.0; j.coefficients_re.len()]);
        if im.len() != j.coefficients_re.len() {
            return Err(Error::DimensionMismatch("coefficients_re and coefficients_im differ in length".into()));
        }
        let coefficients = j.coefficients_re.iter().zip(&im).map(|(&re, &im)| C64::new(re, im)).collect();
        let phases_deg = j.phases_deg.unwrap_or_else(|| vec![0.0; j.d]);
        SourceConfig::new(j.d, coefficients, phases_deg.iter().map(|p| p.to_radians()).collect(), j.noise_fraction)
    }
}

impl From<SourceConfig> for SourceJson {
    fn from(c: SourceConfig) -> Self {
        SourceJson {
            d: c.d,
            coefficients_re: c.coefficients.iter().map(|z| z.re).collect(),
            coefficients_im: Some(c.coefficients.iter().map(|z| z.im).collect()),
            phases_deg: Some(c.phases.iter().map(|p| p.to_degrees()).collect()),
            noise_fraction: c.noise_fraction,
        }
    }
}

impl SourceConfig {
    /// Strict constructor: `Σ|C_i|² = 1` must already hold.
    pub fn new(d: usize, coefficients: Vec<C64>, phases: Vec<f64>, noise_fraction: f64) -> Result<Self> {
        if d == 0 || d > MAX_MODES {
            return Err(Error::InvalidArgument(format!("D = {d} outside 1..={MAX_MODES}")));
        }
        if coefficients.len() != d || phases.len() != d {
            return Err(Error::DimensionMismatch(format!(
                "D = {d} but {} coefficients and {} phases",
                coefficients.len(),
                phases.len()
            )));
        }
        if coefficients.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) || phases.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidArgument("non-finite coefficient or phase".into()));
        }
        let norm: f64 = coefficients.iter().map(|c| c.norm_sqr()).sum();
        if (norm - 1.0).abs() > STATE_TOL {
            return Err(Error::InvalidArgument(format!("Σ|C_i|² = {norm}, expected 1")));
        }
        if !(0.0..=1.0).contains(&noise_fraction) {
            return Err(Error::InvalidArgument(format!("noise_fraction {noise_fraction} outside [0, 1]")));
        }
        Ok(Self { d, coefficients, phases, noise_fraction })
    }

    /// Equal-weight source with no phase mismatch and no noise.
    pub fn uniform(d: usize) -> Result<Self> {
        let c = C64::new(1.0 / (d.max(1) as f64).sqrt(), 0.0);
        Self::new(d, vec![c; d], vec![0.0; d], 0.0)
    }

    /// Rescales arbitrary non-zero weights to unit norm.
    pub fn with_weights(mut self, weights: &[C64]) -> Result<Self> {
        let norm: f64 = weights.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0) {
            return Err(Error::InvalidArgument("all coefficients are zero".into()));
        }
        self.coefficients = weights.iter().map(|c| c / norm).collect();
        Self::new(self.d, self.coefficients, self.phases, self.noise_fraction)
    }

    pub fn with_phases_deg(self, phases_deg: &[f64]) -> Result<Self> {
        let phases = phases_deg.iter().map(|p| p.to_radians()).collect();
        Self::new(self.d, self.coefficients, phases, self.noise_fraction)
    }

    pub fn with_noise(self, noise_fraction: f64) -> Result<Self> {
        Self::new(self.d, self.coefficients, self.phases, noise_fraction)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn coefficients(&self) -> &[C64] {
        &self.coefficients
    }

    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    pub fn phases_deg(&self) -> Vec<f64> {
        self.phases.iter().map(|p| p.to_degrees()).collect()
    }

    pub fn noise_fraction(&self) -> f64 {
        self.noise_fraction
    }

    /// Number of modes with non-zero amplitude.
    pub fn schmidt_rank(&self) -> usize {
        self.coefficients.iter().filter(|c| c.norm_sqr() > STATE_TOL).count()
    }
}

pub fn ideal_state(cfg: &SourceConfig) -> StateVector {
    let d = cfg.d;
    let mut amps = vec![ZERO; d * d];
    for (i, (c, phi)) in cfg.coefficients.iter().zip(&cfg.phases).enumerate() {
        amps[i * d + i] = c * C64::from_polar(1.0, *phi);
    }
    StateVector::new(d, d, amps).expect("validated coefficients are normalised")
}

/// `(1-p)|Ψ⟩⟨Ψ| + p·I/D²`.
pub fn noisy_state(cfg: &SourceConfig) -> DensityOperator {
    let pure = DensityOperator::from_ket(&ideal_state(cfg));
    let p = cfg.noise_fraction;
    if p == 0.0 {
        return pure;
    }
    let mixed = DensityOperator::maximally_mixed(cfg.d, cfg.d);
    DensityOperator::mixture(&[(1.0 - p, &pure), (p, &mixed)]).expect("convex mixture of valid states")
}

/// Signed numerator and total of one two-outcome correlation on the pure state.
#[derive(Debug, Clone, Copy)]
struct Correlator {
    signed: f64,
    total: f64,
}

fn pure_correlators(psi: &StateVector, space: ModeSpace) -> Result<Vec<Correlator>> {
    let d = psi.dim_signal();
    let mut out = Vec::with_capacity(3 * d * (d - 1) / 2);
    for j in 0..d {
        for k in j + 1..d {
            for axis in Axis::ALL {
                let bs = pair_basis(space, Side::Signal, j, k, axis, d)?;
                let bi = pair_basis(space, Side::Idler, j, k, axis, d)?;
                let mut c = Correlator { signed: 0.0, total: 0.0 };
                for ps in bs.vectors() {
                    for pi in bi.vectors() {
                        let p = psi.joint_probability(ps, pi)?;
                        c.signed += (ps.label() * pi.label()) as f64 * p;
                        c.total += p;
                    }
                }
                out.push(c);
            }
        }
    }
    Ok(out)
}

/// White noise contributes `1/D²` to each of the four cells of every pair
/// setting and nothing to the signed sum, so `V(p) = (1-p)|A| / ((1-p)T + 4p/D²)`.
fn mean_visibility(corr: &[Correlator], d: usize, p: f64) -> f64 {
    let white = 4.0 / (d * d) as f64;
    let sum: f64 = corr
        .iter()
        .map(|c| {
            let total = (1.0 - p) * c.total + p * white;
            if total > 0.0 {
                (1.0 - p) * c.signed.abs() / total
            } else {
                0.0
            }
        })
        .sum();
    sum / corr.len() as f64
}

/// Mean two-mode visibility of the mixed state (the witness divided by
/// the number of pair settings).
pub fn mean_pair_visibility(cfg: &SourceConfig, space: ModeSpace) -> Result<f64> {
    if cfg.d < 2 {
        return Err(Error::InvalidArgument("visibility needs at least two modes".into()));
    }
    let corr = pure_correlators(&ideal_state(cfg), space)?;
    Ok(mean_visibility(&corr, cfg.d, cfg.noise_fraction))
}

/// Noise fraction at which the mean X-space pair visibility equals `target`.
/// Any existing noise in `cfg` is ignored.
pub fn fit_noise_to_visibility(target: f64, cfg: &SourceConfig) -> Result<f64> {
    fit_noise_in_space(target, cfg, ModeSpace::X)
}

pub fn fit_noise_in_space(target: f64, cfg: &SourceConfig, space: ModeSpace) -> Result<f64> {
    if cfg.d < 2 {
        return Err(Error::InvalidArgument("visibility needs at least two modes".into()));
    }
    let corr = pure_correlators(&ideal_state(cfg), space)?;
    let ceiling = mean_visibility(&corr, cfg.d, 0.0);
    if !(target > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "target visibility {target} is at or below the fully mixed value 0"
        )));
    }
    if target > ceiling + 1e-12 {
        return Err(Error::InvalidArgument(format!(
            "target visibility {target} exceeds the noiseless value {ceiling}"
        )));
    }
    bisect(|p| mean_visibility(&corr, cfg.d, p) - target)
}

/// Root of a decreasing function on `[0, 1]`.
pub(crate) fn bisect(f: impl Fn(f64) -> f64) -> Result<f64> {
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    if f(lo) < 0.0 {
        return Ok(0.0);
    }
    if f(hi) > 0.0 {
        return Err(Error::Numerical("no root in [0, 1]".into()));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Phase `arg(C_k e^{iφ_k}) - arg(C_j e^{iφ_j})` in degrees, wrapped to (−180, 180].
pub fn relative_phase_deg(cfg: &SourceConfig, j: usize, k: usize) -> f64 {
    let a = cfg.coefficients[j] * C64::from_polar(1.0, cfg.phases[j]);
    let b = cfg.coefficients[k] * C64::from_polar(1.0, cfg.phases[k]);
    let mut x = (b.arg() - a.arg()).to_degrees();
    while x <= -180.0 {
        x += 360.0;
    }
    while x > 180.0 {
        x -= 360.0;
    }
    x
}
