//! Two-qubit tomography of a post-selected mode pair.
//!
//! The pair {j, k} is read as a qubit on each side with `|0⟩ = mode j` and
//! `|1⟩ = mode k`. Nine settings {z,x,y}² give every Pauli correlator; the
//! linear-inversion estimate is projected onto the physical states by
//! eigenvalue clipping.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bases::{Axis, ModeSpace};
use crate::counting::CoincidenceTable;
use crate::error::{Error, Result};
use crate::linalg::{compose, hermitian_eigen, tensor, CMatrix, DensityOperator, OutcomeModel, C64, ONE, ZERO};
use crate::observations::{CountMode, Observations};
use crate::plan::{tomo_setting_name, tomo_settings, TOMO_AXES};
use crate::source::{bisect, noisy_state, SourceConfig};

fn pauli(axis: Option<Axis>) -> CMatrix {
    let i = C64::i();
    let v = match axis {
        None => [ONE, ZERO, ZERO, ONE],
        Some(Axis::X) => [ZERO, ONE, ONE, ZERO],
        Some(Axis::Y) => [ZERO, -i, i, ZERO],
        Some(Axis::Z) => [ONE, ZERO, ZERO, -ONE],
    };
    CMatrix::from_row_slice(2, 2, &v)
}

/// Pauli correlators `T[a][b] = ⟨σ_a ⊗ σ_b⟩`, index 0 is the identity and
/// 1, 2, 3 are x, y, z.
pub type Correlators = [[f64; 4]; 4];

fn axis_index(a: Axis) -> usize {
    match a {
        Axis::X => 1,
        Axis::Y => 2,
        Axis::Z => 3,
    }
}

/// `ρ = ¼ Σ_ab T_ab σ_a ⊗ σ_b`.
pub fn linear_inversion(t: &Correlators) -> CMatrix {
    let axes = [None, Some(Axis::X), Some(Axis::Y), Some(Axis::Z)];
    let mut m = CMatrix::zeros(4, 4);
    for (a, pa) in axes.iter().enumerate() {
        for (b, pb) in axes.iter().enumerate() {
            m += tensor(&pauli(*pa), &pauli(*pb)) * C64::new(t[a][b] / 4.0, 0.0);
        }
    }
    m
}

/// Nearest unit-trace positive semidefinite matrix in Frobenius norm:
/// negative eigenvalues are zeroed and their weight is spread evenly over
/// the remaining ones.
pub fn project_to_physical(m: &CMatrix) -> Result<CMatrix> {
    let n = m.nrows();
    let trace = m.trace().re;
    if !(trace.abs() > 0.0) {
        return Err(Error::Numerical("cannot project a traceless matrix".into()));
    }
    let eig = hermitian_eigen(&(m / C64::new(trace, 0.0)));
    let (mut vals, vecs) = (eig.eigenvalues, eig.eigenvectors);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| vals[b].total_cmp(&vals[a]));
    let mut acc = 0.0;
    let mut kept = n;
    while kept > 0 {
        let v = vals[order[kept - 1]];
        if v + acc / kept as f64 >= 0.0 {
            break;
        }
        acc += v;
        vals[order[kept - 1]] = 0.0;
        kept -= 1;
    }
    for &i in &order[..kept] {
        vals[i] += acc / kept as f64;
    }
    Ok(compose(&vecs, &vals))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TomoResult {
    pub space: ModeSpace,
    pub modes: (usize, usize),
    /// Reconstructed 4×4 state, row-major real and imaginary parts.
    pub rho_re: Vec<Vec<f64>>,
    pub rho_im: Vec<Vec<f64>>,
    pub fidelity: f64,
    pub fidelity_err: Option<f64>,
    /// `arg⟨kk|ρ̂|jj⟩` in degrees, in (−180, 180].
    pub relative_phase_deg: f64,
    /// Probability of landing in the pair subspace; only known on the exact path.
    pub postselection_weight: Option<f64>,
}

impl TomoResult {
    pub fn rho(&self) -> CMatrix {
        CMatrix::from_fn(4, 4, |r, c| C64::new(self.rho_re[r][c], self.rho_im[r][c]))
    }

    pub fn density(&self) -> Result<DensityOperator> {
        DensityOperator::new(2, 2, self.rho())
    }
}

/// Correlators from the nine settings. Each setting is renormalised over its
/// four cells; single-qubit terms are averaged over the three settings that
/// contain them.
pub fn correlators(obs: &Observations, space: ModeSpace, j: usize, k: usize) -> Result<Correlators> {
    let mut t = [[0.0; 4]; 4];
    t[0][0] = 1.0;
    let sign = |o: usize| if o == 0 { 1.0 } else { -1.0 };
    obs.require_all(TOMO_AXES.iter().flat_map(|&a| TOMO_AXES.map(|b| tomo_setting_name(space, j, k, a, b))))?;
    for a in TOMO_AXES {
        for b in TOMO_AXES {
            let name = tomo_setting_name(space, j, k, a, b);
            let cells = obs.require(&name)?.dense(&name, 2, 2)?;
            let total: f64 = cells.iter().flatten().map(|c| c.value).sum();
            if !(total > 0.0) {
                return Err(Error::Numerical(format!("setting {name} has no counts")));
            }
            let (ia, ib) = (axis_index(a), axis_index(b));
            for (os, row) in cells.iter().enumerate() {
                for (oi, c) in row.iter().enumerate() {
                    let p = c.value / total;
                    t[ia][ib] += sign(os) * sign(oi) * p;
                    t[ia][0] += sign(os) * p / 3.0;
                    t[0][ib] += sign(oi) * p / 3.0;
                }
            }
        }
    }
    Ok(t)
}

fn result_from(rho: CMatrix, space: ModeSpace, j: usize, k: usize, weight: Option<f64>) -> TomoResult {
    // ⟨Φ⁺|ρ|Φ⁺⟩ with Φ⁺ = (|00⟩ + |11⟩)/√2
    let fidelity = 0.5 * (rho[(0, 0)] + rho[(0, 3)] + rho[(3, 0)] + rho[(3, 3)]).re;
    let mut phase = rho[(3, 0)].arg().to_degrees();
    if phase <= -180.0 {
        phase += 360.0;
    }
    TomoResult {
        space,
        modes: (j, k),
        rho_re: (0..4).map(|r| (0..4).map(|c| rho[(r, c)].re).collect()).collect(),
        rho_im: (0..4).map(|r| (0..4).map(|c| rho[(r, c)].im).collect()).collect(),
        fidelity,
        fidelity_err: None,
        relative_phase_deg: phase,
        postselection_weight: weight,
    }
}

pub fn reconstruct(obs: &Observations, space: ModeSpace, j: usize, k: usize) -> Result<TomoResult> {
    if j == k {
        return Err(Error::InvalidArgument(format!("tomography needs distinct modes, got ({j},{k})")));
    }
    let t = correlators(obs, space, j, k)?;
    let rho = project_to_physical(&linear_inversion(&t))?;
    Ok(result_from(rho, space, j, k, None))
}

/// Reconstruction from exact probabilities; also reports the post-selection weight.
pub fn reconstruct_exact(model: &dyn OutcomeModel, space: ModeSpace, j: usize, k: usize) -> Result<TomoResult> {
    let settings = tomo_settings(space, j, k, model.dim_signal())?;
    let obs = Observations::from_model(model, &settings)?;
    let mut r = reconstruct(&obs, space, j, k)?;
    r.postselection_weight = Some(obs.require(&settings[0].name)?.total());
    Ok(r)
}

/// Reconstruction from counts with a parametric-bootstrap fidelity error.
pub fn reconstruct_from_table(
    table: &CoincidenceTable,
    mode: CountMode,
    space: ModeSpace,
    j: usize,
    k: usize,
    resamples: usize,
    seed: u64,
) -> Result<TomoResult> {
    let mut r = reconstruct(&Observations::from_table(table, mode)?, space, j, k)?;
    if resamples >= 2 {
        let fids: Vec<f64> = (0..resamples)
            .into_par_iter()
            .filter_map(|b| {
                let t = table.poisson_resample(seed, b);
                let obs = Observations::from_table(&t, mode).ok()?;
                reconstruct(&obs, space, j, k).ok().map(|x| x.fidelity)
            })
            .collect();
        if fids.len() >= 2 {
            let mean = fids.iter().sum::<f64>() / fids.len() as f64;
            let var = fids.iter().map(|f| (f - mean).powi(2)).sum::<f64>() / (fids.len() - 1) as f64;
            r.fidelity_err = Some(var.sqrt());
        }
    }
    Ok(r)
}

/// Noise fraction at which the exact post-selected fidelity of pair
/// `(j, k)` equals `target`. The phases and weights of `cfg` are kept.
pub fn fit_noise_to_pair_fidelity(cfg: &SourceConfig, space: ModeSpace, j: usize, k: usize, target: f64) -> Result<f64> {
    let fidelity = |p: f64| -> Result<f64> {
        let c = cfg.clone().with_noise(p)?;
        Ok(reconstruct_exact(&noisy_state(&c), space, j, k)?.fidelity)
    };
    let ceiling = fidelity(0.0)?;
    if !(target > 0.25 && target <= ceiling + 1e-12) {
        return Err(Error::InvalidArgument(format!(
            "target fidelity {target} outside (0.25, {ceiling}]"
        )));
    }
    bisect(|p| fidelity(p).map(|f| f - target).unwrap_or(f64::NAN))
}
