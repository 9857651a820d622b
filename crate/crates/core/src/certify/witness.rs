//! Schmidt-number witness built from two-mode MUB visibilities.

use serde::{Deserialize, Serialize};

use crate::bases::{Axis, ModeSpace};
use crate::error::{Error, Result};
use crate::linalg::OutcomeModel;
use crate::observations::{Cell, Observations};
use crate::plan::{mode_pairs, witness_setting_name, witness_settings};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VisibilityStatus {
    Ok,
    /// Cell total was zero or negative; the visibility is reported as 0.
    ZeroWeight,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Visibility {
    pub value: f64,
    pub std_error: f64,
    pub status: VisibilityStatus,
}

/// `V = |C₊₊ + C₋₋ − C₊₋ − C₋₊| / Σ`, with first-order error propagation.
/// `cells[a][b]`: outcome 0 is the +1 eigenvector, outcome 1 the −1.
pub fn visibility(cells: &[[Cell; 2]; 2]) -> Visibility {
    let sign = |a: usize, b: usize| if a == b { 1.0 } else { -1.0 };
    let mut signed = 0.0;
    let mut total = 0.0;
    for (a, row) in cells.iter().enumerate() {
        for (b, c) in row.iter().enumerate() {
            signed += sign(a, b) * c.value;
            total += c.value;
        }
    }
    if !(total > 0.0) {
        return Visibility { value: 0.0, std_error: 0.0, status: VisibilityStatus::ZeroWeight };
    }
    let v = signed.abs() / total;
    let s = if signed < 0.0 { -1.0 } else { 1.0 };
    let mut var = 0.0;
    for (a, row) in cells.iter().enumerate() {
        for (b, c) in row.iter().enumerate() {
            let grad = (s * sign(a, b) - v) / total;
            var += grad * grad * c.variance;
        }
    }
    Visibility { value: v, std_error: var.sqrt(), status: VisibilityStatus::Ok }
}

/// Visibility from raw counts with Poisson variances.
pub fn visibility_from_counts(pp: u64, pm: u64, mp: u64, mm: u64) -> Visibility {
    let c = |x: u64| Cell { value: x as f64, variance: x as f64 };
    visibility(&[[c(pp), c(pm)], [c(mp), c(mm)]])
}

/// `f(d) = 3D(D−1)/2 − D(D−d)`; a witness value above `f(d)` certifies
/// Schmidt number at least `d + 1`.
pub fn witness_bound(d_total: usize, d: usize) -> Result<f64> {
    if d == 0 || d > d_total {
        return Err(Error::InvalidArgument(format!("bound needs 1 <= d <= D, got d = {d}, D = {d_total}")));
    }
    let (dd, d) = (d_total as i64, d as i64);
    Ok((3 * dd * (dd - 1) / 2 - dd * (dd - d)) as f64)
}

/// `1 + max{d ∈ 1..D−1 : W − margin·W_err > f(d)}`, or 1 when no bound is beaten.
pub fn certified_dimension(w: f64, w_err: f64, margin: f64, d_total: usize) -> usize {
    let lower = w - margin * w_err;
    (1..d_total)
        .rev()
        .find(|&d| lower > witness_bound(d_total, d).expect("d in range"))
        .map_or(1, |d| d + 1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairVisibility {
    pub modes: (usize, usize),
    pub x: Visibility,
    pub y: Visibility,
    pub z: Visibility,
}

impl PairVisibility {
    pub fn get(&self, axis: Axis) -> &Visibility {
        match axis {
            Axis::X => &self.x,
            Axis::Y => &self.y,
            Axis::Z => &self.z,
        }
    }

    pub fn sum(&self) -> f64 {
        self.x.value + self.y.value + self.z.value
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessResult {
    pub space: ModeSpace,
    #[serde(rename = "D")]
    pub d_total: usize,
    pub w: f64,
    pub w_err: f64,
    pub margin: f64,
    pub certified_dimension: usize,
    /// Bounds `f(1) … f(D−1)`.
    pub bounds: Vec<f64>,
    pub pairs: Vec<PairVisibility>,
    pub zero_weight_pairs: Vec<(usize, usize)>,
}

/// Witness from per-setting observations named by [`witness_setting_name`].
pub fn witness(obs: &Observations, space: ModeSpace, d_total: usize, margin: f64) -> Result<WitnessResult> {
    if d_total < 2 {
        return Err(Error::InvalidArgument("witness needs at least two modes".into()));
    }
    if !(margin >= 0.0) {
        return Err(Error::InvalidArgument(format!("margin {margin} must be non-negative")));
    }
    obs.require_all(mode_pairs(d_total).into_iter().flat_map(|(j, k)| Axis::ALL.map(|a| witness_setting_name(space, j, k, a))))?;

    let mut pairs = Vec::new();
    let mut zero = Vec::new();
    let (mut w, mut var) = (0.0, 0.0);
    for (j, k) in mode_pairs(d_total) {
        let mut v = [None; 3];
        for (slot, axis) in v.iter_mut().zip(Axis::ALL) {
            let name = witness_setting_name(space, j, k, axis);
            let t = obs.require(&name)?.dense(&name, 2, 2)?;
            let vis = visibility(&[[t[0][0], t[0][1]], [t[1][0], t[1][1]]]);
            w += vis.value;
            var += vis.std_error * vis.std_error;
            *slot = Some(vis);
        }
        let [x, y, z] = v.map(|o| o.expect("filled"));
        if [x, y, z].iter().any(|s| s.status == VisibilityStatus::ZeroWeight) {
            zero.push((j, k));
        }
        pairs.push(PairVisibility { modes: (j, k), x, y, z });
    }
    let w_err = var.sqrt();
    Ok(WitnessResult {
        space,
        d_total,
        w,
        w_err,
        margin,
        certified_dimension: certified_dimension(w, w_err, margin, d_total),
        bounds: (1..d_total).map(|d| witness_bound(d_total, d).expect("d in range")).collect(),
        pairs,
        zero_weight_pairs: zero,
    })
}

/// Witness evaluated on exact outcome probabilities.
pub fn witness_exact(model: &dyn OutcomeModel, space: ModeSpace, margin: f64) -> Result<WitnessResult> {
    let d = model.dim_signal();
    if model.dim_idler() != d {
        return Err(Error::DimensionMismatch("witness needs equal signal and idler dimensions".into()));
    }
    let obs = Observations::from_model(model, &witness_settings(space, d)?)?;
    witness(&obs, space, d, margin)
}
