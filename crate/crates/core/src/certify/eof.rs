//! Lower bound on the entanglement of formation,
//! `E_F ≥ −log₂(1 − B²/2)` with
//! `B = (2/√|C|) Σ_{(j,k)∈C} (|⟨jj|ρ|kk⟩| − √(⟨jk|ρ|jk⟩⟨kj|ρ|kj⟩))`.

use serde::{Deserialize, Serialize};

use crate::bases::{Axis, ModeSpace};
use crate::certify::witness::visibility;
use crate::error::{Error, Result};
use crate::linalg::DensityOperator;
use crate::observations::Observations;
use crate::plan::{mode_pairs, witness_setting_name};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairTerm {
    pub modes: (usize, usize),
    /// `|⟨jj|ρ|kk⟩|` or its estimate.
    pub coherence: f64,
    /// `⟨jk|ρ|jk⟩`.
    pub cross_jk: f64,
    /// `⟨kj|ρ|kj⟩`.
    pub cross_kj: f64,
}

impl PairTerm {
    pub fn contribution(&self) -> f64 {
        self.coherence - (self.cross_jk * self.cross_kj).max(0.0).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub modes: usize,
    pub b: f64,
    pub e_f_lower: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EofResult {
    pub b: f64,
    pub e_f_lower: f64,
    pub pair_set: Vec<(usize, usize)>,
    pub terms: Vec<PairTerm>,
    /// Bound restricted to the pairs among modes `0..n`, for `n = 2..D`.
    pub curve: Vec<CurvePoint>,
}

/// `−log₂(1 − B²/2)`; negative `B` is clamped to 0.
pub fn eof_from_b(b: f64) -> Result<f64> {
    let b = b.max(0.0);
    let x = 1.0 - b * b / 2.0;
    if !(x > 0.0) {
        return Err(Error::Numerical(format!("B = {b} gives B²/2 >= 1")));
    }
    Ok(-x.log2())
}

fn b_value(terms: &[PairTerm], pairs: &[(usize, usize)]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::InvalidArgument("empty pair set".into()));
    }
    let mut sum = 0.0;
    for p in pairs {
        let t = terms
            .iter()
            .find(|t| t.modes == *p)
            .ok_or_else(|| Error::MissingData(format!("no term for pair {p:?}")))?;
        sum += t.contribution();
    }
    Ok(2.0 / (pairs.len() as f64).sqrt() * sum)
}

fn assemble(terms: Vec<PairTerm>, d_total: usize, pair_set: Option<&[(usize, usize)]>) -> Result<EofResult> {
    let pair_set: Vec<(usize, usize)> = match pair_set {
        Some(p) => p.iter().map(|&(j, k)| (j.min(k), j.max(k))).collect(),
        None => mode_pairs(d_total),
    };
    if let Some(bad) = pair_set.iter().find(|(j, k)| j == k || *k >= d_total) {
        return Err(Error::InvalidArgument(format!("invalid pair {bad:?} for D = {d_total}")));
    }
    let b = b_value(&terms, &pair_set)?;
    let e_f_lower = eof_from_b(b)?;
    let curve = (2..=d_total)
        .map(|n| {
            let b = b_value(&terms, &mode_pairs(n))?;
            Ok(CurvePoint { modes: n, b, e_f_lower: eof_from_b(b)? })
        })
        .collect::<Result<_>>()?;
    Ok(EofResult { b, e_f_lower, pair_set, terms, curve })
}

/// Bound from density-matrix elements.
pub fn eof_bound_from_state(rho: &DensityOperator, pair_set: Option<&[(usize, usize)]>) -> Result<EofResult> {
    let d = rho.dim_signal();
    if rho.dim_idler() != d || d < 2 {
        return Err(Error::DimensionMismatch("E_F bound needs equal dimensions >= 2".into()));
    }
    let terms = mode_pairs(d)
        .into_iter()
        .map(|(j, k)| PairTerm {
            modes: (j, k),
            coherence: rho.element(j, j, k, k).norm(),
            cross_jk: rho.element(j, k, j, k).re,
            cross_kj: rho.element(k, j, k, j).re,
        })
        .collect();
    assemble(terms, d, pair_set)
}

/// Bound from the witness settings of `space`, with `|j⟩` read as the j-th
/// mode of that space.
///
/// Populations `⟨jk|ρ|jk⟩` come from the z setting of pair {j,k}; each
/// diagonal population `⟨jj|ρ|jj⟩` is averaged over the D−1 z settings that
/// contain mode j, and all D² populations are normalised to sum to one.
/// The coherence is estimated as `w_jk (V_x + V_y) / 4`, where `w_jk` is the
/// normalised weight of the pair subspace. That estimate equals
/// `|Re⟨jj|ρ|kk⟩|` when the pair has no `|jk⟩↔|kj⟩` coherence, so a relative
/// phase between the modes lowers it.
pub fn eof_bound_from_observations(
    obs: &Observations,
    space: ModeSpace,
    d_total: usize,
    pair_set: Option<&[(usize, usize)]>,
) -> Result<EofResult> {
    if d_total < 2 {
        return Err(Error::InvalidArgument("E_F bound needs at least two modes".into()));
    }
    let pairs = mode_pairs(d_total);
    obs.require_all(pairs.iter().flat_map(|&(j, k)| Axis::ALL.map(|a| witness_setting_name(space, j, k, a))))?;
    let mut off = vec![vec![0.0; d_total]; d_total];
    let mut diag = vec![0.0; d_total];
    let mut weight = Vec::with_capacity(pairs.len());
    let mut vis = Vec::with_capacity(pairs.len());
    for &(j, k) in &pairs {
        let name = witness_setting_name(space, j, k, Axis::Z);
        let data = obs.require(&name)?;
        let t = data.dense(&name, 2, 2)?;
        let n = data.trials;
        off[j][k] = t[0][1].value / n;
        off[k][j] = t[1][0].value / n;
        diag[j] += t[0][0].value / n / (d_total - 1) as f64;
        diag[k] += t[1][1].value / n / (d_total - 1) as f64;
        weight.push(t.iter().flatten().map(|c| c.value).sum::<f64>() / n);

        let mut v = 0.0;
        for axis in [Axis::X, Axis::Y] {
            let name = witness_setting_name(space, j, k, axis);
            let t = obs.require(&name)?.dense(&name, 2, 2)?;
            v += visibility(&[[t[0][0], t[0][1]], [t[1][0], t[1][1]]]).value;
        }
        vis.push(v);
    }
    let total: f64 = diag.iter().sum::<f64>() + off.iter().flatten().sum::<f64>();
    if !(total > 0.0) {
        return Err(Error::Numerical("population estimates sum to zero".into()));
    }
    let terms = pairs
        .iter()
        .enumerate()
        .map(|(i, &(j, k))| PairTerm {
            modes: (j, k),
            coherence: weight[i] / total * vis[i] / 4.0,
            cross_jk: off[j][k] / total,
            cross_kj: off[k][j] / total,
        })
        .collect();
    assemble(terms, d_total, pair_set)
}
