//! CGLMP Bell expression for `d` outcomes.
//!
//! With `P(S_s = I_i + m)` the probability that the signal outcome under
//! setting `s` exceeds the idler outcome under setting `i` by `m` (mod d):
//!
//! ```text
//! S_d = Σ_{l=0}^{⌊d/2⌋−1} (1 − 2l/(d−1)) [ P(S₀ = I₀ + l) − P(S₀ = I₀ − l − 1)
//!                                       + P(I₀ = S₁ + l + 1) − P(I₀ = S₁ − l)
//!                                       + P(S₁ = I₁ + l) − P(S₁ = I₁ − l − 1)
//!                                       + P(I₁ = S₀ + l) − P(I₁ = S₀ − l − 1) ]
//! ```
//!
//! Local models satisfy `S_d ≤ 2`. The expression is linear in the four
//! probability tables, so it is stored as one coefficient matrix per setting.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::OutcomeModel;
use crate::observations::Observations;
use crate::plan::{cglmp_setting_name, cglmp_settings};

/// Local-realist bound.
pub const LOCAL_BOUND: f64 = 2.0;

/// `coefficients[s][i][k][l]` multiplies `P(S_s = k, I_i = l)`.
pub type Coefficients = [[Vec<Vec<f64>>; 2]; 2];

pub fn cglmp_coefficients(d: usize) -> Result<Coefficients> {
    if d < 2 {
        return Err(Error::InvalidArgument(format!("CGLMP needs d >= 2, got {d}")));
    }
    let zero = || vec![vec![0.0; d]; d];
    let mut c: Coefficients = [[zero(), zero()], [zero(), zero()]];
    let m = |x: i64| x.rem_euclid(d as i64) as usize;
    // P(S_s = I_i + shift)
    let signal_ahead = |c: &mut Coefficients, s: usize, i: usize, shift: i64, w: f64| {
        for k in 0..d {
            c[s][i][k][m(k as i64 - shift)] += w;
        }
    };
    for l in 0..d / 2 {
        let w = 1.0 - 2.0 * l as f64 / (d as f64 - 1.0);
        let l = l as i64;
        signal_ahead(&mut c, 0, 0, l, w);
        signal_ahead(&mut c, 0, 0, -l - 1, -w);
        // P(I₀ = S₁ + m) = P(S₁ = I₀ − m)
        signal_ahead(&mut c, 1, 0, -(l + 1), w);
        signal_ahead(&mut c, 1, 0, l, -w);
        signal_ahead(&mut c, 1, 1, l, w);
        signal_ahead(&mut c, 1, 1, -l - 1, -w);
        signal_ahead(&mut c, 0, 1, -l, w);
        signal_ahead(&mut c, 0, 1, l + 1, -w);
    }
    Ok(c)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CglmpResult {
    pub d: usize,
    pub s: f64,
    pub s_err: f64,
    /// `S − S_err > 2`.
    pub violated: bool,
    /// Post-selected probability tables `P(S_s = k, I_i = l)`, indexed `[s][i][k][l]`.
    pub probabilities: [[Vec<Vec<f64>>; 2]; 2],
}

/// Evaluates `S_d` from the four settings named by [`cglmp_setting_name`].
/// Each table is renormalised over its `d²` cells.
pub fn cglmp(obs: &Observations, d: usize) -> Result<CglmpResult> {
    let coef = cglmp_coefficients(d)?;
    let zero = || vec![vec![0.0; d]; d];
    let mut probs = [[zero(), zero()], [zero(), zero()]];
    obs.require_all((0..2).flat_map(|s| (0..2).map(move |i| cglmp_setting_name(d, s, i))))?;
    let (mut s_total, mut var) = (0.0, 0.0);
    for s in 0..2 {
        for i in 0..2 {
            let name = cglmp_setting_name(d, s, i);
            let t = obs.require(&name)?.dense(&name, d, d)?;
            let total: f64 = t.iter().flatten().map(|c| c.value).sum();
            if !(total > 0.0) {
                return Err(Error::Numerical(format!("setting {name} has non-positive total {total}")));
            }
            let c = &coef[s][i];
            let part: f64 = (0..d).flat_map(|k| (0..d).map(move |l| (k, l))).map(|(k, l)| c[k][l] * t[k][l].value).sum::<f64>() / total;
            s_total += part;
            for k in 0..d {
                for l in 0..d {
                    probs[s][i][k][l] = t[k][l].value / total;
                    let g = (c[k][l] - part) / total;
                    var += g * g * t[k][l].variance;
                }
            }
        }
    }
    let s_err = var.sqrt();
    Ok(CglmpResult { d, s: s_total, s_err, violated: s_total - s_err > LOCAL_BOUND, probabilities: probs })
}

/// `S_d` on exact probabilities, using modes `0..d` of the model.
pub fn cglmp_exact(model: &dyn OutcomeModel, d: usize) -> Result<CglmpResult> {
    let settings = cglmp_settings(d, model.dim_signal())?;
    cglmp(&Observations::from_model(model, &settings)?, d)
}
