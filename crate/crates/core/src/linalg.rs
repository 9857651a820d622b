//! Dense complex linear algebra for small bipartite (signal ⊗ idler) qudit
//! systems.
//!
//! Every joint index is flattened row-major as `s * dim_idler + i`, with the
//! signal subsystem first. All other modules rely on that single convention.

use nalgebra::linalg::SymmetricEigen;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Tolerance on normalisation, Hermiticity and trace.
pub const STATE_TOL: f64 = 1e-12;
/// Eigenvalues above `-POSITIVITY_TOL` are clamped to zero; below it is an error.
pub const POSITIVITY_TOL: f64 = 1e-10;
/// Imaginary residue allowed on a probability before it is treated as a bug.
pub const IMAG_TOL: f64 = 1e-10;
/// Post-selection weights below this are reported as zero-weight.
pub const ZERO_WEIGHT: f64 = 1e-14;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);

/// Kronecker product, row-major block layout: `(a ⊗ b)[(i,k),(j,l)] = a[i,j] b[k,l]`.
pub fn tensor(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Kronecker product of two kets.
pub fn kron_vec(a: &[C64], b: &[C64]) -> Vec<C64> {
    let mut out = Vec::with_capacity(a.len() * b.len());
    for x in a {
        for y in b {
            out.push(x * y);
        }
    }
    out
}

pub fn norm_sqr(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

/// `⟨a|b⟩`, antilinear in the first argument.
pub fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Pure bipartite state.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    dim_signal: usize,
    dim_idler: usize,
    amplitudes: Vec<C64>,
}

impl StateVector {
    /// Builds a normalised ket from (possibly unnormalised) amplitudes.
    pub fn new(dim_signal: usize, dim_idler: usize, amplitudes: Vec<C64>) -> Result<Self> {
        if dim_signal == 0 || dim_idler == 0 {
            return Err(Error::InvalidArgument("subsystem dimensions must be positive".into()));
        }
        if amplitudes.len() != dim_signal * dim_idler {
            return Err(Error::DimensionMismatch(format!(
                "{} amplitudes for a {}x{} system",
                amplitudes.len(),
                dim_signal,
                dim_idler
            )));
        }
        let n = norm_sqr(&amplitudes).sqrt();
        if !n.is_finite() || n < 1e-300 {
            return Err(Error::InvalidState("ket has zero or non-finite norm".into()));
        }
        let amplitudes = amplitudes.into_iter().map(|z| z / n).collect();
        Ok(Self { dim_signal, dim_idler, amplitudes })
    }

    /// Computational basis ket `|s, i⟩`.
    pub fn basis(dim_signal: usize, dim_idler: usize, s: usize, i: usize) -> Result<Self> {
        if s >= dim_signal || i >= dim_idler {
            return Err(Error::InvalidArgument(format!("basis index ({s},{i}) out of range")));
        }
        let mut a = vec![ZERO; dim_signal * dim_idler];
        a[s * dim_idler + i] = ONE;
        Self::new(dim_signal, dim_idler, a)
    }

    pub fn product(signal: &[C64], idler: &[C64]) -> Result<Self> {
        Self::new(signal.len(), idler.len(), kron_vec(signal, idler))
    }

    pub fn dim_signal(&self) -> usize {
        self.dim_signal
    }

    pub fn dim_idler(&self) -> usize {
        self.dim_idler
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn amplitude(&self, s: usize, i: usize) -> C64 {
        self.amplitudes[s * self.dim_idler + i]
    }

    /// `⟨u ⊗ v|ψ⟩`.
    pub fn overlap(&self, u: &[C64], v: &[C64]) -> C64 {
        let mut acc = ZERO;
        for (s, us) in u.iter().enumerate() {
            let row = &self.amplitudes[s * self.dim_idler..(s + 1) * self.dim_idler];
            let partial: C64 = v.iter().zip(row).map(|(vi, a)| vi.conj() * a).sum();
            acc += us.conj() * partial;
        }
        acc
    }

    /// Multiplies every amplitude by `e^{iθ}`.
    pub fn with_global_phase(&self, theta: f64) -> Self {
        let f = C64::from_polar(1.0, theta);
        Self {
            dim_signal: self.dim_signal,
            dim_idler: self.dim_idler,
            amplitudes: self.amplitudes.iter().map(|z| z * f).collect(),
        }
    }
}

/// A normalised ket on one subsystem, tagged with an outcome label.
#[derive(Debug, Clone, PartialEq)]
pub struct Projector {
    vector: Vec<C64>,
    label: i32,
}

impl Projector {
    pub fn new(vector: Vec<C64>, label: i32) -> Result<Self> {
        let n = norm_sqr(&vector).sqrt();
        if (n - 1.0).abs() > STATE_TOL {
            return Err(Error::InvalidArgument(format!("projector vector has norm {n}")));
        }
        Ok(Self { vector, label })
    }

    /// Normalises `vector` before wrapping it.
    pub fn normalized(vector: Vec<C64>, label: i32) -> Result<Self> {
        let n = norm_sqr(&vector).sqrt();
        if !n.is_finite() || n < 1e-300 {
            return Err(Error::InvalidArgument("zero projector vector".into()));
        }
        Ok(Self { vector: vector.into_iter().map(|z| z / n).collect(), label })
    }

    pub fn vector(&self) -> &[C64] {
        &self.vector
    }

    pub fn label(&self) -> i32 {
        self.label
    }

    pub fn dim(&self) -> usize {
        self.vector.len()
    }

    pub fn matrix(&self) -> CMatrix {
        let v = CVector::from_column_slice(&self.vector);
        &v * v.adjoint()
    }
}

/// Mixed bipartite state.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityOperator {
    dim_signal: usize,
    dim_idler: usize,
    matrix: CMatrix,
}

impl DensityOperator {
    /// Validates Hermiticity, unit trace and positivity. Eigenvalues in
    /// `[-1e-10, 0)` are clamped to zero and the trace renormalised.
    pub fn new(dim_signal: usize, dim_idler: usize, matrix: CMatrix) -> Result<Self> {
        let n = dim_signal * dim_idler;
        if n == 0 {
            return Err(Error::InvalidArgument("subsystem dimensions must be positive".into()));
        }
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} matrix for a {}x{} system",
                matrix.nrows(),
                matrix.ncols(),
                dim_signal,
                dim_idler
            )));
        }
        let herm = hermiticity_defect(&matrix);
        if herm > STATE_TOL {
            return Err(Error::InvalidState(format!("not Hermitian (defect {herm:e})")));
        }
        let tr = matrix.trace();
        if (tr.re - 1.0).abs() > STATE_TOL || tr.im.abs() > STATE_TOL {
            return Err(Error::InvalidState(format!("trace is {tr}, expected 1")));
        }
        let eig = hermitian_eigen(&matrix);
        let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        if min < -POSITIVITY_TOL {
            return Err(Error::InvalidState(format!("negative eigenvalue {min:e}")));
        }
        let matrix = if min < 0.0 {
            let clipped: Vec<f64> = eig.eigenvalues.iter().map(|&l| l.max(0.0)).collect();
            let total: f64 = clipped.iter().sum();
            let scaled: Vec<f64> = clipped.iter().map(|l| l / total).collect();
            compose(&eig.eigenvectors, &scaled)
        } else {
            matrix
        };
        Ok(Self { dim_signal, dim_idler, matrix })
    }

    /// For matrices that are valid by construction (convex mixtures, compressions).
    pub(crate) fn from_matrix_unchecked(dim_signal: usize, dim_idler: usize, matrix: CMatrix) -> Self {
        debug_assert_eq!(matrix.nrows(), dim_signal * dim_idler);
        Self { dim_signal, dim_idler, matrix }
    }

    pub fn from_ket(psi: &StateVector) -> Self {
        let v = CVector::from_column_slice(psi.amplitudes());
        Self::from_matrix_unchecked(psi.dim_signal(), psi.dim_idler(), &v * v.adjoint())
    }

    pub fn maximally_mixed(dim_signal: usize, dim_idler: usize) -> Self {
        let n = dim_signal * dim_idler;
        let m = CMatrix::identity(n, n) * C64::new(1.0 / n as f64, 0.0);
        Self::from_matrix_unchecked(dim_signal, dim_idler, m)
    }

    /// Convex combination `Σ w_k ρ_k`; weights must be non-negative and sum to one.
    pub fn mixture(parts: &[(f64, &DensityOperator)]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::InvalidArgument("empty mixture".into()))?
            .1;
        let (ds, di) = (first.dim_signal, first.dim_idler);
        let total: f64 = parts.iter().map(|(w, _)| w).sum();
        if parts.iter().any(|(w, _)| *w < 0.0) || (total - 1.0).abs() > STATE_TOL {
            return Err(Error::InvalidArgument("mixture weights must be a probability vector".into()));
        }
        let mut m = CMatrix::zeros(ds * di, ds * di);
        for (w, rho) in parts {
            if rho.dim_signal != ds || rho.dim_idler != di {
                return Err(Error::DimensionMismatch("mixture components differ in shape".into()));
            }
            m += &rho.matrix * C64::new(*w, 0.0);
        }
        Ok(Self::from_matrix_unchecked(ds, di, m))
    }

    pub fn dim_signal(&self) -> usize {
        self.dim_signal
    }

    pub fn dim_idler(&self) -> usize {
        self.dim_idler
    }

    pub fn dim(&self) -> usize {
        self.dim_signal * self.dim_idler
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }

    pub fn purity(&self) -> f64 {
        (&self.matrix * &self.matrix).trace().re
    }

    /// `⟨s1, i1|ρ|s2, i2⟩`.
    pub fn element(&self, s1: usize, i1: usize, s2: usize, i2: usize) -> C64 {
        self.matrix[(s1 * self.dim_idler + i1, s2 * self.dim_idler + i2)]
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut v: Vec<f64> = hermitian_eigen(&self.matrix).eigenvalues.to_vec();
        v.sort_by(|a, b| a.total_cmp(b));
        v
    }

    pub fn hermiticity_defect(&self) -> f64 {
        hermiticity_defect(&self.matrix)
    }

    /// Reduced state of the signal subsystem.
    pub fn reduced_signal(&self) -> CMatrix {
        let (ds, di) = (self.dim_signal, self.dim_idler);
        CMatrix::from_fn(ds, ds, |a, b| (0..di).map(|i| self.element(a, i, b, i)).sum())
    }

    /// Reduced state of the idler subsystem.
    pub fn reduced_idler(&self) -> CMatrix {
        let (ds, di) = (self.dim_signal, self.dim_idler);
        CMatrix::from_fn(di, di, |a, b| (0..ds).map(|s| self.element(s, a, s, b)).sum())
    }

    /// Post-selects onto `span{|j⟩,|k⟩} ⊗ span{|j⟩,|k⟩}` in the computational basis.
    pub fn restrict_to_pair(&self, j: usize, k: usize) -> Result<Restriction> {
        if j == k {
            return Err(Error::InvalidArgument(format!("pair needs two distinct modes, got ({j},{k})")));
        }
        if j >= self.dim_signal || k >= self.dim_signal || j >= self.dim_idler || k >= self.dim_idler {
            return Err(Error::InvalidArgument(format!("mode pair ({j},{k}) out of range")));
        }
        let e = |n: usize, x: usize| {
            let mut v = vec![ZERO; n];
            v[x] = ONE;
            v
        };
        let sig = [e(self.dim_signal, j), e(self.dim_signal, k)];
        let idl = [e(self.dim_idler, j), e(self.dim_idler, k)];
        self.restrict_to_subspace(&sig, &idl)
    }

    /// Post-selects onto `span{e0,e1} ⊗ span{f0,f1}` for orthonormal local
    /// pairs. The returned 4×4 operator is expressed in the qubit frame
    /// `|0⟩ = e0 / f0`, `|1⟩ = e1 / f1`.
    pub fn restrict_to_subspace(&self, signal: &[Vec<C64>; 2], idler: &[Vec<C64>; 2]) -> Result<Restriction> {
        for v in signal {
            if v.len() != self.dim_signal {
                return Err(Error::DimensionMismatch("signal mode vector length".into()));
            }
        }
        for v in idler {
            if v.len() != self.dim_idler {
                return Err(Error::DimensionMismatch("idler mode vector length".into()));
            }
        }
        let n = self.dim();
        let mut iso = CMatrix::zeros(n, 4);
        for a in 0..2 {
            for b in 0..2 {
                let col = kron_vec(&signal[a], &idler[b]);
                for (r, z) in col.into_iter().enumerate() {
                    iso[(r, 2 * a + b)] = z;
                }
            }
        }
        let block = iso.adjoint() * &self.matrix * &iso;
        let weight = block.trace().re;
        if weight < ZERO_WEIGHT {
            return Ok(Restriction { state: None, weight: weight.max(0.0) });
        }
        let m = block * C64::new(1.0 / weight, 0.0);
        let m = (&m + m.adjoint()) * C64::new(0.5, 0.0);
        Ok(Restriction { state: Some(Self::from_matrix_unchecked(2, 2, m)), weight })
    }
}

/// Result of post-selecting onto a two-mode pair.
#[derive(Debug, Clone)]
pub struct Restriction {
    /// Renormalised 4×4 state, `None` when the weight is below [`ZERO_WEIGHT`].
    pub state: Option<DensityOperator>,
    /// Trace of the projected operator before renormalisation.
    pub weight: f64,
}

impl Restriction {
    pub fn is_zero_weight(&self) -> bool {
        self.state.is_none()
    }
}

pub fn density_from_ket(psi: &StateVector) -> DensityOperator {
    DensityOperator::from_ket(psi)
}

/// Anything that assigns joint outcome probabilities to local projectors.
pub trait OutcomeModel: Sync {
    fn dim_signal(&self) -> usize;
    fn dim_idler(&self) -> usize;

    /// `Tr[ρ (Π_s ⊗ Π_i)]`, clamped to `[0, 1]`.
    fn joint_probability(&self, signal: &Projector, idler: &Projector) -> Result<f64>;

    /// `Tr[ρ_s Π_s]`.
    fn signal_marginal(&self, signal: &Projector) -> Result<f64>;

    /// `Tr[ρ_i Π_i]`.
    fn idler_marginal(&self, idler: &Projector) -> Result<f64>;

    fn check_dims(&self, signal: &Projector, idler: &Projector) -> Result<()> {
        if signal.dim() != self.dim_signal() || idler.dim() != self.dim_idler() {
            return Err(Error::DimensionMismatch(format!(
                "projectors of dim ({}, {}) on a {}x{} system",
                signal.dim(),
                idler.dim(),
                self.dim_signal(),
                self.dim_idler()
            )));
        }
        Ok(())
    }
}

fn clamp_probability(z: C64) -> Result<f64> {
    if z.im.abs() > IMAG_TOL {
        return Err(Error::Numerical(format!("probability has imaginary part {:e}", z.im)));
    }
    Ok(z.re.clamp(0.0, 1.0))
}

fn quadratic_form(m: &CMatrix, v: &[C64]) -> C64 {
    let mut acc = ZERO;
    for (r, vr) in v.iter().enumerate() {
        if *vr == ZERO {
            continue;
        }
        let mut row = ZERO;
        for (c, vc) in v.iter().enumerate() {
            row += m[(r, c)] * vc;
        }
        acc += vr.conj() * row;
    }
    acc
}

impl OutcomeModel for DensityOperator {
    fn dim_signal(&self) -> usize {
        self.dim_signal
    }

    fn dim_idler(&self) -> usize {
        self.dim_idler
    }

    fn joint_probability(&self, signal: &Projector, idler: &Projector) -> Result<f64> {
        self.check_dims(signal, idler)?;
        let v = kron_vec(signal.vector(), idler.vector());
        clamp_probability(quadratic_form(&self.matrix, &v))
    }

    fn signal_marginal(&self, signal: &Projector) -> Result<f64> {
        if signal.dim() != self.dim_signal {
            return Err(Error::DimensionMismatch("signal projector".into()));
        }
        clamp_probability(quadratic_form(&self.reduced_signal(), signal.vector()))
    }

    fn idler_marginal(&self, idler: &Projector) -> Result<f64> {
        if idler.dim() != self.dim_idler {
            return Err(Error::DimensionMismatch("idler projector".into()));
        }
        clamp_probability(quadratic_form(&self.reduced_idler(), idler.vector()))
    }
}

impl OutcomeModel for StateVector {
    fn dim_signal(&self) -> usize {
        self.dim_signal
    }

    fn dim_idler(&self) -> usize {
        self.dim_idler
    }

    fn joint_probability(&self, signal: &Projector, idler: &Projector) -> Result<f64> {
        self.check_dims(signal, idler)?;
        Ok(self.overlap(signal.vector(), idler.vector()).norm_sqr().clamp(0.0, 1.0))
    }

    fn signal_marginal(&self, signal: &Projector) -> Result<f64> {
        if signal.dim() != self.dim_signal {
            return Err(Error::DimensionMismatch("signal projector".into()));
        }
        // Σ_i |Σ_s u_s* ψ_{s,i}|²
        let u = signal.vector();
        let p = (0..self.dim_idler)
            .map(|i| {
                (0..self.dim_signal)
                    .map(|s| u[s].conj() * self.amplitude(s, i))
                    .sum::<C64>()
                    .norm_sqr()
            })
            .sum::<f64>();
        Ok(p.clamp(0.0, 1.0))
    }

    fn idler_marginal(&self, idler: &Projector) -> Result<f64> {
        if idler.dim() != self.dim_idler {
            return Err(Error::DimensionMismatch("idler projector".into()));
        }
        let v = idler.vector();
        let p = (0..self.dim_signal)
            .map(|s| {
                (0..self.dim_idler)
                    .map(|i| v[i].conj() * self.amplitude(s, i))
                    .sum::<C64>()
                    .norm_sqr()
            })
            .sum::<f64>();
        Ok(p.clamp(0.0, 1.0))
    }
}

pub fn joint_probability(rho: &DensityOperator, signal: &Projector, idler: &Projector) -> Result<f64> {
    rho.joint_probability(signal, idler)
}

/// `⟨ψ|ρ|ψ⟩`.
pub fn fidelity_to_pure(rho: &DensityOperator, target: &StateVector) -> Result<f64> {
    if rho.dim_signal() != target.dim_signal() || rho.dim_idler() != target.dim_idler() {
        return Err(Error::DimensionMismatch("fidelity target shape differs from state".into()));
    }
    clamp_probability(quadratic_form(rho.matrix(), target.amplitudes()))
}

pub(crate) struct HermitianEigen {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: CMatrix,
}

pub(crate) fn hermitian_eigen(m: &CMatrix) -> HermitianEigen {
    let sym = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let eig = SymmetricEigen::new(sym);
    HermitianEigen {
        eigenvalues: eig.eigenvalues.iter().cloned().collect(),
        eigenvectors: eig.eigenvectors,
    }
}

/// `V diag(λ) V†`.
pub(crate) fn compose(vectors: &CMatrix, values: &[f64]) -> CMatrix {
    let n = vectors.nrows();
    let mut out = CMatrix::zeros(n, n);
    for (k, &l) in values.iter().enumerate() {
        if l == 0.0 {
            continue;
        }
        let col = vectors.column(k);
        out += (col * col.adjoint()) * C64::new(l, 0.0);
    }
    out
}

fn hermiticity_defect(m: &CMatrix) -> f64 {
    (m - m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Random states for tests, oracles and benchmarks.
pub mod random {
    use super::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    /// Haar-random unit vector.
    pub fn haar_ket<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<C64> {
        let v: Vec<C64> = (0..dim)
            .map(|_| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect();
        let n = norm_sqr(&v).sqrt();
        v.into_iter().map(|z| z / n).collect()
    }

    /// Density operator drawn from the Ginibre (Hilbert–Schmidt) ensemble.
    pub fn ginibre_density<R: Rng + ?Sized>(dim_signal: usize, dim_idler: usize, rng: &mut R) -> DensityOperator {
        let n = dim_signal * dim_idler;
        let g = CMatrix::from_fn(n, n, |_, _| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)));
        let m = &g * g.adjoint();
        let tr = m.trace().re;
        let m = m * C64::new(1.0 / tr, 0.0);
        let m = (&m + m.adjoint()) * C64::new(0.5, 0.0);
        DensityOperator::from_matrix_unchecked(dim_signal, dim_idler, m)
    }
}
