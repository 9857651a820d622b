//! Measurement bases used by the experiment: spatial (X), Fourier (K),
//! embedded two-mode MUB triples, CGLMP detector settings, and the RF tone
//! programs that realise a basis vector on an acousto-optic deflector.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{inner, kron_vec, CMatrix, CVector, Projector, C64, ONE, ZERO};

/// Largest number of modes the deflector hardware addresses.
pub const MAX_MODES: usize = 10;

/// Default spacing between adjacent RF tones.
pub const TONE_SPACING_MHZ: f64 = 0.8;

/// CGLMP signal offsets Θ_s.
pub const THETA: [f64; 2] = [0.0, 0.5];
/// CGLMP idler offsets Φ_i.
pub const PHI: [f64; 2] = [0.25, -0.25];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Signal,
    Idler,
}

/// Which local mode basis a two-mode subspace is drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModeSpace {
    X,
    K,
}

impl fmt::Display for ModeSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModeSpace::X => "X",
            ModeSpace::K => "K",
        })
    }
}

impl FromStr for ModeSpace {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "X" | "x" => Ok(ModeSpace::X),
            "K" | "k" => Ok(ModeSpace::K),
            other => Err(Error::InvalidArgument(format!("unknown mode space {other:?} (expected X or K)"))),
        }
    }
}

/// Pauli axis of a two-mode measurement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn letter(self) -> char {
        match self {
            Axis::X => 'x',
            Axis::Y => 'y',
            Axis::Z => 'z',
        }
    }
}

/// Ordered orthonormal projectors on one subsystem. Embedded bases may span
/// only part of the space; the remainder is the implicit "neither" outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementBasis {
    dim: usize,
    vectors: Vec<Projector>,
    side: Side,
    name: String,
}

impl MeasurementBasis {
    pub fn new(name: impl Into<String>, side: Side, vectors: Vec<Projector>) -> Result<Self> {
        let dim = vectors
            .first()
            .map(Projector::dim)
            .ok_or_else(|| Error::InvalidArgument("basis needs at least one vector".into()))?;
        if vectors.iter().any(|v| v.dim() != dim) {
            return Err(Error::DimensionMismatch("basis vectors differ in length".into()));
        }
        let basis = Self { dim, vectors, side, name: name.into() };
        let defect = basis.gram_defect();
        if defect > 1e-10 {
            return Err(Error::InvalidArgument(format!(
                "basis {} is not orthonormal (Gram defect {defect:e})",
                basis.name
            )));
        }
        Ok(basis)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn vectors(&self) -> &[Projector] {
        &self.vectors
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn with_side(mut self, side: Side) -> Self {
        self.side = side;
        self
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn gram(&self) -> CMatrix {
        let n = self.vectors.len();
        CMatrix::from_fn(n, n, |a, b| inner(self.vectors[a].vector(), self.vectors[b].vector()))
    }

    /// Largest entry of `|G - I|`.
    pub fn gram_defect(&self) -> f64 {
        let g = self.gram();
        let n = g.nrows();
        (g - CMatrix::identity(n, n)).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn is_complete(&self) -> bool {
        self.vectors.len() == self.dim
    }

    /// Projector onto the orthogonal complement (the "neither" outcome).
    pub fn complement_projector(&self) -> CMatrix {
        let mut m = CMatrix::identity(self.dim, self.dim);
        for v in &self.vectors {
            m -= v.matrix();
        }
        m
    }

    /// Embeds every vector into a larger mode space by zero-padding.
    pub fn embedded(&self, dim_total: usize) -> Result<Self> {
        if dim_total < self.dim {
            return Err(Error::InvalidArgument(format!("cannot embed dim {} into {dim_total}", self.dim)));
        }
        let vectors = self
            .vectors
            .iter()
            .map(|p| {
                let mut v = p.vector().to_vec();
                v.resize(dim_total, ZERO);
                Projector::new(v, p.label())
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { dim: dim_total, vectors, side: self.side, name: self.name.clone() })
    }

    pub fn to_json(&self) -> BasisJson {
        BasisJson {
            name: self.name.clone(),
            side: self.side,
            dim: self.dim,
            vectors: self
                .vectors
                .iter()
                .map(|p| VectorJson {
                    label: p.label(),
                    re: p.vector().iter().map(|z| z.re).collect(),
                    im: p.vector().iter().map(|z| z.im).collect(),
                })
                .collect(),
        }
    }

    pub fn from_json(json: &BasisJson) -> Result<Self> {
        let vectors = json
            .vectors
            .iter()
            .map(|v| {
                if v.re.len() != json.dim || v.im.len() != json.dim {
                    return Err(Error::DimensionMismatch(format!("vector {} of basis {}", v.label, json.name)));
                }
                let z = v.re.iter().zip(&v.im).map(|(&re, &im)| C64::new(re, im)).collect();
                Projector::new(z, v.label)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(json.name.clone(), json.side, vectors)
    }
}

/// Audit/export form of a basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisJson {
    pub name: String,
    pub side: Side,
    pub dim: usize,
    pub vectors: Vec<VectorJson>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorJson {
    pub label: i32,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

fn check_dim(d: usize) -> Result<()> {
    if d == 0 || d > MAX_MODES {
        return Err(Error::InvalidArgument(format!("dimension {d} outside 1..={MAX_MODES}")));
    }
    Ok(())
}

pub(crate) fn unit(dim: usize, k: usize) -> Vec<C64> {
    let mut v = vec![ZERO; dim];
    v[k] = ONE;
    v
}

/// `(1/√d) Σ_x exp(2πi x·f/d) |x⟩`.
fn fourier_vector(d: usize, f: f64) -> Vec<C64> {
    let norm = 1.0 / (d as f64).sqrt();
    (0..d)
        .map(|x| C64::from_polar(norm, 2.0 * PI * x as f64 * f / d as f64))
        .collect()
}

/// Spatial (computational) basis.
pub fn x_basis(d: usize) -> Result<MeasurementBasis> {
    check_dim(d)?;
    let vectors = (0..d).map(|k| Projector::new(unit(d, k), k as i32)).collect::<Result<_>>()?;
    MeasurementBasis::new(format!("X{d}"), Side::Signal, vectors)
}

/// Fourier basis `|k⟩ = (1/√d) Σ_x e^{2πixk/d}|x⟩`.
pub fn k_basis(d: usize) -> Result<MeasurementBasis> {
    check_dim(d)?;
    let vectors = (0..d)
        .map(|k| Projector::new(fourier_vector(d, k as f64), k as i32))
        .collect::<Result<_>>()?;
    MeasurementBasis::new(format!("K{d}"), Side::Signal, vectors)
}

/// Local mode vectors spanning a two-mode subspace of `space`.
///
/// K-space idler modes are the complex conjugates of the signal modes, so the
/// uniform source state is `Σ_k |k⟩_s |k̄⟩_i` and every K pair is maximally
/// correlated in the same way as an X pair.
pub fn mode_vector(space: ModeSpace, side: Side, mode: usize, dim_total: usize) -> Result<Vec<C64>> {
    check_dim(dim_total)?;
    if mode >= dim_total {
        return Err(Error::InvalidArgument(format!("mode {mode} out of range for {dim_total} modes")));
    }
    Ok(match (space, side) {
        (ModeSpace::X, _) => unit(dim_total, mode),
        (ModeSpace::K, Side::Signal) => fourier_vector(dim_total, mode as f64),
        (ModeSpace::K, Side::Idler) => fourier_vector(dim_total, -(mode as f64)),
    })
}

/// Two-outcome basis on the subspace spanned by modes `j`, `k` of `space`.
/// Outcome 0 carries label +1, outcome 1 label −1.
pub fn pair_basis(space: ModeSpace, side: Side, j: usize, k: usize, axis: Axis, dim_total: usize) -> Result<MeasurementBasis> {
    if j == k {
        return Err(Error::InvalidArgument(format!("pair basis needs distinct modes, got ({j},{k})")));
    }
    let a = mode_vector(space, side, j, dim_total)?;
    let b = mode_vector(space, side, k, dim_total)?;
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let combine = |phase: C64| -> Vec<C64> { a.iter().zip(&b).map(|(x, y)| (x + phase * y) * s).collect() };
    let (plus, minus) = match axis {
        Axis::Z => (a.clone(), b.clone()),
        Axis::X => (combine(ONE), combine(-ONE)),
        Axis::Y => (combine(C64::i()), combine(-C64::i())),
    };
    let name = format!("{space}-{j}-{k}-{}", axis.letter());
    MeasurementBasis::new(name, side, vec![Projector::new(plus, 1)?, Projector::new(minus, -1)?])
}

/// Embedded σ_x/σ_y/σ_z eigenbasis for computational modes `j`, `k`.
pub fn mub_pair_basis(j: usize, k: usize, axis: Axis, dim_total: usize) -> Result<MeasurementBasis> {
    pair_basis(ModeSpace::X, Side::Signal, j, k, axis, dim_total)
}

/// CGLMP detector basis for a d-dimensional test.
///
/// Signal: `|k⟩ = (1/√d) Σ_x e^{2πix(k+Θ_s)/d}|x⟩`;
/// idler: `|l⟩ = (1/√d) Σ_x e^{2πix(−l+Φ_i)/d}|x⟩`.
pub fn cglmp_basis(side: Side, setting: usize, d: usize) -> Result<MeasurementBasis> {
    if d < 2 {
        return Err(Error::InvalidArgument(format!("CGLMP needs d >= 2, got {d}")));
    }
    check_dim(d)?;
    if setting > 1 {
        return Err(Error::InvalidArgument(format!("CGLMP setting must be 0 or 1, got {setting}")));
    }
    let vectors = (0..d)
        .map(|k| {
            let f = match side {
                Side::Signal => k as f64 + THETA[setting],
                Side::Idler => -(k as f64) + PHI[setting],
            };
            Projector::new(fourier_vector(d, f), k as i32)
        })
        .collect::<Result<_>>()?;
    let tag = match side {
        Side::Signal => 'S',
        Side::Idler => 'I',
    };
    MeasurementBasis::new(format!("CGLMP{d}-{tag}{setting}"), side, vectors)
}

/// [`cglmp_basis`] on the first `d` of `dim_total` modes.
pub fn cglmp_basis_in(side: Side, setting: usize, d: usize, dim_total: usize) -> Result<MeasurementBasis> {
    cglmp_basis(side, setting, d)?.embedded(dim_total)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RfTone {
    pub frequency_mhz: f64,
    pub amplitude: f64,
    pub phase: f64,
}

/// RF drive realising one superposition of spatial modes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RfToneProgram {
    pub tone_spacing_mhz: f64,
    pub tones: Vec<RfTone>,
}

impl RfToneProgram {
    /// Rebuilds the mode-space ket `Σ_x A_x e^{iΦ_x} |x⟩`.
    pub fn to_ket(&self, dim: usize) -> Result<Vec<C64>> {
        let mut v = vec![ZERO; dim];
        for t in &self.tones {
            let idx = (t.frequency_mhz / self.tone_spacing_mhz).round();
            if idx < 0.0 || idx as usize >= dim {
                return Err(Error::InvalidArgument(format!("tone at {} MHz outside {dim} modes", t.frequency_mhz)));
            }
            v[idx as usize] = C64::from_polar(t.amplitude, t.phase);
        }
        Ok(v)
    }

    pub fn total_power(&self) -> f64 {
        self.tones.iter().map(|t| t.amplitude * t.amplitude).sum()
    }
}

/// Tone `x` carries amplitude `|v_x|`, phase `arg v_x` and sits at `x · spacing`.
/// Modes with zero amplitude get no tone.
pub fn rf_tone_program(vector: &Projector, tone_spacing_mhz: f64) -> Result<RfToneProgram> {
    if !(tone_spacing_mhz > 0.0) {
        return Err(Error::InvalidArgument("tone spacing must be positive".into()));
    }
    let tones = vector
        .vector()
        .iter()
        .enumerate()
        .filter(|(_, z)| z.norm() > 1e-15)
        .map(|(x, z)| RfTone {
            frequency_mhz: x as f64 * tone_spacing_mhz,
            amplitude: z.norm(),
            phase: z.arg(),
        })
        .collect();
    Ok(RfToneProgram { tone_spacing_mhz, tones })
}

/// Ket of an embedded pair basis vector on the joint space (used by checks).
pub fn joint_vector(signal: &Projector, idler: &Projector) -> Vec<C64> {
    kron_vec(signal.vector(), idler.vector())
}

/// Column-stacked matrix of the basis vectors.
pub fn basis_matrix(basis: &MeasurementBasis) -> CMatrix {
    let cols: Vec<CVector> = basis
        .vectors()
        .iter()
        .map(|p| CVector::from_column_slice(p.vector()))
        .collect();
    CMatrix::from_columns(&cols)
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{OutcomeModel, StateVector};
    use approx::assert_abs_diff_eq;

    #[test]
    fn x_and_k_small_cases() {
        let x2 = x_basis(2).unwrap();
        assert_eq!(x2.vectors()[0].vector(), &[ONE, ZERO]);
        assert_eq!(x2.vectors()[1].vector(), &[ZERO, ONE]);
        assert_eq!(x_basis(10).unwrap().len(), 10);
        assert!(x_basis(0).is_err() && x_basis(11).is_err());

        let k2 = k_basis(2).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        for (z, e) in k2.vectors()[0].vector().iter().zip([s, s]) {
            assert_abs_diff_eq!(z.re, e, epsilon = 1e-15);
        }
        for (z, e) in k2.vectors()[1].vector().iter().zip([s, -s]) {
            assert_abs_diff_eq!(z.re, e, epsilon = 1e-15);
            assert_abs_diff_eq!(z.im, 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn every_basis_is_orthonormal() {
        for d in 1..=10 {
            assert!(x_basis(d).unwrap().gram_defect() < 1e-12);
            assert!(k_basis(d).unwrap().gram_defect() < 1e-12);
        }
        for d in 2..=10 {
            for side in [Side::Signal, Side::Idler] {
                for s in 0..2 {
                    assert!(cglmp_basis(side, s, d).unwrap().gram_defect() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn k_basis_is_unitary_dft() {
        for d in 1..=10 {
            let k = k_basis(d).unwrap();
            for (col, p) in k.vectors().iter().enumerate() {
                for (row, z) in p.vector().iter().enumerate() {
                    let angle = 2.0 * PI * (row * col) as f64 / d as f64;
                    let expected = C64::new(angle.cos(), angle.sin()) / (d as f64).sqrt();
                    assert!((z - expected).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn uniform_state_anticorrelates_in_k() {
        let d = 10;
        let amps = (0..d * d).map(|x| if x / d == x % d { ONE } else { ZERO }).collect();
        let psi = StateVector::new(d, d, amps).unwrap();
        let k = k_basis(d).unwrap();
        for (ks, ps) in k.vectors().iter().enumerate() {
            for (ki, pi) in k.vectors().iter().enumerate() {
                let p = psi.joint_probability(ps, pi).unwrap();
                let expected = if (ks + ki) % d == 0 { 0.1 } else { 0.0 };
                assert_abs_diff_eq!(p, expected, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn pair_bases() {
        let z = mub_pair_basis(0, 1, Axis::Z, 2).unwrap();
        assert_eq!(z.vectors()[0].vector(), &[ONE, ZERO]);
        assert_eq!(z.vectors()[0].label(), 1);
        assert_eq!(z.vectors()[1].label(), -1);
        let x = mub_pair_basis(0, 1, Axis::X, 2).unwrap();
        // Pauli-X eigenvectors
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert_abs_diff_eq!(x.vectors()[1].vector()[1].re, -s, epsilon = 1e-15);
        assert!(mub_pair_basis(2, 2, Axis::X, 4).is_err());

        for space in [ModeSpace::X, ModeSpace::K] {
            for side in [Side::Signal, Side::Idler] {
                let bases: Vec<_> = Axis::ALL
                    .iter()
                    .map(|&a| pair_basis(space, side, 2, 7, a, 10).unwrap())
                    .collect();
                for (ia, a) in bases.iter().enumerate() {
                    for b in bases.iter().skip(ia + 1) {
                        for u in a.vectors() {
                            for v in b.vectors() {
                                assert_abs_diff_eq!(inner(u.vector(), v.vector()).norm_sqr(), 0.5, epsilon = 1e-12);
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn cglmp_setting_zero_is_k_basis() {
        for d in 2..=10 {
            let k = k_basis(d).unwrap();
            let c = cglmp_basis(Side::Signal, 0, d).unwrap();
            for (a, b) in k.vectors().iter().zip(c.vectors()) {
                for (x, y) in a.vector().iter().zip(b.vector()) {
                    assert!((x - y).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn cglmp_settings_are_phase_rotations_of_k() {
        for d in 2..=10 {
            let k = basis_matrix(&k_basis(d).unwrap());
            for side in [Side::Signal, Side::Idler] {
                for s in 0..2 {
                    let c = basis_matrix(&cglmp_basis(side, s, d).unwrap());
                    let cross = k.adjoint() * c;
                    assert_abs_diff_eq!(cross.determinant().norm(), 1.0, epsilon = 1e-9);
                }
            }
        }
    }

    #[test]
    fn rf_programs() {
        let k = k_basis(2).unwrap();
        let p0 = rf_tone_program(&k.vectors()[0], TONE_SPACING_MHZ).unwrap();
        assert_eq!(p0.tones.len(), 2);
        assert_abs_diff_eq!(p0.tones[1].frequency_mhz, 0.8);
        for t in &p0.tones {
            assert_abs_diff_eq!(t.amplitude, std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-15);
            assert_abs_diff_eq!(t.phase, 0.0);
        }
        let p1 = rf_tone_program(&k.vectors()[1], TONE_SPACING_MHZ).unwrap();
        assert_abs_diff_eq!(p1.tones[0].phase, 0.0);
        assert_abs_diff_eq!(p1.tones[1].phase.abs(), PI, epsilon = 1e-12);

        let sparse = mub_pair_basis(3, 8, Axis::Y, 10).unwrap();
        let prog = rf_tone_program(&sparse.vectors()[0], TONE_SPACING_MHZ).unwrap();
        assert_eq!(prog.tones.len(), 2);
        assert_abs_diff_eq!(prog.total_power(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn rf_round_trip() {
        for d in 1..=10 {
            for basis in [k_basis(d).unwrap(), cglmp_basis_in(Side::Idler, 1, d.max(2), 10).unwrap()] {
                for p in basis.vectors() {
                    let prog = rf_tone_program(p, TONE_SPACING_MHZ).unwrap();
                    let back = prog.to_ket(p.dim()).unwrap();
                    for (a, b) in back.iter().zip(p.vector()) {
                        assert!((a - b).norm() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn json_round_trip_and_completion() {
        let b = pair_basis(ModeSpace::K, Side::Idler, 1, 4, Axis::Y, 6).unwrap();
        let back = MeasurementBasis::from_json(&b.to_json()).unwrap();
        assert_eq!(b, back);
        assert!(!b.is_complete());
        let comp = b.complement_projector();
        assert_abs_diff_eq!(comp.trace().re, 4.0, epsilon = 1e-12);
        assert!(x_basis(4).unwrap().complement_projector().iter().all(|z| z.norm() < 1e-15));
    }
}
