//! Dense complex linear-algebra primitives: state vectors, operators, tensor
//! embedding, Pauli matrices and Bloch-sphere conversions.
//!
//! Conventions used throughout the crate:
//!
//! * A state on `n` qubits is a dense vector of `2^n` complex amplitudes.
//!   Bit `i` of an amplitude index (most-significant bit = wire 0) encodes
//!   the basis state of wire `i`. So for two wires, index 2 is `|10⟩`:
//!   wire 0 in `|1⟩`, wire 1 in `|0⟩`.
//! * Operators are dense row-major square matrices whose dimension is a
//!   power of two.
//! * States are kept normalized: constructors reject amplitude vectors whose
//!   norm is further than [`NORM_INPUT_TOL`] from one and renormalize the
//!   residual rounding error away.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest deviation of an input amplitude vector's norm from 1 that is
/// still accepted (and silently renormalized) by constructors.
pub const NORM_INPUT_TOL: f64 = 1e-6;

/// Tolerance for accepting a Bloch vector as unit length.
pub const BLOCH_UNIT_TOL: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum QstateError {
    #[error("wire {wire} out of range for {n_qubits} qubit(s)")]
    WireOutOfRange { wire: usize, n_qubits: usize },
    #[error("Bloch vector has norm {norm}, expected a unit vector")]
    NonUnitBloch { norm: f64 },
    #[error("amplitude vector of length {len} is not a power of two")]
    BadAmplitudeCount { len: usize },
    #[error("state norm {norm} too far from 1")]
    NotNormalized { norm: f64 },
    #[error("non-finite value encountered")]
    NonFinite,
    #[error("operator dimension {dim} is not a power of two")]
    BadOperatorDim { dim: usize },
}

/// Measurement outcome tag: the ±1 eigenvalue of an axis observable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn as_f64(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    pub fn from_i8(v: i8) -> Option<Sign> {
        match v {
            1 => Some(Sign::Plus),
            -1 => Some(Sign::Minus),
            _ => None,
        }
    }

    pub fn flipped(self) -> Sign {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }
}

/// A real 3-vector on (or near) the Bloch sphere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlochVector {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl BlochVector {
    pub const X: BlochVector = BlochVector { x: 1.0, y: 0.0, z: 0.0 };
    pub const Y: BlochVector = BlochVector { x: 0.0, y: 1.0, z: 0.0 };
    pub const Z: BlochVector = BlochVector { x: 0.0, y: 0.0, z: 1.0 };

    pub fn new(x: f64, y: f64, z: f64) -> BlochVector {
        BlochVector { x, y, z }
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn dot(&self, other: &BlochVector) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn cross(&self, other: &BlochVector) -> BlochVector {
        BlochVector {
            x: self.y * other.z - self.z * other.y,
            y: self.z * other.x - self.x * other.z,
            z: self.x * other.y - self.y * other.x,
        }
    }

    pub fn scaled(&self, s: f64) -> BlochVector {
        BlochVector::new(self.x * s, self.y * s, self.z * s)
    }

    pub fn is_unit(&self, tol: f64) -> bool {
        (self.norm() - 1.0).abs() <= tol
    }

    pub fn normalized(&self) -> BlochVector {
        self.scaled(1.0 / self.norm())
    }
}

impl std::ops::Neg for BlochVector {
    type Output = BlochVector;
    fn neg(self) -> BlochVector {
        self.scaled(-1.0)
    }
}

/// A complex 3-vector. Dot and cross products take **no complex conjugates**:
/// `u.dot(v) = Σ_j u_j v_j`, which makes `v.dot(v)` the hyperbolic scalar
/// `[Re v]² − [Im v]² + 2i Re v·Im v` rather than a Euclidean norm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CVec3 {
    pub x: Complex64,
    pub y: Complex64,
    pub z: Complex64,
}

impl CVec3 {
    pub const ZERO: CVec3 = CVec3 {
        x: Complex64::new(0.0, 0.0),
        y: Complex64::new(0.0, 0.0),
        z: Complex64::new(0.0, 0.0),
    };

    pub fn new(x: Complex64, y: Complex64, z: Complex64) -> CVec3 {
        CVec3 { x, y, z }
    }

    pub fn from_bloch(b: BlochVector) -> CVec3 {
        CVec3 {
            x: Complex64::new(b.x, 0.0),
            y: Complex64::new(b.y, 0.0),
            z: Complex64::new(b.z, 0.0),
        }
    }

    pub fn from_parts(re: BlochVector, im: BlochVector) -> CVec3 {
        CVec3 {
            x: Complex64::new(re.x, im.x),
            y: Complex64::new(re.y, im.y),
            z: Complex64::new(re.z, im.z),
        }
    }

    /// Unconjugated dot product Σ_j u_j v_j.
    pub fn dot(&self, other: &CVec3) -> Complex64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    /// Unconjugated cross product.
    pub fn cross(&self, other: &CVec3) -> CVec3 {
        CVec3 {
            x: self.y * other.z - self.z * other.y,
            y: self.z * other.x - self.x * other.z,
            z: self.x * other.y - self.y * other.x,
        }
    }

    pub fn conj(&self) -> CVec3 {
        CVec3::new(self.x.conj(), self.y.conj(), self.z.conj())
    }

    pub fn re(&self) -> BlochVector {
        BlochVector::new(self.x.re, self.y.re, self.z.re)
    }

    pub fn im(&self) -> BlochVector {
        BlochVector::new(self.x.im, self.y.im, self.z.im)
    }

    pub fn components(&self) -> [Complex64; 3] {
        [self.x, self.y, self.z]
    }

    /// Largest |component| of the vector.
    pub fn max_abs(&self) -> f64 {
        self.x.norm().max(self.y.norm()).max(self.z.norm())
    }

    /// Largest |component| of the difference.
    pub fn max_abs_diff(&self, other: &CVec3) -> f64 {
        (*self - *other).max_abs()
    }

    pub fn is_finite(&self) -> bool {
        self.components()
            .iter()
            .all(|c| c.re.is_finite() && c.im.is_finite())
    }

    pub fn scaled(&self, s: Complex64) -> CVec3 {
        CVec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl std::ops::Add for CVec3 {
    type Output = CVec3;
    fn add(self, o: CVec3) -> CVec3 {
        CVec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl std::ops::Sub for CVec3 {
    type Output = CVec3;
    fn sub(self, o: CVec3) -> CVec3 {
        CVec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl std::ops::Mul<f64> for CVec3 {
    type Output = CVec3;
    fn mul(self, s: f64) -> CVec3 {
        self.scaled(Complex64::new(s, 0.0))
    }
}

/// Dense state vector over a fixed wire ordering (wire 0 = most significant
/// index bit).
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amps: Vec<Complex64>,
}

impl StateVector {
    /// Build a state from raw amplitudes. The length must be a power of two
    /// and the norm within [`NORM_INPUT_TOL`] of one; the residual rounding
    /// error is normalized away.
    pub fn new(amps: Vec<Complex64>) -> Result<StateVector, QstateError> {
        let len = amps.len();
        if len == 0 || !len.is_power_of_two() {
            return Err(QstateError::BadAmplitudeCount { len });
        }
        if amps.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(QstateError::NonFinite);
        }
        let n_qubits = len.trailing_zeros() as usize;
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > NORM_INPUT_TOL {
            return Err(QstateError::NotNormalized { norm });
        }
        let amps = amps.into_iter().map(|a| a / norm).collect();
        Ok(StateVector { n_qubits, amps })
    }

    /// Computational basis state |index⟩ on `n_qubits` wires.
    pub fn basis(n_qubits: usize, index: usize) -> StateVector {
        let dim = 1usize << n_qubits;
        assert!(index < dim, "basis index {index} out of range for dim {dim}");
        let mut amps = vec![Complex64::new(0.0, 0.0); dim];
        amps[index] = Complex64::new(1.0, 0.0);
        StateVector { n_qubits, amps }
    }

    /// Tensor product of per-wire single-qubit states, wire 0 first.
    pub fn product(factors: &[StateVector]) -> StateVector {
        assert!(!factors.is_empty(), "empty product state");
        let mut amps = vec![Complex64::new(1.0, 0.0)];
        let mut n = 0;
        for f in factors {
            let mut next = Vec::with_capacity(amps.len() * f.amps.len());
            for a in &amps {
                for b in &f.amps {
                    next.push(a * b);
                }
            }
            amps = next;
            n += f.n_qubits;
        }
        StateVector { n_qubits: n, amps }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amps(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn amp(&self, index: usize) -> Complex64 {
        self.amps[index]
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Inner product ⟨self|other⟩ (self is conjugated).
    pub fn inner(&self, other: &StateVector) -> Complex64 {
        assert_eq!(self.dim(), other.dim(), "inner product dimension mismatch");
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// Apply a dense operator of matching dimension.
    pub fn apply(&self, op: &Operator) -> StateVector {
        assert_eq!(op.dim(), self.dim(), "operator/state dimension mismatch");
        let amps = op.matvec(&self.amps);
        StateVector { n_qubits: self.n_qubits, amps }
    }

    /// Multiply by a global phase e^{iφ}.
    pub fn phased(&self, phi: f64) -> StateVector {
        let p = Complex64::from_polar(1.0, phi);
        StateVector {
            n_qubits: self.n_qubits,
            amps: self.amps.iter().map(|a| a * p).collect(),
        }
    }

    pub fn max_abs_diff(&self, other: &StateVector) -> f64 {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

/// Dense square complex matrix of power-of-two dimension, row major.
#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    dim: usize,
    entries: Vec<Complex64>,
}

impl Operator {
    pub fn new(dim: usize, entries: Vec<Complex64>) -> Result<Operator, QstateError> {
        if dim == 0 || !dim.is_power_of_two() {
            return Err(QstateError::BadOperatorDim { dim });
        }
        assert_eq!(entries.len(), dim * dim, "operator entry count mismatch");
        if entries.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(QstateError::NonFinite);
        }
        Ok(Operator { dim, entries })
    }

    pub fn identity(dim: usize) -> Operator {
        let mut entries = vec![Complex64::new(0.0, 0.0); dim * dim];
        for i in 0..dim {
            entries[i * dim + i] = Complex64::new(1.0, 0.0);
        }
        Operator { dim, entries }
    }

    pub fn pauli_x() -> Operator {
        Operator::from_rows2([
            [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)],
            [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)],
        ])
    }

    pub fn pauli_y() -> Operator {
        Operator::from_rows2([
            [Complex64::new(0.0, 0.0), Complex64::new(0.0, -1.0)],
            [Complex64::new(0.0, 1.0), Complex64::new(0.0, 0.0)],
        ])
    }

    pub fn pauli_z() -> Operator {
        Operator::from_rows2([
            [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)],
            [Complex64::new(0.0, 0.0), Complex64::new(-1.0, 0.0)],
        ])
    }

    pub fn paulis() -> [Operator; 3] {
        [Operator::pauli_x(), Operator::pauli_y(), Operator::pauli_z()]
    }

    pub fn from_rows2(rows: [[Complex64; 2]; 2]) -> Operator {
        Operator {
            dim: 2,
            entries: vec![rows[0][0], rows[0][1], rows[1][0], rows[1][1]],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entry(&self, row: usize, col: usize) -> Complex64 {
        self.entries[row * self.dim + col]
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    pub fn matvec(&self, v: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(v.len(), self.dim);
        let mut out = vec![Complex64::new(0.0, 0.0); self.dim];
        for (r, o) in out.iter_mut().enumerate() {
            let row = &self.entries[r * self.dim..(r + 1) * self.dim];
            *o = row.iter().zip(v).map(|(m, x)| m * x).sum();
        }
        out
    }

    pub fn matmul(&self, other: &Operator) -> Operator {
        assert_eq!(self.dim, other.dim, "matmul dimension mismatch");
        let d = self.dim;
        let mut entries = vec![Complex64::new(0.0, 0.0); d * d];
        for r in 0..d {
            for k in 0..d {
                let a = self.entries[r * d + k];
                if a == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for c in 0..d {
                    entries[r * d + c] += a * other.entries[k * d + c];
                }
            }
        }
        Operator { dim: d, entries }
    }

    /// Conjugate transpose.
    pub fn dagger(&self) -> Operator {
        let d = self.dim;
        let mut entries = vec![Complex64::new(0.0, 0.0); d * d];
        for r in 0..d {
            for c in 0..d {
                entries[c * d + r] = self.entries[r * d + c].conj();
            }
        }
        Operator { dim: d, entries }
    }

    /// Kronecker product, `self` acting on the more significant index bits.
    pub fn kron(&self, other: &Operator) -> Operator {
        let (da, db) = (self.dim, other.dim);
        let d = da * db;
        let mut entries = vec![Complex64::new(0.0, 0.0); d * d];
        for ra in 0..da {
            for ca in 0..da {
                let a = self.entries[ra * da + ca];
                for rb in 0..db {
                    for cb in 0..db {
                        entries[(ra * db + rb) * d + (ca * db + cb)] =
                            a * other.entries[rb * db + cb];
                    }
                }
            }
        }
        Operator { dim: d, entries }
    }

    pub fn max_abs_diff(&self, other: &Operator) -> f64 {
        assert_eq!(self.dim, other.dim);
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Entrywise distance of U·U† from the identity.
    pub fn unitarity_defect(&self) -> f64 {
        self.matmul(&self.dagger())
            .max_abs_diff(&Operator::identity(self.dim))
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim).map(|i| self.entries[i * self.dim + i]).sum()
    }
}

/// Kronecker product of a sequence of operators, in operand order
/// (first operand acts on the most significant bits). An empty sequence
/// yields the 1×1 identity.
pub fn tensor(ops: &[Operator]) -> Operator {
    let mut acc = Operator::identity(1);
    for op in ops {
        acc = acc.kron(op);
    }
    acc
}

fn check_wire(wire: usize, n_qubits: usize) -> Result<(), QstateError> {
    if wire >= n_qubits {
        Err(QstateError::WireOutOfRange { wire, n_qubits })
    } else {
        Ok(())
    }
}

/// Embed a single-qubit operator on `wire` of an `n_qubits` register:
/// I ⊗ … ⊗ op ⊗ … ⊗ I with `op` in position `wire`.
pub fn embed_single(
    op: &Operator,
    wire: usize,
    n_qubits: usize,
) -> Result<Operator, QstateError> {
    assert_eq!(op.dim(), 2, "embed_single expects a 2x2 operator");
    check_wire(wire, n_qubits)?;
    let left = Operator::identity(1 << wire);
    let right = Operator::identity(1 << (n_qubits - 1 - wire));
    Ok(left.kron(op).kron(&right))
}

/// Embed a two-qubit operator acting on (wire_a, wire_b); the 4×4 operator's
/// index convention is bit(wire_a)·2 + bit(wire_b).
pub fn embed_pair(
    op: &Operator,
    wire_a: usize,
    wire_b: usize,
    n_qubits: usize,
) -> Result<Operator, QstateError> {
    assert_eq!(op.dim(), 4, "embed_pair expects a 4x4 operator");
    assert_ne!(wire_a, wire_b, "embed_pair wires must be distinct");
    check_wire(wire_a, n_qubits)?;
    check_wire(wire_b, n_qubits)?;
    let dim = 1usize << n_qubits;
    let sh_a = n_qubits - 1 - wire_a;
    let sh_b = n_qubits - 1 - wire_b;
    let mut entries = vec![Complex64::new(0.0, 0.0); dim * dim];
    for col in 0..dim {
        let ca = (col >> sh_a) & 1;
        let cb = (col >> sh_b) & 1;
        for ra in 0..2 {
            for rb in 0..2 {
                let row = (col & !(1 << sh_a) & !(1 << sh_b)) | (ra << sh_a) | (rb << sh_b);
                entries[row * dim + col] = op.entry(ra * 2 + rb, ca * 2 + cb);
            }
        }
    }
    Operator::new(dim, entries)
}

/// Single-qubit state with Bloch vector `n`: |ψ⟩⟨ψ| = (I + n·σ)/2.
/// The global phase is fixed by making the |0⟩ amplitude real and
/// non-negative (the |1⟩ amplitude when the |0⟩ amplitude vanishes).
pub fn bloch_to_state(n: BlochVector) -> Result<StateVector, QstateError> {
    let norm = n.norm();
    if (norm - 1.0).abs() > BLOCH_UNIT_TOL {
        return Err(QstateError::NonUnitBloch { norm });
    }
    let n = n.normalized();
    let theta = n.z.clamp(-1.0, 1.0).acos();
    // +0.0 strips negative zeros so poles get azimuth 0, not ±π.
    let phi = (n.y + 0.0).atan2(n.x + 0.0);
    let a0 = (theta / 2.0).cos();
    let a1 = Complex64::from_polar((theta / 2.0).sin(), phi);
    Ok(StateVector {
        n_qubits: 1,
        amps: vec![Complex64::new(a0, 0.0), a1],
    })
}

/// 2×2 reduced density matrix of `wire`, as [ρ00, ρ01, ρ10, ρ11].
pub fn reduced_density(
    psi: &StateVector,
    wire: usize,
) -> Result<[Complex64; 4], QstateError> {
    check_wire(wire, psi.n_qubits())?;
    let shift = psi.n_qubits() - 1 - wire;
    let mask = 1usize << shift;
    let zero = Complex64::new(0.0, 0.0);
    let (mut r00, mut r01, mut r11) = (zero, zero, zero);
    for idx0 in 0..psi.dim() {
        if idx0 & mask != 0 {
            continue;
        }
        let idx1 = idx0 | mask;
        let a0 = psi.amp(idx0);
        let a1 = psi.amp(idx1);
        r00 += a0 * a0.conj();
        r11 += a1 * a1.conj();
        r01 += a0 * a1.conj();
    }
    Ok([r00, r01, r01.conj(), r11])
}

/// Tr(ρ²) of the single-qubit reduced density operator of `wire`;
/// 1 exactly when the wire is separable from the rest, 0.5 when maximally
/// entangled.
pub fn reduced_purity(psi: &StateVector, wire: usize) -> Result<f64, QstateError> {
    let rho = reduced_density(psi, wire)?;
    Ok(rho[0].norm_sqr() + rho[3].norm_sqr() + 2.0 * rho[1].norm_sqr())
}

/// Bloch vector of Pauli expectation values ⟨σ_j⟩ on `wire`.
pub fn bloch_expectation(psi: &StateVector, wire: usize) -> Result<BlochVector, QstateError> {
    let rho = reduced_density(psi, wire)?;
    // Tr(ρ σ_x) = ρ01 + ρ10, Tr(ρ σ_y) = i(ρ01 − ρ10), Tr(ρ σ_z) = ρ00 − ρ11.
    let x = (rho[1] + rho[2]).re;
    let y = (Complex64::i() * (rho[1] - rho[2])).re;
    let z = (rho[0] - rho[3]).re;
    Ok(BlochVector::new(x, y, z))
}
