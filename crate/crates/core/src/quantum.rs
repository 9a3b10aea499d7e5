//! Dense complex linear algebra on few-qubit operators.
//!
//! Everything here works on explicit `2^n x 2^n` matrices (`n <= 8`), which
//! keeps the numerics simple: Hermitian eigendecompositions with eigenvalue
//! clamping at zero absorb the usual `-1e-10`-scale negativity.
//!
//! Conventions, fixed once for the whole crate:
//! - party 0 is the most significant tensor factor (leftmost in Kronecker
//!   products);
//! - pure-state global phase is canonicalized by making the first nonzero
//!   amplitude real and positive when states are compared.

use nalgebra::{DMatrix, DVector, Matrix3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

pub const HERMITIAN_TOL: f64 = 1e-10;
pub const EIGENVALUE_TOL: f64 = 1e-10;
pub const TRACE_TOL: f64 = 1e-10;
pub const UNIT_NORM_TOL: f64 = 1e-12;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Error)]
pub enum QuantumError {
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("dimension {0} is not a power of two")]
    DimNotPowerOfTwo(usize),
    #[error("matrix is not Hermitian (max deviation {0:.3e})")]
    NotHermitian(f64),
    #[error("matrix is not positive semidefinite (min eigenvalue {0:.3e})")]
    NotPositiveSemidefinite(f64),
    #[error("trace is {0:?}, expected 1")]
    TraceNotOne(Complex64),
    #[error("state vector norm is {0}, expected 1")]
    UnnormalizedState(f64),
    #[error("Bloch vector norm {0} exceeds 1 (unphysical state)")]
    UnphysicalBloch(f64),
    #[error("dimension mismatch: {a} vs {b}")]
    DimensionMismatch { a: usize, b: usize },
    #[error("expected dimension {expected}, got {got}")]
    WrongDimension { expected: usize, got: usize },
    #[error("invalid subsystem selection: {0}")]
    InvalidSubsystems(String),
    #[error("state is not pure (purity {0})")]
    NotPure(f64),
}

/// Real 3-vector on (or inside) the Bloch sphere.
///
/// Norm 1 encodes a measurement direction, norm <= 1 a qubit state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "[f64; 3]", from = "[f64; 3]")]
pub struct BlochVector {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl From<BlochVector> for [f64; 3] {
    fn from(v: BlochVector) -> Self {
        [v.x, v.y, v.z]
    }
}

impl From<[f64; 3]> for BlochVector {
    fn from(a: [f64; 3]) -> Self {
        Self { x: a[0], y: a[1], z: a[2] }
    }
}

impl BlochVector {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub const fn zero() -> Self {
        Self::new(0.0, 0.0, 0.0)
    }

    pub const fn x_axis() -> Self {
        Self::new(1.0, 0.0, 0.0)
    }

    pub const fn y_axis() -> Self {
        Self::new(0.0, 1.0, 0.0)
    }

    pub const fn z_axis() -> Self {
        Self::new(0.0, 0.0, 1.0)
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn cross(&self, other: &Self) -> Self {
        Self::new(
            self.y * other.z - self.z * other.y,
            self.z * other.x - self.x * other.z,
            self.x * other.y - self.y * other.x,
        )
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::new(self.x * s, self.y * s, self.z * s)
    }

    pub fn add(&self, other: &Self) -> Self {
        Self::new(self.x + other.x, self.y + other.y, self.z + other.z)
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self::new(self.x - other.x, self.y - other.y, self.z - other.z)
    }

    pub fn normalized(&self) -> Option<Self> {
        let n = self.norm();
        (n > 1e-15).then(|| self.scale(1.0 / n))
    }

    pub fn is_unit(&self, tol: f64) -> bool {
        (self.norm() - 1.0).abs() <= tol
    }

    /// Angle to another vector, with the dot product clamped into [-1, 1].
    pub fn angle_to(&self, other: &Self) -> f64 {
        let n = self.norm() * other.norm();
        if n <= 1e-300 {
            return 0.0;
        }
        (self.dot(other) / n).clamp(-1.0, 1.0).acos()
    }
}

/// Pauli matrix by index: 0 -> identity, 1 -> x, 2 -> y, 3 -> z.
pub fn pauli(k: usize) -> CMatrix {
    match k {
        0 => CMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, ONE]),
        1 => CMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]),
        2 => CMatrix::from_row_slice(2, 2, &[ZERO, -I, I, ZERO]),
        3 => CMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE]),
        _ => panic!("Pauli index {k} out of range"),
    }
}

/// Qubit observable `v . sigma` for a direction `v` on the Bloch sphere.
pub fn direction_observable(v: &BlochVector) -> CMatrix {
    CMatrix::from_row_slice(
        2,
        2,
        &[
            Complex64::new(v.z, 0.0),
            Complex64::new(v.x, -v.y),
            Complex64::new(v.x, v.y),
            Complex64::new(-v.z, 0.0),
        ],
    )
}

/// Projector `(1 + sign * v . sigma) / 2` onto the `sign` outcome of `v . sigma`.
pub fn outcome_projector(v: &BlochVector, sign: f64) -> CMatrix {
    let mut m = direction_observable(v) * Complex64::new(sign * 0.5, 0.0);
    m[(0, 0)] += Complex64::new(0.5, 0.0);
    m[(1, 1)] += Complex64::new(0.5, 0.0);
    m
}

/// Kronecker product with the left argument as the most significant factor.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (ar, ac) = (a.nrows(), a.ncols());
    let (br, bc) = (b.nrows(), b.ncols());
    let mut out = CMatrix::zeros(ar * br, ac * bc);
    for i in 0..ar {
        for j in 0..ac {
            let aij = a[(i, j)];
            if aij == ZERO {
                continue;
            }
            for k in 0..br {
                for l in 0..bc {
                    out[(i * br + k, j * bc + l)] = aij * b[(k, l)];
                }
            }
        }
    }
    out
}

pub fn kron_vec(a: &CVector, b: &CVector) -> CVector {
    let (na, nb) = (a.len(), b.len());
    let mut out = CVector::zeros(na * nb);
    for i in 0..na {
        for j in 0..nb {
            out[i * nb + j] = a[i] * b[j];
        }
    }
    out
}

/// Kronecker product of a list of square matrices, first entry most significant.
pub fn kron_list(ops: &[CMatrix]) -> CMatrix {
    assert!(!ops.is_empty(), "kron_list needs at least one factor");
    let mut acc = ops[0].clone();
    for op in &ops[1..] {
        acc = kron(&acc, op);
    }
    acc
}

/// Eigendecomposition of a Hermitian matrix, symmetrizing first.
///
/// Returns `(eigenvalues, eigenvectors)` with eigenvectors as columns.
pub fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let h = (m + m.adjoint()).scale(0.5);
    let eig = h.symmetric_eigen();
    (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors)
}

/// Principal square root of a Hermitian PSD matrix.
///
/// Eigenvalues below `1e-14` (relative to the largest) are treated as exact
/// zeros so that roundoff negativity cannot leak `sqrt(eps)`-sized noise
/// into the result.
pub fn sqrt_psd(m: &CMatrix) -> CMatrix {
    let (vals, vecs) = hermitian_eigen(m);
    let n = m.nrows();
    let max = vals.iter().copied().fold(0.0f64, |a, b| a.max(b.abs()));
    let cutoff = max * 1e-14;
    let mut scaled = vecs.clone();
    for (j, &v) in vals.iter().enumerate() {
        let root = Complex64::new(if v > cutoff { v.sqrt() } else { 0.0 }, 0.0);
        for i in 0..n {
            scaled[(i, j)] *= root;
        }
    }
    &scaled * vecs.adjoint()
}

fn complex_trace(m: &CMatrix) -> Complex64 {
    (0..m.nrows()).map(|i| m[(i, i)]).sum()
}

/// Real part of `tr(a b)`; exact for Hermitian `a`, `b`.
pub fn trace_product_re(a: &CMatrix, b: &CMatrix) -> f64 {
    let n = a.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        for k in 0..n {
            let p = a[(i, k)] * b[(k, i)];
            acc += p.re;
        }
    }
    acc
}

/// Trace distance `tr|a - b| / 2` between Hermitian matrices.
pub fn trace_distance(a: &CMatrix, b: &CMatrix) -> f64 {
    let (vals, _) = hermitian_eigen(&(a - b));
    0.5 * vals.iter().map(|v| v.abs()).sum::<f64>()
}

/// Density matrix of dimension `2^n`: Hermitian, PSD, unit trace.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    mat: CMatrix,
}

impl DensityMatrix {
    /// Validates Hermiticity, positivity and unit trace before wrapping.
    pub fn new(mat: CMatrix) -> Result<Self, QuantumError> {
        if mat.nrows() != mat.ncols() {
            return Err(QuantumError::NotSquare { rows: mat.nrows(), cols: mat.ncols() });
        }
        let dim = mat.nrows();
        if dim == 0 || !dim.is_power_of_two() {
            return Err(QuantumError::DimNotPowerOfTwo(dim));
        }
        let mut herm_dev: f64 = 0.0;
        for i in 0..dim {
            for j in 0..dim {
                let d = mat[(i, j)] - mat[(j, i)].conj();
                herm_dev = herm_dev.max(d.norm());
            }
        }
        if herm_dev > HERMITIAN_TOL {
            return Err(QuantumError::NotHermitian(herm_dev));
        }
        let tr = complex_trace(&mat);
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(QuantumError::TraceNotOne(tr));
        }
        let (vals, _) = hermitian_eigen(&mat);
        let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
        if min < -EIGENVALUE_TOL {
            return Err(QuantumError::NotPositiveSemidefinite(min));
        }
        Ok(Self { mat })
    }

    /// Wraps without validity checks; for internal hot paths that construct
    /// states known to be physical up to roundoff.
    pub(crate) fn from_matrix_unchecked(mat: CMatrix) -> Self {
        Self { mat }
    }

    pub fn maximally_mixed(n_qubits: usize) -> Self {
        let dim = 1usize << n_qubits;
        let mat = CMatrix::identity(dim, dim).scale(1.0 / dim as f64);
        Self { mat }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }

    pub fn into_matrix(self) -> CMatrix {
        self.mat
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn n_qubits(&self) -> usize {
        self.dim().trailing_zeros() as usize
    }

    pub fn purity(&self) -> f64 {
        trace_product_re(&self.mat, &self.mat)
    }

    /// Real expectation value `tr(rho O)` of a Hermitian observable.
    pub fn expectation(&self, obs: &CMatrix) -> f64 {
        trace_product_re(&self.mat, obs)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigen(&self.mat).0
    }

    pub fn tensor(&self, other: &Self) -> Self {
        Self { mat: kron(&self.mat, &other.mat) }
    }

    /// Reduced state on the given parties (0-based, party 0 most significant).
    pub fn partial_trace(&self, keep: &[usize]) -> Result<Self, QuantumError> {
        let n = self.n_qubits();
        let mut keep = keep.to_vec();
        keep.sort_unstable();
        keep.dedup();
        if keep.is_empty() {
            return Err(QuantumError::InvalidSubsystems("empty subset".into()));
        }
        if keep.iter().any(|&p| p >= n) {
            return Err(QuantumError::InvalidSubsystems(format!(
                "party index out of range for {n} parties: {keep:?}"
            )));
        }
        let traced: Vec<usize> = (0..n).filter(|p| !keep.contains(p)).collect();
        let kd = 1usize << keep.len();
        let td = 1usize << traced.len();
        // bit of party p in a full index (party 0 most significant)
        let bit = |idx: usize, p: usize| (idx >> (n - 1 - p)) & 1;
        let mut out = CMatrix::zeros(kd, kd);
        let dim = self.dim();
        for i in 0..dim {
            let ik: usize = keep.iter().fold(0, |acc, &p| (acc << 1) | bit(i, p));
            let it: usize = traced.iter().fold(0, |acc, &p| (acc << 1) | bit(i, p));
            for j in 0..dim {
                let jt: usize = traced.iter().fold(0, |acc, &p| (acc << 1) | bit(j, p));
                if it != jt {
                    continue;
                }
                let jk: usize = keep.iter().fold(0, |acc, &p| (acc << 1) | bit(j, p));
                out[(ik, jk)] += self.mat[(i, j)];
            }
        }
        let _ = td;
        Ok(Self { mat: out })
    }

    pub fn trace_distance_to(&self, other: &Self) -> f64 {
        trace_distance(&self.mat, &other.mat)
    }
}

/// Qubit state `(1 + v . sigma) / 2` from a Bloch vector with norm <= 1.
pub fn state_from_bloch(v: &BlochVector) -> Result<DensityMatrix, QuantumError> {
    let n = v.norm();
    if n > 1.0 + UNIT_NORM_TOL {
        return Err(QuantumError::UnphysicalBloch(n));
    }
    let mat = CMatrix::from_row_slice(
        2,
        2,
        &[
            Complex64::new(0.5 * (1.0 + v.z), 0.0),
            Complex64::new(0.5 * v.x, -0.5 * v.y),
            Complex64::new(0.5 * v.x, 0.5 * v.y),
            Complex64::new(0.5 * (1.0 - v.z), 0.0),
        ],
    );
    Ok(DensityMatrix::from_matrix_unchecked(mat))
}

/// Bloch vector `v_k = tr(rho sigma_k)` of a single-qubit state.
pub fn bloch_from_state(rho: &DensityMatrix) -> Result<BlochVector, QuantumError> {
    if rho.dim() != 2 {
        return Err(QuantumError::WrongDimension { expected: 2, got: rho.dim() });
    }
    let m = rho.matrix();
    Ok(BlochVector::new(
        2.0 * m[(0, 1)].re,
        -2.0 * m[(0, 1)].im,
        (m[(0, 0)] - m[(1, 1)]).re,
    ))
}

/// Uhlmann-Jozsa fidelity `(tr sqrt(sqrt(tau) rho sqrt(tau)))^2`.
///
/// Evaluated as the squared sum of singular values of
/// `sqrt(tau) sqrt(rho)` — the same quantity as the defining formula, but
/// the singular values enter linearly, so near-zero eigenvalue noise is not
/// amplified through a square root.
pub fn fidelity(tau: &DensityMatrix, rho: &DensityMatrix) -> Result<f64, QuantumError> {
    if tau.dim() != rho.dim() {
        return Err(QuantumError::DimensionMismatch { a: tau.dim(), b: rho.dim() });
    }
    let st = sqrt_psd(tau.matrix());
    let sr = sqrt_psd(rho.matrix());
    let prod = &st * &sr;
    let root_sum: f64 = prod.singular_values().iter().sum();
    Ok((root_sum * root_sum).clamp(0.0, 1.0))
}

/// Closed-form single-qubit fidelity
/// `(1 + t.r + sqrt((1 - t^2)(1 - r^2))) / 2` in terms of Bloch vectors.
pub fn qubit_fidelity_bloch(t: &BlochVector, r: &BlochVector) -> f64 {
    let t2 = t.dot(t).min(1.0);
    let r2 = r.dot(r).min(1.0);
    0.5 * (1.0 + t.dot(r) + ((1.0 - t2) * (1.0 - r2)).sqrt())
}

/// Normalized pure state of dimension `2^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    amps: CVector,
}

impl PureState {
    pub fn new(amps: CVector) -> Result<Self, QuantumError> {
        let dim = amps.len();
        if dim == 0 || !dim.is_power_of_two() {
            return Err(QuantumError::DimNotPowerOfTwo(dim));
        }
        let n = amps.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if (n - 1.0).abs() > UNIT_NORM_TOL {
            return Err(QuantumError::UnnormalizedState(n));
        }
        Ok(Self { amps })
    }

    /// Normalizes the amplitudes, rejecting the zero vector.
    pub fn normalized(amps: CVector) -> Result<Self, QuantumError> {
        let n = amps.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if n < 1e-12 {
            return Err(QuantumError::UnnormalizedState(n));
        }
        Self::new(amps.scale(1.0 / n))
    }

    pub fn basis_state(n_qubits: usize, index: usize) -> Self {
        let dim = 1usize << n_qubits;
        let mut amps = CVector::zeros(dim);
        amps[index] = ONE;
        Self { amps }
    }

    /// Eigenstate of `v . sigma` for a unit direction `v`.
    ///
    /// The plus branch is `(cos(theta/2), e^{i phi} sin(theta/2))`, the minus
    /// branch `(sin(theta/2), -e^{i phi} cos(theta/2))`, with `theta`, `phi`
    /// the polar angles of `v`.
    pub fn bloch_eigenstate(v: &BlochVector, positive: bool) -> Self {
        let theta = v.z.clamp(-1.0, 1.0).acos();
        let phi = if v.x == 0.0 && v.y == 0.0 { 0.0 } else { v.y.atan2(v.x) };
        let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
        let phase = Complex64::from_polar(1.0, phi);
        let amps = if positive {
            CVector::from_vec(vec![Complex64::new(c, 0.0), phase * s])
        } else {
            CVector::from_vec(vec![Complex64::new(s, 0.0), -phase * c])
        };
        Self { amps }
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amps
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn n_qubits(&self) -> usize {
        self.dim().trailing_zeros() as usize
    }

    pub fn to_density(&self) -> DensityMatrix {
        let dim = self.dim();
        let mut mat = CMatrix::zeros(dim, dim);
        for i in 0..dim {
            for j in 0..dim {
                mat[(i, j)] = self.amps[i] * self.amps[j].conj();
            }
        }
        DensityMatrix::from_matrix_unchecked(mat)
    }

    pub fn tensor(&self, other: &Self) -> Self {
        Self { amps: kron_vec(&self.amps, &other.amps) }
    }

    pub fn overlap(&self, other: &Self) -> Complex64 {
        self.amps.iter().zip(other.amps.iter()).map(|(a, b)| a.conj() * b).sum()
    }

    /// Fixes the global phase so the first amplitude above `1e-12` in
    /// magnitude is real and positive.
    pub fn canonical(&self) -> Self {
        for a in self.amps.iter() {
            if a.norm() > 1e-12 {
                let phase = a.conj() / a.norm();
                return Self { amps: self.amps.map(|z| z * phase) };
            }
        }
        self.clone()
    }

    /// Expectation `<psi| O |psi>` of a Hermitian observable.
    pub fn expectation(&self, obs: &CMatrix) -> f64 {
        let dim = self.dim();
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..dim {
            for j in 0..dim {
                acc += self.amps[i].conj() * obs[(i, j)] * self.amps[j];
            }
        }
        acc.re
    }
}

/// Orthonormal single-qubit basis pair `{|+>, |->}`.
#[derive(Debug, Clone)]
pub struct LocalBasis {
    pub plus: PureState,
    pub minus: PureState,
}

impl LocalBasis {
    /// Eigenbasis of `v . sigma`.
    pub fn from_direction(v: &BlochVector) -> Self {
        Self {
            plus: PureState::bloch_eigenstate(v, true),
            minus: PureState::bloch_eigenstate(v, false),
        }
    }

    /// Basis from two polar angles and a relative phase on the minus state.
    pub fn from_angles(theta: f64, phi: f64, gamma: f64) -> Self {
        let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
        let ph = Complex64::from_polar(1.0, phi);
        let gp = Complex64::from_polar(1.0, gamma);
        let plus = PureState {
            amps: CVector::from_vec(vec![Complex64::new(c, 0.0), ph * s]),
        };
        let minus = PureState {
            amps: CVector::from_vec(vec![gp * s, -gp * ph * c]),
        };
        Self { plus, minus }
    }
}

/// Two-qubit state `cos(a) |+>|+> + sin(a) |->|->` in the given local bases.
pub fn schmidt_state(alpha: f64, party1: &LocalBasis, party2: &LocalBasis) -> PureState {
    let (c, s) = (alpha.cos(), alpha.sin());
    let pp = party1.plus.tensor(&party2.plus);
    let mm = party1.minus.tensor(&party2.minus);
    let amps = pp.amps.scale(c) + mm.amps.scale(s);
    PureState { amps }
}

/// Concurrence `|<psi| sigma_y x sigma_y |psi*>|` of a two-qubit pure state.
pub fn concurrence(psi: &PureState) -> Result<f64, QuantumError> {
    if psi.dim() != 4 {
        return Err(QuantumError::WrongDimension { expected: 4, got: psi.dim() });
    }
    let a = psi.amps[0] * psi.amps[3] - psi.amps[1] * psi.amps[2];
    Ok((2.0 * a.norm()).min(1.0))
}

/// Pauli-basis data of a two-qubit state: marginal Bloch vectors, the
/// correlation matrix `T`, and its excess part `T - t1 t2^T`.
#[derive(Debug, Clone)]
pub struct PauliDecomposition {
    pub t1: BlochVector,
    pub t2: BlochVector,
    pub correlation: Matrix3<f64>,
    pub excess: Matrix3<f64>,
}

impl PauliDecomposition {
    /// Spectral norm of the excess correlation matrix.
    pub fn excess_spectral_norm(&self) -> f64 {
        self.excess.svd_unordered(false, false).singular_values.max()
    }

    /// Rebuilds the density matrix from the decomposition.
    pub fn reassemble(&self) -> DensityMatrix {
        let t1 = [self.t1.x, self.t1.y, self.t1.z];
        let t2 = [self.t2.x, self.t2.y, self.t2.z];
        let id = pauli(0);
        let mut mat = kron(&id, &id);
        for k in 0..3 {
            mat += kron(&pauli(k + 1), &id).scale(t1[k]);
            mat += kron(&id, &pauli(k + 1)).scale(t2[k]);
            for l in 0..3 {
                mat += kron(&pauli(k + 1), &pauli(l + 1)).scale(self.correlation[(k, l)]);
            }
        }
        DensityMatrix::from_matrix_unchecked(mat.scale(0.25))
    }
}

/// Decomposes a two-qubit state in the Pauli basis.
pub fn pauli_decompose(rho: &DensityMatrix) -> Result<PauliDecomposition, QuantumError> {
    if rho.dim() != 4 {
        return Err(QuantumError::WrongDimension { expected: 4, got: rho.dim() });
    }
    let id = pauli(0);
    let mut t1 = [0.0; 3];
    let mut t2 = [0.0; 3];
    let mut corr = Matrix3::zeros();
    for k in 0..3 {
        t1[k] = rho.expectation(&kron(&pauli(k + 1), &id));
        t2[k] = rho.expectation(&kron(&id, &pauli(k + 1)));
        for l in 0..3 {
            corr[(k, l)] = rho.expectation(&kron(&pauli(k + 1), &pauli(l + 1)));
        }
    }
    let t1 = BlochVector::new(t1[0], t1[1], t1[2]);
    let t2 = BlochVector::new(t2[0], t2[1], t2[2]);
    let mut excess = corr;
    let a1 = [t1.x, t1.y, t1.z];
    let a2 = [t2.x, t2.y, t2.z];
    for k in 0..3 {
        for l in 0..3 {
            excess[(k, l)] -= a1[k] * a2[l];
        }
    }
    Ok(PauliDecomposition { t1, t2, correlation: corr, excess })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::CounterRng;

    fn s_hat() -> BlochVector {
        let r = 1.0 / 3f64.sqrt();
        BlochVector::new(r, r, r)
    }

    #[test]
    fn state_from_bloch_trivials() {
        let mixed = state_from_bloch(&BlochVector::zero()).unwrap();
        assert!((mixed.matrix()[(0, 0)].re - 0.5).abs() < 1e-15);
        assert!(mixed.matrix()[(0, 1)].norm() < 1e-15);

        let up = state_from_bloch(&BlochVector::z_axis()).unwrap();
        assert!((up.matrix()[(0, 0)].re - 1.0).abs() < 1e-15);
        assert!(up.matrix()[(1, 1)].norm() < 1e-15);
    }

    #[test]
    fn state_from_bloch_rejects_unphysical() {
        let v = BlochVector::new(1.0, 1.0, 0.0);
        assert!(matches!(state_from_bloch(&v), Err(QuantumError::UnphysicalBloch(_))));
    }

    // Oracle: diagonalize s.sigma numerically and compare against the
    // projector built from the Bloch vector.
    #[test]
    fn state_from_bloch_matches_diagonalization() {
        let s = s_hat();
        let obs = direction_observable(&s);
        let (vals, vecs) = hermitian_eigen(&obs);
        // pick the +1 eigenvector
        let idx = if vals[0] > vals[1] { 0 } else { 1 };
        assert!((vals[idx] - 1.0).abs() < 1e-12);
        let mut proj = CMatrix::zeros(2, 2);
        for i in 0..2 {
            for j in 0..2 {
                proj[(i, j)] = vecs[(i, idx)] * vecs[(j, idx)].conj();
            }
        }
        let built = state_from_bloch(&s).unwrap();
        let dev = (built.matrix() - &proj).map(|z| z.norm()).max();
        assert!(dev < 1e-12, "projector deviation {dev}");
    }

    // The explicit eigenstate amplitudes: |<0|psi_s^+>|^2 = 1/(3 - sqrt(3)).
    #[test]
    fn bloch_eigenstate_amplitudes() {
        let s = s_hat();
        let plus = PureState::bloch_eigenstate(&s, true);
        let expected = 1.0 / (3.0 - 3f64.sqrt());
        assert!((plus.amplitudes()[0].norm_sqr() - expected).abs() < 1e-12);
        // amplitude of |1> carries phase pi/4
        let a1 = plus.amplitudes()[1];
        assert!((a1.arg() - std::f64::consts::FRAC_PI_4).abs() < 1e-12);

        let minus = PureState::bloch_eigenstate(&s, false);
        assert!(plus.overlap(&minus).norm() < 1e-12);
        let expected_minus = 1.0 / (3.0 + 3f64.sqrt());
        assert!((minus.amplitudes()[0].norm_sqr() - expected_minus).abs() < 1e-12);
    }

    #[test]
    fn bloch_round_trip() {
        let mut rng = CounterRng::new(1);
        for _ in 0..200 {
            let dir = rng.unit_vector();
            let r = rng.uniform();
            let v = BlochVector::new(dir[0] * r, dir[1] * r, dir[2] * r);
            let rho = state_from_bloch(&v).unwrap();
            let back = bloch_from_state(&rho).unwrap();
            assert!(back.sub(&v).norm() < 1e-12);
        }
    }

    #[test]
    fn bloch_from_state_fixtures() {
        let mixed = DensityMatrix::maximally_mixed(1);
        assert!(bloch_from_state(&mixed).unwrap().norm() < 1e-14);
        let s = s_hat();
        let rho = PureState::bloch_eigenstate(&s, true).to_density();
        let v = bloch_from_state(&rho).unwrap();
        assert!(v.sub(&s).norm() < 1e-12);
    }

    #[test]
    fn fidelity_trivials() {
        let s = s_hat();
        let rho = state_from_bloch(&s.scale(0.7)).unwrap();
        assert!((fidelity(&rho, &rho).unwrap() - 1.0).abs() < 1e-10);

        let zero = PureState::basis_state(1, 0).to_density();
        let one = PureState::basis_state(1, 1).to_density();
        assert!(fidelity(&zero, &one).unwrap() < 1e-12);

        let mixed = DensityMatrix::maximally_mixed(1);
        // closed form with t = 0, r = 1 gives 1/2
        assert!((fidelity(&mixed, &zero).unwrap() - 0.5).abs() < 1e-10);
    }

    #[test]
    fn fidelity_matches_qubit_closed_form() {
        let mut rng = CounterRng::new(2);
        for _ in 0..500 {
            let d1 = rng.unit_vector();
            let d2 = rng.unit_vector();
            let (r1, r2) = (rng.uniform(), rng.uniform());
            let t = BlochVector::new(d1[0] * r1, d1[1] * r1, d1[2] * r1);
            let r = BlochVector::new(d2[0] * r2, d2[1] * r2, d2[2] * r2);
            let ft = fidelity(
                &state_from_bloch(&t).unwrap(),
                &state_from_bloch(&r).unwrap(),
            )
            .unwrap();
            let fc = qubit_fidelity_bloch(&t, &r);
            assert!((ft - fc).abs() < 1e-10, "uhlmann {ft} vs closed form {fc}");
        }
    }

    #[test]
    fn fidelity_symmetry() {
        let mut rng = CounterRng::new(3);
        for _ in 0..100 {
            let d1 = rng.unit_vector();
            let d2 = rng.unit_vector();
            let t = BlochVector::from(d1).scale(rng.uniform());
            let r = BlochVector::from(d2).scale(rng.uniform());
            let a = state_from_bloch(&t).unwrap();
            let b = state_from_bloch(&r).unwrap();
            let f1 = fidelity(&a, &b).unwrap();
            let f2 = fidelity(&b, &a).unwrap();
            assert!((f1 - f2).abs() < 1e-9);
        }
    }

    #[test]
    fn tensor_fixtures() {
        let mixed = DensityMatrix::maximally_mixed(1);
        let four = mixed.tensor(&mixed);
        assert_eq!(four.dim(), 4);
        for i in 0..4 {
            assert!((four.matrix()[(i, i)].re - 0.25).abs() < 1e-15);
        }

        let zero = PureState::basis_state(1, 0);
        let one = PureState::basis_state(1, 1);
        let zo = zero.tensor(&one);
        assert!((zo.amplitudes()[1].re - 1.0).abs() < 1e-15);
    }

    #[test]
    fn partial_trace_recovers_factors() {
        let s = s_hat();
        let a = PureState::basis_state(1, 0).to_density();
        let b = PureState::bloch_eigenstate(&s, true).to_density();
        let joint = a.tensor(&b);
        let ra = joint.partial_trace(&[0]).unwrap();
        let rb = joint.partial_trace(&[1]).unwrap();
        assert!(ra.trace_distance_to(&a) < 1e-12);
        assert!(rb.trace_distance_to(&b) < 1e-12);
        let va = bloch_from_state(&ra).unwrap();
        let vb = bloch_from_state(&rb).unwrap();
        assert!(va.sub(&BlochVector::z_axis()).norm() < 1e-12);
        assert!(vb.sub(&s).norm() < 1e-12);
    }

    #[test]
    fn partial_trace_of_singlet_is_mixed() {
        let singlet = singlet_state();
        let marg = singlet.to_density().partial_trace(&[0]).unwrap();
        assert!(marg.trace_distance_to(&DensityMatrix::maximally_mixed(1)) < 1e-12);
    }

    fn singlet_state() -> PureState {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        PureState::new(CVector::from_vec(vec![
            ZERO,
            Complex64::new(r, 0.0),
            Complex64::new(-r, 0.0),
            ZERO,
        ]))
        .unwrap()
    }

    // Reduced state of the Schmidt-form state has Bloch norm cos(2 alpha).
    #[test]
    fn schmidt_state_marginal_norm() {
        let alpha = std::f64::consts::PI / 8.0;
        let basis = LocalBasis::from_direction(&s_hat());
        let psi = schmidt_state(alpha, &basis, &basis);
        let marg = psi.to_density().partial_trace(&[0]).unwrap();
        let v = bloch_from_state(&marg).unwrap();
        let expected = (2.0 * alpha).cos();
        assert!((v.norm() - expected).abs() < 1e-12);
        // direction is s
        assert!(v.normalized().unwrap().sub(&s_hat()).norm() < 1e-12);
    }

    #[test]
    fn concurrence_fixtures() {
        let basis = LocalBasis::from_direction(&BlochVector::z_axis());
        let product = schmidt_state(0.0, &basis, &basis);
        assert!(concurrence(&product).unwrap() < 1e-15);

        assert!((concurrence(&singlet_state()).unwrap() - 1.0).abs() < 1e-12);

        let alpha = std::f64::consts::PI / 8.0;
        let psi = schmidt_state(alpha, &LocalBasis::from_direction(&s_hat()), &LocalBasis::from_direction(&s_hat()));
        let c = concurrence(&psi).unwrap();
        assert!((c - (2.0 * alpha).sin()).abs() < 1e-10);
    }

    #[test]
    fn pauli_decompose_product_has_zero_excess() {
        let a = state_from_bloch(&BlochVector::new(0.3, -0.2, 0.5)).unwrap();
        let b = state_from_bloch(&BlochVector::new(-0.1, 0.6, 0.2)).unwrap();
        let dec = pauli_decompose(&a.tensor(&b)).unwrap();
        assert!(dec.excess_spectral_norm() < 1e-12);
    }

    #[test]
    fn pauli_decompose_schmidt_excess_norm() {
        let alpha = std::f64::consts::PI / 8.0;
        let basis = LocalBasis::from_direction(&s_hat());
        let psi = schmidt_state(alpha, &basis, &basis);
        let dec = pauli_decompose(&psi.to_density()).unwrap();
        assert!((dec.excess_spectral_norm() - (2.0 * alpha).sin()).abs() < 1e-10);
    }

    #[test]
    fn pauli_decompose_singlet() {
        let dec = pauli_decompose(&singlet_state().to_density()).unwrap();
        assert!(dec.t1.norm() < 1e-12);
        assert!(dec.t2.norm() < 1e-12);
        for k in 0..3 {
            for l in 0..3 {
                let expected = if k == l { -1.0 } else { 0.0 };
                assert!((dec.correlation[(k, l)] - expected).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn pauli_reassembly_round_trip() {
        let mut rng = CounterRng::new(5);
        for _ in 0..50 {
            let psi = PureState::new(CVector::from_vec(rng.haar_amplitudes(4))).unwrap();
            let rho = psi.to_density();
            let dec = pauli_decompose(&rho).unwrap();
            assert!(dec.reassemble().trace_distance_to(&rho) < 1e-12);
        }
    }

    #[test]
    fn canonical_phase() {
        let z = Complex64::from_polar(1.0, 1.2);
        let psi = PureState::normalized(CVector::from_vec(vec![
            z * 0.6,
            z * Complex64::new(0.0, 0.8),
        ]))
        .unwrap();
        let canon = psi.canonical();
        assert!(canon.amplitudes()[0].im.abs() < 1e-15);
        assert!(canon.amplitudes()[0].re > 0.0);
    }
}
