//! Dense complex linear algebra for spin registers of up to six qubits.
//!
//! Basis convention: spin 1 is the least significant qubit, so a basis index
//! `i` encodes spin `l` in bit `l - 1`, and bit value 0 is the `σz = +1` state.
//! Multi-spin operators are therefore `kron(op_L, ..., op_2, op_1)`.

use std::fmt;
use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Sub, SubAssign};

use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Square complex matrix, row-major.
#[derive(Clone, PartialEq)]
pub struct CMatrix {
    dim: usize,
    data: Vec<C64>,
}

impl fmt::Debug for CMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "CMatrix({}x{}) [", self.dim, self.dim)?;
        for i in 0..self.dim {
            write!(f, "  ")?;
            for j in 0..self.dim {
                let z = self[(i, j)];
                write!(f, "{:+.6}{:+.6}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl CMatrix {
    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1, "matrix dimension must be positive");
        Self { dim, data: vec![ZERO; dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = ONE;
        }
        m
    }

    /// Builds a matrix from row-major entries. Panics if `data` is not square.
    pub fn from_vec(dim: usize, data: Vec<C64>) -> Self {
        assert_eq!(data.len(), dim * dim, "data length does not match dim²");
        assert!(dim >= 1);
        Self { dim, data }
    }

    pub fn from_real(dim: usize, data: &[f64]) -> Self {
        Self::from_vec(dim, data.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = C64::new(d, 0.0);
        }
        m
    }

    /// `|ψ⟩⟨ψ|`
    pub fn outer(psi: &[C64]) -> Self {
        let dim = psi.len();
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                m[(i, j)] = psi[i] * psi[j].conj();
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn column(&self, j: usize) -> Vec<C64> {
        (0..self.dim).map(|i| self[(i, j)]).collect()
    }

    pub fn adjoint(&self) -> Self {
        let n = self.dim;
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m.data[j * n + i] = self.data[i * n + j].conj();
            }
        }
        m
    }

    pub fn matmul(&self, other: &CMatrix) -> CMatrix {
        assert_eq!(self.dim, other.dim, "dimension mismatch in matmul");
        let n = self.dim;
        let mut out = vec![ZERO; n * n];
        for i in 0..n {
            let row = &mut out[i * n..(i + 1) * n];
            for k in 0..n {
                let a = self.data[i * n + k];
                if a == ZERO {
                    continue;
                }
                let brow = &other.data[k * n..(k + 1) * n];
                for (o, b) in row.iter_mut().zip(brow) {
                    *o += a * b;
                }
            }
        }
        CMatrix { dim: n, data: out }
    }

    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(v.len(), self.dim);
        let n = self.dim;
        (0..n)
            .map(|i| self.data[i * n..(i + 1) * n].iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `⟨u|A|v⟩`
    pub fn sandwich(&self, u: &[C64], v: &[C64]) -> C64 {
        let av = self.apply(v);
        u.iter().zip(&av).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|i| self[(i, i)]).sum()
    }

    /// `Tr(A·B)` without forming the product.
    pub fn trace_product(&self, other: &CMatrix) -> C64 {
        assert_eq!(self.dim, other.dim);
        let n = self.dim;
        let mut acc = ZERO;
        for i in 0..n {
            for k in 0..n {
                acc += self.data[i * n + k] * other.data[k * n + i];
            }
        }
        acc
    }

    pub fn scale(&self, s: C64) -> CMatrix {
        CMatrix { dim: self.dim, data: self.data.iter().map(|z| z * s).collect() }
    }

    pub fn scale_real(&self, s: f64) -> CMatrix {
        CMatrix { dim: self.dim, data: self.data.iter().map(|z| z * s).collect() }
    }

    /// `self += s·other`
    pub fn axpy(&mut self, s: C64, other: &CMatrix) {
        assert_eq!(self.dim, other.dim);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
    }

    /// `[A, B] = AB − BA`
    pub fn commutator(&self, other: &CMatrix) -> CMatrix {
        &self.matmul(other) - &other.matmul(self)
    }

    /// `U·A·U†`
    pub fn conjugate_by(&self, u: &CMatrix) -> CMatrix {
        u.matmul(self).matmul(&u.adjoint())
    }

    /// `(A + A†)/2`
    pub fn hermitian_part(&self) -> CMatrix {
        let n = self.dim;
        let mut m = self.clone();
        for i in 0..n {
            m.data[i * n + i] = C64::new(self.data[i * n + i].re, 0.0);
            for j in (i + 1)..n {
                let z = 0.5 * (self.data[i * n + j] + self.data[j * n + i].conj());
                m.data[i * n + j] = z;
                m.data[j * n + i] = z.conj();
            }
        }
        m
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs_diff(&self, other: &CMatrix) -> f64 {
        assert_eq!(self.dim, other.dim);
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    /// `‖A − A†‖_max`
    pub fn hermiticity_error(&self) -> f64 {
        let n = self.dim;
        let mut err: f64 = 0.0;
        for i in 0..n {
            for j in i..n {
                err = err.max((self.data[i * n + j] - self.data[j * n + i].conj()).norm());
            }
        }
        err
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_error() <= tol
    }

    pub fn is_diagonal(&self, tol: f64) -> bool {
        let n = self.dim;
        (0..n).all(|i| (0..n).all(|j| i == j || self.data[i * n + j].norm() <= tol))
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.dim + j]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.dim + j]
    }
}

impl Add<&CMatrix> for &CMatrix {
    type Output = CMatrix;
    fn add(self, rhs: &CMatrix) -> CMatrix {
        assert_eq!(self.dim, rhs.dim);
        CMatrix { dim: self.dim, data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect() }
    }
}

impl Sub<&CMatrix> for &CMatrix {
    type Output = CMatrix;
    fn sub(self, rhs: &CMatrix) -> CMatrix {
        assert_eq!(self.dim, rhs.dim);
        CMatrix { dim: self.dim, data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect() }
    }
}

impl AddAssign<&CMatrix> for CMatrix {
    fn add_assign(&mut self, rhs: &CMatrix) {
        self.axpy(ONE, rhs);
    }
}

impl SubAssign<&CMatrix> for CMatrix {
    fn sub_assign(&mut self, rhs: &CMatrix) {
        self.axpy(-ONE, rhs);
    }
}

impl Mul<&CMatrix> for &CMatrix {
    type Output = CMatrix;
    fn mul(self, rhs: &CMatrix) -> CMatrix {
        self.matmul(rhs)
    }
}

impl Mul<f64> for &CMatrix {
    type Output = CMatrix;
    fn mul(self, rhs: f64) -> CMatrix {
        self.scale_real(rhs)
    }
}

impl Mul<C64> for &CMatrix {
    type Output = CMatrix;
    fn mul(self, rhs: C64) -> CMatrix {
        self.scale(rhs)
    }
}

/// Kronecker product: `kron(A,B)[(i·dB+k),(j·dB+l)] = A[i,j]·B[k,l]`.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (da, db) = (a.dim, b.dim);
    let n = da * db;
    let mut out = CMatrix::zeros(n);
    for i in 0..da {
        for j in 0..da {
            let aij = a[(i, j)];
            if aij == ZERO {
                continue;
            }
            for k in 0..db {
                for l in 0..db {
                    out[(i * db + k, j * db + l)] = aij * b[(k, l)];
                }
            }
        }
    }
    out
}

pub fn kron_vec(a: &[C64], b: &[C64]) -> Vec<C64> {
    a.iter().flat_map(|x| b.iter().map(move |y| x * y)).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    /// Single-qubit Pauli matrix in the `{σz=+1, σz=−1}` basis.
    pub fn matrix(self) -> CMatrix {
        match self {
            Axis::X => CMatrix::from_real(2, &[0.0, 1.0, 1.0, 0.0]),
            Axis::Y => CMatrix::from_vec(2, vec![ZERO, -I, I, ZERO]),
            Axis::Z => CMatrix::from_real(2, &[1.0, 0.0, 0.0, -1.0]),
        }
    }
}

/// Places a single-qubit operator on spin `l` (1-based) of an `spins`-spin register.
pub fn embed_single(op: &CMatrix, l: usize, spins: usize) -> Result<CMatrix> {
    if op.dim() != 2 {
        return Err(Error::Dimension(format!("single-spin operator must be 2x2, got {}", op.dim())));
    }
    if l == 0 || l > spins {
        return Err(Error::SpinIndex { index: l, spins });
    }
    let mut out = CMatrix::identity(1);
    for slot in (1..=spins).rev() {
        let factor = if slot == l { op.clone() } else { CMatrix::identity(2) };
        out = kron(&out, &factor);
    }
    Ok(out)
}

/// `σ_{l,axis}` on an `spins`-spin register.
pub fn pauli(l: usize, axis: Axis, spins: usize) -> Result<CMatrix> {
    embed_single(&axis.matrix(), l, spins)
}

/// Sum of `σ_{l,axis}` over every spin.
pub fn total_pauli(axis: Axis, spins: usize) -> CMatrix {
    let mut acc = CMatrix::zeros(1 << spins);
    for l in 1..=spins {
        acc += &pauli(l, axis, spins).expect("index in range");
    }
    acc
}

pub(crate) fn spins_for_dim(dim: usize) -> Result<usize> {
    if dim.is_power_of_two() && dim >= 2 {
        Ok(dim.trailing_zeros() as usize)
    } else {
        Err(Error::Dimension(format!("dimension {dim} is not a power of two ≥ 2")))
    }
}

/// Reduced matrix on the spins in `keep` (1-based, strictly ascending).
///
/// The kept spins retain their relative significance: `keep[0]` becomes the
/// least significant qubit of the result.
pub fn partial_trace(rho: &CMatrix, keep: &[usize]) -> Result<CMatrix> {
    let spins = spins_for_dim(rho.dim())?;
    validate_keep(keep, spins)?;
    let traced: Vec<usize> = (1..=spins).filter(|l| !keep.contains(l)).collect();
    let dk = 1usize << keep.len();
    let mut out = CMatrix::zeros(dk);
    let full_index = |kept_bits: usize, env: usize| -> usize {
        let mut idx = 0usize;
        for (pos, &l) in keep.iter().enumerate() {
            idx |= ((kept_bits >> pos) & 1) << (l - 1);
        }
        for (pos, &l) in traced.iter().enumerate() {
            idx |= ((env >> pos) & 1) << (l - 1);
        }
        idx
    };
    for env in 0..(1usize << traced.len()) {
        for i in 0..dk {
            let fi = full_index(i, env);
            for j in 0..dk {
                out[(i, j)] += rho[(fi, full_index(j, env))];
            }
        }
    }
    Ok(out)
}

fn validate_keep(keep: &[usize], spins: usize) -> Result<()> {
    if keep.is_empty() {
        return Err(Error::IndexSet("keep set is empty".into()));
    }
    if keep.iter().any(|&l| l == 0 || l > spins) {
        return Err(Error::IndexSet(format!("keep set {keep:?} out of range 1..={spins}")));
    }
    if keep.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::IndexSet(format!("keep set {keep:?} is not strictly ascending")));
    }
    Ok(())
}

/// Two-qubit SWAP in the 4-dim pair space.
pub fn swap_gate() -> CMatrix {
    CMatrix::from_real(
        4,
        &[
            1.0, 0.0, 0.0, 0.0, //
            0.0, 0.0, 1.0, 0.0, //
            0.0, 1.0, 0.0, 0.0, //
            0.0, 0.0, 0.0, 1.0,
        ],
    )
}

/// Lifts a pair operator to the full register; the adjoint of
/// [`partial_trace`] onto the pair.
///
/// `m` is expressed with spin `pair.0` as its least significant qubit, so a
/// descending pair is handled by a SWAP conjugation.
pub fn embed_pair(m: &CMatrix, pair: (usize, usize), spins: usize) -> Result<CMatrix> {
    let (a, b) = pair;
    if m.dim() != 4 {
        return Err(Error::Dimension(format!("pair operator must be 4x4, got {}", m.dim())));
    }
    if a == b || a == 0 || b == 0 || a > spins || b > spins {
        return Err(Error::Pair { a, b, spins });
    }
    let (lo, hi, m) = if a < b { (a, b, m.clone()) } else { (b, a, m.conjugate_by(&swap_gate())) };
    let dim = 1usize << spins;
    let mut out = CMatrix::zeros(dim);
    let pair_mask = (1usize << (lo - 1)) | (1usize << (hi - 1));
    let pair_bits = |idx: usize| ((idx >> (lo - 1)) & 1) | (((idx >> (hi - 1)) & 1) << 1);
    for i in 0..dim {
        let env_i = i & !pair_mask;
        let pi = pair_bits(i);
        for j in 0..dim {
            if j & !pair_mask != env_i {
                continue;
            }
            out[(i, j)] = m[(pi, pair_bits(j))];
        }
    }
    Ok(out)
}

/// Eigenvalues (ascending) and unitary eigenvector columns of a Hermitian matrix.
#[derive(Clone, Debug)]
pub struct SpectralDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: CMatrix,
}

impl SpectralDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn vector(&self, n: usize) -> Vec<C64> {
        self.eigenvectors.column(n)
    }

    /// `V·diag(f(λ))·V†`
    pub fn apply_fn(&self, f: impl Fn(f64) -> f64) -> CMatrix {
        let values: Vec<f64> = self.eigenvalues.iter().map(|&x| f(x)).collect();
        self.reconstruct_with(&values)
    }

    pub fn reconstruct(&self) -> CMatrix {
        self.reconstruct_with(&self.eigenvalues)
    }

    pub fn reconstruct_with(&self, values: &[f64]) -> CMatrix {
        let n = self.dim();
        let v = &self.eigenvectors;
        let mut out = CMatrix::zeros(n);
        for i in 0..n {
            for j in i..n {
                let mut acc = ZERO;
                for (k, &lam) in values.iter().enumerate() {
                    if lam != 0.0 {
                        acc += v[(i, k)] * v[(j, k)].conj() * lam;
                    }
                }
                out[(i, j)] = acc;
                out[(j, i)] = acc.conj();
            }
            out[(i, i)] = C64::new(out[(i, i)].re, 0.0);
        }
        out
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues.first().copied().unwrap_or(0.0)
    }
}

pub const JACOBI_MAX_SWEEPS: usize = 100;
pub const JACOBI_OFFDIAG_TARGET: f64 = 1e-13;
pub const HERMITIAN_INPUT_TOL: f64 = 1e-10;

/// Cyclic Jacobi eigendecomposition of a Hermitian matrix.
pub fn herm_eig(a: &CMatrix) -> Result<SpectralDecomposition> {
    herm_eig_from(a, None)
}

/// Jacobi eigendecomposition started from an approximate eigenbasis `guess`.
///
/// With a good guess (the previous step's eigenvectors during integration)
/// the rotated matrix is nearly diagonal and one or two sweeps suffice.
pub fn herm_eig_from(a: &CMatrix, guess: Option<&CMatrix>) -> Result<SpectralDecomposition> {
    let herm_err = a.hermiticity_error();
    let scale = a.max_abs().max(1.0);
    if herm_err > HERMITIAN_INPUT_TOL * scale {
        return Err(Error::NotHermitian(herm_err));
    }
    let n = a.dim();
    let (mut m, mut v) = match guess {
        Some(g) if g.dim() == n => (g.adjoint().matmul(a).matmul(g).hermitian_part(), g.clone()),
        _ => (a.hermitian_part(), CMatrix::identity(n)),
    };
    let total = m.frobenius_norm();
    let target = JACOBI_OFFDIAG_TARGET * total.max(f64::MIN_POSITIVE);

    let mut converged = false;
    for _sweep in 0..JACOBI_MAX_SWEEPS {
        if off_diagonal_norm(&m) <= target {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                jacobi_rotate(&mut m, &mut v, p, q);
            }
        }
    }
    if !converged && off_diagonal_norm(&m) > target {
        return Err(Error::NoConvergence { sweeps: JACOBI_MAX_SWEEPS, residual: off_diagonal_norm(&m) });
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| m[(x, x)].re.total_cmp(&m[(y, y)].re));
    let eigenvalues = order.iter().map(|&k| m[(k, k)].re).collect();
    let mut eigenvectors = CMatrix::zeros(n);
    for (col, &k) in order.iter().enumerate() {
        for i in 0..n {
            eigenvectors[(i, col)] = v[(i, k)];
        }
    }
    Ok(SpectralDecomposition { eigenvalues, eigenvectors })
}

fn off_diagonal_norm(m: &CMatrix) -> f64 {
    let n = m.dim();
    let mut acc = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            acc += 2.0 * m[(i, j)].norm_sqr();
        }
    }
    acc.sqrt()
}

/// Annihilates `m[p,q]` with `m ← J†·m·J`, `v ← v·J`.
fn jacobi_rotate(m: &mut CMatrix, v: &mut CMatrix, p: usize, q: usize) {
    let apq = m[(p, q)];
    let mag = apq.norm();
    if mag == 0.0 {
        return;
    }
    let app = m[(p, p)].re;
    let aqq = m[(q, q)].re;
    // Skip rotations that cannot change the diagonal in floating point.
    if mag < 1e-300 || (app.abs() + aqq.abs() > 0.0 && mag <= f64::EPSILON * 1e-3 * (app.abs() + aqq.abs())) {
        m[(p, q)] = ZERO;
        m[(q, p)] = ZERO;
        return;
    }
    let phase = apq / mag;
    let theta = (aqq - app) / (2.0 * mag);
    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
    let t = if theta == 0.0 { 1.0 } else { t };
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;
    // J restricted to (p,q): [[c, s], [−s·e^{−iθ}, c·e^{−iθ}]]
    let ph_conj = phase.conj();
    let n = m.dim();

    for k in 0..n {
        let mkp = m[(k, p)];
        let mkq = m[(k, q)];
        m[(k, p)] = mkp * c - mkq * ph_conj * s;
        m[(k, q)] = mkp * s + mkq * ph_conj * c;
    }
    for k in 0..n {
        let mpk = m[(p, k)];
        let mqk = m[(q, k)];
        m[(p, k)] = mpk * c - mqk * phase * s;
        m[(q, k)] = mpk * s + mqk * phase * c;
    }
    m[(p, q)] = ZERO;
    m[(q, p)] = ZERO;
    m[(p, p)] = C64::new(app - t * mag, 0.0);
    m[(q, q)] = C64::new(aqq + t * mag, 0.0);

    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = vkp * c - vkq * ph_conj * s;
        v[(k, q)] = vkp * s + vkq * ph_conj * c;
    }
}

pub const DEFAULT_LOG_FLOOR: f64 = 1e-12;

/// Eigenvalues below this multiple of `−ε` are treated as corruption rather
/// than roundoff. Matches the integrator's PSD-repair trigger.
pub const NEGATIVE_EIGENVALUE_FACTOR: f64 = 10.0;

/// `V·diag(log max(p_i, ε))·V†` in the eigenbasis of `rho`.
pub fn matrix_log_floored(rho: &CMatrix, eps: f64) -> Result<CMatrix> {
    let spec = herm_eig(rho)?;
    log_floored_from_spectrum(&spec, eps)
}

pub fn log_floored_from_spectrum(spec: &SpectralDecomposition, eps: f64) -> Result<CMatrix> {
    let min = spec.min_eigenvalue();
    if min < -NEGATIVE_EIGENVALUE_FACTOR * eps {
        return Err(Error::NegativeEigenvalue { value: min, floor: eps });
    }
    Ok(spec.apply_fn(|p| p.max(eps).ln()))
}

/// `Σ log max(p_i, ε)`, the floored `log det`.
pub fn log_det_floored(spec: &SpectralDecomposition, eps: f64) -> f64 {
    spec.eigenvalues.iter().map(|&p| p.max(eps).ln()).sum()
}
