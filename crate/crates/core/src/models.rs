//! Spin Hamiltonians and closed-form reference quantities.
//!
//! Energies are in units of the transverse field (`B = 1` for the Ising ring,
//! `|𝓑| = 1` for the pumped pair) and `ħ = 1`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{herm_eig, kron, pauli, total_pauli, Axis, CMatrix, SpectralDecomposition, C64, ONE, ZERO};

pub const MAX_SPINS: usize = 6;

/// Transverse Ising ring `−B Σ σ_{l,z} − J Σ σ_{l,x} σ_{l+1,x}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimParams {
    pub spins: usize,
    pub b: f64,
    pub j: f64,
}

impl TimParams {
    pub fn new(spins: usize, b: f64, j: f64) -> Result<Self> {
        let p = Self { spins, b, j };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(2..=MAX_SPINS).contains(&self.spins) {
            return Err(Error::Parameter(format!("spin count {} outside 2..={MAX_SPINS}", self.spins)));
        }
        if !(self.b >= 0.0 && self.j >= 0.0) || !self.b.is_finite() || !self.j.is_finite() {
            return Err(Error::Parameter(format!("B = {} and J = {} must be finite and non-negative", self.b, self.j)));
        }
        Ok(())
    }
}

/// Periodic ring; for two spins the closing bond `σ_{2,x}σ_{1,x}` repeats the
/// first one, which is what gives the coupling entries `−2J` of the two-spin
/// matrix.
pub fn tim_hamiltonian(p: &TimParams) -> Result<CMatrix> {
    p.validate()?;
    let l = p.spins;
    let mut h = total_pauli(Axis::Z, l).scale_real(-p.b);
    for site in 1..=l {
        let next = site % l + 1;
        let xx = pauli(site, Axis::X, l)?.matmul(&pauli(next, Axis::X, l)?);
        h.axpy(C64::new(-p.j, 0.0), &xx);
    }
    Ok(h)
}

/// Closed-form two-spin energies `E1 ≤ E2 ≤ E3 ≤ E4` for `J ≥ 0`.
pub fn two_spin_energies(b: f64, j: f64) -> [f64; 4] {
    let r = 2.0 * (b * b + j * j).sqrt();
    [-r, -2.0 * j, 2.0 * j, r]
}

/// Parallel-pumping drive of a spin pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PumpParams {
    /// Larmor angular frequency ω_L.
    pub omega_l: f64,
    /// Longitudinal driving amplitude ω₁.
    pub omega_1: f64,
    /// Demagnetization asymmetry factor ϑ.
    pub vartheta: f64,
}

impl PumpParams {
    /// Rotating-frame field `𝓑 = −ω₁/2`.
    pub fn field(&self) -> f64 {
        -self.omega_1 / 2.0
    }

    /// Rotating-frame coupling `𝓙 = −ω₁ϑ/4`.
    pub fn coupling(&self) -> f64 {
        -self.omega_1 * self.vartheta / 4.0
    }

    /// Parameters with `|𝓑| = 1` and the requested ratio `𝓙/𝓑 = ϑ/2`.
    pub fn from_ratio(coupling_over_field: f64, omega_l: f64) -> Self {
        Self { omega_l, omega_1: 2.0, vartheta: 2.0 * coupling_over_field }
    }
}

/// Rotating-wave Hamiltonian: only the `|↑↑⟩`, `|↓↓⟩` block survives.
pub fn rwa_pump_hamiltonian(p: &PumpParams) -> CMatrix {
    let (bf, jc) = (p.field(), p.coupling());
    let mut h = CMatrix::zeros(4);
    h[(0, 0)] = C64::new(-2.0 * bf, 0.0);
    h[(3, 3)] = C64::new(2.0 * bf, 0.0);
    h[(0, 3)] = C64::new(-2.0 * jc, 0.0);
    h[(3, 0)] = C64::new(-2.0 * jc, 0.0);
    h
}

/// Lab-frame Hamiltonian `ω_z σ_z/2 + ω_L ϑ (σ_y² − σ_x²)/4` with
/// `ω_z = −ω_L + ω₁ cos(2ω_L t)` and `σ_i` summed over both spins.
pub fn lab_pump_hamiltonian(p: &PumpParams, t: f64) -> CMatrix {
    let sx = total_pauli(Axis::X, 2);
    let sy = total_pauli(Axis::Y, 2);
    let sz = total_pauli(Axis::Z, 2);
    let omega_z = -p.omega_l + p.omega_1 * (2.0 * p.omega_l * t).cos();
    let squeeze = &sy.matmul(&sy) - &sx.matmul(&sx);
    let mut h = sz.scale_real(omega_z / 2.0);
    h.axpy(C64::new(p.omega_l * p.vartheta / 4.0, 0.0), &squeeze);
    h
}

/// `e^{−βH}/Tr e^{−βH}`, shifted by the ground energy for stability.
pub fn gibbs_state(h: &CMatrix, beta: f64) -> Result<CMatrix> {
    if !(beta >= 0.0) {
        return Err(Error::Parameter(format!("β = {beta} must be non-negative")));
    }
    let spec = herm_eig(h)?;
    Ok(gibbs_from_spectrum(&spec, beta))
}

pub fn gibbs_from_spectrum(spec: &SpectralDecomposition, beta: f64) -> CMatrix {
    let e0 = spec.min_eigenvalue();
    let weights: Vec<f64> = spec.eigenvalues.iter().map(|&e| (-beta * (e - e0)).exp()).collect();
    let z: f64 = weights.iter().sum();
    let probs: Vec<f64> = weights.iter().map(|w| w / z).collect();
    spec.reconstruct_with(&probs)
}

/// Mean-field magnetization branches.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MfaMagnetization {
    Zero,
    /// `±m`, stored as the non-negative magnitude.
    PlusMinus(f64),
}

impl MfaMagnetization {
    pub fn magnitude(&self) -> f64 {
        match *self {
            MfaMagnetization::Zero => 0.0,
            MfaMagnetization::PlusMinus(m) => m,
        }
    }

    pub fn values(&self) -> Vec<f64> {
        match *self {
            MfaMagnetization::Zero => vec![0.0],
            MfaMagnetization::PlusMinus(m) => vec![m, -m],
        }
    }
}

/// Mean-field magnetization at coupling ratio `J/B`.
pub fn mfa_magnetization(j_over_b: f64) -> MfaMagnetization {
    if 2.0 * j_over_b < 1.0 {
        MfaMagnetization::Zero
    } else {
        let inv = 1.0 / (2.0 * j_over_b);
        MfaMagnetization::PlusMinus((1.0 - inv * inv).max(0.0).sqrt())
    }
}

/// Relative tolerance for treating neighbouring eigenvalues as degenerate.
pub const DEGENERACY_TOL: f64 = 1e-9;

/// Eigenbasis with a deterministic gauge.
///
/// Inside each degenerate cluster the vectors are replaced by the
/// Gram–Schmidt projections of the computational basis vectors (taken in
/// index order); every vector is then rotated so its largest-magnitude
/// component is real and positive.
pub fn energy_basis(h: &CMatrix) -> Result<SpectralDecomposition> {
    let mut spec = herm_eig(h)?;
    let n = spec.dim();
    let scale = spec.eigenvalues.iter().fold(1.0f64, |m, e| m.max(e.abs()));
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && spec.eigenvalues[end] - spec.eigenvalues[end - 1] <= DEGENERACY_TOL * scale {
            end += 1;
        }
        if end - start > 1 {
            canonicalize_cluster(&mut spec, start, end);
        }
        start = end;
    }
    for k in 0..n {
        fix_phase(&mut spec.eigenvectors, k);
    }
    Ok(spec)
}

fn canonicalize_cluster(spec: &mut SpectralDecomposition, start: usize, end: usize) {
    let n = spec.dim();
    let cluster: Vec<Vec<C64>> = (start..end).map(|k| spec.vector(k)).collect();
    let mut chosen: Vec<Vec<C64>> = Vec::new();
    for basis in 0..n {
        if chosen.len() == cluster.len() {
            break;
        }
        // project e_basis onto the cluster subspace
        let mut v = vec![ZERO; n];
        for u in &cluster {
            let coeff = u[basis].conj();
            for (vi, ui) in v.iter_mut().zip(u) {
                *vi += coeff * ui;
            }
        }
        for w in &chosen {
            let overlap: C64 = w.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
            for (vi, wi) in v.iter_mut().zip(w) {
                *vi -= overlap * wi;
            }
        }
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm > 1e-6 {
            v.iter_mut().for_each(|z| *z /= norm);
            chosen.push(v);
        }
    }
    for (offset, v) in chosen.into_iter().enumerate() {
        for (i, z) in v.into_iter().enumerate() {
            spec.eigenvectors[(i, start + offset)] = z;
        }
    }
}

fn fix_phase(v: &mut CMatrix, col: usize) {
    let n = v.dim();
    let max = (0..n).map(|i| v[(i, col)].norm()).fold(0.0, f64::max);
    let Some(pivot) = (0..n).find(|&i| v[(i, col)].norm() >= max - 1e-12) else {
        return;
    };
    let z = v[(pivot, col)];
    if z.norm() == 0.0 {
        return;
    }
    let phase = z.conj() / z.norm();
    for i in 0..n {
        v[(i, col)] *= phase;
    }
}

/// Two-spin Ising Hamiltonian at `B = 1`.
pub fn two_spin_hamiltonian(j_over_b: f64) -> Result<CMatrix> {
    tim_hamiltonian(&TimParams::new(2, 1.0, j_over_b)?)
}

/// The two lowest two-spin eigenstates at `B = 1` in the [`energy_basis`]
/// gauge.
///
/// For `J ≥ 0` they are taken in closed form,
/// `|1⟩ ∝ (1 + R)|↑↑⟩ + J|↓↓⟩` with `R = √(1 + J²)` and
/// `|2⟩ = (|↑↓⟩ + |↓↑⟩)/√2`, which stays continuous at `J = 0` where the
/// first excited level is degenerate.
pub fn two_spin_low_states(j_over_b: f64) -> Result<(Vec<C64>, Vec<C64>)> {
    if j_over_b < 0.0 || !j_over_b.is_finite() {
        let basis = energy_basis(&two_spin_hamiltonian(j_over_b)?)?;
        return Ok((basis.vector(0), basis.vector(1)));
    }
    let r = (1.0 + j_over_b * j_over_b).sqrt();
    let norm = ((1.0 + r).powi(2) + j_over_b * j_over_b).sqrt();
    let re = |x: f64| C64::new(x, 0.0);
    let ground = vec![re((1.0 + r) / norm), ZERO, ZERO, re(j_over_b / norm)];
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let excited = vec![ZERO, re(h), re(h), ZERO];
    Ok((ground, excited))
}

/// Superposition of the two lowest two-spin energy eigenstates,
/// `e^{iφ/2} cos(s/2)|1⟩ + e^{−iφ/2} sin(s/2)|2⟩`.
///
/// For `s ∈ [0, π]` the amplitudes equal `√((1 ± cos s)/2)`; negative `s`
/// gives the mirror-image state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PureClassState {
    pub s: f64,
    pub phi: f64,
    pub j_over_b: f64,
}

impl PureClassState {
    pub fn new(s: f64, phi: f64, j_over_b: f64) -> Self {
        Self { s, phi, j_over_b }
    }

    pub fn vector(&self) -> Result<Vec<C64>> {
        let (ground, excited) = two_spin_low_states(self.j_over_b)?;
        Ok(self.combine(&ground, &excited))
    }

    /// Uses the two lowest vectors of a precomputed basis.
    pub fn vector_in(&self, basis: &SpectralDecomposition) -> Vec<C64> {
        self.combine(&basis.vector(0), &basis.vector(1))
    }

    pub fn combine(&self, ground: &[C64], excited: &[C64]) -> Vec<C64> {
        let a = C64::from_polar((self.s / 2.0).cos(), self.phi / 2.0);
        let b = C64::from_polar((self.s / 2.0).sin(), -self.phi / 2.0);
        ground.iter().zip(excited).map(|(x, y)| a * x + b * y).collect()
    }

    pub fn density(&self) -> Result<CMatrix> {
        Ok(CMatrix::outer(&self.vector()?))
    }
}

pub fn pure_class_state(s: f64, phi: f64, j_over_b: f64) -> Result<Vec<C64>> {
    PureClassState::new(s, phi, j_over_b).vector()
}

/// Closed-form `⟨σ_x⟩ = 2(1 + e^{−2 asinh(J/B)})^{−1/2} sin s` on the φ = 0 class.
pub fn analytic_sigma_x(s: f64, j_over_b: f64) -> f64 {
    2.0 * (1.0 + (-2.0 * j_over_b.asinh()).exp()).powf(-0.5) * s.sin()
}

/// `⊗_l σ_{l,z}`: the mirror reflection `x → −x` applied to every spin.
pub fn mirror_operator(spins: usize) -> CMatrix {
    let mut u = CMatrix::identity(1);
    for _ in 0..spins {
        u = kron(&Axis::Z.matrix(), &u);
    }
    u
}

/// Single-spin density matrix `(I + n·σ)/2`.
pub fn bloch_density(n: [f64; 3]) -> CMatrix {
    let mut rho = CMatrix::identity(2);
    for (axis, &c) in Axis::ALL.iter().zip(&n) {
        rho.axpy(C64::new(c, 0.0), &axis.matrix());
    }
    rho.scale_real(0.5)
}

/// Product state `ρ_L ⊗ … ⊗ ρ_1` with spin `l` along `directions[l − 1]`.
pub fn product_state(directions: &[[f64; 3]]) -> CMatrix {
    let mut rho = CMatrix::identity(1);
    for n in directions {
        rho = kron(&bloch_density(*n), &rho);
    }
    rho
}

/// Spins pointing along `(cos 2π(l−1)/L, sin 2π(l−1)/L, 0)`.
pub fn ring_directions(spins: usize) -> Vec<[f64; 3]> {
    (0..spins)
        .map(|l| {
            let angle = std::f64::consts::TAU * l as f64 / spins as f64;
            [angle.cos(), angle.sin(), 0.0]
        })
        .collect()
}

/// `⟨σ_{l,x}⟩, ⟨σ_{l,y}⟩, ⟨σ_{l,z}⟩` for every spin.
pub fn bloch_vectors(rho: &CMatrix) -> Result<Vec<[f64; 3]>> {
    let spins = crate::linalg::spins_for_dim(rho.dim())?;
    (1..=spins)
        .map(|l| {
            let mut k = [0.0; 3];
            for (slot, axis) in k.iter_mut().zip(Axis::ALL) {
                *slot = pauli(l, axis, spins)?.trace_product(rho).re;
            }
            Ok(k)
        })
        .collect()
}

/// Populations `p_n = ⟨n|ρ|n⟩` in the given eigenbasis.
pub fn populations(rho: &CMatrix, basis: &SpectralDecomposition) -> Vec<f64> {
    (0..basis.dim())
        .map(|n| {
            let v = basis.vector(n);
            rho.sandwich(&v, &v).re
        })
        .collect()
}

pub fn expectation(op: &CMatrix, rho: &CMatrix) -> f64 {
    op.trace_product(rho).re
}

/// `I/d`
pub fn maximally_mixed(dim: usize) -> CMatrix {
    CMatrix::identity(dim).scale(ONE / dim as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn eq3(b: f64, j: f64) -> CMatrix {
        CMatrix::from_real(
            4,
            &[
                -2.0 * b, 0.0, 0.0, -2.0 * j, //
                0.0, 0.0, -2.0 * j, 0.0, //
                0.0, -2.0 * j, 0.0, 0.0, //
                -2.0 * j, 0.0, 0.0, 2.0 * b,
            ],
        )
    }

    #[test]
    fn two_spin_ring_matches_matrix_form() {
        let h = tim_hamiltonian(&TimParams::new(2, 1.0, 1.0).unwrap()).unwrap();
        assert_eq!(h, eq3(1.0, 1.0));
        let h = tim_hamiltonian(&TimParams::new(2, 0.7, 0.3).unwrap()).unwrap();
        assert!(h.max_abs_diff(&eq3(0.7, 0.3)) < 1e-15);
    }

    #[test]
    fn closed_form_low_states_match_energy_basis() {
        for j in [0.05, 0.5, 1.0, 2.0, 7.0] {
            let basis = energy_basis(&two_spin_hamiltonian(j).unwrap()).unwrap();
            let (g, e) = two_spin_low_states(j).unwrap();
            for (closed, numeric) in [(g, basis.vector(0)), (e, basis.vector(1))] {
                let diff = closed.iter().zip(&numeric).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
                assert!(diff < 1e-12, "J/B = {j}: {diff:e}");
            }
        }
    }

    #[test]
    fn pure_class_is_continuous_at_zero_coupling() {
        let sx = total_pauli(Axis::X, 2);
        for s in [-2.0, 0.4, 1.3] {
            let psi = pure_class_state(s, 0.0, 0.0).unwrap();
            assert!((sx.sandwich(&psi, &psi).re - analytic_sigma_x(s, 0.0)).abs() < 1e-14);
        }
    }

    #[test]
    fn two_spin_spectrum_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let b = rng.gen_range(0.0..3.0);
            let j = rng.gen_range(0.0..3.0);
            let h = tim_hamiltonian(&TimParams::new(2, b, j).unwrap()).unwrap();
            let evs = herm_eig(&h).unwrap().eigenvalues;
            for (got, want) in evs.iter().zip(two_spin_energies(b, j)) {
                assert!((got - want).abs() <= 1e-10, "B={b} J={j}: {evs:?}");
            }
        }
    }

    #[test]
    fn zero_coupling_is_diagonal() {
        let h = tim_hamiltonian(&TimParams::new(3, 1.5, 0.0).unwrap()).unwrap();
        assert!(h.is_diagonal(0.0));
        for i in 0..8usize {
            let total_z: f64 = (0..3).map(|bit| if (i >> bit) & 1 == 0 { 1.0 } else { -1.0 }).sum();
            assert_eq!(h[(i, i)].re, -1.5 * total_z);
        }
    }

    #[test]
    fn three_spin_ring_term_by_term() {
        let (b, j) = (0.8, 1.3);
        let mut oracle = CMatrix::zeros(8);
        for l in 1..=3 {
            oracle.axpy(C64::new(-b, 0.0), &pauli(l, Axis::Z, 3).unwrap());
        }
        for (l, m) in [(1, 2), (2, 3), (3, 1)] {
            let xx = pauli(l, Axis::X, 3).unwrap().matmul(&pauli(m, Axis::X, 3).unwrap());
            oracle.axpy(C64::new(-j, 0.0), &xx);
        }
        let h = tim_hamiltonian(&TimParams::new(3, b, j).unwrap()).unwrap();
        assert!(h.max_abs_diff(&oracle) < 1e-15);
    }

    #[test]
    fn rejects_negative_couplings() {
        assert!(TimParams::new(2, -1.0, 1.0).is_err());
        assert!(TimParams::new(2, 1.0, -0.1).is_err());
        assert!(TimParams::new(1, 1.0, 1.0).is_err());
    }

    #[test]
    fn mirror_symmetry_of_ring() {
        for spins in 2..=5 {
            let h = tim_hamiltonian(&TimParams::new(spins, 1.0, 0.7).unwrap()).unwrap();
            let u = mirror_operator(spins);
            assert_eq!(h.conjugate_by(&u), h);
            let basis = energy_basis(&h).unwrap();
            let sx = total_pauli(Axis::X, spins);
            for n in 0..basis.dim() {
                let v = basis.vector(n);
                assert!(sx.sandwich(&v, &v).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn rwa_entries() {
        let p = PumpParams { omega_l: 10.0, omega_1: 2.0, vartheta: 0.2 };
        assert_eq!(p.field(), -1.0);
        assert!((p.coupling() + 0.1).abs() < 1e-15);
        let h = rwa_pump_hamiltonian(&p);
        assert_eq!(h[(0, 0)].re, 2.0);
        assert_eq!(h[(3, 3)].re, -2.0);
        assert!((h[(0, 3)].re - 0.2).abs() < 1e-15);
        assert_eq!(h[(0, 3)], h[(3, 0)]);
        assert!(rwa_pump_hamiltonian(&PumpParams { vartheta: 0.0, ..p }).is_diagonal(0.0));
        assert_eq!(rwa_pump_hamiltonian(&PumpParams { omega_1: 0.0, ..p }), CMatrix::zeros(4));
    }

    #[test]
    fn rwa_is_ising_with_central_block_removed() {
        let p = PumpParams { omega_l: 5.0, omega_1: -3.0, vartheta: 0.4 };
        // 𝓑 > 0 here, so the Ising builder's non-negativity holds
        let mut ising = tim_hamiltonian(&TimParams::new(2, p.field(), p.coupling()).unwrap()).unwrap();
        for i in 1..3 {
            for j in 1..3 {
                ising[(i, j)] = ZERO;
            }
        }
        assert!(ising.max_abs_diff(&rwa_pump_hamiltonian(&p)) < 1e-15);
    }

    #[test]
    fn lab_frame_hamiltonian() {
        let p = PumpParams { omega_l: 3.0, omega_1: 0.5, vartheta: 0.1 };
        let period = PI / p.omega_l;
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..5 {
            let t = rng.gen_range(0.0..10.0);
            let h = lab_pump_hamiltonian(&p, t);
            assert!(h.max_abs_diff(&lab_pump_hamiltonian(&p, t + period)) < 1e-12);
            assert!(h.hermiticity_error() <= 1e-14);
        }
        let flat = PumpParams { vartheta: 0.0, ..p };
        let t = 0.37;
        let omega_z = -flat.omega_l + flat.omega_1 * (2.0 * flat.omega_l * t).cos();
        let expect = total_pauli(Axis::Z, 2).scale_real(omega_z / 2.0);
        assert!(lab_pump_hamiltonian(&flat, t).max_abs_diff(&expect) < 1e-15);
    }

    #[test]
    fn gibbs_state_limits() {
        let h = eq3(1.0, 1.0);
        let hot = gibbs_state(&h, 0.0).unwrap();
        assert!(hot.max_abs_diff(&CMatrix::identity(4).scale_real(0.25)) < 1e-14);
        let rho = gibbs_state(&h, 2.0).unwrap();
        assert!((rho.trace().re - 1.0).abs() < 1e-14);
        assert!(rho.commutator(&h).max_abs() <= 1e-12);
        // βB = 50: excited weights bounded by e^{−β(E2−E1)} with E2−E1 = 2√2 − 2
        let cold = gibbs_state(&h, 50.0).unwrap();
        let basis = energy_basis(&h).unwrap();
        let p = populations(&cold, &basis);
        assert!(p[0] >= 0.999);
        assert!(3.0 * (-50.0 * (2.0 * 2f64.sqrt() - 2.0)).exp() < 1e-3);
    }

    #[test]
    fn mfa_branches() {
        assert_eq!(mfa_magnetization(0.25), MfaMagnetization::Zero);
        assert_eq!(mfa_magnetization(0.5).magnitude(), 0.0);
        let m = mfa_magnetization(1.0).magnitude();
        assert!((m - 3f64.sqrt() / 2.0).abs() < 1e-15);
        assert_eq!(mfa_magnetization(1.0).values(), vec![m, -m]);
    }

    #[test]
    fn pure_class_endpoints() {
        let basis = energy_basis(&two_spin_hamiltonian(1.0).unwrap()).unwrap();
        let g = basis.vector(0);
        let e = basis.vector(1);
        let fidelity = |a: &[C64], b: &[C64]| a.iter().zip(b).map(|(x, y)| x.conj() * y).sum::<C64>().norm();
        let psi0 = pure_class_state(0.0, 0.3, 1.0).unwrap();
        assert!((fidelity(&psi0, &g) - 1.0).abs() < 1e-12);
        let psi_pi = pure_class_state(PI, 0.3, 1.0).unwrap();
        assert!((fidelity(&psi_pi, &e) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pure_class_unit_norm() {
        let basis = energy_basis(&two_spin_hamiltonian(0.6).unwrap()).unwrap();
        for i in 0..10 {
            for k in 0..10 {
                let s = -PI + 2.0 * PI * i as f64 / 9.0;
                let phi = -PI + 2.0 * PI * k as f64 / 9.0;
                let v = PureClassState::new(s, phi, 0.6).vector_in(&basis);
                let norm: f64 = v.iter().map(|z| z.norm_sqr()).sum();
                assert!((norm - 1.0).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn analytic_sigma_x_matches_expectation() {
        assert_eq!(analytic_sigma_x(0.0, 1.0), 0.0);
        assert!(analytic_sigma_x(PI, 1.0).abs() < 1e-15);
        let psi = pure_class_state(PI / 2.0, 0.0, 1.0).unwrap();
        let direct = total_pauli(Axis::X, 2).sandwich(&psi, &psi).re;
        assert!((direct - analytic_sigma_x(PI / 2.0, 1.0)).abs() <= 1e-10);
    }

    #[test]
    fn energy_basis_degenerate_cluster_is_computational() {
        // J = 0: E2 = E3 = 0 spanned by |01⟩, |10⟩
        let basis = energy_basis(&two_spin_hamiltonian(0.0).unwrap()).unwrap();
        let v1 = basis.vector(1);
        let v2 = basis.vector(2);
        assert!((v1[1] - ONE).norm() < 1e-12);
        assert!((v2[2] - ONE).norm() < 1e-12);
    }

    #[test]
    fn product_state_bloch_vectors() {
        let dirs = ring_directions(5);
        let rho = product_state(&dirs);
        let k = bloch_vectors(&rho).unwrap();
        for (got, want) in k.iter().zip(&dirs) {
            for a in 0..3 {
                assert!((got[a] - want[a]).abs() < 1e-12);
            }
        }
    }
}
