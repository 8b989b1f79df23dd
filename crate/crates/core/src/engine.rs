//! Nonlinear master equation
//!
//! ```text
//! dρ/dt = i[ρ, H] − Θρ − ρΘ + 2⟨Θ⟩ρ,    Θ = γ_H Q_H + γ_D Q_D,
//! ```
//!
//! with `Q_H = βH + log ρ`, its adaptive integration, and classification of
//! the long-time behaviour.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::disentangle::{pair_kernel, PairTopology, Quantifier};
use crate::error::{Error, Result};
use crate::linalg::{
    embed_pair, herm_eig, herm_eig_from, log_det_floored, log_floored_from_spectrum, spins_for_dim, total_pauli,
    Axis, CMatrix, SpectralDecomposition, C64, DEFAULT_LOG_FLOOR, I, NEGATIVE_EIGENVALUE_FACTOR,
};
use crate::models::bloch_vectors;

/// Rates and numerical settings, in units `ħ = 1` and unit energy scale.
///
/// Rates enter only through the dimensionless groups `g_h = ħγ_H/B`,
/// `g_d = ħγ_Dβ⁻¹/B²` and `theta_t = βB`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolutionParams {
    pub g_h: f64,
    pub g_d: f64,
    #[serde(default = "EvolutionParams::default_theta_t")]
    pub theta_t: f64,
    #[serde(default = "EvolutionParams::default_eps_floor")]
    pub eps_floor: f64,
    #[serde(default = "EvolutionParams::default_tol_abs")]
    pub tol_abs: f64,
    #[serde(default = "EvolutionParams::default_tol_rel")]
    pub tol_rel: f64,
    /// Trailing window for the fixed-point test; `5/γ_min` when absent.
    #[serde(default)]
    pub t_steady: Option<f64>,
    #[serde(default = "EvolutionParams::default_norm_tol")]
    pub norm_tol: f64,
}

impl Default for EvolutionParams {
    fn default() -> Self {
        Self {
            g_h: 50.0,
            g_d: 100.0,
            theta_t: Self::default_theta_t(),
            eps_floor: Self::default_eps_floor(),
            tol_abs: Self::default_tol_abs(),
            tol_rel: Self::default_tol_rel(),
            t_steady: None,
            norm_tol: Self::default_norm_tol(),
        }
    }
}

impl EvolutionParams {
    fn default_theta_t() -> f64 {
        10.0
    }
    fn default_eps_floor() -> f64 {
        DEFAULT_LOG_FLOOR
    }
    fn default_tol_abs() -> f64 {
        1e-12
    }
    fn default_tol_rel() -> f64 {
        1e-10
    }
    fn default_norm_tol() -> f64 {
        1e-7
    }

    pub fn new(g_h: f64, g_d: f64, theta_t: f64) -> Self {
        Self { g_h, g_d, theta_t, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, what: String| if ok { Ok(()) } else { Err(Error::Parameter(what)) };
        check(self.g_h >= 0.0 && self.g_h.is_finite(), format!("g_h = {} must be ≥ 0", self.g_h))?;
        check(self.g_d >= 0.0 && self.g_d.is_finite(), format!("g_d = {} must be ≥ 0", self.g_d))?;
        check(self.theta_t > 0.0 && self.theta_t.is_finite(), format!("theta_t = {} must be > 0", self.theta_t))?;
        check(self.eps_floor > 0.0 && self.eps_floor < 1e-3, format!("eps_floor = {} must be in (0, 1e-3)", self.eps_floor))?;
        check(self.tol_abs > 0.0 && self.tol_rel >= 0.0, "integrator tolerances must be positive".into())?;
        check(self.norm_tol > 0.0, format!("norm_tol = {} must be > 0", self.norm_tol))?;
        if let Some(w) = self.t_steady {
            check(w > 0.0, format!("t_steady = {w} must be > 0"))?;
        }
        Ok(())
    }

    pub fn gamma_h(&self) -> f64 {
        self.g_h
    }

    /// `γ_D = g_d·βB`, so that `ħγ_Dβ⁻¹/B² = g_d`.
    pub fn gamma_d(&self) -> f64 {
        self.g_d * self.theta_t
    }

    pub fn beta(&self) -> f64 {
        self.theta_t
    }

    /// Landscape ratio `γ_D/(2γ_H Bβ) = g_d/(2g_h)`.
    pub fn landscape_ratio(&self) -> f64 {
        self.gamma_d() / (2.0 * self.gamma_h() * self.beta())
    }

    pub fn steady_window(&self) -> f64 {
        self.t_steady.unwrap_or_else(|| {
            let gmin = [self.gamma_h(), self.gamma_d()]
                .into_iter()
                .filter(|g| *g > 0.0)
                .fold(f64::INFINITY, f64::min);
            if gmin.is_finite() {
                5.0 / gmin
            } else {
                1.0
            }
        })
    }
}

/// `Q_H = βH + log ρ` (floored logarithm).
pub fn q_thermal(rho: &CMatrix, h: &CMatrix, beta: f64, eps_floor: f64) -> Result<CMatrix> {
    let spec = herm_eig(rho)?;
    q_thermal_with_spectrum(&spec, h, beta, eps_floor)
}

fn q_thermal_with_spectrum(spec: &SpectralDecomposition, h: &CMatrix, beta: f64, eps: f64) -> Result<CMatrix> {
    let mut q = log_floored_from_spectrum(spec, eps)?;
    q.axpy(C64::new(beta, 0.0), h);
    Ok(q)
}

/// `Θ = γ_H Q_H + γ_D Q_D`.
pub fn theta(
    rho: &CMatrix,
    h: &CMatrix,
    params: &EvolutionParams,
    topology: &PairTopology,
    variant: Quantifier,
) -> Result<CMatrix> {
    let spec = herm_eig(rho)?;
    assemble_theta(rho, &spec, h, params, topology, variant)
}

fn assemble_theta(
    rho: &CMatrix,
    spec: &SpectralDecomposition,
    h: &CMatrix,
    params: &EvolutionParams,
    topology: &PairTopology,
    variant: Quantifier,
) -> Result<CMatrix> {
    let dim = rho.dim();
    let mut th = CMatrix::zeros(dim);
    if params.gamma_h() > 0.0 {
        let qh = q_thermal_with_spectrum(spec, h, params.beta(), params.eps_floor)?;
        th.axpy(C64::new(params.gamma_h(), 0.0), &qh);
    }
    if params.gamma_d() > 0.0 && !topology.is_empty() {
        let spins = spins_for_dim(dim)?;
        // one marginal per pair per evaluation
        for &pair in topology.pairs() {
            let (_, kernel) = pair_kernel(rho, pair, variant)?;
            th.axpy(C64::new(params.gamma_d(), 0.0), &embed_pair(&kernel, pair, spins)?);
        }
    }
    Ok(th)
}

/// `i[ρ, H] − Θρ − ρΘ + 2Tr(Θρ)ρ` for a given Hermitian Θ.
pub fn rhs_with_theta(rho: &CMatrix, h: &CMatrix, theta: &CMatrix) -> CMatrix {
    // ρH = (Hρ)† and ρΘ = (Θρ)† for Hermitian operands
    let h_rho = h.matmul(rho);
    let theta_rho = theta.matmul(rho);
    let mean = theta_rho.trace().re;
    let n = rho.dim();
    let mut out = CMatrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            let rho_h = h_rho[(j, i)].conj();
            let rho_theta = theta_rho[(j, i)].conj();
            out[(i, j)] = I * (rho_h - h_rho[(i, j)]) - theta_rho[(i, j)] - rho_theta + 2.0 * mean * rho[(i, j)];
        }
    }
    out
}

/// Full right-hand side with Θ assembled from `ρ`.
pub fn rhs(
    rho: &CMatrix,
    h: &CMatrix,
    params: &EvolutionParams,
    topology: &PairTopology,
    variant: Quantifier,
) -> Result<CMatrix> {
    let th = theta(rho, h, params, topology, variant)?;
    Ok(rhs_with_theta(rho, h, &th))
}

/// Source of the (possibly time-dependent) Hamiltonian.
#[derive(Clone)]
pub enum HamiltonianSource {
    Static(CMatrix),
    TimeDependent(Arc<dyn Fn(f64) -> CMatrix + Send + Sync>),
}

impl HamiltonianSource {
    pub fn at(&self, t: f64) -> std::borrow::Cow<'_, CMatrix> {
        match self {
            HamiltonianSource::Static(h) => std::borrow::Cow::Borrowed(h),
            HamiltonianSource::TimeDependent(f) => std::borrow::Cow::Owned(f(t)),
        }
    }
}

impl std::fmt::Debug for HamiltonianSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            HamiltonianSource::Static(h) => f.debug_tuple("Static").field(&h.dim()).finish(),
            HamiltonianSource::TimeDependent(_) => f.write_str("TimeDependent(..)"),
        }
    }
}

/// How Θ is obtained at each evaluation.
#[derive(Clone, Debug)]
pub enum ThetaModel {
    /// Thermalization plus pairwise disentanglement, recomputed from ρ.
    Assembled { topology: PairTopology, quantifier: Quantifier },
    /// A frozen Hermitian Θ (diagnostics and identity checks).
    Fixed(CMatrix),
}

/// A fully specified master equation.
#[derive(Clone, Debug)]
pub struct MasterEquation {
    pub hamiltonian: HamiltonianSource,
    pub theta: ThetaModel,
    pub params: EvolutionParams,
}

impl MasterEquation {
    pub fn new(hamiltonian: HamiltonianSource, theta: ThetaModel, params: EvolutionParams) -> Self {
        Self { hamiltonian, theta, params }
    }

    /// Static Hamiltonian, nearest-neighbour ring topology.
    pub fn ring(h: CMatrix, params: EvolutionParams, quantifier: Quantifier) -> Result<Self> {
        let spins = spins_for_dim(h.dim())?;
        Ok(Self::new(
            HamiltonianSource::Static(h),
            ThetaModel::Assembled { topology: PairTopology::nearest_neighbor_ring(spins), quantifier },
            params,
        ))
    }

    pub fn theta_at(&self, t: f64, rho: &CMatrix, spec: &SpectralDecomposition) -> Result<CMatrix> {
        match &self.theta {
            ThetaModel::Fixed(th) => Ok(th.clone()),
            ThetaModel::Assembled { topology, quantifier } => {
                assemble_theta(rho, spec, &self.hamiltonian.at(t), &self.params, topology, *quantifier)
            }
        }
    }

    fn needs_spectrum(&self) -> bool {
        matches!(self.theta, ThetaModel::Assembled { .. }) && self.params.gamma_h() > 0.0
    }

    /// Right-hand side; `spec` must be the eigendecomposition of `rho` when
    /// thermalization is active.
    pub fn rhs_with_spectrum(&self, t: f64, rho: &CMatrix, spec: &SpectralDecomposition) -> Result<CMatrix> {
        let th = self.theta_at(t, rho, spec)?;
        Ok(rhs_with_theta(rho, &self.hamiltonian.at(t), &th))
    }

    pub fn rhs(&self, t: f64, rho: &CMatrix) -> Result<CMatrix> {
        let spec = self.spectrum(rho, None)?;
        self.rhs_with_spectrum(t, rho, &spec)
    }

    pub fn theta(&self, t: f64, rho: &CMatrix) -> Result<CMatrix> {
        let spec = self.spectrum(rho, None)?;
        self.theta_at(t, rho, &spec)
    }

    fn spectrum(&self, rho: &CMatrix, guess: Option<&CMatrix>) -> Result<SpectralDecomposition> {
        if self.needs_spectrum() {
            herm_eig_from(rho, guess)
        } else {
            Ok(SpectralDecomposition { eigenvalues: vec![], eigenvectors: CMatrix::identity(rho.dim()) })
        }
    }
}

/// Counters reported by the integrator.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntegratorStats {
    pub steps: usize,
    pub rejects: usize,
    pub repairs: usize,
    pub rhs_evals: usize,
}

impl IntegratorStats {
    pub fn repair_rate(&self) -> f64 {
        if self.steps == 0 {
            0.0
        } else {
            self.repairs as f64 / self.steps as f64
        }
    }

    pub fn merge(&mut self, other: &IntegratorStats) {
        self.steps += other.steps;
        self.rejects += other.rejects;
        self.repairs += other.repairs;
        self.rhs_evals += other.rhs_evals;
    }
}

pub const MIN_STEP: f64 = 1e-12;
/// Repair-rate ceiling; checked once a run has this many steps.
pub const MAX_REPAIR_RATE: f64 = 0.01;
/// Ratio between the repair band and the per-step accepted error bound.
pub const REPAIR_BAND_SAFETY: f64 = 10.0;
const REPAIR_CHECK_MIN_STEPS: usize = 200;

// Dormand–Prince 5(4) tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// b − b̂ (5th minus embedded 4th order weights)
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn combine(base: &CMatrix, dt: f64, terms: &[(f64, &CMatrix)]) -> CMatrix {
    let mut out = base.clone();
    for &(w, k) in terms {
        if w != 0.0 {
            out.axpy(C64::new(dt * w, 0.0), k);
        }
    }
    out
}

/// Adaptive Dormand–Prince integrator with Hermiticity, trace and
/// positivity projections after every accepted step.
pub struct Integrator<'a> {
    eq: &'a MasterEquation,
    t: f64,
    rho: CMatrix,
    spec: SpectralDecomposition,
    dt: f64,
    stats: IntegratorStats,
}

impl<'a> Integrator<'a> {
    pub fn new(eq: &'a MasterEquation, rho0: &CMatrix) -> Result<Self> {
        eq.params.validate()?;
        let rho = normalize(rho0.hermitian_part());
        let spec = eq.spectrum(&rho, None)?;
        let mut integ = Self { eq, t: 0.0, rho, spec, dt: 0.0, stats: IntegratorStats::default() };
        integ.project()?;
        let f0 = eq.rhs_with_spectrum(0.0, &integ.rho, &integ.spec)?;
        integ.stats.rhs_evals += 1;
        let scale = f0.max_abs().max(1e-3);
        integ.dt = (1e-2 / scale).clamp(1e-9, 1e-2);
        Ok(integ)
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn state(&self) -> &CMatrix {
        &self.rho
    }

    pub fn spectrum(&self) -> &SpectralDecomposition {
        &self.spec
    }

    pub fn stats(&self) -> IntegratorStats {
        self.stats
    }

    fn eval(&mut self, t: f64, y: &CMatrix, guess_from_state: bool) -> Result<CMatrix> {
        self.stats.rhs_evals += 1;
        if guess_from_state {
            return self.eq.rhs_with_spectrum(t, y, &self.spec);
        }
        let guess = if self.eq.needs_spectrum() { Some(&self.spec.eigenvectors) } else { None };
        let mut spec = self.eq.spectrum(y, guess)?;
        // Stage states of an explicit scheme are slightly indefinite near the
        // boundary of the state space; only accepted states are projected.
        spec.eigenvalues.iter_mut().for_each(|p| *p = p.max(0.0));
        self.eq.rhs_with_spectrum(t, y, &spec)
    }

    /// Attempts one step of size `dt`; returns the proposal and the error norm.
    fn try_step(&mut self, dt: f64) -> Result<(CMatrix, f64)> {
        let t = self.t;
        let y = self.rho.clone();
        let k1 = self.eval(t, &y, true)?;
        let k2 = self.eval(t + C2 * dt, &combine(&y, dt, &[(A21, &k1)]), false)?;
        let k3 = self.eval(t + C3 * dt, &combine(&y, dt, &[(A31, &k1), (A32, &k2)]), false)?;
        let k4 = self.eval(t + C4 * dt, &combine(&y, dt, &[(A41, &k1), (A42, &k2), (A43, &k3)]), false)?;
        let k5 = self.eval(t + C5 * dt, &combine(&y, dt, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]), false)?;
        let k6 = self.eval(
            t + dt,
            &combine(&y, dt, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]),
            false,
        )?;
        let y_new = combine(&y, dt, &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)]);
        let k7 = self.eval(t + dt, &y_new, false)?;
        let err_vec = combine(
            &CMatrix::zeros(y.dim()),
            dt,
            &[(E1, &k1), (E3, &k3), (E4, &k4), (E5, &k5), (E6, &k6), (E7, &k7)],
        );
        let p = &self.eq.params;
        let mut err: f64 = 0.0;
        for ((e, a), b) in err_vec.as_slice().iter().zip(y.as_slice()).zip(y_new.as_slice()) {
            let sc = p.tol_abs + p.tol_rel * a.norm().max(b.norm());
            err = err.max(e.norm() / sc);
        }
        Ok((y_new, err))
    }

    /// Advances exactly to `t_target`.
    pub fn advance_to(&mut self, t_target: f64) -> Result<()> {
        while self.t < t_target {
            let remaining = t_target - self.t;
            let last = self.dt >= remaining;
            let dt = if last { remaining } else { self.dt };
            if dt < MIN_STEP && !last {
                return Err(Error::StepUnderflow { t: self.t, dt });
            }
            let res = self.try_step(dt);
            match res {
                Ok((y_new, err)) if err <= 1.0 => {
                    self.t = if last { t_target } else { self.t + dt };
                    self.rho = y_new;
                    self.stats.steps += 1;
                    self.project()?;
                    let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                    // keep the controller's step when the last step was truncated
                    if !last || dt >= self.dt {
                        self.dt = dt * fac;
                    }
                }
                Ok((_, err)) => {
                    self.stats.rejects += 1;
                    self.dt = dt * (0.9 * err.powf(-0.25)).clamp(0.1, 0.9);
                }
                Err(Error::NegativeEigenvalue { .. }) | Err(Error::NoConvergence { .. }) => {
                    self.stats.rejects += 1;
                    self.dt = dt * 0.25;
                }
                Err(e) => return Err(e),
            }
            if self.dt < MIN_STEP {
                return Err(Error::StepUnderflow { t: self.t, dt: self.dt });
            }
        }
        Ok(())
    }

    /// Hermitize, renormalize, and clip negative eigenvalues when they exceed
    /// the roundoff band.
    fn project(&mut self) -> Result<()> {
        self.rho = normalize(self.rho.hermitian_part());
        let threshold = -self.repair_band();
        let guess = self.spec.eigenvectors.clone();
        let spec = herm_eig_from(&self.rho, Some(&guess))?;
        let min = spec.min_eigenvalue();
        if min < 0.0 {
            // roundoff-level negatives are flushed silently
            if min < threshold {
                self.stats.repairs += 1;
            }
            let clipped: Vec<f64> = spec.eigenvalues.iter().map(|&p| p.max(0.0)).collect();
            let total: f64 = clipped.iter().sum();
            let probs: Vec<f64> = clipped.iter().map(|p| p / total).collect();
            self.rho = spec.reconstruct_with(&probs);
            self.spec = SpectralDecomposition { eigenvalues: probs, eigenvectors: spec.eigenvectors };
        } else {
            self.spec = spec;
        }
        Ok(())
    }

    /// Negative eigenvalues smaller in magnitude than this are within the
    /// accepted local error of a step and are flushed without counting as a
    /// repair. The entrywise tolerance is summed over a row and widened by
    /// [`REPAIR_BAND_SAFETY`], since the embedded estimate is only an estimate.
    pub fn repair_band(&self) -> f64 {
        let p = &self.eq.params;
        let entry = p.tol_abs + p.tol_rel * self.rho.max_abs();
        (NEGATIVE_EIGENVALUE_FACTOR * p.eps_floor).max(REPAIR_BAND_SAFETY * self.rho.dim() as f64 * entry)
    }

    pub fn check_repair_rate(&self) -> Result<()> {
        if self.stats.steps >= REPAIR_CHECK_MIN_STEPS && self.stats.repair_rate() > MAX_REPAIR_RATE {
            return Err(Error::ExcessiveRepairs { repairs: self.stats.repairs, steps: self.stats.steps });
        }
        Ok(())
    }

    /// `‖dρ/dt‖_max` at the current state.
    pub fn residual(&mut self) -> Result<f64> {
        let f = self.eval(self.t, &self.rho.clone(), true)?;
        Ok(f.max_abs())
    }
}

fn normalize(rho: CMatrix) -> CMatrix {
    let tr = rho.trace().re;
    rho.scale_real(1.0 / tr)
}

/// What to record along a trajectory.
#[derive(Clone, Debug, Default)]
pub struct RecordOptions {
    pub record_every: f64,
    pub keep_states: bool,
    /// Pairs whose τ is tracked (not necessarily the disentangling topology).
    pub observe_pairs: Vec<(usize, usize)>,
    pub quantifier: Quantifier,
}

impl RecordOptions {
    pub fn every(record_every: f64) -> Self {
        Self { record_every, ..Self::default() }
    }
}

/// Sampled observables along an integration.
#[derive(Clone, Debug, Default)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<CMatrix>,
    /// Per sample, one Bloch vector per spin.
    pub bloch: Vec<Vec<[f64; 3]>>,
    pub sigma_x: Vec<f64>,
    pub observed_pairs: Vec<(usize, usize)>,
    /// Per sample, τ for each observed pair.
    pub tau: Vec<Vec<f64>>,
    /// `⟨U_H⟩ = ⟨H⟩ + β⁻¹⟨log ρ⟩`
    pub free_energy: Vec<f64>,
    pub purity: Vec<f64>,
    pub log_det: Vec<f64>,
    pub residual: Vec<f64>,
    pub stats: IntegratorStats,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_time(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0)
    }

    /// Total Bloch vector `Σ_l k_l` per sample.
    pub fn total_bloch(&self) -> Vec<[f64; 3]> {
        self.bloch
            .iter()
            .map(|ks| {
                let mut acc = [0.0; 3];
                for k in ks {
                    for a in 0..3 {
                        acc[a] += k[a];
                    }
                }
                acc
            })
            .collect()
    }

    fn record(&mut self, eq: &MasterEquation, integ: &mut Integrator<'_>, opts: &RecordOptions) -> Result<()> {
        let t = integ.time();
        let rho = integ.state().clone();
        let spins = spins_for_dim(rho.dim())?;
        let bloch = bloch_vectors(&rho)?;
        self.sigma_x.push(total_pauli(Axis::X, spins).trace_product(&rho).re);
        self.bloch.push(bloch);
        let taus = opts
            .observe_pairs
            .iter()
            .map(|&p| crate::disentangle::tau_pair(&rho, p, opts.quantifier))
            .collect::<Result<Vec<_>>>()?;
        self.tau.push(taus);
        let spec = herm_eig_from(&rho, Some(&integ.spectrum().eigenvectors))?;
        let eps = eq.params.eps_floor;
        let h = eq.hamiltonian.at(t);
        let entropy_term: f64 = spec.eigenvalues.iter().map(|&p| p.max(0.0) * p.max(eps).ln()).sum();
        self.free_energy.push(h.trace_product(&rho).re + entropy_term / eq.params.beta());
        self.purity.push(rho.trace_product(&rho).re);
        self.log_det.push(log_det_floored(&spec, eps));
        self.residual.push(integ.residual()?);
        self.times.push(t);
        if opts.keep_states {
            self.states.push(rho);
        }
        Ok(())
    }
}

/// Integrates from `rho0` over `[0, t_end]`, recording every `record_every`.
pub fn integrate(eq: &MasterEquation, rho0: &CMatrix, t_end: f64, opts: &RecordOptions) -> Result<Trajectory> {
    if !(t_end > 0.0) {
        return Err(Error::Parameter(format!("t_end = {t_end} must be > 0")));
    }
    let mut integ = Integrator::new(eq, rho0)?;
    let mut traj = Trajectory { observed_pairs: opts.observe_pairs.clone(), ..Trajectory::default() };
    extend(eq, &mut integ, &mut traj, t_end, opts)?;
    Ok(traj)
}

fn extend(
    eq: &MasterEquation,
    integ: &mut Integrator<'_>,
    traj: &mut Trajectory,
    t_end: f64,
    opts: &RecordOptions,
) -> Result<()> {
    let every = if opts.record_every > 0.0 { opts.record_every } else { t_end };
    if traj.is_empty() {
        traj.record(eq, integ, opts)?;
    }
    let start_index = (integ.time() / every).round() as usize;
    let n_records = (t_end / every).round() as usize;
    for k in (start_index + 1)..=n_records {
        let target = (k as f64 * every).min(t_end);
        integ.advance_to(target)?;
        traj.record(eq, integ, opts)?;
    }
    if integ.time() < t_end {
        integ.advance_to(t_end)?;
        traj.record(eq, integ, opts)?;
    }
    integ.check_repair_rate()?;
    traj.stats = integ.stats();
    Ok(())
}

/// Long-time behaviour of a trajectory.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SteadyKind {
    FixedPoint,
    LimitCycle,
    Undecided,
}

impl std::fmt::Display for SteadyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SteadyKind::FixedPoint => "fixed_point",
            SteadyKind::LimitCycle => "limit_cycle",
            SteadyKind::Undecided => "undecided",
        })
    }
}

#[derive(Clone, Debug)]
pub struct SteadyStateResult {
    pub kind: SteadyKind,
    pub final_state: Option<CMatrix>,
    pub period: Option<f64>,
    /// Total Bloch vector over one detected period.
    pub cycle_samples: Vec<[f64; 3]>,
    pub residual: f64,
    pub amplitude: f64,
    pub peak_correlation: f64,
}

pub const CYCLE_CORRELATION: f64 = 0.99;
pub const CYCLE_AMPLITUDE_FLOOR: f64 = 1e-3;

/// Windows used by [`classify_asymptotics`].
#[derive(Clone, Copy, Debug)]
pub struct ClassifyOptions {
    /// Trailing window over which `‖dρ/dt‖_max ≤ norm_tol` must hold.
    pub steady_window: f64,
    /// Trailing window searched for periodicity.
    pub cycle_window: f64,
}

impl ClassifyOptions {
    pub fn for_params(params: &EvolutionParams, t_end: f64) -> Self {
        Self { steady_window: params.steady_window(), cycle_window: 0.5 * t_end }
    }
}

pub fn classify_asymptotics(traj: &Trajectory, params: &EvolutionParams, opts: &ClassifyOptions) -> SteadyStateResult {
    let final_state = traj.states.last().cloned();
    let residual = traj.residual.last().copied().unwrap_or(f64::INFINITY);
    let t_final = traj.final_time();
    let in_window = |t: f64, w: f64| t >= t_final - w - 1e-12;

    let steady_ok = traj
        .times
        .iter()
        .zip(&traj.residual)
        .filter(|(t, _)| in_window(**t, opts.steady_window))
        .all(|(_, r)| *r <= params.norm_tol);
    let series: Vec<Vec<f64>> = {
        let idx: Vec<usize> = (0..traj.len()).filter(|&i| in_window(traj.times[i], opts.cycle_window)).collect();
        let spins = traj.bloch.first().map_or(0, |b| b.len());
        let mut comps = Vec::new();
        for l in 0..spins {
            for a in 0..3 {
                comps.push(idx.iter().map(|&i| traj.bloch[i][l][a]).collect());
            }
        }
        comps
    };
    let amplitude = series
        .iter()
        .map(|s| s.iter().copied().fold(f64::NEG_INFINITY, f64::max) - s.iter().copied().fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max);

    if steady_ok && !traj.is_empty() {
        return SteadyStateResult {
            kind: SteadyKind::FixedPoint,
            final_state,
            period: None,
            cycle_samples: vec![],
            residual,
            amplitude,
            peak_correlation: f64::NAN,
        };
    }

    let dt = if traj.len() >= 2 { traj.times[1] - traj.times[0] } else { 0.0 };
    let detection = if amplitude >= CYCLE_AMPLITUDE_FLOOR && dt > 0.0 { detect_period(&series) } else { None };
    match detection {
        Some((lag, corr)) => {
            let period = lag * dt;
            let n_period = lag.round() as usize;
            let tb = traj.total_bloch();
            let start = tb.len().saturating_sub(n_period + 1);
            SteadyStateResult {
                kind: SteadyKind::LimitCycle,
                final_state,
                period: Some(period),
                cycle_samples: tb[start..].to_vec(),
                residual,
                amplitude,
                peak_correlation: corr,
            }
        }
        None => SteadyStateResult {
            kind: SteadyKind::Undecided,
            final_state,
            period: None,
            cycle_samples: vec![],
            residual,
            amplitude,
            peak_correlation: f64::NAN,
        },
    }
}

/// Pooled Pearson autocorrelation of several component series at `lag`.
pub fn pooled_autocorrelation(series: &[Vec<f64>], lag: usize) -> f64 {
    let mut num = 0.0;
    let mut den_a = 0.0;
    let mut den_b = 0.0;
    for s in series {
        let n = s.len();
        if lag >= n {
            continue;
        }
        let a = &s[..n - lag];
        let b = &s[lag..];
        let ma = a.iter().sum::<f64>() / a.len() as f64;
        let mb = b.iter().sum::<f64>() / b.len() as f64;
        for (x, y) in a.iter().zip(b) {
            num += (x - ma) * (y - mb);
            den_a += (x - ma) * (x - ma);
            den_b += (y - mb) * (y - mb);
        }
    }
    if den_a <= 0.0 || den_b <= 0.0 {
        return 0.0;
    }
    num / (den_a * den_b).sqrt()
}

/// First autocorrelation maximum (after the zero-lag lobe) reaching
/// [`CYCLE_CORRELATION`]; returns the parabolically refined lag and the peak
/// correlation.
pub fn detect_period(series: &[Vec<f64>]) -> Option<(f64, f64)> {
    let n = series.iter().map(|s| s.len()).min()?;
    let max_lag = n / 2;
    if max_lag < 3 {
        return None;
    }
    let r: Vec<f64> = (0..=max_lag).map(|k| pooled_autocorrelation(series, k)).collect();
    // leave the zero-lag lobe
    let mut k = 1;
    while k < max_lag && r[k] >= CYCLE_CORRELATION {
        k += 1;
    }
    while k < max_lag {
        if r[k] >= CYCLE_CORRELATION && r[k] >= r[k - 1] && r[k] >= r[k + 1] {
            let (y0, y1, y2) = (r[k - 1], r[k], r[k + 1]);
            let denom = y0 - 2.0 * y1 + y2;
            let shift = if denom.abs() > 1e-15 { 0.5 * (y0 - y2) / denom } else { 0.0 };
            return Some((k as f64 + shift.clamp(-0.5, 0.5), y1));
        }
        k += 1;
    }
    None
}

/// Options for [`relax`].
#[derive(Clone, Debug)]
pub struct RelaxOptions {
    pub record: RecordOptions,
    /// Length of each integration chunk between fixed-point checks.
    pub chunk: f64,
    pub t_max: f64,
    /// Stop as soon as the fixed-point criterion holds.
    pub stop_when_steady: bool,
    pub cycle_window: Option<f64>,
}

/// Integrates in chunks until a fixed point is detected or `t_max` is
/// reached, then classifies.
pub fn relax(eq: &MasterEquation, rho0: &CMatrix, opts: &RelaxOptions) -> Result<(Trajectory, SteadyStateResult)> {
    let mut integ = Integrator::new(eq, rho0)?;
    let mut traj = Trajectory { observed_pairs: opts.record.observe_pairs.clone(), ..Trajectory::default() };
    let mut t = 0.0;
    let window = eq.params.steady_window();
    loop {
        t = (t + opts.chunk).min(opts.t_max);
        extend(eq, &mut integ, &mut traj, t, &opts.record)?;
        let classify = ClassifyOptions { steady_window: window, cycle_window: opts.cycle_window.unwrap_or(0.5 * t) };
        if (opts.stop_when_steady && t >= window) || t >= opts.t_max {
            let mut result = classify_asymptotics(&traj, &eq.params, &classify);
            if result.kind == SteadyKind::FixedPoint || t >= opts.t_max {
                result.final_state = Some(integ.state().clone());
                return Ok((traj, result));
            }
        }
    }
}

/// One sample of the `log det ρ` rate check.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogDetSample {
    pub t: f64,
    /// Central difference of `log det ρ`.
    pub finite_difference: f64,
    /// `−2 Tr(Θ − ⟨Θ⟩)`
    pub analytic: f64,
    /// `None` when a neighbouring state is rank-deficient.
    pub residual: Option<f64>,
}

/// Compares the finite-differenced `log det ρ` against `−2Tr(Θ − ⟨Θ⟩)` at
/// interior samples spaced `stride` records apart. Requires stored states on
/// a uniform grid.
pub fn diagnostics_logdet(traj: &Trajectory, eq: &MasterEquation, stride: usize) -> Result<Vec<LogDetSample>> {
    if traj.states.len() != traj.times.len() {
        return Err(Error::Parameter("log-det diagnostic needs a trajectory with stored states".into()));
    }
    let stride = stride.max(1);
    let eps = eq.params.eps_floor;
    let floor = NEGATIVE_EIGENVALUE_FACTOR * eps;
    let spectra = traj.states.iter().map(herm_eig).collect::<Result<Vec<_>>>()?;
    let mut out = Vec::new();
    for i in stride..traj.len().saturating_sub(stride) {
        let (lo, hi) = (i - stride, i + stride);
        let t = traj.times[i];
        let rank_ok = [lo, i, hi].iter().all(|&k| spectra[k].min_eigenvalue() > floor);
        let th = eq.theta_at(t, &traj.states[i], &spectra[i])?;
        let mean = th.trace_product(&traj.states[i]).re;
        let dim = th.dim() as f64;
        let analytic = -2.0 * (th.trace().re - dim * mean);
        let fd = (log_det_floored(&spectra[hi], eps) - log_det_floored(&spectra[lo], eps))
            / (traj.times[hi] - traj.times[lo]);
        out.push(LogDetSample {
            t,
            finite_difference: fd,
            analytic,
            residual: rank_ok.then(|| (fd - analytic).abs()),
        });
    }
    Ok(out)
}
