//! Pairwise disentanglement operator and the entanglement measure τ.
//!
//! For each pair `p = (a, b)` the correlation part of the pair state is
//! `Δ_p = ρ_ab − ρ_a ⊗ ρ_b`. The operator is the sum of lifted pair kernels,
//! `Q = Σ_p embed(K_p)`, with `K_p = Δ_p²` (quadratic) or `K_p = Δ_p`
//! (linear), and `τ_p = Tr(ρ_ab K_p)`.
//!
//! The quadratic kernel vanishes exactly on pairwise-product marginals, is
//! covariant under local unitaries on the pair, and gives `τ ≥ 0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{embed_pair, kron, partial_trace, spins_for_dim, swap_gate, CMatrix, ZERO};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Quantifier {
    #[default]
    Quadratic,
    Linear,
}

impl std::fmt::Display for Quantifier {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Quantifier::Quadratic => "quadratic",
            Quantifier::Linear => "linear",
        })
    }
}

/// Spin pairs (1-based) over which disentanglement acts.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairTopology {
    spins: usize,
    pairs: Vec<(usize, usize)>,
}

impl PairTopology {
    pub fn new(spins: usize, pairs: Vec<(usize, usize)>) -> Result<Self> {
        for &(a, b) in &pairs {
            if a >= b || a == 0 || b > spins {
                return Err(Error::Pair { a, b, spins });
            }
        }
        Ok(Self { spins, pairs })
    }

    /// Nearest-neighbour bonds of a ring; the single pair `(1, 2)` for two spins.
    pub fn nearest_neighbor_ring(spins: usize) -> Self {
        Self::ring_at_distance(spins, 1)
    }

    /// Second-neighbour pairs of a ring (reporting only).
    pub fn second_neighbor_ring(spins: usize) -> Self {
        Self::ring_at_distance(spins, 2)
    }

    fn ring_at_distance(spins: usize, distance: usize) -> Self {
        let mut pairs: Vec<(usize, usize)> = Vec::new();
        for l in 1..=spins {
            let m = (l - 1 + distance) % spins + 1;
            let pair = (l.min(m), l.max(m));
            if pair.0 != pair.1 && !pairs.contains(&pair) {
                pairs.push(pair);
            }
        }
        Self { spins, pairs }
    }

    pub fn spins(&self) -> usize {
        self.spins
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Entries of `Δ` below this are partial-trace roundoff and are flushed, so
/// product states give exactly zero.
pub const DELTA_FLUSH: f64 = 64.0 * f64::EPSILON;

/// Two-spin marginal with `pair.0` as the least significant qubit.
pub fn pair_marginal(rho: &CMatrix, pair: (usize, usize)) -> Result<CMatrix> {
    let spins = spins_for_dim(rho.dim())?;
    let (a, b) = pair;
    if a == b || a == 0 || b == 0 || a > spins || b > spins {
        return Err(Error::Pair { a, b, spins });
    }
    let reduced = partial_trace(rho, &[a.min(b), a.max(b)])?;
    Ok(if a < b { reduced } else { reduced.conjugate_by(&swap_gate()) })
}

/// `Δ = ρ_ab − ρ_a ⊗ ρ_b` from a two-spin marginal.
pub fn delta_from_marginal(rho_ab: &CMatrix) -> CMatrix {
    let rho_a = partial_trace(rho_ab, &[1]).expect("4x4 marginal");
    let rho_b = partial_trace(rho_ab, &[2]).expect("4x4 marginal");
    let mut delta = rho_ab - &kron(&rho_b, &rho_a);
    for z in delta.as_mut_slice() {
        if z.norm() <= DELTA_FLUSH {
            *z = ZERO;
        }
    }
    delta.hermitian_part()
}

pub fn pair_delta(rho: &CMatrix, pair: (usize, usize)) -> Result<CMatrix> {
    Ok(delta_from_marginal(&pair_marginal(rho, pair)?))
}

/// Pair kernel `K_p` in the 4-dim pair space.
pub fn pair_kernel(rho: &CMatrix, pair: (usize, usize), variant: Quantifier) -> Result<(CMatrix, CMatrix)> {
    let marginal = pair_marginal(rho, pair)?;
    let delta = delta_from_marginal(&marginal);
    let kernel = match variant {
        Quantifier::Quadratic => delta.matmul(&delta).hermitian_part(),
        Quantifier::Linear => delta,
    };
    Ok((marginal, kernel))
}

/// Full-space disentanglement operator for the given topology.
pub fn q_disentangle(rho: &CMatrix, topology: &PairTopology, variant: Quantifier) -> Result<CMatrix> {
    let spins = spins_for_dim(rho.dim())?;
    if spins != topology.spins {
        return Err(Error::Dimension(format!(
            "topology built for {} spins, state has {spins}",
            topology.spins
        )));
    }
    let mut q = CMatrix::zeros(rho.dim());
    for &pair in &topology.pairs {
        let (_, kernel) = pair_kernel(rho, pair, variant)?;
        q += &embed_pair(&kernel, pair, spins)?;
    }
    Ok(q)
}

/// `τ_p = Tr(ρ · embed(K_p)) = Tr(ρ_ab K_p)`.
pub fn tau_pair(rho: &CMatrix, pair: (usize, usize), variant: Quantifier) -> Result<f64> {
    let (marginal, kernel) = pair_kernel(rho, pair, variant)?;
    Ok(marginal.trace_product(&kernel).re)
}

pub fn tau_total(rho: &CMatrix, topology: &PairTopology, variant: Quantifier) -> Result<f64> {
    topology.pairs.iter().map(|&p| tau_pair(rho, p, variant)).sum()
}
