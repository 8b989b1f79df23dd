//! Random test ensembles: Hermitian matrices, unitaries, density matrices and
//! pure states. All draws flow from a caller-supplied RNG.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::linalg::{kron, CMatrix, C64};

fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

/// Ginibre matrix with i.i.d. complex normal entries.
pub fn random_ginibre<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> CMatrix {
    CMatrix::from_vec(dim, (0..dim * dim).map(|_| complex_normal(rng)).collect())
}

/// Hermitian matrix `scale·(G + G†)/2`.
pub fn random_hermitian<R: Rng + ?Sized>(rng: &mut R, dim: usize, scale: f64) -> CMatrix {
    random_ginibre(rng, dim).hermitian_part().scale_real(scale)
}

/// Haar-distributed unitary via Gram–Schmidt on a Ginibre matrix.
pub fn random_unitary<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> CMatrix {
    let g = random_ginibre(rng, dim);
    let mut cols: Vec<Vec<C64>> = Vec::with_capacity(dim);
    for j in 0..dim {
        let mut v = g.column(j);
        for u in &cols {
            let overlap: C64 = u.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
            for (vi, ui) in v.iter_mut().zip(u) {
                *vi -= overlap * ui;
            }
        }
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        v.iter_mut().for_each(|z| *z /= norm);
        cols.push(v);
    }
    let mut u = CMatrix::zeros(dim);
    for (j, col) in cols.iter().enumerate() {
        for (i, z) in col.iter().enumerate() {
            u[(i, j)] = *z;
        }
    }
    u
}

pub fn random_pure_vector<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Vec<C64> {
    let mut v: Vec<C64> = (0..dim).map(|_| complex_normal(rng)).collect();
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.iter_mut().for_each(|z| *z /= norm);
    v
}

pub fn random_pure_state<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> CMatrix {
    CMatrix::outer(&random_pure_vector(rng, dim))
}

/// Full-rank density matrix `G·G†/Tr(G·G†)` (Hilbert–Schmidt ensemble).
pub fn random_density_matrix<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> CMatrix {
    let g = random_ginibre(rng, dim);
    let rho = g.matmul(&g.adjoint()).hermitian_part();
    let tr = rho.trace().re;
    rho.scale_real(1.0 / tr)
}

/// `ρ_L ⊗ … ⊗ ρ_1` from independent single-spin density matrices.
pub fn random_product_state<R: Rng + ?Sized>(rng: &mut R, spins: usize) -> CMatrix {
    let mut rho = CMatrix::identity(1);
    for _ in 0..spins {
        rho = kron(&random_density_matrix(rng, 2), &rho);
    }
    rho
}
