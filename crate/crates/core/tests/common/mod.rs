//! Independent two-qubit arithmetic used as test oracles. Nothing here calls
//! into the library's linear algebra.

#![allow(dead_code)]

use detangle::linalg::CMatrix;
use num_complex::Complex64 as C;

pub type M4 = [[C; 4]; 4];
pub type M2 = [[C; 2]; 2];

pub fn zero4() -> M4 {
    [[C::new(0.0, 0.0); 4]; 4]
}

pub fn eye4() -> M4 {
    let mut m = zero4();
    (0..4).for_each(|i| m[i][i] = C::new(1.0, 0.0));
    m
}

pub fn real4(rows: [[f64; 4]; 4]) -> M4 {
    rows.map(|r| r.map(|x| C::new(x, 0.0)))
}

/// Two-spin Ising matrix in the basis |↑↑⟩, |↑↓⟩, |↓↑⟩, |↓↓⟩.
pub fn eq3(b: f64, j: f64) -> M4 {
    real4([
        [-2.0 * b, 0.0, 0.0, -2.0 * j],
        [0.0, 0.0, -2.0 * j, 0.0],
        [0.0, -2.0 * j, 0.0, 0.0],
        [-2.0 * j, 0.0, 0.0, 2.0 * b],
    ])
}

pub fn mul(a: &M4, b: &M4) -> M4 {
    let mut c = zero4();
    for i in 0..4 {
        for j in 0..4 {
            c[i][j] = (0..4).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    c
}

pub fn add(a: &M4, b: &M4, s: f64) -> M4 {
    let mut c = *a;
    for i in 0..4 {
        for j in 0..4 {
            c[i][j] += b[i][j] * s;
        }
    }
    c
}

pub fn trace(a: &M4) -> C {
    (0..4).map(|i| a[i][i]).sum()
}

pub fn max_diff(a: &M4, b: &M4) -> f64 {
    let mut d: f64 = 0.0;
    for i in 0..4 {
        for j in 0..4 {
            d = d.max((a[i][j] - b[i][j]).norm());
        }
    }
    d
}

pub fn from_lib(m: &CMatrix) -> M4 {
    assert_eq!(m.dim(), 4);
    let mut out = zero4();
    for i in 0..4 {
        for j in 0..4 {
            out[i][j] = m[(i, j)];
        }
    }
    out
}

pub fn to_lib(m: &M4) -> CMatrix {
    CMatrix::from_vec(4, m.iter().flat_map(|r| r.iter().copied()).collect())
}

pub fn outer(psi: &[C; 4]) -> M4 {
    let mut m = zero4();
    for i in 0..4 {
        for j in 0..4 {
            m[i][j] = psi[i] * psi[j].conj();
        }
    }
    m
}

/// `exp(a)` by scaling and squaring a truncated Taylor series.
pub fn expm(a: &M4) -> M4 {
    let norm: f64 = a.iter().flat_map(|r| r.iter()).map(|z| z.norm()).sum();
    let squarings = (norm.max(1.0).log2().ceil() as i32 + 4).max(0);
    let scaled = add(&zero4(), a, 0.5f64.powi(squarings));
    let mut term = eye4();
    let mut sum = eye4();
    for k in 1..30 {
        term = add(&zero4(), &mul(&term, &scaled), 1.0 / k as f64);
        sum = add(&sum, &term, 1.0);
    }
    for _ in 0..squarings {
        sum = mul(&sum, &sum);
    }
    sum
}

/// `e^{−βH}/Z`.
pub fn gibbs(h: &M4, beta: f64) -> M4 {
    let w = expm(&add(&zero4(), h, -beta));
    let z = trace(&w).re;
    add(&zero4(), &w, 1.0 / z)
}

/// Marginal of the first (`first = true`) or second tensor factor.
pub fn marginal(rho: &M4, first: bool) -> M2 {
    let mut m = [[C::new(0.0, 0.0); 2]; 2];
    for a in 0..2 {
        for b in 0..2 {
            m[a][b] = (0..2)
                .map(|k| if first { rho[2 * a + k][2 * b + k] } else { rho[2 * k + a][2 * k + b] })
                .sum();
        }
    }
    m
}

pub fn kron2(a: &M2, b: &M2) -> M4 {
    let mut m = zero4();
    for i in 0..4 {
        for j in 0..4 {
            m[i][j] = a[i / 2][j / 2] * b[i % 2][j % 2];
        }
    }
    m
}

/// `Tr(ρ Δ²)` with `Δ = ρ − ρ_a ⊗ ρ_b`.
pub fn tau_quadratic(rho: &M4) -> f64 {
    let delta = add(rho, &kron2(&marginal(rho, true), &marginal(rho, false)), -1.0);
    trace(&mul(rho, &mul(&delta, &delta))).re
}

/// The two lowest eigenvectors of `eq3(b, j)` for `b > 0`, `j ≥ 0`, from
/// the closed-form 2×2 blocks.
pub fn eq3_low_states(b: f64, j: f64) -> ([C; 4], [C; 4]) {
    let r = (b * b + j * j).sqrt();
    let (x, y) = (b + r, j);
    let n = (x * x + y * y).sqrt();
    let ground = [C::new(x / n, 0.0), C::new(0.0, 0.0), C::new(0.0, 0.0), C::new(y / n, 0.0)];
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let first_excited = [C::new(0.0, 0.0), C::new(h, 0.0), C::new(h, 0.0), C::new(0.0, 0.0)];
    (ground, first_excited)
}

/// `cos(s/2)|1⟩ + sin(s/2)|2⟩` in the oracle eigenbasis.
pub fn pure_class(s: f64, j: f64) -> [C; 4] {
    let (g, e) = eq3_low_states(1.0, j);
    let (c, sn) = ((s / 2.0).cos(), (s / 2.0).sin());
    [0, 1, 2, 3].map(|i| g[i] * c + e[i] * sn)
}

/// `⟨ψ|H|ψ⟩ + 2·ratio·τ` on the pure class at `B = 1`.
pub fn u_eff(s: f64, j: f64, ratio: f64) -> f64 {
    let psi = pure_class(s, j);
    let rho = outer(&psi);
    trace(&mul(&eq3(1.0, j), &rho)).re + 2.0 * ratio * tau_quadratic(&rho)
}

/// Local minima of a periodic sequence.
pub fn periodic_minima(u: &[f64]) -> usize {
    let n = u.len();
    (0..n).filter(|&i| u[i] < u[(i + n - 1) % n] && u[i] < u[(i + 1) % n]).count()
}
