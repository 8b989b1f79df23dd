//! Two-spin Ising pair: spectrum, Gibbs populations and the mean-field curve.

use detangle::models::{
    energy_basis, gibbs_state, mfa_magnetization, populations, two_spin_energies, two_spin_hamiltonian,
};

fn main() -> detangle::Result<()> {
    let beta = 10.0;
    println!("{:>6} {:>10} {:>10} {:>10} {:>10} {:>12} {:>8}", "J/B", "E1", "E2", "E3", "E4", "p1(Gibbs)", "m_MFA");
    for k in 0..=8 {
        let j = 0.25 * k as f64;
        let h = two_spin_hamiltonian(j)?;
        let e = two_spin_energies(1.0, j);
        let p = populations(&gibbs_state(&h, beta)?, &energy_basis(&h)?);
        println!(
            "{j:>6.2} {:>10.5} {:>10.5} {:>10.5} {:>10.5} {:>12.8} {:>8.4}",
            e[0],
            e[1],
            e[2],
            e[3],
            p[0],
            mfa_magnetization(j).magnitude()
        );
    }
    Ok(())
}
