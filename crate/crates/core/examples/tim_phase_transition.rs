//! Coupling sweep of the two-spin pair from a symmetric and two tilted seeds.
//!
//! Pass a point count as the first argument to change the grid (default 9).

use detangle::experiments::{run_tim_pt, Branch, SweepSpec, TimPtSpec};

fn main() -> detangle::Result<()> {
    let points = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(9);
    let spec = TimPtSpec { sweep: SweepSpec::linspace("J/B", 0.0, 2.0, points)?, ..TimPtSpec::figure_defaults() };
    let res = run_tim_pt(&spec)?;

    println!("{:>6} {:>14} {:>14} {:>12} {:>10}", "J/B", "<sx> plus", "<sx> minus", "tau", "MFA m");
    let plus: Vec<_> = res.branch(Branch::Plus).collect();
    let minus: Vec<_> = res.branch(Branch::Minus).collect();
    for ((p, m), mfa) in plus.iter().zip(&minus).zip(&res.mfa) {
        println!("{:>6.3} {:>14.6e} {:>14.6e} {:>12.6e} {:>10.4}", p.value, p.sigma_x, m.sigma_x, p.tau_total, mfa.plus);
    }
    match res.onset {
        Some(j) => println!("broken branch first seen at J/B = {j}"),
        None => println!("no broken branch on this grid"),
    }
    println!("steps {} (repair rate {:.2e})", res.stats.steps, res.stats.repair_rate());
    Ok(())
}
