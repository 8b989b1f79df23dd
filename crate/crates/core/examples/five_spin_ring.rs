//! Five-spin ring relaxing from the rotating product state.
//!
//! The first argument sets the horizon in units of 1/B (default 2).

use detangle::experiments::{run_ring5, Ring5Spec, SteadySettings};

fn main() -> detangle::Result<()> {
    let t_max = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(2.0);
    let spec = Ring5Spec {
        settings: SteadySettings { t_max, chunk: 0.5, record_every: 0.05 },
        ..Ring5Spec::figure_defaults()
    };
    let res = run_ring5(&spec)?;
    let traj = &res.run.trajectory;
    for (t, spins) in traj.times.iter().zip(&traj.bloch).step_by(10) {
        let k1 = spins[0];
        println!("t = {t:>5.2}  spin 1 = ({:+.4}, {:+.4}, {:+.4})", k1[0], k1[1], k1[2]);
    }
    println!(
        "tau_NN = {:.4e}, tau_SNN = {:.4e}, ratio {:.4}, <sx> = {:.3e}, {}",
        res.run.tau_nn,
        res.run.tau_snn,
        res.run.tau_ratio(),
        res.run.sigma_x,
        res.run.steady.kind
    );
    if let Some(m) = &res.mirrored {
        println!("mirrored run: <sx> = {:.3e}", m.sigma_x);
    }
    Ok(())
}
