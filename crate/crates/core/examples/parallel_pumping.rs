//! Pumped spin pair in the rotating frame, with and without disentanglement.

use detangle::engine::EvolutionParams;
use detangle::experiments::{run_parallel_pump, PumpSpec, SteadySettings};

fn main() -> detangle::Result<()> {
    let settings = SteadySettings { t_max: 20.0, chunk: 2.0, record_every: 0.01 };
    for g_d in [0.0, 100.0] {
        let spec = PumpSpec { params: EvolutionParams::new(5.0, g_d, 10.0), settings, ..PumpSpec::figure_defaults() };
        for point in run_parallel_pump(&spec)? {
            let r = &point.record;
            println!(
                "g_D = {g_d:>5}: J/B = {} {:>5} -> {} (amplitude {:.2e}, periods {:?})",
                r.value, r.branch, r.classification, point.amplitude, point.periods
            );
        }
    }
    Ok(())
}
