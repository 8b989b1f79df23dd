//! Effective free energy on the pure class and the ratio where it turns bistable.

use detangle::experiments::{landscape_curvature, run_landscape, LandscapeSpec, SweepSpec};
use detangle::disentangle::Quantifier;

fn main() -> detangle::Result<()> {
    for j in [0.5, 1.0, 2.0] {
        let spec = LandscapeSpec {
            j_over_b: j,
            ratios: SweepSpec::linspace("ratio", 0.0, 2.0, 41)?,
            s_points: 360,
            ..LandscapeSpec::figure_defaults()
        };
        let res = run_landscape(&spec)?;
        let bistable = res.minima.iter().find(|m| m.1 >= 2).map(|m| m.0);
        println!(
            "J/B = {j}: critical ratio {:?}, first grid ratio with two minima {:?}, curvature at ratio 0 {:.4}",
            res.critical_ratio,
            bistable,
            landscape_curvature(j, 0.0, Quantifier::Quadratic)?
        );
    }
    Ok(())
}
