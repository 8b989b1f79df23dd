//! Executes a configured experiment and persists its outputs.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde_json::json;

use crate::config::{ExperimentId, RunConfig};
use crate::engine::{EvolutionParams, IntegratorStats};
use crate::error::{Error, Result};
use crate::experiments::{
    run_identities, run_landscape, run_parallel_pump, run_ring5, run_tim_pt, BROKEN_SEED_ANGLE, REFERENCE_TAU_RATIO,
    SYMMETRIC_SEED_NOISE,
};
use crate::output::{
    bloch_table, identities_table, landscape_table, mfa_table, minima_table, plot_script, pump_table,
    ring_summary_table, tau_series_table, tim_pt_table, OutputSet, PlotKind, RunManifest,
};

pub const MANIFEST_FILE: &str = "manifest.json";

/// Results of a run before they are written.
#[derive(Debug)]
pub struct RunOutcome {
    pub outputs: OutputSet,
    pub manifest: RunManifest,
    /// False when the run completed but a reported check failed
    /// (only the identity suite reports checks).
    pub all_passed: bool,
}

fn seeding_protocol(experiment: ExperimentId, seed: u64) -> String {
    match experiment {
        ExperimentId::TimPt => format!(
            "symmetric: Gibbs state mixed with weight {SYMMETRIC_SEED_NOISE} of I/4; plus/minus: pure class at s = ±{BROKEN_SEED_ANGLE:.6}, phi = 0"
        ),
        ExperimentId::Landscape => "none (deterministic grid)".into(),
        ExperimentId::Ring5 => {
            "product state with spin l along (cos 2π(l−1)/5, sin 2π(l−1)/5, 0); mirrored run conjugated by ⊗σz".into()
        }
        ExperimentId::Pump => "plus/minus: both spins along (±0.6, 0, 0.8)".into(),
        ExperimentId::Identities => format!("ChaCha8 seeded with {seed}"),
    }
}

fn derived_rates(p: &EvolutionParams) -> serde_json::Value {
    json!({
        "gamma_h": p.gamma_h(),
        "gamma_d": p.gamma_d(),
        "beta": p.beta(),
        "landscape_ratio": p.landscape_ratio(),
        "steady_window": p.steady_window(),
    })
}

/// Runs the experiment on the current rayon pool.
pub fn execute(config: &RunConfig, workers: usize) -> Result<RunOutcome> {
    let start = Instant::now();
    let config = config.clone().with_defaults();
    config.validate()?;
    let mut outputs = OutputSet::default();
    let mut stats = IntegratorStats::default();
    let mut all_passed = true;
    let summary = match config.experiment {
        ExperimentId::TimPt => {
            let res = run_tim_pt(&config.tim_pt_spec()?)?;
            stats = res.stats;
            outputs.add_table("tim_pt.csv", &tim_pt_table(&res.records))?;
            outputs.add_table("mfa.csv", &mfa_table(&res.mfa))?;
            outputs.add_text("plot.gp", plot_script(PlotKind::TimSweep, &[]));
            let undecided = res.records.iter().filter(|r| r.classification != crate::engine::SteadyKind::FixedPoint).count();
            json!({ "onset_j_over_b": res.onset, "points": res.records.len(), "not_fixed_point": undecided })
        }
        ExperimentId::Landscape => {
            let res = run_landscape(&config.landscape_spec()?)?;
            outputs.add_table("landscape.csv", &landscape_table(&res))?;
            outputs.add_table("minima.csv", &minima_table(&res))?;
            outputs.add_text("plot.gp", plot_script(PlotKind::Landscape, &[]));
            json!({
                "j_over_b": res.j_over_b,
                "critical_ratio": res.critical_ratio,
                "critical_ratio_in_range": res.critical_ratio.is_some(),
                "symmetry_error": res.symmetry_error,
            })
        }
        ExperimentId::Ring5 => {
            let res = run_ring5(&config.ring5_spec()?)?;
            stats = res.run.trajectory.stats;
            let mut files = Vec::new();
            let mut add_run = |outputs: &mut OutputSet, prefix: &str, run: &crate::experiments::RingRun| -> Result<()> {
                for l in 0..5 {
                    let name = format!("bloch_spin{}{prefix}.csv", l + 1);
                    outputs.add_table(&name, &bloch_table(&run.trajectory, Some(l)))?;
                    files.push(name);
                }
                let name = format!("tau{prefix}.csv");
                outputs.add_table(&name, &tau_series_table(&run.trajectory, res.nn_pairs.len(), res.gamma_d))?;
                Ok(())
            };
            add_run(&mut outputs, "", &res.run)?;
            if let Some(m) = &res.mirrored {
                stats.merge(&m.trajectory.stats);
                add_run(&mut outputs, "_mirrored", m)?;
            }
            outputs.add_table("summary.csv", &ring_summary_table(&res, REFERENCE_TAU_RATIO))?;
            let primary: Vec<String> = files.iter().filter(|f| !f.contains("mirrored")).cloned().collect();
            outputs.add_text("plot.gp", plot_script(PlotKind::Ring, &primary));
            json!({
                "tau_nn": res.run.tau_nn,
                "tau_snn": res.run.tau_snn,
                "tau_ratio": res.run.tau_ratio(),
                "reference_ratio": REFERENCE_TAU_RATIO,
                "sigma_x": res.run.sigma_x,
                "mirrored_sigma_x": res.mirrored.as_ref().map(|m| m.sigma_x),
                "classification": res.run.steady.kind,
            })
        }
        ExperimentId::Pump => {
            let points = run_parallel_pump(&config.pump_spec()?)?;
            let mut files = Vec::new();
            for (k, p) in points.iter().enumerate() {
                stats.merge(&p.trajectory.stats);
                let name = format!("bloch_{:03}_{}.csv", k / 2, p.record.branch);
                outputs.add_table(&name, &bloch_table(&p.trajectory, None))?;
                files.push(name);
            }
            outputs.add_table("pump.csv", &pump_table(&points))?;
            outputs.add_text("plot.gp", plot_script(PlotKind::Pump, &files));
            let kinds: Vec<_> = points.iter().map(|p| p.record.classification).collect();
            json!({ "classifications": kinds })
        }
        ExperimentId::Identities => {
            let checks = run_identities(config.seed)?;
            all_passed = checks.iter().all(|c| c.passed);
            outputs.add_table("identities.csv", &identities_table(&checks))?;
            json!({ "all_passed": all_passed })
        }
    };

    let (files, content_hash) = outputs.hashes();
    let manifest = RunManifest {
        experiment: config.experiment.to_string(),
        version: env!("CARGO_PKG_VERSION").into(),
        config: serde_json::to_value(&config).expect("config serializes"),
        derived: config.evolution.as_ref().map(derived_rates),
        seeding: seeding_protocol(config.experiment, config.seed),
        workers,
        stats: stats.into(),
        wall_time_s: start.elapsed().as_secs_f64(),
        summary,
        files,
        content_hash,
    };
    Ok(RunOutcome { outputs, manifest, all_passed })
}

/// Runs on a pool of `workers` threads and commits outputs plus manifest to
/// `out` (else the config's `output_dir`, else `./<experiment>`).
pub fn run(config: &RunConfig, out: Option<&Path>, workers: usize) -> Result<RunOutcome> {
    let context = |source: Error| Error::Experiment { experiment: config.experiment.to_string(), source: Box::new(source) };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Parameter(format!("cannot start {workers} workers: {e}")))?;
    let mut outcome = pool.install(|| execute(config, workers)).map_err(context)?;
    let dir: PathBuf = out
        .map(Path::to_path_buf)
        .or_else(|| config.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from(config.experiment.as_str()));
    let manifest = serde_json::to_string_pretty(&outcome.manifest).expect("manifest serializes");
    outcome.outputs.add_text(MANIFEST_FILE, manifest + "\n");
    outcome.outputs.commit(&dir).map_err(context)?;
    Ok(outcome)
}
