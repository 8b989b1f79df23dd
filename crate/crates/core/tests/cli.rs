use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use detangle::output::RunManifest;

fn detangle(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_detangle"));
    cmd.args(args).env_remove("DETANGLE_WORKERS");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn run(experiment: &str, config: &Path, out: &Path, envs: &[(&str, &str)]) -> Output {
    detangle(&[experiment, "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()], envs)
}

fn manifest(out: &Path) -> RunManifest {
    serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn identities_pass_on_defaults() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), "c.json", r#"{"experiment": "identities"}"#);
    let out = tmp.path().join("out");
    let o = run("identities", &config, &out, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = fs::read_to_string(out.join("identities.csv")).unwrap();
    assert!(csv.starts_with("identity,value,tolerance,passed\n"));
    assert_eq!(csv.lines().skip(1).filter(|l| l.ends_with(",true")).count(), csv.lines().count() - 1);
    let m = manifest(&out);
    assert_eq!(m.files.len(), 1);
    assert_eq!(m.content_hash.len(), 64);
}

#[test]
fn config_errors_exit_2_without_output() {
    let tmp = tempfile::tempdir().unwrap();
    let cases = [
        (r#"{"experiment": "tim-pt", "evolution": {"g_h": 1, "g_d": 1, "theta_t": -1}}"#, "out of range"),
        (r#"{"experiment": "tim-pt", "evolution": {"gama_h": 1, "g_d": 1}}"#, "gama_h"),
        ("{\"experiment\": \"tim-pt\",\n \"seed\": }", "line 2"),
        (r#"{"experiment": "landscape"}"#, "requested"),
    ];
    for (k, (text, needle)) in cases.iter().enumerate() {
        let config = write_config(tmp.path(), &format!("c{k}.json"), text);
        let out = tmp.path().join(format!("out{k}"));
        let o = run("tim-pt", &config, &out, &[]);
        assert_eq!(o.status.code(), Some(2), "{text}: {}", stderr(&o));
        assert!(stderr(&o).contains(needle), "{}", stderr(&o));
        assert!(!out.exists());
    }
    let missing = run("tim-pt", &tmp.path().join("absent.json"), &tmp.path().join("o"), &[]);
    assert_eq!(missing.status.code(), Some(2));
    let bad_name = detangle(&["fig9", "--config", "x.json"], &[]);
    assert_eq!(bad_name.status.code(), Some(2));
    let leftovers = fs::read_dir(tmp.path()).unwrap().filter(|e| e.as_ref().unwrap().path().is_dir()).count();
    assert_eq!(leftovers, 0);
}

#[test]
fn worker_count_from_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), "c.json", r#"{"experiment": "identities", "seed": 4}"#);
    let o = run("identities", &config, &tmp.path().join("a"), &[("DETANGLE_WORKERS", "2")]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(manifest(&tmp.path().join("a")).workers, 2);
    let o = run("identities", &config, &tmp.path().join("b"), &[("DETANGLE_WORKERS", "0")]);
    assert_eq!(o.status.code(), Some(2));
    let o = detangle(
        &["identities", "--config", config.to_str().unwrap(), "--out", tmp.path().join("c").to_str().unwrap(), "--workers", "3"],
        &[("DETANGLE_WORKERS", "2")],
    );
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(manifest(&tmp.path().join("c")).workers, 3);
}

#[test]
fn unwritable_output_is_a_runtime_failure() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), "c.json", r#"{"experiment": "identities"}"#);
    let blocker = tmp.path().join("file");
    fs::write(&blocker, "").unwrap();
    let o = run("identities", &config, &blocker.join("out"), &[]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
}

#[test]
fn tim_pt_rerun_is_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(
        tmp.path(),
        "c.json",
        r#"{"experiment": "tim-pt", "sweep": {"values": [0.0, 1.0, 2.0]}}"#,
    );
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert_eq!(run("tim-pt", &config, &a, &[("DETANGLE_WORKERS", "1")]).status.code(), Some(0));
    assert_eq!(run("tim-pt", &config, &b, &[("DETANGLE_WORKERS", "3")]).status.code(), Some(0));
    for f in ["tim_pt.csv", "mfa.csv", "plot.gp"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let csv = fs::read_to_string(a.join("tim_pt.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "J_over_B,branch,sigma_x,tau_total,E1,E2,E3,E4,p1,p2,p3,p4,classification");
    let branches: Vec<&str> = lines.map(|l| l.split(',').nth(1).unwrap()).collect();
    assert_eq!(branches, ["symmetric", "plus", "minus"].repeat(3));
    let m = manifest(&a);
    assert_eq!(m.content_hash, manifest(&b).content_hash);
    assert!(m.stats.repair_rate < 0.01);
    assert!(m.derived.is_some());
    assert!(m.seeding.contains("Gibbs"));
}

#[test]
fn landscape_emits_grid_and_script() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(
        tmp.path(),
        "c.json",
        r#"{"experiment": "landscape", "model": {"s_points": 16}, "sweep": {"start": 0, "stop": 1, "count": 3}}"#,
    );
    let out = tmp.path().join("out");
    assert_eq!(run("landscape", &config, &out, &[]).status.code(), Some(0));
    let grid = fs::read_to_string(out.join("landscape.csv")).unwrap();
    assert!(grid.starts_with("ratio,s,U_eff\n"));
    assert_eq!(grid.lines().count(), 1 + 3 * 16);
    assert!(fs::read_to_string(out.join("plot.gp")).unwrap().contains("landscape.csv"));
    assert!(manifest(&out).summary["critical_ratio"].as_f64().is_some());
}

#[test]
fn ring5_emits_bloch_and_tau_files() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(
        tmp.path(),
        "c.json",
        r#"{"experiment": "ring5", "model": {"mirror": false},
            "steady": {"t_max": 0.02, "chunk": 0.02, "record_every": 0.01}}"#,
    );
    let out = tmp.path().join("out");
    let o = run("ring5", &config, &out, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for l in 1..=5 {
        let bloch = fs::read_to_string(out.join(format!("bloch_spin{l}.csv"))).unwrap();
        assert!(bloch.starts_with("t,kx,ky,kz\n"));
    }
    let tau = fs::read_to_string(out.join("tau.csv")).unwrap();
    assert!(tau.starts_with("gamma_D_t,tau,pair_kind,pair\n"));
    let kinds: std::collections::BTreeSet<&str> = tau.lines().skip(1).map(|l| l.split(',').nth(2).unwrap()).collect();
    assert_eq!(kinds.into_iter().collect::<Vec<_>>(), ["NN", "SNN"]);
    let script = fs::read_to_string(out.join("plot.gp")).unwrap();
    assert!(script.contains("bloch_spin5.csv") && script.contains("tau.csv"));
}

#[test]
fn pump_emits_total_bloch_trajectory() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(
        tmp.path(),
        "c.json",
        r#"{"experiment": "pump", "steady": {"t_max": 1.0, "chunk": 0.5, "record_every": 0.01}}"#,
    );
    let out = tmp.path().join("out");
    assert_eq!(run("pump", &config, &out, &[]).status.code(), Some(0));
    let bloch = fs::read_to_string(out.join("bloch_000_plus.csv")).unwrap();
    assert!(bloch.starts_with("t,kx,ky,kz\n"));
    assert_eq!(bloch.lines().count(), 1 + 101);
    let table = fs::read_to_string(out.join("pump.csv")).unwrap();
    assert!(table.lines().next().unwrap().ends_with("classification,period_short,period_long,amplitude"));
}
