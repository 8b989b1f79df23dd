//! CSV tables, plot-data files and atomically committed output directories.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::engine::{IntegratorStats, Trajectory};
use crate::error::{Error, Result};
use crate::experiments::{BranchRecord, IdentityCheck, LandscapeResult, MfaRow, PumpPoint, Ring5Result, RingRun};

/// Round-trip float formatting: 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

/// A header plus rows of already formatted fields.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self { header: header.into_iter().map(Into::into).collect(), rows: vec![] }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv_bytes(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let wrap = |source| Error::Csv { path: PathBuf::from("<memory>"), source };
        w.write_record(&self.header).map_err(wrap)?;
        for row in &self.rows {
            w.write_record(row).map_err(wrap)?;
        }
        w.into_inner().map_err(|e| Error::io("flushing csv buffer", e.into_error()))
    }
}

/// Writes a table as CSV to `path`.
pub fn write_results(table: &Table, path: &Path) -> Result<()> {
    let bytes = table.to_csv_bytes()?;
    fs::write(path, bytes).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

fn branch_columns(prefix: &str, n: usize) -> impl Iterator<Item = String> + '_ {
    (1..=n).map(move |k| format!("{prefix}{k}"))
}

fn branch_header(first: &str, levels: usize) -> Vec<String> {
    let mut header: Vec<String> = vec![first.into(), "branch".into(), "sigma_x".into(), "tau_total".into()];
    header.extend(branch_columns("E", levels));
    header.extend(branch_columns("p", levels));
    header.push("classification".into());
    header
}

fn branch_row(r: &BranchRecord) -> Vec<String> {
    let mut row = vec![fmt_f64(r.value), r.branch.to_string(), fmt_f64(r.sigma_x), fmt_f64(r.tau_total)];
    row.extend(r.energies.iter().copied().map(fmt_f64));
    row.extend(r.populations.iter().copied().map(fmt_f64));
    row.push(r.classification.to_string());
    row
}

/// `J_over_B, branch, sigma_x, tau_total, E1..E4, p1..p4, classification`.
pub fn tim_pt_table(records: &[BranchRecord]) -> Table {
    let mut t = Table::new(branch_header("J_over_B", 4));
    records.iter().for_each(|r| t.push(branch_row(r)));
    t
}

pub fn mfa_table(rows: &[MfaRow]) -> Table {
    let mut t = Table::new(["J_over_B", "m_plus", "m_minus"]);
    for r in rows {
        t.push(vec![fmt_f64(r.j_over_b), fmt_f64(r.plus), fmt_f64(r.minus)]);
    }
    t
}

/// Pump records with period and amplitude columns appended.
pub fn pump_table(points: &[PumpPoint]) -> Table {
    let mut header = branch_header("J_over_B", 4);
    header.extend(["period_short", "period_long", "amplitude"].map(String::from));
    let mut t = Table::new(header);
    for p in points {
        let mut row = branch_row(&p.record);
        row.extend([fmt_opt(p.periods[0]), fmt_opt(p.periods[1]), fmt_f64(p.amplitude)]);
        t.push(row);
    }
    t
}

/// Columns `ratio, s, U_eff`.
pub fn landscape_table(res: &LandscapeResult) -> Table {
    let mut t = Table::new(["ratio", "s", "U_eff"]);
    for p in &res.points {
        t.push(vec![fmt_f64(p.ratio), fmt_f64(p.s), fmt_f64(p.u_eff)]);
    }
    t
}

pub fn minima_table(res: &LandscapeResult) -> Table {
    let mut t = Table::new(["ratio", "minima"]);
    for (ratio, n) in &res.minima {
        t.push(vec![fmt_f64(*ratio), n.to_string()]);
    }
    t
}

pub fn identities_table(checks: &[IdentityCheck]) -> Table {
    let mut t = Table::new(["identity", "value", "tolerance", "passed"]);
    for c in checks {
        t.push(vec![c.name.clone(), fmt_f64(c.value), fmt_f64(c.tolerance), c.passed.to_string()]);
    }
    t
}

/// Columns `t, kx, ky, kz` for one spin (`Some(index)`, 0-based) or the total.
pub fn bloch_table(traj: &Trajectory, spin: Option<usize>) -> Table {
    let mut t = Table::new(["t", "kx", "ky", "kz"]);
    let total = traj.total_bloch();
    for (i, &time) in traj.times.iter().enumerate() {
        let k = match spin {
            Some(l) => traj.bloch[i][l],
            None => total[i],
        };
        t.push(vec![fmt_f64(time), fmt_f64(k[0]), fmt_f64(k[1]), fmt_f64(k[2])]);
    }
    t
}

/// Columns `gamma_D_t, tau, pair_kind, pair`; the first `nn` observed pairs are NN.
pub fn tau_series_table(traj: &Trajectory, nn: usize, gamma_d: f64) -> Table {
    let mut t = Table::new(["gamma_D_t", "tau", "pair_kind", "pair"]);
    for (k, &(a, b)) in traj.observed_pairs.iter().enumerate() {
        let kind = if k < nn { "NN" } else { "SNN" };
        for (i, &time) in traj.times.iter().enumerate() {
            t.push(vec![fmt_f64(gamma_d * time), fmt_f64(traj.tau[i][k]), kind.into(), format!("{a}-{b}")]);
        }
    }
    t
}

pub fn ring_summary_table(res: &Ring5Result, reference_ratio: f64) -> Table {
    let mut t = Table::new(["run", "tau_NN", "tau_SNN", "ratio", "reference_ratio", "sigma_x", "classification"]);
    let mut add = |name: &str, r: &RingRun| {
        t.push(vec![
            name.into(),
            fmt_f64(r.tau_nn),
            fmt_f64(r.tau_snn),
            fmt_f64(r.tau_ratio()),
            fmt_f64(reference_ratio),
            fmt_f64(r.sigma_x),
            r.steady.kind.to_string(),
        ]);
    };
    add("primary", &res.run);
    if let Some(m) = &res.mirrored {
        add("mirrored", m);
    }
    t
}

/// Files of one run, held in memory until committed.
#[derive(Clone, Debug, Default)]
pub struct OutputSet {
    files: Vec<(String, Vec<u8>)>,
}

impl OutputSet {
    pub fn add_table(&mut self, name: impl Into<String>, table: &Table) -> Result<()> {
        self.files.push((name.into(), table.to_csv_bytes()?));
        Ok(())
    }

    pub fn add_text(&mut self, name: impl Into<String>, text: impl Into<String>) {
        self.files.push((name.into(), text.into().into_bytes()));
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.files.iter().map(|(n, _)| n.as_str())
    }

    pub fn get(&self, name: &str) -> Option<&[u8]> {
        self.files.iter().find(|(n, _)| n == name).map(|(_, b)| b.as_slice())
    }

    /// SHA-256 per file and over all `(name, content)` pairs in name order.
    pub fn hashes(&self) -> (Vec<FileHash>, String) {
        let mut sorted: Vec<&(String, Vec<u8>)> = self.files.iter().collect();
        sorted.sort_by(|a, b| a.0.cmp(&b.0));
        let mut total = Sha256::new();
        let files = sorted
            .iter()
            .map(|(name, bytes)| {
                total.update((name.len() as u64).to_le_bytes());
                total.update(name.as_bytes());
                total.update((bytes.len() as u64).to_le_bytes());
                total.update(bytes);
                FileHash { file: name.clone(), sha256: hex::encode(Sha256::digest(bytes)) }
            })
            .collect();
        (files, hex::encode(total.finalize()))
    }

    /// Writes everything to a sibling temp directory, then renames it into
    /// place. An existing target directory receives the files one rename at
    /// a time.
    pub fn commit(&self, dir: &Path) -> Result<()> {
        let parent = match dir.parent() {
            Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
            _ => PathBuf::from("."),
        };
        fs::create_dir_all(&parent).map_err(|e| Error::io(format!("creating {}", parent.display()), e))?;
        let stem = dir.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "out".into());
        let tmp = parent.join(format!(".{stem}.tmp-{}", std::process::id()));
        if tmp.exists() {
            fs::remove_dir_all(&tmp).map_err(|e| Error::io(format!("clearing {}", tmp.display()), e))?;
        }
        let result = self.write_into(&tmp).and_then(|()| move_into_place(&tmp, dir, self.names()));
        if result.is_err() {
            let _ = fs::remove_dir_all(&tmp);
        }
        result
    }

    fn write_into(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
        for (name, bytes) in &self.files {
            let path = dir.join(name);
            fs::write(&path, bytes).map_err(|e| Error::io(format!("writing {}", path.display()), e))?;
        }
        Ok(())
    }
}

fn move_into_place<'a>(tmp: &Path, dir: &Path, names: impl Iterator<Item = &'a str>) -> Result<()> {
    if !dir.exists() {
        return fs::rename(tmp, dir).map_err(|e| Error::io(format!("renaming into {}", dir.display()), e));
    }
    for name in names {
        let to = dir.join(name);
        fs::rename(tmp.join(name), &to).map_err(|e| Error::io(format!("renaming into {}", to.display()), e))?;
    }
    fs::remove_dir(tmp).map_err(|e| Error::io(format!("removing {}", tmp.display()), e))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileHash {
    pub file: String,
    pub sha256: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub experiment: String,
    pub version: String,
    pub config: serde_json::Value,
    /// Rates and inverse temperature derived from the dimensionless groups.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub derived: Option<serde_json::Value>,
    pub seeding: String,
    pub workers: usize,
    pub stats: ManifestStats,
    pub wall_time_s: f64,
    /// Experiment-specific headline numbers.
    pub summary: serde_json::Value,
    pub files: Vec<FileHash>,
    pub content_hash: String,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ManifestStats {
    pub steps: usize,
    pub rejects: usize,
    pub repairs: usize,
    pub rhs_evals: usize,
    pub repair_rate: f64,
}

impl From<IntegratorStats> for ManifestStats {
    fn from(s: IntegratorStats) -> Self {
        Self { steps: s.steps, rejects: s.rejects, repairs: s.repairs, rhs_evals: s.rhs_evals, repair_rate: s.repair_rate() }
    }
}

/// Kinds of plot panels emitted next to the tables.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlotKind {
    TimSweep,
    Landscape,
    Ring,
    Pump,
}

/// Gnuplot script for the files of one run.
pub fn plot_script(kind: PlotKind, files: &[String]) -> String {
    let mut s = String::from("# gnuplot script; run from this directory: gnuplot -p plot.gp\nset datafile separator ','\nset key autotitle columnhead\n");
    match kind {
        PlotKind::TimSweep => {
            s.push_str("set xlabel 'J/B'\nset ylabel '<sigma_x>'\n");
            s.push_str("plot for [b in 'symmetric plus minus'] 'tim_pt.csv' using 1:(stringcolumn(2) eq b ? $3 : NaN) with linespoints title b, \\\n");
            s.push_str("     'mfa.csv' using 1:2 with lines dt 2 title 'MFA +', '' using 1:3 with lines dt 2 title 'MFA -'\n");
            s.push_str("pause -1\nset ylabel 'tau_total'\n");
            s.push_str("plot 'tim_pt.csv' using 1:(stringcolumn(2) eq 'symmetric' ? $4 : NaN) with linespoints title 'tau'\n");
            s.push_str("pause -1\nset ylabel 'p_n'\n");
            s.push_str("plot for [k=9:12] 'tim_pt.csv' using 1:(stringcolumn(2) eq 'symmetric' ? column(k) : NaN) with linespoints title sprintf('p%d', k-8)\n");
        }
        PlotKind::Landscape => {
            s.push_str("set xlabel 'ratio'\nset ylabel 's'\nset zlabel 'U_eff'\n");
            s.push_str("splot 'landscape.csv' using 1:2:3 with dots notitle\n");
            s.push_str("pause -1\nset ylabel 'minima'\nplot 'minima.csv' using 1:2 with steps notitle\n");
        }
        PlotKind::Ring => {
            s.push_str("set xrange [-1:1]\nset yrange [-1:1]\nset zrange [-1:1]\nset view equal xyz\n");
            let blochs: Vec<&String> = files.iter().filter(|f| f.starts_with("bloch_spin")).collect();
            let parts: Vec<String> =
                blochs.iter().map(|f| format!("'{f}' using 2:3:4 with lines title '{f}'")).collect();
            s.push_str(&format!("splot {}\n", parts.join(", \\\n      ")));
            s.push_str("pause -1\nunset xrange\nunset yrange\nset xlabel 'gamma_D t'\nset ylabel 'tau'\n");
            s.push_str("plot for [kind in 'NN SNN'] 'tau.csv' using 1:(stringcolumn(3) eq kind ? $2 : NaN) with lines title kind\n");
        }
        PlotKind::Pump => {
            s.push_str("set xrange [-2:2]\nset yrange [-2:2]\nset zrange [-2:2]\nset view equal xyz\n");
            let parts: Vec<String> = files
                .iter()
                .filter(|f| f.starts_with("bloch_"))
                .map(|f| format!("'{f}' using 2:3:4 with lines title '{f}'"))
                .collect();
            s.push_str(&format!("splot {}\n", parts.join(", \\\n      ")));
        }
    }
    s.push_str("pause -1\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_round_trips() {
        for x in [0.0, -0.0, 1.0 / 3.0, 1e-300, 6.02214076e23, -2.5, f64::MIN_POSITIVE] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits(), "{s}");
        }
        assert_eq!(fmt_f64(0.1), "1.0000000000000001e-1");
    }

    #[test]
    fn empty_table_is_header_only() {
        let bytes = tim_pt_table(&[]).to_csv_bytes().unwrap();
        assert_eq!(
            String::from_utf8(bytes).unwrap(),
            "J_over_B,branch,sigma_x,tau_total,E1,E2,E3,E4,p1,p2,p3,p4,classification\n"
        );
    }

    #[test]
    fn commit_is_atomic_and_merges() {
        let root = tempfile::tempdir().unwrap();
        let dir = root.path().join("run");
        let mut out = OutputSet::default();
        out.add_text("a.txt", "one");
        out.commit(&dir).unwrap();
        let mut again = OutputSet::default();
        again.add_text("b.txt", "two");
        again.commit(&dir).unwrap();
        assert_eq!(fs::read_to_string(dir.join("a.txt")).unwrap(), "one");
        assert_eq!(fs::read_to_string(dir.join("b.txt")).unwrap(), "two");
        let leftovers: Vec<_> = fs::read_dir(root.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
        assert_eq!(leftovers.len(), 1, "{leftovers:?}");
    }

    #[test]
    fn content_hash_ignores_insertion_order() {
        let mut a = OutputSet::default();
        a.add_text("x", "1");
        a.add_text("y", "2");
        let mut b = OutputSet::default();
        b.add_text("y", "2");
        b.add_text("x", "1");
        assert_eq!(a.hashes().1, b.hashes().1);
        b.add_text("z", "");
        assert_ne!(a.hashes().1, b.hashes().1);
    }
}
