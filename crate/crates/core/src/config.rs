//! JSON run configuration.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::disentangle::Quantifier;
use crate::engine::EvolutionParams;
use crate::error::{Error, Result};
use crate::experiments::{LandscapeSpec, PumpSpec, Ring5Spec, SteadySettings, SweepSpec, TimPtSpec};

/// Environment variable overriding the worker count when `--workers` is absent.
pub const WORKERS_ENV: &str = "DETANGLE_WORKERS";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentId {
    TimPt,
    Landscape,
    Ring5,
    Pump,
    Identities,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 5] =
        [ExperimentId::TimPt, ExperimentId::Landscape, ExperimentId::Ring5, ExperimentId::Pump, ExperimentId::Identities];

    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentId::TimPt => "tim-pt",
            ExperimentId::Landscape => "landscape",
            ExperimentId::Ring5 => "ring5",
            ExperimentId::Pump => "pump",
            ExperimentId::Identities => "identities",
        }
    }

    /// Name of the swept parameter.
    pub fn sweep_parameter(self) -> Option<&'static str> {
        match self {
            ExperimentId::TimPt | ExperimentId::Pump => Some("J/B"),
            ExperimentId::Landscape => Some("ratio"),
            ExperimentId::Ring5 | ExperimentId::Identities => None,
        }
    }
}

impl std::fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExperimentId {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Self::ALL.into_iter().find(|e| e.as_str() == s).ok_or_else(|| {
            let names: Vec<_> = Self::ALL.iter().map(|e| e.as_str()).collect();
            format!("unknown experiment `{s}` (expected one of {})", names.join(", "))
        })
    }
}

/// Sweep grid given either as explicit values or as an inclusive range.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
}

impl SweepConfig {
    pub fn from_values(values: Vec<f64>) -> Self {
        Self { values: Some(values), ..Self::default() }
    }

    pub fn to_spec(&self, parameter: &str) -> Result<SweepSpec> {
        let spec = match (&self.values, self.start, self.stop, self.count) {
            (Some(v), None, None, None) => SweepSpec::new(parameter, v.clone()),
            (None, Some(a), Some(b), Some(n)) => SweepSpec::linspace(parameter, a, b, n),
            _ => {
                return Err(Error::ConfigRange(
                    "sweep needs either `values` or all of `start`, `stop`, `count`".into(),
                ))
            }
        };
        spec.map_err(range_error)
    }
}

/// Model settings; each experiment reads the keys it needs.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub j_over_b: Option<f64>,
    /// Pump frequency of the lab-frame model.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_l: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_points: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mirror: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cycle_windows: Option<[f64; 2]>,
    /// `βB` of the entropy term in the full landscape free energy.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub full_free_energy: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: ExperimentId,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub quantifier: Quantifier,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evolution: Option<EvolutionParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steady: Option<SteadySettings>,
}

fn range_error(e: Error) -> Error {
    match e {
        Error::Parameter(msg) => Error::ConfigRange(msg),
        other => other,
    }
}

impl RunConfig {
    /// Config with every optional section filled with the experiment's defaults.
    pub fn defaults_for(experiment: ExperimentId) -> Self {
        let base = RunConfig {
            experiment,
            seed: 0,
            quantifier: Quantifier::default(),
            output_dir: None,
            evolution: None,
            model: None,
            sweep: None,
            steady: None,
        };
        base.with_defaults()
    }

    /// Fills absent sections and keys from the experiment defaults.
    pub fn with_defaults(mut self) -> Self {
        let mut model = self.model.take().unwrap_or_default();
        match self.experiment {
            ExperimentId::TimPt => {
                let d = TimPtSpec::figure_defaults();
                self.evolution.get_or_insert(d.params);
                self.sweep.get_or_insert_with(|| SweepConfig::from_values(d.sweep.values));
                self.steady.get_or_insert(d.settings);
            }
            ExperimentId::Landscape => {
                let d = LandscapeSpec::figure_defaults();
                model.j_over_b.get_or_insert(d.j_over_b);
                model.s_points.get_or_insert(d.s_points);
                self.sweep.get_or_insert_with(|| SweepConfig::from_values(d.ratios.values));
            }
            ExperimentId::Ring5 => {
                let d = Ring5Spec::figure_defaults();
                self.evolution.get_or_insert(d.params);
                model.j_over_b.get_or_insert(d.j_over_b);
                model.mirror.get_or_insert(d.mirror);
                self.steady.get_or_insert(d.settings);
            }
            ExperimentId::Pump => {
                let d = PumpSpec::figure_defaults();
                self.evolution.get_or_insert(d.params);
                model.omega_l.get_or_insert(d.omega_l);
                model.cycle_windows.get_or_insert(d.cycle_windows);
                self.sweep.get_or_insert_with(|| SweepConfig::from_values(d.sweep.values));
                self.steady.get_or_insert(d.settings);
            }
            ExperimentId::Identities => {}
        }
        if model != ModelConfig::default() {
            self.model = Some(model);
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(p) = &self.evolution {
            p.validate().map_err(range_error)?;
        }
        if let Some(s) = &self.steady {
            s.validate().map_err(range_error)?;
        }
        if let (Some(sweep), Some(name)) = (&self.sweep, self.experiment.sweep_parameter()) {
            sweep.to_spec(name)?;
        }
        if let Some(m) = &self.model {
            let check = |ok: bool, msg: String| if ok { Ok(()) } else { Err(Error::ConfigRange(msg)) };
            if let Some(j) = m.j_over_b {
                check(j.is_finite() && j >= 0.0, format!("j_over_b = {j} must be ≥ 0"))?;
            }
            if let Some(w) = m.omega_l {
                check(w.is_finite() && w > 0.0, format!("omega_l = {w} must be > 0"))?;
            }
            if let Some(n) = m.s_points {
                check(n >= 4 && n % 2 == 0, format!("s_points = {n} must be even and ≥ 4"))?;
            }
            if let Some(ws) = m.cycle_windows {
                check(
                    ws.iter().all(|w| *w > 0.0 && *w <= 1.0) && ws[0] != ws[1],
                    format!("cycle_windows = {ws:?} must be two distinct fractions in (0, 1]"),
                )?;
            }
            if let Some(t) = m.full_free_energy {
                check(t.is_finite() && t > 0.0, format!("full_free_energy = {t} must be > 0"))?;
            }
        }
        Ok(())
    }

    fn model(&self) -> ModelConfig {
        self.model.clone().unwrap_or_default()
    }

    fn filled(&self) -> RunConfig {
        self.clone().with_defaults()
    }

    fn sweep_spec(&self) -> Result<SweepSpec> {
        let name = self.experiment.sweep_parameter().unwrap_or("value");
        self.sweep.as_ref().expect("filled by defaults").to_spec(name)
    }

    pub fn tim_pt_spec(&self) -> Result<TimPtSpec> {
        let c = self.filled();
        Ok(TimPtSpec {
            sweep: c.sweep_spec()?,
            params: c.evolution.expect("filled by defaults"),
            quantifier: c.quantifier,
            settings: c.steady.expect("filled by defaults"),
        })
    }

    pub fn landscape_spec(&self) -> Result<LandscapeSpec> {
        let c = self.filled();
        let m = c.model();
        Ok(LandscapeSpec {
            j_over_b: m.j_over_b.expect("filled by defaults"),
            ratios: c.sweep_spec()?,
            s_points: m.s_points.expect("filled by defaults"),
            quantifier: c.quantifier,
            full_free_energy: m.full_free_energy,
        })
    }

    pub fn ring5_spec(&self) -> Result<Ring5Spec> {
        let c = self.filled();
        let m = c.model();
        Ok(Ring5Spec {
            j_over_b: m.j_over_b.expect("filled by defaults"),
            params: c.evolution.expect("filled by defaults"),
            quantifier: c.quantifier,
            settings: c.steady.expect("filled by defaults"),
            mirror: m.mirror.expect("filled by defaults"),
        })
    }

    pub fn pump_spec(&self) -> Result<PumpSpec> {
        let c = self.filled();
        let m = c.model();
        Ok(PumpSpec {
            sweep: c.sweep_spec()?,
            params: c.evolution.expect("filled by defaults"),
            omega_l: m.omega_l.expect("filled by defaults"),
            quantifier: c.quantifier,
            settings: c.steady.expect("filled by defaults"),
            cycle_windows: m.cycle_windows.expect("filled by defaults"),
        })
    }
}

/// Parses JSON text into a validated config with defaults filled.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let config: RunConfig = serde_json::from_str(text).map_err(classify_json_error)?;
    let config = config.with_defaults();
    config.validate()?;
    Ok(config)
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::ConfigParse { line: 0, column: 0, message: format!("{}: {e}", path.display()) })?;
    parse_config(&text)
}

fn classify_json_error(e: serde_json::Error) -> Error {
    let message = e.to_string();
    if let Some(rest) = message.strip_prefix("unknown field `") {
        if let Some(end) = rest.find('`') {
            return Error::UnknownKey(rest[..end].to_string());
        }
    }
    // serde_json appends " at line L column C"; keep only the message
    let message = match message.rfind(" at line ") {
        Some(i) => message[..i].to_string(),
        None => message,
    };
    Error::ConfigParse { line: e.line(), column: e.column(), message }
}

/// Worker count: explicit value, else `DETANGLE_WORKERS`, else available cores.
pub fn resolve_workers(explicit: Option<usize>) -> Result<usize> {
    let from_env = || match std::env::var(WORKERS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map(Some)
            .map_err(|_| Error::ConfigRange(format!("{WORKERS_ENV} = `{v}` is not a positive integer"))),
        Err(_) => Ok(None),
    };
    let n = match explicit {
        Some(n) => n,
        None => match from_env()? {
            Some(n) => n,
            None => std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
        },
    };
    if n == 0 {
        return Err(Error::ConfigRange("worker count must be ≥ 1".into()));
    }
    Ok(n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = parse_config(r#"{"experiment": "tim-pt"}"#).unwrap();
        assert_eq!(c.evolution.unwrap(), EvolutionParams::new(50.0, 100.0, 10.0));
        assert_eq!(c.sweep.unwrap().values.unwrap().len(), 21);
    }

    #[test]
    fn partial_evolution_gets_defaults() {
        let c = parse_config(r#"{"experiment": "ring5", "evolution": {"g_h": 1, "g_d": 2}}"#).unwrap();
        let p = c.evolution.unwrap();
        assert_eq!(p.theta_t, 10.0);
        assert_eq!(p.eps_floor, 1e-12);
    }

    #[test]
    fn misspelled_key_is_named() {
        let err = parse_config(r#"{"experiment": "ring5", "evolution": {"gama_h": 1, "g_d": 2}}"#).unwrap_err();
        assert!(matches!(&err, Error::UnknownKey(k) if k == "gama_h"), "{err}");
    }

    #[test]
    fn negative_temperature_is_a_range_error() {
        let err =
            parse_config(r#"{"experiment": "tim-pt", "evolution": {"g_h": 1, "g_d": 2, "theta_t": -1}}"#).unwrap_err();
        assert!(matches!(err, Error::ConfigRange(_)), "{err}");
    }

    #[test]
    fn syntax_error_reports_position() {
        let err = parse_config("{\n  \"experiment\": \"tim-pt\",\n  \"seed\": }").unwrap_err();
        match err {
            Error::ConfigParse { line, column, .. } => assert_eq!((line, column), (3, 11)),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn sweep_forms() {
        let c = parse_config(r#"{"experiment": "pump", "sweep": {"start": 1, "stop": 2, "count": 3}}"#).unwrap();
        assert_eq!(c.pump_spec().unwrap().sweep.values, vec![1.0, 1.5, 2.0]);
        let err = parse_config(r#"{"experiment": "pump", "sweep": {"start": 1, "values": [1]}}"#).unwrap_err();
        assert!(matches!(err, Error::ConfigRange(_)));
        let err = parse_config(r#"{"experiment": "pump", "sweep": {"values": [2, 1]}}"#).unwrap_err();
        assert!(matches!(err, Error::ConfigRange(_)));
    }

    #[test]
    fn round_trip() {
        for id in ExperimentId::ALL {
            let c = RunConfig::defaults_for(id);
            let text = serde_json::to_string_pretty(&c).unwrap();
            assert_eq!(parse_config(&text).unwrap(), c);
        }
    }

    #[test]
    fn experiment_names() {
        for id in ExperimentId::ALL {
            assert_eq!(id.as_str().parse::<ExperimentId>().unwrap(), id);
        }
        assert!("fig1".parse::<ExperimentId>().is_err());
    }
}
