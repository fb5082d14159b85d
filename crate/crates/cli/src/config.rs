//! Flat key-value configuration: file, manifest and `--key value` layers.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use toruscover::experiments::{Certifier, Coupling, ExperimentConfig};
use toruscover::{Body, Torus};

use crate::error::CliError;

/// Every accepted key. Absent keys take their defaults on resolution.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub body: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub side: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l1_radius: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub semi_axes: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub unit_volume: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub torus_side: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub torus_sides: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub intensity: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub intensities: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub master_seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub net_radius: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cell_radius: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target_separation: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub isotropic_constant: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f_n: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mc_samples: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub undetermined_cap: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bootstrap_resamples: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coupling: Option<Coupling>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certifier: Option<Certifier>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub multiplicity_trials: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub multiplicity_net_points: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference_point: Option<Vec<f64>>,
    /// Root tolerance of `constants`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    /// Pilot trials for an adaptive scan grid (0 scans `intensities` as given).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pilot_trials: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pilot_points: Option<usize>,
    /// Trial index drawn by `sample` and `cover`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trial: Option<u64>,
}

/// Configuration with every default materialized.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub experiment: ExperimentConfig,
    pub tolerance: f64,
    pub pilot_trials: usize,
    pub pilot_points: usize,
    pub trial: u64,
    /// Flat form written to the manifest.
    pub echo: RawConfig,
}

/// Accumulates key-value layers; later layers win.
#[derive(Debug, Default)]
pub struct Layers {
    map: Map<String, Value>,
}

impl Layers {
    pub fn file(&mut self, path: &Path) -> Result<(), CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let table: toml::Table = toml::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {}", path.display(), one_line(e.message()))))?;
        for (key, value) in table {
            let json = serde_json::to_value(value).map_err(|e| CliError::Config(format!("key `{key}`: {e}")))?;
            self.set(key, json)?;
        }
        Ok(())
    }

    pub fn object(&mut self, object: &Map<String, Value>) -> Result<(), CliError> {
        for (key, value) in object {
            self.set(key.clone(), value.clone())?;
        }
        Ok(())
    }

    /// `value` is read as a TOML value, falling back to a bare string.
    pub fn override_text(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let parsed = toml::from_str::<toml::Table>(&format!("v = {value}"))
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| toml::Value::String(value.to_string()));
        let json = serde_json::to_value(parsed).map_err(|e| CliError::Config(format!("key `{key}`: {e}")))?;
        self.set(key.replace('-', "_"), json)
    }

    fn set(&mut self, key: String, value: Value) -> Result<(), CliError> {
        let mut single = Map::new();
        single.insert(key.clone(), value.clone());
        serde_json::from_value::<RawConfig>(Value::Object(single)).map_err(|e| {
            let msg = one_line(&e.to_string());
            if msg.starts_with("unknown field") {
                CliError::Config(format!("unknown key `{key}`"))
            } else {
                CliError::Config(format!("key `{key}`: {msg}"))
            }
        })?;
        self.map.insert(key, value);
        Ok(())
    }

    pub fn raw(self) -> Result<RawConfig, CliError> {
        serde_json::from_value(Value::Object(self.map)).map_err(|e| CliError::Config(one_line(&e.to_string())))
    }
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn exclusive<T>(a: Option<T>, an: &str, b: Option<T>, bn: &str) -> Result<Option<T>, CliError> {
    match (a, b) {
        (Some(_), Some(_)) => Err(CliError::Config(format!("keys `{an}` and `{bn}` are mutually exclusive"))),
        (a, b) => Ok(a.or(b)),
    }
}

fn not_for(kind: &str, present: &[(&str, bool)]) -> Result<(), CliError> {
    match present.iter().find(|(_, p)| *p) {
        Some((key, _)) => Err(CliError::Config(format!("key `{key}` does not apply to body `{kind}`"))),
        None => Ok(()),
    }
}

impl RawConfig {
    pub fn resolve(&self) -> Result<Resolved, CliError> {
        let core = |key: &str, e: toruscover::Error| CliError::Config(format!("key `{key}`: {e}"));
        let kind = self.body.clone().unwrap_or_else(|| "ball".into());
        let semi_dim = self.semi_axes.as_ref().map(Vec::len);
        let dim = self.dim.or(semi_dim).unwrap_or(2);
        let mut echo = self.clone();
        let shape_keys = [
            ("radius", self.radius.is_some()),
            ("side", self.side.is_some()),
            ("l1_radius", self.l1_radius.is_some()),
            ("semi_axes", self.semi_axes.is_some()),
        ];
        let others = |keep: &str| -> Vec<(&str, bool)> { shape_keys.iter().filter(|(k, _)| *k != keep).cloned().collect() };
        let body = match kind.as_str() {
            "ball" => {
                not_for(&kind, &others("radius"))?;
                let r = self.radius.unwrap_or(1.0);
                echo.radius = Some(r);
                Body::ball(dim, r).map_err(|e| core("radius", e))?
            }
            "cube" => {
                not_for(&kind, &others("side"))?;
                let s = self.side.unwrap_or(1.0);
                echo.side = Some(s);
                Body::cube(dim, s).map_err(|e| core("side", e))?
            }
            "cross_polytope" => {
                not_for(&kind, &others("l1_radius"))?;
                let a = self.l1_radius.unwrap_or(1.0);
                echo.l1_radius = Some(a);
                Body::cross_polytope(dim, a).map_err(|e| core("l1_radius", e))?
            }
            "ellipsoid" => {
                not_for(&kind, &others("semi_axes"))?;
                let axes = self
                    .semi_axes
                    .clone()
                    .ok_or_else(|| CliError::Config("key `semi_axes` is required for body `ellipsoid`".into()))?;
                if axes.len() != dim {
                    return Err(CliError::Config(format!(
                        "key `semi_axes`: {} entries for dimension {dim}",
                        axes.len()
                    )));
                }
                Body::ellipsoid(axes).map_err(|e| core("semi_axes", e))?
            }
            other => {
                return Err(CliError::Config(format!(
                    "key `body`: unknown body `{other}` (expected ball, cube, cross_polytope or ellipsoid)"
                )))
            }
        };
        let unit_volume = self.unit_volume.unwrap_or(false);
        let body = if unit_volume { body.with_unit_volume() } else { body };
        echo.body = Some(kind);
        echo.dim = Some(dim);
        echo.unit_volume = Some(unit_volume);

        let sides = match exclusive(self.torus_side.map(|s| vec![s; dim]), "torus_side", self.torus_sides.clone(), "torus_sides")? {
            Some(s) => s,
            None => vec![5.0; dim],
        };
        let torus = Torus::new(sides.clone()).map_err(|e| core("torus_sides", e))?;
        echo.torus_side = None;
        echo.torus_sides = Some(sides);
        let intensities = exclusive(self.intensity.map(|r| vec![r]), "intensity", self.intensities.clone(), "intensities")?
            .unwrap_or_else(|| vec![1.0]);
        echo.intensity = None;
        echo.intensities = Some(intensities.clone());

        let mut cfg = ExperimentConfig::new(body, torus, intensities, self.trials.unwrap_or(100));
        macro_rules! take {
            ($($field:ident),*) => {$(
                if let Some(v) = self.$field.clone() {
                    cfg.$field = v;
                }
                echo.$field = Some(cfg.$field.clone());
            )*};
        }
        take!(
            trials, master_seed, net_radius, cell_radius, delta, f_n, omega, mc_samples, undetermined_cap,
            bootstrap_resamples, coupling, certifier, multiplicity_trials, multiplicity_net_points
        );
        cfg.target_separation = self.target_separation;
        cfg.isotropic_constant = self.isotropic_constant;
        cfg.epsilon = self.epsilon;
        cfg.mu = self.mu;
        cfg.reference_point = self.reference_point.clone();

        let tolerance = self.tolerance.unwrap_or(1e-12);
        let pilot_trials = self.pilot_trials.unwrap_or(0);
        let pilot_points = self.pilot_points.unwrap_or(10);
        let trial = self.trial.unwrap_or(0);
        echo.tolerance = Some(tolerance);
        echo.pilot_trials = Some(pilot_trials);
        echo.pilot_points = Some(pilot_points);
        echo.trial = Some(trial);
        Ok(Resolved {
            experiment: cfg,
            tolerance,
            pilot_trials,
            pilot_points,
            trial,
            echo,
        })
    }
}
