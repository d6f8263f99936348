//! Experiment configuration: one JSON document, with command-line overrides
//! applied on top before validation.

use std::path::{Path, PathBuf};

use ripstat::geometry::ShapeSpec;
use ripstat::{Error, Result};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

pub const OUTPUT_DIR_ENV: &str = "RIPSTAT_OUTPUT_DIR";

pub const DEFAULT_AUTO_INITIAL: f64 = 0.1;
pub const DEFAULT_AUTO_GROWTH: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Maxscale {
    Value(f64),
    Auto(AutoTag),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AutoTag {
    Auto,
}

impl Maxscale {
    pub fn auto() -> Self {
        Maxscale::Auto(AutoTag::Auto)
    }
}

/// Grid for the `table` command. Empty lists fall back to the scalar field.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    #[serde(default)]
    pub n: Vec<usize>,
    #[serde(default)]
    pub noise_fraction: Vec<f64>,
    #[serde(default)]
    pub maxscale: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(flatten)]
    pub shape: ShapeSpec,
    pub n: usize,
    #[serde(default, alias = "M")]
    pub noise_fraction: f64,
    #[serde(default = "default_maxscale")]
    pub maxscale: Maxscale,
    #[serde(default)]
    pub maxdim: usize,
    #[serde(default = "default_reps")]
    pub n_reps: usize,
    #[serde(default = "default_collections")]
    pub n_collections: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Largest order statistic reported by `table`.
    #[serde(default = "default_j_max")]
    pub j_max: usize,
    #[serde(default = "default_auto_initial")]
    pub auto_initial: f64,
    #[serde(default = "default_auto_growth")]
    pub auto_growth: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub grid: Grid,
}

fn default_maxscale() -> Maxscale {
    Maxscale::auto()
}
fn default_reps() -> usize {
    1000
}
fn default_collections() -> usize {
    100
}
fn default_alpha() -> f64 {
    0.05
}
fn default_j_max() -> usize {
    2
}
fn default_auto_initial() -> f64 {
    DEFAULT_AUTO_INITIAL
}
fn default_auto_growth() -> f64 {
    DEFAULT_AUTO_GROWTH
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}

impl ExperimentConfig {
    /// Reads the config file (if any), applies `overrides` and validates.
    pub fn load(path: Option<&Path>, overrides: Map<String, Value>) -> Result<Self> {
        let mut doc = match path {
            Some(p) => serde_json::from_str::<Value>(&std::fs::read_to_string(p)?)?,
            None => Value::Object(Map::new()),
        };
        let obj = doc.as_object_mut().ok_or_else(|| Error::Parse("config must be a JSON object".into()))?;
        let shape_changed = overrides.get("shape").is_some_and(|v| obj.get("shape") != Some(v));
        if shape_changed {
            // Parameters of the previous shape would not fit the new one.
            for key in ["r", "d_outer", "d_inner", "inner_ratio", "gap"] {
                if !overrides.contains_key(key) {
                    obj.remove(key);
                }
            }
        }
        for (k, v) in overrides {
            obj.insert(k, v);
        }
        if !obj.contains_key("shape") {
            obj.insert("shape".into(), Value::from("circle"));
        }
        fill_shape_defaults(obj);
        let config: ExperimentConfig = serde_json::from_value(doc).map_err(|e| invalid(format!("config: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.shape == ShapeSpec::External {
            return Err(invalid("the experiment shape must be a sampler, not external"));
        }
        self.shape.validate(self.n)?;
        check_fraction(self.noise_fraction)?;
        if let Maxscale::Value(v) = self.maxscale {
            check_maxscale(v)?;
        }
        if self.maxdim > ripstat::rips::MAX_DIM {
            return Err(invalid(format!("maxdim must be at most {}, got {}", ripstat::rips::MAX_DIM, self.maxdim)));
        }
        if self.n_reps == 0 {
            return Err(invalid("n_reps must be at least 1"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(invalid(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if self.j_max == 0 {
            return Err(invalid("j_max must be at least 1"));
        }
        if !(self.auto_initial > 0.0) || !(self.auto_growth > 1.0) {
            return Err(invalid("auto maxscale needs auto_initial > 0 and auto_growth > 1"));
        }
        for &n in &self.grid.n {
            self.shape.validate(n)?;
        }
        for &m in &self.grid.noise_fraction {
            check_fraction(m)?;
        }
        for &s in &self.grid.maxscale {
            check_maxscale(s)?;
        }
        Ok(())
    }

    /// Output directory: command line, then config, then environment, then
    /// the working directory.
    pub fn output_dir(&self, flag: Option<&Path>) -> PathBuf {
        flag.map(Path::to_path_buf)
            .or_else(|| self.output_dir.clone())
            .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("."))
    }

    pub fn grid_n(&self) -> Vec<usize> {
        if self.grid.n.is_empty() { vec![self.n] } else { self.grid.n.clone() }
    }

    pub fn grid_noise(&self) -> Vec<f64> {
        if self.grid.noise_fraction.is_empty() { vec![self.noise_fraction] } else { self.grid.noise_fraction.clone() }
    }

    pub fn grid_maxscale(&self) -> Vec<Maxscale> {
        if self.grid.maxscale.is_empty() {
            vec![self.maxscale]
        } else {
            self.grid.maxscale.iter().map(|&v| Maxscale::Value(v)).collect()
        }
    }
}

fn check_fraction(m: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&m) {
        return Err(invalid(format!("noise fraction must lie in [0, 1], got {m}")));
    }
    Ok(())
}

fn check_maxscale(v: f64) -> Result<()> {
    if !(v > 0.0) {
        return Err(invalid(format!("maxscale must be positive, got {v}")));
    }
    Ok(())
}

/// Default geometry for each shape: unit circle, concentric diameters 4 and
/// 2, two circles of radius 0.3 with gap 0.6, unit sphere.
fn fill_shape_defaults(obj: &mut Map<String, Value>) {
    let defaults: &[(&str, f64)] = match obj.get("shape").and_then(Value::as_str) {
        Some("circle") | Some("sphere") => &[("r", 1.0)],
        Some("two_concentric") => &[("d_outer", 4.0), ("d_inner", 2.0)],
        Some("two_distinct") => &[("r", 0.3), ("gap", 0.6)],
        _ => &[],
    };
    for &(k, v) in defaults {
        obj.entry(k).or_insert(Value::from(v));
    }
    obj.entry("n").or_insert(Value::from(500));
}
