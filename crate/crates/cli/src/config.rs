//! Run configuration: a TOML document with dotted sections, overridable
//! key by key from the command line.

use std::path::{Path, PathBuf};

use nelson_core::estimator::McOptions;
use nelson_core::fock::{GridResolution, LanczosOptions};
use nelson_core::{ModelParams, QuadratureConfig};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("config does not parse: {0}")]
    Parse(String),
    #[error("bad override `{0}`: expected key=value")]
    Override(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    /// Time step; every horizon gets `n_steps = 2·round(T/dt)`.
    pub dt: f64,
}

impl Default for GridSection {
    fn default() -> Self {
        Self { dt: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub g_list: Vec<f64>,
    pub eps_list: Vec<f64>,
    pub horizons: Vec<f64>,
    pub gamma_horizons: Vec<f64>,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            g_list: vec![0.4, 0.2, 0.1],
            eps_list: vec![0.2, 0.1, 0.05, 0.02],
            horizons: vec![4.0, 8.0, 12.0],
            gamma_horizons: vec![2.0, 4.0, 8.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KernelsSection {
    pub t_max: f64,
    pub n_t: usize,
    pub tau_list: Vec<f64>,
}

impl Default for KernelsSection {
    fn default() -> Self {
        Self {
            t_max: 4.0,
            n_t: 41,
            tau_list: vec![0.25, 0.5, 1.0, 2.0, 4.0, 8.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FockSection {
    pub resolution: GridResolution,
    pub n_max: usize,
    pub g_list: Vec<f64>,
    pub lanczos: LanczosOptions,
    /// Write the matrix at the first coupling in coordinate format.
    pub export_matrix: bool,
}

impl Default for FockSection {
    fn default() -> Self {
        Self {
            resolution: GridResolution::default(),
            n_max: 2,
            g_list: vec![0.05, 0.1, 0.2],
            lanczos: LanczosOptions::default(),
            export_matrix: false,
        }
    }
}

/// Settings of the cross-check suite run by `verify`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifySection {
    pub dual_eps: Vec<f64>,
    pub dual_lambda: Vec<f64>,
    pub ito_dts: Vec<f64>,
    pub ito_paths: usize,
    pub ito_min_ratio: f64,
    pub dyson_dt: f64,
    pub dyson_paths: usize,
    pub gamma_g: f64,
    /// Checks to leave out, by name.
    pub skip: Vec<String>,
}

impl Default for VerifySection {
    fn default() -> Self {
        Self {
            dual_eps: vec![0.2, 0.1, 0.05],
            dual_lambda: vec![0.5, 1.0, 2.0],
            ito_dts: vec![0.1, 0.05, 0.025],
            ito_paths: 1000,
            ito_min_ratio: 1.25,
            dyson_dt: 0.0125,
            dyson_paths: 10_000,
            gamma_g: 0.3,
            skip: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: PathBuf::from("out") }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub model: ModelParams,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub quad: QuadratureConfig,
    pub mc: McOptions,
    #[serde(default)]
    pub sweeps: SweepSection,
    #[serde(default)]
    pub kernels: KernelsSection,
    #[serde(default)]
    pub fock: FockSection,
    #[serde(default)]
    pub verify: VerifySection,
    #[serde(default)]
    pub output: OutputSection,
}

impl RunConfig {
    /// Defaults for everything except the seed, which has none.
    pub fn with_seed(seed: u64) -> Self {
        Self {
            model: ModelParams::default(),
            grid: GridSection::default(),
            quad: QuadratureConfig::default(),
            mc: McOptions::new(10_000, seed),
            sweeps: SweepSection::default(),
            kernels: KernelsSection::default(),
            fock: FockSection::default(),
            verify: VerifySection::default(),
            output: OutputSection::default(),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |e: &dyn std::fmt::Display| ConfigError::Invalid(e.to_string());
        self.model.validate().map_err(|e| invalid(&e))?;
        self.quad.validate().map_err(|e| invalid(&e))?;
        self.mc.validate().map_err(|e| invalid(&e))?;
        if self.mc.seed > i64::MAX as u64 {
            return Err(ConfigError::Invalid(format!("mc.seed must be below 2^63, got {}", self.mc.seed)));
        }
        if !(self.grid.dt > 0.0 && self.grid.dt.is_finite()) {
            return Err(ConfigError::Invalid(format!("grid.dt must be positive, got {}", self.grid.dt)));
        }
        if self.kernels.n_t < 2 || !(self.kernels.t_max > 0.0) {
            return Err(ConfigError::Invalid("kernels needs n_t >= 2 and t_max > 0".into()));
        }
        Ok(())
    }

    /// Reads `path` (when given), applies `key=value` overrides and a seed,
    /// in that order. Without a file the seed must come from the overrides.
    pub fn load(path: Option<&Path>, overrides: &[String], seed: Option<u64>) -> Result<Self, ConfigError> {
        let mut doc = toml::Table::try_from(Self::with_seed(0)).expect("defaults serialize");
        if let Some(mc) = doc.get_mut("mc").and_then(|v| v.as_table_mut()) {
            mc.remove("seed");
        }
        if let Some(p) = path {
            let text = std::fs::read_to_string(p).map_err(|source| ConfigError::Read {
                path: p.to_path_buf(),
                source,
            })?;
            let file: toml::Table = text.parse().map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
            merge(&mut doc, file);
        }
        for ov in overrides {
            apply_override(&mut doc, ov)?;
        }
        if let Some(s) = seed {
            if s > i64::MAX as u64 {
                return Err(ConfigError::Invalid(format!("seed must be below 2^63, got {s}")));
            }
            set_key(&mut doc, "mc.seed", toml::Value::Integer(s as i64))?;
        }
        let has_seed = doc.get("mc").and_then(|v| v.as_table()).is_some_and(|t| t.contains_key("seed"));
        if !has_seed {
            return Err(ConfigError::Invalid("mc.seed is required (config file, --seed or --set mc.seed=...)".into()));
        }
        let cfg: Self = toml::Value::Table(doc)
            .try_into()
            .map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Overlays `top` onto `base`, recursing into tables present in both.
fn merge(base: &mut toml::Table, top: toml::Table) {
    for (k, v) in top {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(t)) => merge(b, t),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

fn set_key(doc: &mut toml::Table, key: &str, value: toml::Value) -> Result<(), ConfigError> {
    let parts: Vec<&str> = key.split('.').collect();
    let mut table = doc;
    for p in &parts[..parts.len() - 1] {
        table = table
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| ConfigError::Override(key.to_string()))?;
    }
    table.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

/// Applies one `dotted.key=value` override. The value is read as a TOML
/// value, or as a string if it does not parse as one.
pub fn apply_override(doc: &mut toml::Table, text: &str) -> Result<(), ConfigError> {
    let (key, raw) = text.split_once('=').ok_or_else(|| ConfigError::Override(text.to_string()))?;
    let key = key.trim();
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(ConfigError::Override(text.to_string()));
    }
    let raw = raw.trim();
    let value = format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    set_key(doc, key, value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn seed_is_mandatory() {
        assert!(RunConfig::load(None, &[], None).is_err());
        let c = RunConfig::load(None, &[], Some(5)).unwrap();
        assert_eq!(c.mc.seed, 5);
        assert_eq!(c, RunConfig::with_seed(5));
    }

    #[test]
    fn overrides_reach_nested_keys() {
        let c = RunConfig::load(
            None,
            &[
                "mc.seed=9".into(),
                "model.g = 0.5".into(),
                "fock.resolution.n_radial=4".into(),
                "sweeps.g_list=[0.3, 0.1]".into(),
                "output.dir=/tmp/x".into(),
            ],
            None,
        )
        .unwrap();
        assert_eq!(c.model.g, 0.5);
        assert_eq!(c.fock.resolution.n_radial, 4);
        assert_eq!(c.sweeps.g_list, vec![0.3, 0.1]);
        assert_eq!(c.output.dir, PathBuf::from("/tmp/x"));
        assert!(RunConfig::load(None, &["mc.seed".into()], None).is_err());
        assert!(RunConfig::load(None, &["mc.seed=1".into(), "model.bogus=1".into()], None).is_err());
    }

    proptest! {
        #[test]
        fn toml_round_trip(
            seed in 0u64..=i64::MAX as u64,
            eps in 1e-3f64..1.0,
            g in -2.0f64..2.0,
            dt in 1e-3f64..0.5,
            n_paths in 100usize..100_000,
            gs in proptest::collection::vec(-1.0f64..1.0, 0..5),
            k_max in proptest::option::of(2.0f64..50.0),
        ) {
            let mut c = RunConfig::with_seed(seed);
            c.model.eps = eps;
            c.model.g = g;
            c.grid.dt = dt;
            c.mc.n_paths = n_paths;
            c.sweeps.g_list = gs;
            c.fock.resolution.k_max = k_max;
            let back = RunConfig::from_toml(&c.to_toml()).unwrap();
            prop_assert_eq!(back, c);
        }
    }
}
