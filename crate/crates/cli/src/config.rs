//! Experiment parameters from a JSON file overlaid with command-line flags.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::CliError;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "ROUGHPATH_OUT_DIR";

/// Every parameter a subcommand may take. Unset fields fall back to the
/// subcommand's defaults.
#[derive(Args, Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Subcommand the file was written for; must match the one invoked.
    #[arg(skip)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<String>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    /// Number of grid cells.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Dyadic refinement levels.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels: Option<usize>,
    /// Fine substeps per cell.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub refinement: Option<usize>,
    /// Vector field: `linear`, `sine` or `constant`.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi: Option<String>,
    /// Initial value, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y0: Option<Vec<f64>>,
    #[arg(long)]
    #[serde(default, alias = "tolerance", skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    /// Test path: `line`, `smooth`, `sine` or `brownian`.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
    /// Target signature level.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level: Option<usize>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    /// Number of randomized instances.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    /// Integrability exponent of the GRR diagnostic.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    /// Output directory.
    #[arg(long = "out")]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// Fields set in `flags` replace those of `self`.
    pub fn overlay(self, flags: ExperimentConfig) -> Self {
        macro_rules! pick {
            ($($f:ident),*) => {
                ExperimentConfig { $($f: flags.$f.or(self.$f)),* }
            };
        }
        pick!(
            command, gamma, rho, n, seed, levels, refinement, phi, y0, tol, path, level, dim,
            samples, p, output
        )
    }

    /// Parameters set explicitly, without the command and output keys.
    pub fn given(&self) -> BTreeMap<String, Value> {
        let mut stripped = self.clone();
        stripped.command = None;
        stripped.output = None;
        match serde_json::to_value(&stripped).expect("config serializes") {
            Value::Object(map) => map.into_iter().collect(),
            _ => BTreeMap::new(),
        }
    }

    /// The directory outputs go to: flag or file, then the environment, then `.`.
    pub fn output_dir(&self) -> PathBuf {
        self.output
            .clone()
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("."))
    }
}

/// Hands out parameters with defaults and range checks, recording the
/// resolved values for the summary.
pub struct Resolver {
    name: &'static str,
    given: BTreeMap<String, Value>,
    resolved: BTreeMap<String, Value>,
}

impl Resolver {
    pub fn new(name: &'static str, config: &ExperimentConfig) -> Result<Self, CliError> {
        if let Some(c) = &config.command {
            if c != name {
                return Err(CliError::Config(format!(
                    "config was written for `{c}`, not `{name}`"
                )));
            }
        }
        Ok(Self {
            name,
            given: config.given(),
            resolved: BTreeMap::new(),
        })
    }

    fn take(&mut self, key: &str) -> Option<Value> {
        self.given.remove(key)
    }

    pub fn f64(
        &mut self,
        key: &str,
        default: f64,
        ok: impl Fn(f64) -> bool,
        range: &str,
    ) -> Result<f64, CliError> {
        let v = match self.take(key) {
            Some(v) => v.as_f64().ok_or_else(|| self.bad(key, "a number"))?,
            None => default,
        };
        if !v.is_finite() || !ok(v) {
            return Err(self.bad(key, range));
        }
        self.resolved.insert(key.into(), v.into());
        Ok(v)
    }

    pub fn usize(
        &mut self,
        key: &str,
        default: usize,
        ok: impl Fn(usize) -> bool,
        range: &str,
    ) -> Result<usize, CliError> {
        let v = match self.take(key) {
            Some(v) => v
                .as_u64()
                .ok_or_else(|| self.bad(key, "a non-negative integer"))?
                as usize,
            None => default,
        };
        if !ok(v) {
            return Err(self.bad(key, range));
        }
        self.resolved.insert(key.into(), v.into());
        Ok(v)
    }

    pub fn u64(&mut self, key: &str, default: u64) -> Result<u64, CliError> {
        let v = match self.take(key) {
            Some(v) => v
                .as_u64()
                .ok_or_else(|| self.bad(key, "a non-negative integer"))?,
            None => default,
        };
        self.resolved.insert(key.into(), v.into());
        Ok(v)
    }

    pub fn choice(
        &mut self,
        key: &str,
        default: &str,
        allowed: &[&str],
    ) -> Result<String, CliError> {
        let v = match self.take(key) {
            Some(Value::String(s)) => s,
            Some(_) => return Err(self.bad(key, "a string")),
            None => default.to_string(),
        };
        if !allowed.contains(&v.as_str()) {
            return Err(self.bad(key, &format!("one of {}", allowed.join(", "))));
        }
        self.resolved.insert(key.into(), v.clone().into());
        Ok(v)
    }

    pub fn vec(
        &mut self,
        key: &str,
        default: &[f64],
        len: impl Fn(usize) -> bool,
        range: &str,
    ) -> Result<Vec<f64>, CliError> {
        let v = match self.take(key) {
            Some(v) => serde_json::from_value::<Vec<f64>>(v)
                .map_err(|_| self.bad(key, "a list of numbers"))?,
            None => default.to_vec(),
        };
        if !len(v.len()) || v.iter().any(|x| !x.is_finite()) {
            return Err(self.bad(key, range));
        }
        self.resolved.insert(key.into(), v.clone().into());
        Ok(v)
    }

    fn bad(&self, key: &str, expected: &str) -> CliError {
        CliError::Config(format!("`{key}` for `{}` must be {expected}", self.name))
    }

    /// Fails on parameters the subcommand never asked for.
    pub fn finish(self) -> Result<BTreeMap<String, Value>, CliError> {
        if let Some(key) = self.given.keys().next() {
            return Err(CliError::Config(format!(
                "parameter `{key}` is not used by `{}`",
                self.name
            )));
        }
        Ok(self.resolved)
    }
}

pub fn power_of_two(n: usize) -> bool {
    n >= 2 && n.is_power_of_two()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file_values() {
        let file: ExperimentConfig =
            serde_json::from_str(r#"{"gamma": 0.6, "n": 64, "tolerance": 1e-8}"#).unwrap();
        let flags = ExperimentConfig {
            n: Some(128),
            ..Default::default()
        };
        let merged = file.overlay(flags);
        assert_eq!(merged.gamma, Some(0.6));
        assert_eq!(merged.n, Some(128));
        assert_eq!(merged.tol, Some(1e-8));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"gama": 0.6}"#).is_err());
    }

    #[test]
    fn resolver_checks_ranges_and_leftovers() {
        let cfg = ExperimentConfig {
            gamma: Some(1.5),
            seed: Some(3),
            ..Default::default()
        };
        let mut r = Resolver::new("young-rate", &cfg).unwrap();
        assert!(r
            .f64("gamma", 0.75, |g| g > 0.0 && g <= 1.0, "in (0, 1]")
            .is_err());

        let cfg = ExperimentConfig {
            seed: Some(3),
            ..Default::default()
        };
        let mut r = Resolver::new("young-rate", &cfg).unwrap();
        assert_eq!(r.f64("gamma", 0.75, |_| true, "").unwrap(), 0.75);
        let err = r.finish().unwrap_err();
        assert!(err.to_string().contains("`seed`"));

        let cfg = ExperimentConfig {
            command: Some("bm-gen".into()),
            ..Default::default()
        };
        assert!(Resolver::new("young-rate", &cfg).is_err());
    }
}
