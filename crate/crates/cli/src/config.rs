//! Declarative run configuration: line-oriented `key = value` text with
//! defaults, environment overrides, and command-line `--set` overrides.
//!
//! Precedence, lowest to highest: built-in defaults, config file,
//! `CARBONTWIN_*` environment variables (double underscore separates key
//! segments, e.g. `CARBONTWIN_FACTORS__PHI`), then `--set key=value`.
//! The resolved map is hashed (FNV-1a 64) and the hash is embedded in
//! every output file name and header, so identical configurations
//! produce identical artifacts.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

use carbontwin_core::dataset::{SplitSpec, WindowSpec};
use carbontwin_core::emissions::EmissionFactors;
use carbontwin_core::nn::TrainConfig;
use carbontwin_core::pipeline::FitSpec;
use carbontwin_core::schema::Domain;

pub const ENV_PREFIX: &str = "CARBONTWIN_";

#[derive(Debug, Clone)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
}

fn defaults() -> BTreeMap<String, String> {
    let pairs = [
        ("seed", "42"),
        ("run_dir", "runs/default"),
        ("ev.vehicle", "i3"),
        ("factors.phi", "38.5"),
        ("factors.gasoline", "2310"),
        ("factors.ethanol", "1510"),
        ("factors.ethanol_share", "0"),
        ("factors.afr", "14.7"),
        ("factors.fuel_density", "740"),
        ("pacifica.co2_density", "1800"),
        ("pacifica.dilution", "1.0"),
        ("split.train", "0.7"),
        ("split.val", "0.15"),
        ("split.test", "0.15"),
        ("window.length", "10"),
        ("window.stride", "1"),
        ("model.ev.hidden_units", "32"),
        ("model.ev.lstm_layers", "1"),
        ("model.icev.hidden_units", "64"),
        ("model.icev.lstm_layers", "2"),
        ("train.ev.epochs", "20"),
        ("train.icev.epochs", "50"),
        ("train.base_lr", "0.001"),
        ("train.batch_size", "64"),
        ("train.beta1", "0.9"),
        ("train.beta2", "0.999"),
        ("train.eps", "1e-8"),
        ("train.forget_bias", "1.0"),
        ("train.threads", "1"),
    ];
    pairs
        .into_iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

fn env_key_to_config(key: &str) -> String {
    key.trim_start_matches(ENV_PREFIX)
        .to_ascii_lowercase()
        .replace("__", ".")
}

impl RunConfig {
    /// Loads the file (when given), then applies environment and `--set`
    /// overrides on top of the defaults.
    pub fn load(path: Option<&Path>, sets: &[String]) -> Result<RunConfig> {
        let mut values = defaults();
        if let Some(path) = path {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("cannot read config `{}`", path.display()))?;
            for (lineno, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let Some((k, v)) = line.split_once('=') else {
                    bail!("config line {} is not `key = value`: `{line}`", lineno + 1);
                };
                values.insert(k.trim().to_string(), v.trim().to_string());
            }
        }
        for (key, value) in std::env::vars() {
            if key.starts_with(ENV_PREFIX) {
                values.insert(env_key_to_config(&key), value);
            }
        }
        for set in sets {
            let Some((k, v)) = set.split_once('=') else {
                bail!("--set expects key=value, got `{set}`");
            };
            values.insert(k.trim().to_string(), v.trim().to_string());
        }
        Ok(RunConfig { values })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(|s| s.as_str())
    }

    pub fn require(&self, key: &str) -> Result<&str> {
        self.get(key)
            .with_context(|| format!("config key `{key}` is not set"))
    }

    pub fn f64_of(&self, key: &str) -> Result<f64> {
        self.require(key)?
            .parse()
            .with_context(|| format!("config key `{key}` is not a number"))
    }

    pub fn usize_of(&self, key: &str) -> Result<usize> {
        self.require(key)?
            .parse()
            .with_context(|| format!("config key `{key}` is not a count"))
    }

    pub fn u64_of(&self, key: &str) -> Result<u64> {
        self.require(key)?
            .parse()
            .with_context(|| format!("config key `{key}` is not an integer"))
    }

    pub fn seed(&self) -> Result<u64> {
        self.u64_of("seed")
    }

    pub fn run_dir(&self) -> Result<PathBuf> {
        Ok(PathBuf::from(self.require("run_dir")?))
    }

    /// Raw-data location of one profile; the strict variant shares its
    /// base vehicle's path.
    pub fn data_path(&self, profile: &str) -> Option<PathBuf> {
        let base = profile.strip_suffix("-strict").unwrap_or(profile);
        self.get(&format!("data.{base}")).map(PathBuf::from)
    }

    pub fn factors(&self) -> Result<EmissionFactors> {
        let factors = EmissionFactors {
            phi_g_per_kwh: self.f64_of("factors.phi")?,
            gasoline_g_per_l: self.f64_of("factors.gasoline")?,
            ethanol_g_per_l: self.f64_of("factors.ethanol")?,
            ethanol_share_pct: self.f64_of("factors.ethanol_share")?,
            afr: self.f64_of("factors.afr")?,
            fuel_density_g_per_l: self.f64_of("factors.fuel_density")?,
        };
        factors.validate()?;
        Ok(factors)
    }

    pub fn window(&self) -> Result<WindowSpec> {
        Ok(WindowSpec {
            length: self.usize_of("window.length")?,
            stride: self.usize_of("window.stride")?,
        })
    }

    pub fn split(&self) -> Result<SplitSpec> {
        Ok(SplitSpec {
            train_frac: self.f64_of("split.train")?,
            val_frac: self.f64_of("split.val")?,
            test_frac: self.f64_of("split.test")?,
            seed: self.seed()?,
        })
    }

    pub fn fit_spec(&self, domain: Domain) -> Result<FitSpec> {
        let d = domain.as_str();
        let warmup = match self.get("train.warmup_steps") {
            Some(s) if !s.is_empty() => Some(
                s.parse()
                    .context("config key `train.warmup_steps` is not a count")?,
            ),
            _ => None,
        };
        Ok(FitSpec {
            hidden_units: self.usize_of(&format!("model.{d}.hidden_units"))?,
            lstm_layers: self.usize_of(&format!("model.{d}.lstm_layers"))?,
            train: TrainConfig {
                epochs: self.usize_of(&format!("train.{d}.epochs"))?,
                base_lr: self.f64_of("train.base_lr")?,
                warmup_steps: warmup,
                batch_size: self.usize_of("train.batch_size")?,
                beta1: self.f64_of("train.beta1")?,
                beta2: self.f64_of("train.beta2")?,
                eps: self.f64_of("train.eps")?,
                forget_bias_init: self.f64_of("train.forget_bias")?,
                threads: self.usize_of("train.threads")?,
            },
            window: self.window()?,
            split: self.split()?,
            seed: self.seed()?,
        })
    }

    /// FNV-1a over the canonical `key = value` lines of the resolved map.
    pub fn hash(&self) -> u64 {
        let mut h: u64 = 0xcbf29ce484222325;
        for (k, v) in &self.values {
            for part in [k.as_bytes(), b" = ", v.as_bytes(), b"\n"] {
                for &byte in part {
                    h ^= byte as u64;
                    h = h.wrapping_mul(0x100000001b3);
                }
            }
        }
        h
    }

    pub fn hash_hex(&self) -> String {
        format!("{:016x}", self.hash())
    }

    /// Header lines embedded in every output file.
    pub fn provenance(&self) -> Vec<String> {
        let factor_keys = [
            "factors.phi",
            "factors.gasoline",
            "factors.ethanol",
            "factors.ethanol_share",
            "factors.afr",
            "factors.fuel_density",
        ];
        let factors: Vec<String> = factor_keys
            .iter()
            .map(|k| {
                format!(
                    "{}:{}",
                    k.trim_start_matches("factors."),
                    self.get(k).unwrap_or("?")
                )
            })
            .collect();
        vec![
            format!("config_hash = {}", self.hash_hex()),
            format!(
                "seed = {}",
                self.values.get("seed").cloned().unwrap_or_default()
            ),
            format!("factors = {}", factors.join(" ")),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_cover_training_keys() {
        let cfg = RunConfig::load(None, &[]).unwrap();
        assert_eq!(cfg.usize_of("model.ev.hidden_units").unwrap(), 32);
        assert_eq!(cfg.usize_of("model.icev.lstm_layers").unwrap(), 2);
        assert_eq!(cfg.usize_of("train.icev.epochs").unwrap(), 50);
        let spec = cfg.fit_spec(Domain::Ev).unwrap();
        assert_eq!(spec.train.epochs, 20);
        assert!(spec.train.warmup_steps.is_none());
    }

    #[test]
    fn set_overrides_beat_file_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.conf");
        std::fs::write(&path, "seed = 7\nfactors.phi = 100\n").unwrap();
        let cfg = RunConfig::load(Some(&path), &["factors.phi=50".to_string()]).unwrap();
        assert_eq!(cfg.seed().unwrap(), 7);
        assert_eq!(cfg.factors().unwrap().phi_g_per_kwh, 50.0);
    }

    #[test]
    fn hash_tracks_content_not_order() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.conf");
        let b = dir.path().join("b.conf");
        std::fs::write(&a, "seed = 7\nfactors.phi = 100\n").unwrap();
        std::fs::write(&b, "factors.phi = 100\nseed = 7\n").unwrap();
        let ca = RunConfig::load(Some(&a), &[]).unwrap();
        let cb = RunConfig::load(Some(&b), &[]).unwrap();
        assert_eq!(ca.hash_hex(), cb.hash_hex());
        let cc = RunConfig::load(Some(&a), &["seed=8".to_string()]).unwrap();
        assert_ne!(ca.hash_hex(), cc.hash_hex());
    }

    #[test]
    fn env_key_mapping() {
        assert_eq!(env_key_to_config("CARBONTWIN_FACTORS__PHI"), "factors.phi");
        assert_eq!(
            env_key_to_config("CARBONTWIN_TRAIN__EV__EPOCHS"),
            "train.ev.epochs"
        );
        assert_eq!(
            env_key_to_config("CARBONTWIN_FACTORS__FUEL_DENSITY"),
            "factors.fuel_density"
        );
    }
}
