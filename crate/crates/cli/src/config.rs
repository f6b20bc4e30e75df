//! Flat `key = value` experiment files.
//!
//! One assignment per line, `#` starts a comment, no sections. Every key is
//! optional; omitted keys keep the desk-scale defaults.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use kets::attacks::{AttackKind, Perturbation};
use kets::orchestrator::DatasetSpec;
use kets::{Defense, ExperimentConfig};
use serde_json::{json, Value};
use thiserror::Error;

/// Every recognized key, in echo order.
pub const KEYS: [&str; 36] = [
    "dataset",
    "synthetic_samples",
    "synthetic_dim",
    "synthetic_classes",
    "synthetic_spread",
    "idx_images",
    "idx_labels",
    "csv_path",
    "hidden",
    "n_clients",
    "clients_per_round",
    "attacker_fraction",
    "attack",
    "perturbation",
    "attack_start",
    "attack_stop",
    "gamma_init",
    "tau",
    "trim_b",
    "krum_lambda_init",
    "krum_lambda_floor",
    "defense",
    "alpha",
    "beta",
    "local_epochs",
    "global_epochs",
    "batch_size",
    "lr",
    "momentum",
    "fltrust_root_size",
    "ketsv2_threshold",
    "ketsv2_mu",
    "kde_quantile",
    "test_fraction",
    "seed",
    "workers",
];

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("{}unknown key `{key}`", at(*line))]
    UnknownKey { key: String, line: Option<usize> },
    #[error("line {line}: duplicate key `{key}` (first set on line {first})")]
    DuplicateKey { key: String, line: usize, first: usize },
    #[error("{}{key}: {message}", at(*line))]
    Value {
        key: String,
        line: Option<usize>,
        message: String,
    },
}

fn at(line: Option<usize>) -> String {
    line.map(|l| format!("line {l}: ")).unwrap_or_default()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum DatasetKind {
    Synthetic,
    Idx,
    Csv,
}

impl DatasetKind {
    fn name(self) -> &'static str {
        match self {
            DatasetKind::Synthetic => "synthetic",
            DatasetKind::Idx => "idx",
            DatasetKind::Csv => "csv",
        }
    }
}

/// A parsed experiment file: the resolved knobs plus the line each key was
/// set on, so later validation errors can point back into the file.
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    experiment: ExperimentConfig,
    kind: DatasetKind,
    samples: usize,
    dim: usize,
    classes: usize,
    spread: f64,
    idx_images: Option<PathBuf>,
    idx_labels: Option<PathBuf>,
    csv_path: Option<PathBuf>,
    lines: BTreeMap<String, usize>,
}

impl Default for Settings {
    fn default() -> Self {
        let experiment = ExperimentConfig::default();
        let DatasetSpec::Synthetic {
            samples,
            dim,
            classes,
            spread,
        } = experiment.dataset.clone()
        else {
            unreachable!("the default dataset is synthetic")
        };
        Self {
            experiment,
            kind: DatasetKind::Synthetic,
            samples,
            dim,
            classes,
            spread,
            idx_images: None,
            idx_labels: None,
            csv_path: None,
            lines: BTreeMap::new(),
        }
    }
}

fn number<T: FromStr>(value: &str, what: &str) -> Result<T, String> {
    value.parse().map_err(|_| format!("expected {what}, got `{value}`"))
}

fn choice<T>(value: &str, parse: impl Fn(&str) -> Option<T>, names: &[&str]) -> Result<T, String> {
    parse(value).ok_or_else(|| format!("expected one of {}, got `{value}`", names.join("|")))
}

fn path(value: &str) -> Result<PathBuf, String> {
    if value.is_empty() {
        Err("expected a path".into())
    } else {
        Ok(PathBuf::from(value))
    }
}

fn opt_path(p: &Option<PathBuf>) -> Value {
    p.as_ref().map_or(Value::Null, |p| json!(p.display().to_string()))
}

const UINT: &str = "a non-negative integer";
const REAL: &str = "a number";

impl Settings {
    /// Reads and parses a file, then validates the resolved configuration.
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let settings = Self::parse(&text)?;
        settings.validate()?;
        Ok(settings)
    }

    /// Parses file contents without the final cross-field validation.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut settings = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or(ConfigError::Syntax { line })?;
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty() {
                return Err(ConfigError::Syntax { line });
            }
            if !KEYS.contains(&key) {
                return Err(ConfigError::UnknownKey {
                    key: key.to_string(),
                    line: Some(line),
                });
            }
            if let Some(&first) = settings.lines.get(key) {
                return Err(ConfigError::DuplicateKey {
                    key: key.to_string(),
                    line,
                    first,
                });
            }
            settings.set(key, value).map_err(|e| match e {
                ConfigError::Value { key, message, .. } => ConfigError::Value {
                    key,
                    line: Some(line),
                    message,
                },
                other => other,
            })?;
            settings.lines.insert(key.to_string(), line);
        }
        Ok(settings)
    }

    /// Assigns one key from its textual value; used by the file parser, the
    /// sweep driver and command-line overrides alike.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        self.assign(key, value).map_err(|message| {
            if KEYS.contains(&key) {
                ConfigError::Value {
                    key: key.to_string(),
                    line: self.lines.get(key).copied(),
                    message,
                }
            } else {
                ConfigError::UnknownKey {
                    key: key.to_string(),
                    line: None,
                }
            }
        })
    }

    fn assign(&mut self, key: &str, value: &str) -> Result<(), String> {
        let e = &mut self.experiment;
        match key {
            "dataset" => {
                self.kind = match value {
                    "synthetic" => DatasetKind::Synthetic,
                    "idx" => DatasetKind::Idx,
                    "csv" => DatasetKind::Csv,
                    _ => return Err(format!("expected one of synthetic|idx|csv, got `{value}`")),
                }
            }
            "synthetic_samples" => self.samples = number(value, UINT)?,
            "synthetic_dim" => self.dim = number(value, UINT)?,
            "synthetic_classes" => self.classes = number(value, UINT)?,
            "synthetic_spread" => self.spread = number(value, REAL)?,
            "idx_images" => self.idx_images = Some(path(value)?),
            "idx_labels" => self.idx_labels = Some(path(value)?),
            "csv_path" => self.csv_path = Some(path(value)?),
            "hidden" => {
                e.hidden = if value.is_empty() || value == "none" {
                    Vec::new()
                } else {
                    value
                        .split(',')
                        .map(|w| number(w.trim(), "comma-separated layer widths"))
                        .collect::<Result<_, _>>()?
                }
            }
            "n_clients" => e.n_clients = number(value, UINT)?,
            "clients_per_round" => e.clients_per_round = number(value, UINT)?,
            "attacker_fraction" => e.attacker_fraction = number(value, REAL)?,
            "attack" => {
                let names = AttackKind::ALL.map(AttackKind::name);
                e.attack.kind = choice(value, AttackKind::parse, &names)?
            }
            "perturbation" => e.attack.perturbation = choice(value, Perturbation::parse, &["unit", "std"])?,
            "attack_start" => e.attack.start_round = number(value, UINT)?,
            "attack_stop" => {
                e.attack.stop_round = if value == "none" {
                    None
                } else {
                    Some(number(value, "a non-negative integer or `none`")?)
                }
            }
            "gamma_init" => e.attack.gamma_init = number(value, REAL)?,
            "tau" => e.attack.tau = number(value, REAL)?,
            "trim_b" => e.attack.b = number(value, REAL)?,
            "krum_lambda_init" => e.attack.krum_lambda_init = number(value, REAL)?,
            "krum_lambda_floor" => e.attack.krum_lambda_floor = number(value, REAL)?,
            "defense" => {
                let names = Defense::ALL.map(Defense::name);
                e.defense = choice(value, Defense::parse, &names)?
            }
            "alpha" => e.alpha = number(value, REAL)?,
            "beta" => e.beta = number(value, REAL)?,
            "local_epochs" => e.local_epochs = number(value, UINT)?,
            "global_epochs" => e.global_epochs = number(value, UINT)?,
            "batch_size" => e.batch_size = number(value, UINT)?,
            "lr" => e.lr = number(value, REAL)?,
            "momentum" => e.momentum = number(value, REAL)?,
            "fltrust_root_size" => e.fltrust_root_size = number(value, UINT)?,
            "ketsv2_threshold" => e.ketsv2_threshold = number(value, REAL)?,
            "ketsv2_mu" => e.ketsv2_mu = number(value, REAL)?,
            "kde_quantile" => e.kde_quantile = number(value, REAL)?,
            "test_fraction" => e.test_fraction = number(value, REAL)?,
            "seed" => e.seed = number(value, UINT)?,
            "workers" => e.workers = number(value, UINT)?,
            _ => return Err(format!("unknown key `{key}`")),
        }
        Ok(())
    }

    fn invalid(&self, key: &str, message: impl Into<String>) -> ConfigError {
        ConfigError::Value {
            key: key.to_string(),
            line: self.lines.get(key).copied(),
            message: message.into(),
        }
    }

    /// Assembles the experiment configuration.
    pub fn resolve(&self) -> Result<ExperimentConfig, ConfigError> {
        let mut cfg = self.experiment.clone();
        cfg.dataset = match self.kind {
            DatasetKind::Synthetic => DatasetSpec::Synthetic {
                samples: self.samples,
                dim: self.dim,
                classes: self.classes,
                spread: self.spread,
            },
            DatasetKind::Idx => DatasetSpec::Idx {
                images: self
                    .idx_images
                    .clone()
                    .ok_or_else(|| self.invalid("idx_images", "required when dataset = idx"))?,
                labels: self
                    .idx_labels
                    .clone()
                    .ok_or_else(|| self.invalid("idx_labels", "required when dataset = idx"))?,
            },
            DatasetKind::Csv => DatasetSpec::Csv {
                path: self
                    .csv_path
                    .clone()
                    .ok_or_else(|| self.invalid("csv_path", "required when dataset = csv"))?,
            },
        };
        Ok(cfg)
    }

    /// Resolves and checks every invariant, naming the offending key and
    /// the line it was set on.
    pub fn validate(&self) -> Result<ExperimentConfig, ConfigError> {
        let cfg = self.resolve()?;
        cfg.validate().map_err(|f| self.invalid(f.field, f.message))?;
        Ok(cfg)
    }

    /// Every resolved value keyed by its config name, for echoing into
    /// reports so a run can be reproduced from its own artifacts.
    pub fn echo(&self) -> Value {
        let e = &self.experiment;
        let a = &e.attack;
        json!({
            "dataset": self.kind.name(),
            "synthetic_samples": self.samples,
            "synthetic_dim": self.dim,
            "synthetic_classes": self.classes,
            "synthetic_spread": self.spread,
            "idx_images": opt_path(&self.idx_images),
            "idx_labels": opt_path(&self.idx_labels),
            "csv_path": opt_path(&self.csv_path),
            "hidden": e.hidden,
            "n_clients": e.n_clients,
            "clients_per_round": e.clients_per_round,
            "attacker_fraction": e.attacker_fraction,
            "attack": a.kind.name(),
            "perturbation": a.perturbation.name(),
            "attack_start": a.start_round,
            "attack_stop": a.stop_round,
            "gamma_init": a.gamma_init,
            "tau": a.tau,
            "trim_b": a.b,
            "krum_lambda_init": a.krum_lambda_init,
            "krum_lambda_floor": a.krum_lambda_floor,
            "defense": e.defense.name(),
            "alpha": e.alpha,
            "beta": e.beta,
            "local_epochs": e.local_epochs,
            "global_epochs": e.global_epochs,
            "batch_size": e.batch_size,
            "lr": e.lr,
            "momentum": e.momentum,
            "fltrust_root_size": e.fltrust_root_size,
            "ketsv2_threshold": e.ketsv2_threshold,
            "ketsv2_mu": e.ketsv2_mu,
            "kde_quantile": e.kde_quantile,
            "test_fraction": e.test_fraction,
            "seed": e.seed,
            "workers": e.workers,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_only_file_keeps_defaults() {
        let s = Settings::parse("seed = 1\n").unwrap();
        let cfg = s.validate().unwrap();
        assert_eq!(cfg, ExperimentConfig { seed: 1, ..ExperimentConfig::default() });
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let s = Settings::parse("# header\n\n  lr = 0.01  # inline\nattack_stop = none\n").unwrap();
        let cfg = s.validate().unwrap();
        assert_eq!(cfg.lr, 0.01);
        assert_eq!(cfg.attack.stop_round, None);
    }

    #[test]
    fn attacker_majority_is_rejected_with_line() {
        let err = Settings::parse("seed = 1\nattacker_fraction = 0.6\n").unwrap().validate().unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("attacker_fraction") && msg.contains("line 2"), "{msg}");
    }

    #[test]
    fn unknown_key_names_key_and_line() {
        let err = Settings::parse("seed = 1\n\nlearning_rate = 0.1\n").unwrap_err();
        assert!(matches!(&err, ConfigError::UnknownKey { key, line: Some(3) } if key == "learning_rate"));
    }

    #[test]
    fn type_mismatch_names_key_and_line() {
        let err = Settings::parse("n_clients = many\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.starts_with("line 1: n_clients:"), "{msg}");
    }

    #[test]
    fn duplicate_and_malformed_lines() {
        assert!(matches!(
            Settings::parse("lr = 0.1\nlr = 0.2\n").unwrap_err(),
            ConfigError::DuplicateKey { line: 2, first: 1, .. }
        ));
        assert!(matches!(Settings::parse("lr 0.1\n").unwrap_err(), ConfigError::Syntax { line: 1 }));
    }

    #[test]
    fn enums_and_lists_parse() {
        let s = Settings::parse("attack = min_sum\ndefense = ketsv2\nhidden = 16, 8\nperturbation = std\n").unwrap();
        let cfg = s.validate().unwrap();
        assert_eq!(cfg.attack.kind, AttackKind::MinSum);
        assert_eq!(cfg.defense, Defense::KetsV2);
        assert_eq!(cfg.hidden, vec![16, 8]);
        assert_eq!(cfg.attack.perturbation, Perturbation::Std);
        let err = Settings::parse("defense = bulyan\n").unwrap_err().to_string();
        assert!(err.contains("kets"), "{err}");
    }

    #[test]
    fn file_datasets_require_paths() {
        let err = Settings::parse("dataset = csv\n").unwrap().validate().unwrap_err();
        assert!(err.to_string().contains("csv_path"));
        let cfg = Settings::parse("dataset = csv\ncsv_path = data.csv\n").unwrap().resolve().unwrap();
        assert_eq!(cfg.dataset, DatasetSpec::Csv { path: "data.csv".into() });
    }

    #[test]
    fn echo_covers_every_key() {
        let echo = Settings::default().echo();
        let obj = echo.as_object().unwrap();
        assert_eq!(obj.len(), KEYS.len());
        assert!(KEYS.iter().all(|k| obj.contains_key(*k)));
    }

    #[test]
    fn echoed_values_parse_back() {
        let original = Settings::parse("attack = trim\nattack_stop = 7\nhidden = 12,6\nalpha = 0.05\n").unwrap();
        let mut text = String::new();
        for (k, v) in original.echo().as_object().unwrap() {
            let v = match v {
                Value::Null if k == "attack_stop" => "none".to_string(),
                Value::Null => continue,
                Value::String(s) => s.clone(),
                Value::Array(xs) => xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(","),
                other => other.to_string(),
            };
            text += &format!("{k} = {v}\n");
        }
        let parsed = Settings::parse(&text).unwrap();
        assert_eq!(parsed.resolve().unwrap(), original.resolve().unwrap());
    }

    #[test]
    fn set_reports_bad_values() {
        let mut s = Settings::default();
        s.set("alpha", "5").unwrap();
        assert_eq!(s.resolve().unwrap().alpha, 5.0);
        assert!(matches!(s.set("alpha", "lots"), Err(ConfigError::Value { line: None, .. })));
        assert!(matches!(s.set("nope", "1"), Err(ConfigError::UnknownKey { .. })));
    }
}
