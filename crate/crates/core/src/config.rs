//! `key = value` text files that override fields of an [`ExperimentConfig`].
//!
//! Blank lines and anything after `#` are ignored. A `model` line resets the
//! training hyperparameters to that model's defaults (keeping the seed), so
//! it is applied before every other key regardless of where it appears.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::gnn::{ModelKind, TrainConfig};
use crate::pipeline::{ExperimentConfig, SplitMode};

/// Keys accepted in a config file.
pub const KEYS: &[&str] = &[
    "dataset",
    "model",
    "method",
    "ratio",
    "k_eig",
    "max_levels",
    "seed",
    "runs",
    "workers",
    "learning_rate",
    "weight_decay",
    "epochs",
    "patience",
    "hidden_dim",
    "dropout",
    "beta",
    "alpha",
    "steps",
    "label_policy",
    "feature_mode",
    "split",
    "train_per_class",
    "val_per_class",
    "normalize_features",
    "error_samples",
];

const DEFAULT_TRAIN_PER_CLASS: usize = 20;
const DEFAULT_VAL_PER_CLASS: usize = 30;

/// Parse `key = value` lines into `(line number, key, value)`.
pub fn parse_pairs(text: &str, origin: &Path) -> Result<Vec<(usize, String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(Error::parse(origin, i + 1, "expected `key = value`"));
        };
        let key = k.trim().to_string();
        if !KEYS.contains(&key.as_str()) {
            return Err(Error::parse(origin, i + 1, format!("unknown key `{key}`")));
        }
        out.push((i + 1, key, v.trim().to_string()));
    }
    Ok(out)
}

fn value<T: FromStr>(origin: &Path, line: usize, key: &str, v: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    v.parse::<T>()
        .map_err(|e| Error::parse(origin, line, format!("bad value `{v}` for `{key}`: {e}")))
}

/// Apply the overrides in `text` to `cfg`.
pub fn apply_config_text(cfg: &mut ExperimentConfig, text: &str, origin: &Path) -> Result<()> {
    let pairs = parse_pairs(text, origin)?;
    for (line, key, v) in pairs.iter().filter(|(_, k, _)| k == "model") {
        let model: ModelKind = value(origin, *line, key, v)?;
        cfg.model = model;
        cfg.train = TrainConfig {
            seed: cfg.train.seed,
            ..TrainConfig::for_model(model)
        };
    }
    let (mut train_pc, mut val_pc) = match cfg.split {
        SplitMode::Random {
            train_per_class,
            val_per_class,
        } => (train_per_class, val_per_class),
        SplitMode::Fixed => (DEFAULT_TRAIN_PER_CLASS, DEFAULT_VAL_PER_CLASS),
    };
    let mut random = matches!(cfg.split, SplitMode::Random { .. });
    for (line, key, v) in &pairs {
        let (line, key, v) = (*line, key.as_str(), v.as_str());
        match key {
            "model" => {}
            "dataset" => cfg.dataset = Some(PathBuf::from(v)),
            "method" => cfg.coarsen.method = value(origin, line, key, v)?,
            "ratio" => cfg.coarsen.ratio = value(origin, line, key, v)?,
            "k_eig" => cfg.coarsen.k_eig = value(origin, line, key, v)?,
            "max_levels" => cfg.coarsen.max_levels = value(origin, line, key, v)?,
            "seed" => {
                let s: u64 = value(origin, line, key, v)?;
                cfg.train.seed = s;
                cfg.coarsen.seed = s;
            }
            "runs" => cfg.runs = value(origin, line, key, v)?,
            "workers" => cfg.workers = value(origin, line, key, v)?,
            "learning_rate" => cfg.train.learning_rate = value(origin, line, key, v)?,
            "weight_decay" => cfg.train.weight_decay = value(origin, line, key, v)?,
            "epochs" => cfg.train.epochs = value(origin, line, key, v)?,
            "patience" => cfg.train.patience = value(origin, line, key, v)?,
            "hidden_dim" => cfg.train.hidden_dim = value(origin, line, key, v)?,
            "dropout" => cfg.train.dropout = value(origin, line, key, v)?,
            "beta" | "alpha" => cfg.train.beta = value(origin, line, key, v)?,
            "steps" => cfg.train.steps = value(origin, line, key, v)?,
            "label_policy" => cfg.label_policy = value(origin, line, key, v)?,
            "feature_mode" => cfg.feature_mode = value(origin, line, key, v)?,
            "split" => {
                random = match v {
                    "fixed" => false,
                    "random" => true,
                    _ => {
                        return Err(Error::parse(
                            origin,
                            line,
                            format!("split must be fixed or random, got `{v}`"),
                        ))
                    }
                }
            }
            "train_per_class" => train_pc = value(origin, line, key, v)?,
            "val_per_class" => val_pc = value(origin, line, key, v)?,
            "normalize_features" => cfg.normalize_features = value(origin, line, key, v)?,
            "error_samples" => cfg.error_samples = value(origin, line, key, v)?,
            _ => unreachable!("keys are checked while parsing"),
        }
    }
    cfg.split = if random {
        SplitMode::Random {
            train_per_class: train_pc,
            val_per_class: val_pc,
        }
    } else {
        SplitMode::Fixed
    };
    Ok(())
}

/// Read `path` and apply its overrides to `cfg`.
pub fn apply_config_file(cfg: &mut ExperimentConfig, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    apply_config_text(cfg, &text, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coarsen::Method;

    fn base() -> ExperimentConfig {
        ExperimentConfig::new(ModelKind::Gcn, Method::VariationNeighborhoods, 0.5)
    }

    #[test]
    fn overrides_and_comments() {
        let mut cfg = base();
        let text = "# Citeseer\nlearning_rate = 0.02 # faster\nratio=0.3\n\nsplit = random\ntrain_per_class = 5\n";
        apply_config_text(&mut cfg, text, Path::new("x.cfg")).unwrap();
        assert_eq!(cfg.train.learning_rate, 0.02);
        assert_eq!(cfg.coarsen.ratio, 0.3);
        assert_eq!(
            cfg.split,
            SplitMode::Random {
                train_per_class: 5,
                val_per_class: 30
            }
        );
    }

    #[test]
    fn model_resets_training_defaults_first() {
        let mut cfg = base();
        cfg.train.seed = 9;
        apply_config_text(&mut cfg, "epochs = 7\nmodel = appnp\n", Path::new("x.cfg")).unwrap();
        assert_eq!(cfg.model, ModelKind::Appnp);
        assert_eq!(cfg.train.epochs, 7);
        assert_eq!(cfg.train.seed, 9);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let mut cfg = base();
        let e =
            apply_config_text(&mut cfg, "runs = 2\nbogus = 1\n", Path::new("x.cfg")).unwrap_err();
        assert!(e.to_string().contains("x.cfg:2"), "{e}");
        let e = apply_config_text(&mut cfg, "ratio = lots\n", Path::new("x.cfg")).unwrap_err();
        assert!(e.to_string().contains("ratio"), "{e}");
        assert!(apply_config_text(&mut cfg, "ratio\n", Path::new("x.cfg")).is_err());
    }
}
