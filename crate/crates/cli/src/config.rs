//! Run configuration: a single JSON document, validated up front.

use std::fmt;
use std::path::{Path, PathBuf};

use defer_lab_core::metrics::{DEFAULT_BUDGETS, DEFAULT_ECE_BINS};
use defer_lab_core::verify::SweepSizes;
use defer_lab_core::{Architecture, LossKind, OptimizerKind, SyntheticSpec, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Train,
    Evaluate,
    Simulate,
    Verify,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Train => "train",
            Mode::Evaluate => "evaluate",
            Mode::Simulate => "simulate",
            Mode::Verify => "verify",
        })
    }
}

/// Optimizer settings; the seed lives at the top level of [`RunConfig`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSettings {
    pub optimizer: OptimizerKind,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub weight_decay: f64,
}

impl Default for TrainSettings {
    fn default() -> Self {
        Self {
            optimizer: OptimizerKind::Adam,
            learning_rate: 0.001,
            epochs: 200,
            batch_size: 128,
            weight_decay: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsvSource {
    pub train: PathBuf,
    /// Evaluation file; the training file is used when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test: Option<PathBuf>,
    pub k_classes: usize,
    pub n_experts: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSource {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<SyntheticSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<CsvSource>,
}

/// Which split `evaluate` scores.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    #[default]
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<Mode>,
    #[serde(default = "default_loss")]
    pub loss: LossKind,
    #[serde(default = "default_model")]
    pub model: Architecture,
    #[serde(default)]
    pub train: TrainSettings,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<DataSource>,
    #[serde(default = "default_budgets")]
    pub budgets: Vec<f64>,
    #[serde(default = "default_bins")]
    pub ece_bins: usize,
    #[serde(default)]
    pub evaluate_on: Split,
    /// Checkpoint read by `evaluate`; defaults to `<output_dir>/checkpoint.json`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoint: Option<PathBuf>,
    #[serde(default)]
    pub verify: SweepSizes,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
}

fn default_loss() -> LossKind {
    LossKind::Asm
}

fn default_model() -> Architecture {
    Architecture::Mlp { hidden: 32 }
}

fn default_budgets() -> Vec<f64> {
    DEFAULT_BUDGETS.to_vec()
}

fn default_bins() -> usize {
    DEFAULT_ECE_BINS
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(CliError::Invalid(msg));
        if let Some(b) = self.budgets.iter().find(|b| !(0.0..=1.0).contains(*b)) {
            return bad(format!("budget {b} outside [0, 1]"));
        }
        if self.ece_bins == 0 {
            return bad("ece_bins must be >= 1".into());
        }
        if !(self.train.learning_rate.is_finite() && self.train.learning_rate > 0.0) {
            return bad(format!(
                "train.learning_rate must be positive, got {}",
                self.train.learning_rate
            ));
        }
        self.train_config().validate()?;
        if let Architecture::Mlp { hidden: 0 } = self.model {
            return bad("model.hidden must be >= 1".into());
        }
        if let Some(data) = &self.data {
            match (&data.synthetic, &data.csv) {
                (Some(spec), None) => spec.validate()?,
                (None, Some(csv)) => {
                    if csv.k_classes < 2 {
                        return bad("data.csv.k_classes must be >= 2".into());
                    }
                    if csv.n_experts == 0 {
                        return bad("data.csv.n_experts must be >= 1".into());
                    }
                }
                (Some(_), Some(_)) => {
                    return bad("data: set exactly one of `synthetic` and `csv`, not both".into())
                }
                (None, None) => return bad("data: set one of `synthetic` or `csv`".into()),
            }
        }
        Ok(())
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            loss: self.loss,
            optimizer: self.train.optimizer,
            learning_rate: self.train.learning_rate,
            epochs: self.train.epochs,
            batch_size: self.train.batch_size,
            weight_decay: self.train.weight_decay,
            seed: self.seed,
        }
    }

    pub fn checkpoint_path(&self) -> PathBuf {
        self.checkpoint
            .clone()
            .unwrap_or_else(|| self.output_dir.join("checkpoint.json"))
    }

    /// Make every relative path relative to `base` instead of the working
    /// directory.
    fn anchor_paths(&mut self, base: &Path) {
        let anchor = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        anchor(&mut self.output_dir);
        if let Some(c) = &mut self.checkpoint {
            anchor(c);
        }
        if let Some(csv) = self.data.as_mut().and_then(|d| d.csv.as_mut()) {
            anchor(&mut csv.train);
            if let Some(t) = &mut csv.test {
                anchor(t);
            }
        }
    }
}

/// Parse a config document. Errors carry the dotted path of the offending key.
pub fn parse_config_str(text: &str, origin: &Path) -> Result<RunConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let key = e.path().to_string();
        CliError::Config {
            path: origin.to_path_buf(),
            key,
            message: e.into_inner().to_string(),
        }
    })?;
    cfg.validate()?;
    Ok(cfg)
}

/// Read, parse and validate a config file. Relative paths inside it are
/// resolved against the file's directory.
pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut cfg = parse_config_str(&text, path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    cfg.anchor_paths(base);
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SYNTH: &str = r#"{
        "k_classes": 2, "feature_dim": 1, "class_means": [[0.0], [3.0]],
        "sigma": 1.0, "experts": [{"k": 2, "p": 0.8}], "n": 10, "seed": 1
    }"#;

    fn parse(text: &str) -> Result<RunConfig> {
        parse_config_str(text, Path::new("cfg.json"))
    }

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = parse(&format!(
            r#"{{"loss": "asm", "data": {{"synthetic": {SYNTH}}}}}"#
        ))
        .unwrap();
        assert_eq!(cfg.budgets, vec![0.1, 0.2, 0.3]);
        assert_eq!(cfg.ece_bins, 15);
        assert_eq!(cfg.loss, LossKind::Asm);
        assert_eq!(cfg.model, Architecture::Mlp { hidden: 32 });
        assert_eq!(cfg.train, TrainSettings::default());
    }

    #[test]
    fn both_data_sources_are_rejected() {
        let text = format!(
            r#"{{"data": {{"synthetic": {SYNTH}, "csv": {{"train": "a.csv", "k_classes": 2, "n_experts": 1}}}}}}"#
        );
        assert!(matches!(parse(&text), Err(CliError::Invalid(m)) if m.contains("exactly one")));
    }

    #[test]
    fn out_of_range_budget_is_rejected() {
        let err = parse(r#"{"budgets": [0.1, 1.5]}"#).unwrap_err();
        assert!(err.to_string().contains("1.5"));
    }

    #[test]
    fn unknown_keys_report_their_path() {
        let err = parse(r#"{"train": {"epochs": 3, "momentum": 0.9}}"#).unwrap_err();
        match err {
            CliError::Config { key, message, .. } => {
                assert_eq!(key, "train.momentum");
                assert!(message.contains("momentum"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn ill_typed_nested_key_reports_its_path() {
        let text = SYNTH.replace("\"p\": 0.8", "\"p\": \"high\"");
        let err = parse(&format!(r#"{{"data": {{"synthetic": {text}}}}}"#)).unwrap_err();
        match err {
            CliError::Config { key, .. } => assert_eq!(key, "data.synthetic.experts[0].p"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn zero_learning_rate_is_rejected() {
        assert!(parse(r#"{"train": {"learning_rate": 0.0}}"#).is_err());
    }

    #[test]
    fn resolved_config_round_trips() {
        let cfg = parse(&format!(
            r#"{{"data": {{"synthetic": {SYNTH}}}, "seed": 4}}"#
        ))
        .unwrap();
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(parse(&text).unwrap(), cfg);
    }
}
