//! Mode dispatch and artifact emission.

use std::path::{Path, PathBuf};

use defer_lab_core::metrics::{evaluation_report, EvalReport};
use defer_lab_core::verify::{run_all, VerifyReport};
use defer_lab_core::{
    evaluate, sample_synthetic, train, Checkpoint, ConditionalPoint, LabeledSample, LossKind,
    ScorerModel,
};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::{Mode, RunConfig, Split};
use crate::dataset::{load_dataset, write_dataset, write_truth};
use crate::error::{CliError, Result};

/// JSON artifact envelope: every artifact carries the resolved config and seed.
#[derive(Debug, Serialize, Deserialize)]
pub struct Artifact<T> {
    pub config: RunConfig,
    pub seed: u64,
    #[serde(flatten)]
    pub body: T,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CheckpointBody {
    pub checkpoint: Checkpoint,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct HistoryBody {
    pub loss: LossKind,
    pub history: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ReportBody {
    pub loss: LossKind,
    pub n: usize,
    pub report: EvalReport,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct BayesRiskBody {
    pub n: usize,
    pub bayes_risk: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct VerifyBody {
    pub report: VerifyReport,
}

/// Outcome of a successful run: the files written and a short summary.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub mode: Mode,
    pub artifacts: Vec<PathBuf>,
    pub summary: Value,
}

struct TaskData {
    samples: Vec<LabeledSample>,
    truth: Option<Vec<ConditionalPoint>>,
    feature_dim: usize,
    k: usize,
    m: usize,
}

fn no_data() -> CliError {
    CliError::Invalid("this mode needs a `data` section".into())
}

fn load(cfg: &RunConfig, split: Split) -> Result<TaskData> {
    let data = cfg.data.as_ref().ok_or_else(no_data)?;
    if let Some(spec) = &data.synthetic {
        let mut spec = spec.clone();
        if split == Split::Test {
            // a fresh draw from the same distribution
            spec.seed = spec.seed.wrapping_add(1);
        }
        let drawn = sample_synthetic(&spec)?;
        return Ok(TaskData {
            samples: drawn.samples,
            truth: Some(drawn.truth),
            feature_dim: spec.feature_dim,
            k: spec.k_classes,
            m: spec.experts.len(),
        });
    }
    let csv = data.csv.as_ref().ok_or_else(no_data)?;
    let path = match split {
        Split::Train => &csv.train,
        Split::Test => csv.test.as_ref().unwrap_or(&csv.train),
    };
    let ds = load_dataset(path, csv.k_classes, csv.n_experts)?;
    Ok(TaskData {
        samples: ds.samples,
        truth: None,
        feature_dim: ds.feature_dim,
        k: csv.k_classes,
        m: csv.n_experts,
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Artifact {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Artifact {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

fn artifact<T>(cfg: &RunConfig, body: T) -> Artifact<T> {
    Artifact {
        config: cfg.clone(),
        seed: cfg.seed,
        body,
    }
}

/// Execute `mode` with a validated config.
pub fn run(mode: Mode, cfg: &RunConfig) -> Result<RunSummary> {
    if let Some(m) = cfg.mode {
        if m != mode {
            return Err(CliError::Invalid(format!(
                "config is for mode `{m}` but `{mode}` was requested"
            )));
        }
    }
    log::info!(
        "resolved config (seed {}): {}",
        cfg.seed,
        serde_json::to_string(cfg).unwrap_or_default()
    );
    let out = &cfg.output_dir;
    std::fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    match mode {
        Mode::Train => run_train(cfg),
        Mode::Evaluate => run_evaluate(cfg),
        Mode::Simulate => run_simulate(cfg),
        Mode::Verify => run_verify(cfg),
    }
}

fn run_train(cfg: &RunConfig) -> Result<RunSummary> {
    let data = load(cfg, Split::Train)?;
    let tc = cfg.train_config();
    let init = ScorerModel::init(cfg.model, data.feature_dim, data.k, data.m, cfg.seed)?;
    log::info!(
        "training {} on {} samples ({} parameters)",
        cfg.loss,
        data.samples.len(),
        init.param_count()
    );
    let out = train(&init, &data.samples, &tc)?;
    let final_loss = out.history.last().copied();

    let ckpt_path = cfg.checkpoint_path();
    let hist_path = cfg.output_dir.join("history.json");
    let checkpoint = Checkpoint {
        loss: cfg.loss,
        seed: cfg.seed,
        model: out.model,
    };
    write_json(&ckpt_path, &artifact(cfg, CheckpointBody { checkpoint }))?;
    write_json(
        &hist_path,
        &artifact(
            cfg,
            HistoryBody {
                loss: cfg.loss,
                history: out.history,
            },
        ),
    )?;
    Ok(RunSummary {
        mode: Mode::Train,
        artifacts: vec![ckpt_path, hist_path],
        summary: json!({"epochs": tc.epochs, "final_loss": final_loss}),
    })
}

fn run_evaluate(cfg: &RunConfig) -> Result<RunSummary> {
    let ckpt_path = cfg.checkpoint_path();
    let stored: Artifact<CheckpointBody> = read_json(&ckpt_path)?;
    let ckpt = stored.body.checkpoint;
    if ckpt.loss != cfg.loss {
        log::warn!(
            "config loss {} differs from checkpoint loss {}; using the checkpoint's",
            cfg.loss,
            ckpt.loss
        );
    }
    let data = load(cfg, cfg.evaluate_on)?;
    let model = &ckpt.model;
    if (model.input_dim, model.k_classes, model.n_experts) != (data.feature_dim, data.k, data.m) {
        return Err(CliError::Invalid(format!(
            "checkpoint expects d={} K={} M={}, data has d={} K={} M={}",
            model.input_dim, model.k_classes, model.n_experts, data.feature_dim, data.k, data.m
        )));
    }
    let eval = evaluate(model, ckpt.loss, &data.samples)?;
    let report = evaluation_report(
        &eval,
        &data.samples,
        data.truth.as_deref(),
        &cfg.budgets,
        cfg.ece_bins,
    )?;

    let report_path = cfg.output_dir.join("report.json");
    let hist_path = cfg.output_dir.join("histogram.csv");
    std::fs::write(&hist_path, report.histogram.to_csv())
        .map_err(|e| CliError::io(&hist_path, e))?;
    let summary = json!({
        "n": data.samples.len(),
        "error": report.error,
        "coverage": report.coverage,
        "ece": report.ece,
        "budgeted_errors": report.budgeted_errors,
    });
    write_json(
        &report_path,
        &artifact(
            cfg,
            ReportBody {
                loss: ckpt.loss,
                n: data.samples.len(),
                report,
            },
        ),
    )?;
    Ok(RunSummary {
        mode: Mode::Evaluate,
        artifacts: vec![report_path, hist_path],
        summary,
    })
}

fn run_simulate(cfg: &RunConfig) -> Result<RunSummary> {
    let spec = cfg
        .data
        .as_ref()
        .and_then(|d| d.synthetic.as_ref())
        .ok_or_else(|| CliError::Invalid("simulate needs `data.synthetic`".into()))?;
    let drawn = sample_synthetic(spec)?;
    let data_path = cfg.output_dir.join("dataset.csv");
    let truth_path = cfg.output_dir.join("truth.csv");
    let risk_path = cfg.output_dir.join("bayes_risk.json");
    write_dataset(&data_path, &drawn.samples)?;
    write_truth(&truth_path, &drawn.truth)?;
    write_json(
        &risk_path,
        &artifact(
            cfg,
            BayesRiskBody {
                n: drawn.samples.len(),
                bayes_risk: drawn.bayes_risk,
            },
        ),
    )?;
    Ok(RunSummary {
        mode: Mode::Simulate,
        artifacts: vec![data_path, truth_path, risk_path],
        summary: json!({"n": drawn.samples.len(), "bayes_risk": drawn.bayes_risk}),
    })
}

fn run_verify(cfg: &RunConfig) -> Result<RunSummary> {
    let report = run_all(&cfg.verify, cfg.seed);
    for c in &report.checks {
        log::info!(
            "{:<45} {:>7} cases, {} failures, worst {:.3e}",
            c.name,
            c.cases,
            c.failures,
            c.worst
        );
    }
    let path = cfg.output_dir.join("verify_report.json");
    let passed = report.passed;
    let failed: Vec<String> = report
        .checks
        .iter()
        .filter(|c| !c.passed())
        .map(|c| c.name.clone())
        .collect();
    let checks: Vec<Value> = report
        .checks
        .iter()
        .map(|c| json!({"name": c.name, "cases": c.cases, "failures": c.failures}))
        .collect();
    write_json(&path, &artifact(cfg, VerifyBody { report }))?;
    if !passed {
        return Err(CliError::VerificationFailed { failed });
    }
    Ok(RunSummary {
        mode: Mode::Verify,
        artifacts: vec![path],
        summary: json!({"passed": true, "checks": checks}),
    })
}
