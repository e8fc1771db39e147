//! Learning-to-defer toolkit: surrogate losses with bounded probability
//! estimators, ground-truth oracles for synthetic distributions, small scorer
//! models with first-order trainers, and the evaluation metrics used to
//! compare deferral systems (error, coverage, expert-accuracy ECE and
//! budgeted error).
//!
//! Labels and expert predictions are 0-indexed throughout. A score vector for
//! `K` classes and `M` experts has `K + M` entries: the class block first,
//! then one deferral score per expert.

pub mod error;
pub mod estimators;
pub mod metrics;
pub mod model;
pub mod oracle;
pub mod surrogates;
pub mod synthetic;
pub mod train;
pub mod verify;

mod numeric;

pub use error::{Error, Result};
pub use estimators::{
    asym_softmax, asym_softmax_multi, clip_estimate, estimate_ova, estimate_sova, estimate_ssm,
    softmax, OvaEstimate, ProbEstimate, ScoreVector,
};
pub use metrics::{
    accuracy_histograms, budgeted_error, coverage, ece, system_error, EvalReport, Histogram,
};
pub use model::{Architecture, ScorerModel};
pub use oracle::{
    bayes_decision, check_regret_bound, conditional_risk, decide, deferral_loss,
    minimize_conditional, ConditionalPoint, Decision, RegretCheck,
};
pub use surrogates::{batch_loss_and_grad, grad, loss, loss_general, LossKind, MulticlassLoss};
pub use synthetic::{sample_synthetic, ExpertSpec, LabeledSample, SyntheticData, SyntheticSpec};
pub use train::{evaluate, train, Checkpoint, Evaluation, OptimizerKind, TrainConfig, TrainOutput};
