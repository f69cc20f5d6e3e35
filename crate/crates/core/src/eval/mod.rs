//! Evaluation protocols: IoU/AP/mAP with seen/unseen splits, grasping
//! ability scores, and per-run scenario metrics.

mod ap;
mod gas;
mod metrics;

use thiserror::Error;

pub use ap::{
    average_precision, evaluate_splits, iou, ApReport, CategoryAp, GroundTruth, GtFrame, GtObject, ScoredBox,
    DEFAULT_IOU_THRESHOLD,
};
pub use gas::{
    check_published, gas_report, parse_published_csv, parse_trials_csv, GasConsistency, GasReport, GraspType,
    PublishedGasRow, TrialScore, TypeScore, GAS_TOLERANCE,
};
pub use metrics::{scenario_metrics, ScenarioMetrics};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("degenerate box [{0}, {1}, {2}, {3}]")]
    DegenerateBox(f64, f64, f64, f64),
    #[error("ground truth contains no objects")]
    EmptyGroundTruth,
    #[error("no trials to score")]
    EmptyTrials,
    #[error("trace is incomplete (run did not terminate)")]
    IncompleteTrace,
    #[error("label '{label}' is {gt} in ground truth but {vocab} in the vocabulary")]
    SplitConflict { label: String, gt: String, vocab: String },
    #[error("row {row} (line {line}): {message}")]
    Csv { row: usize, line: usize, message: String },
    #[error("score {0} is not one of 0, 0.5, 1")]
    InvalidRubric(f64),
}
