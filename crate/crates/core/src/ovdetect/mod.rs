//! Open-vocabulary detection front-end.
//!
//! The region-text similarity head and classifier are real; the detector
//! itself is a deterministic mock over simulated scene snapshots. Anything
//! implementing [`Detector`] can stand in for it.

mod mock;
mod similarity;
mod tracker;
mod vocab;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use crate::geometry::BBox;
pub use mock::{mock_detect, MockConfig, MockDetector};
pub use similarity::{sigmoid, similarity, Embedding, SimilarityParams, EMBEDDING_DIM};
pub use tracker::{track_ids, Tracker, DEFAULT_MAX_TRACK_DIST};
pub use vocab::{
    classify_region, EmbeddingSpace, Prompt, PromptSpec, Split, Vocabulary, VocabularyFile,
    MAX_CROSS_SIMILARITY,
};

use crate::sim::SceneSnapshot;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DetectError {
    #[error("zero-norm embedding")]
    ZeroVector,
    #[error("embedding dimension mismatch ({left} vs {right})")]
    DimensionMismatch { left: usize, right: usize },
    #[error("embedding contains non-finite values")]
    NonFinite,
    #[error("similarity parameters invalid (alpha {alpha}, beta {beta})")]
    InvalidParams { alpha: f64, beta: f64 },
    #[error("vocabulary is empty")]
    EmptyVocabulary,
    #[error("duplicate prompt label '{0}'")]
    DuplicateLabel(String),
    #[error("label '{0}' has no embedding")]
    UnknownLabel(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("vocabulary schema: {0}")]
    Schema(String),
}

/// A labeled, scored box in color-image pixels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    #[serde(rename = "box")]
    pub bbox: BBox,
    pub label: String,
    pub score: f64,
    /// Assigned by the tracker; `0` until tracked.
    #[serde(rename = "id")]
    pub object_id: u64,
}

/// One line of a detection log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionRecord {
    pub frame: u64,
    pub label: String,
    pub score: f64,
    #[serde(rename = "box")]
    pub bbox: BBox,
    pub id: u64,
}

impl DetectionRecord {
    pub fn from_detection(frame: u64, det: &Detection) -> Self {
        Self {
            frame,
            label: det.label.clone(),
            score: det.score,
            bbox: det.bbox,
            id: det.object_id,
        }
    }
}

/// Maps a frame and a prompt vocabulary to detections.
///
/// The mock reads ground truth from the snapshot; an adapter around a real
/// model would read the snapshot's image data instead.
pub trait Detector {
    fn detect(&mut self, frame: &SceneSnapshot, vocab: &Vocabulary) -> Vec<Detection>;
}
