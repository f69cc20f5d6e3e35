//! Region-text matching head.

use serde::{Deserialize, Serialize};

use super::DetectError;

/// Dimension of mock embeddings.
pub const EMBEDDING_DIM: usize = 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Embedding(pub Vec<f64>);

impl Embedding {
    pub fn new(values: Vec<f64>) -> Result<Self, DetectError> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(DetectError::NonFinite);
        }
        Ok(Self(values))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Scale and offset applied to the cosine between region and text embeddings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimilarityParams {
    pub alpha: f64,
    pub beta: f64,
}

impl SimilarityParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self, DetectError> {
        let p = Self { alpha, beta };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), DetectError> {
        if !(self.alpha.is_finite() && self.alpha > 0.0 && self.beta.is_finite()) {
            return Err(DetectError::InvalidParams {
                alpha: self.alpha,
                beta: self.beta,
            });
        }
        Ok(())
    }
}

impl Default for SimilarityParams {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: 0.0,
        }
    }
}

/// `alpha * (e/|e|)·(w/|w|) + beta`
pub fn similarity(e: &Embedding, w: &Embedding, p: &SimilarityParams) -> Result<f64, DetectError> {
    if e.dim() != w.dim() {
        return Err(DetectError::DimensionMismatch {
            left: e.dim(),
            right: w.dim(),
        });
    }
    let (ne, nw) = (e.norm(), w.norm());
    if ne == 0.0 || nw == 0.0 {
        return Err(DetectError::ZeroVector);
    }
    let cos: f64 = e
        .0
        .iter()
        .zip(&w.0)
        .map(|(a, b)| (a / ne) * (b / nw))
        .sum();
    Ok(p.alpha * cos.clamp(-1.0, 1.0) + p.beta)
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}
