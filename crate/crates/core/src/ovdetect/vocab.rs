//! Prompt vocabularies and seeded mock embedding spaces.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::similarity::{similarity, Embedding, SimilarityParams, EMBEDDING_DIM};
use super::DetectError;

/// Upper bound on the cosine between embeddings of different labels.
pub const MAX_CROSS_SIMILARITY: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    #[default]
    Seen,
    Unseen,
}

impl Split {
    pub fn as_str(&self) -> &'static str {
        match self {
            Split::Seen => "seen",
            Split::Unseen => "unseen",
        }
    }
}

/// On-disk vocabulary: prompts with split tags plus similarity parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VocabularyFile {
    pub prompts: Vec<PromptSpec>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub beta: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_alpha() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptSpec {
    pub label: String,
    #[serde(default)]
    pub split: Split,
}

impl VocabularyFile {
    pub fn load(path: &Path) -> Result<Self, DetectError> {
        let text = std::fs::read_to_string(path).map_err(|e| DetectError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        serde_json::from_str(&text).map_err(|e| DetectError::Schema(format!("{}: {e}", path.display())))
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.prompts.iter().map(|p| p.label.as_str())
    }

    /// Copy keeping only prompts of the given split.
    pub fn restricted_to(&self, split: Split) -> Self {
        Self {
            prompts: self.prompts.iter().filter(|p| p.split == split).cloned().collect(),
            ..self.clone()
        }
    }
}

/// Deterministic label-to-embedding table.
///
/// Labels are sorted and assigned seeded Gaussian vectors; the first
/// `EMBEDDING_DIM` are Gram-Schmidt orthonormalized, later ones are
/// rejection-sampled to keep every cross-label cosine below
/// [`MAX_CROSS_SIMILARITY`].
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSpace {
    seed: u64,
    table: BTreeMap<String, Embedding>,
}

impl EmbeddingSpace {
    pub fn new<I, S>(seed: u64, labels: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut sorted: Vec<String> = labels.into_iter().map(|s| s.as_ref().to_string()).collect();
        sorted.sort();
        sorted.dedup();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(sorted.len());
        let mut table = BTreeMap::new();
        for label in sorted {
            let v = if basis.len() < EMBEDDING_DIM {
                orthonormal_sample(&mut rng, &basis)
            } else {
                rejection_sample(&mut rng, &basis)
            };
            basis.push(v.clone());
            table.insert(label, Embedding(v));
        }
        Self { seed, table }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn get(&self, label: &str) -> Option<&Embedding> {
        self.table.get(label)
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.table.keys().map(String::as_str)
    }
}

fn gaussian(rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..EMBEDDING_DIM).map(|_| StandardNormal.sample(rng)).collect()
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    n
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn orthonormal_sample(rng: &mut ChaCha8Rng, basis: &[Vec<f64>]) -> Vec<f64> {
    loop {
        let mut v = gaussian(rng);
        // two passes of modified Gram-Schmidt for numerical orthogonality
        for _ in 0..2 {
            for b in basis {
                let c = dot(&v, b);
                v.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
            }
        }
        if normalize(&mut v) > 1e-6 {
            return v;
        }
    }
}

fn rejection_sample(rng: &mut ChaCha8Rng, basis: &[Vec<f64>]) -> Vec<f64> {
    let mut best: Option<(f64, Vec<f64>)> = None;
    for _ in 0..10_000 {
        let mut v = gaussian(rng);
        normalize(&mut v);
        let worst = basis.iter().map(|b| dot(&v, b).abs()).fold(0.0, f64::max);
        if worst < MAX_CROSS_SIMILARITY {
            return v;
        }
        if best.as_ref().is_none_or(|(w, _)| worst < *w) {
            best = Some((worst, v));
        }
    }
    log::warn!("embedding space saturated; accepting cross-similarity above bound");
    best.map(|(_, v)| v).unwrap_or_else(|| gaussian(rng))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prompt {
    pub label: String,
    pub split: Split,
    pub embedding: Embedding,
}

/// Ordered prompt list with one text embedding per prompt.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    prompts: Vec<Prompt>,
    params: SimilarityParams,
    seed: u64,
}

impl Vocabulary {
    pub fn new(prompts: Vec<Prompt>, params: SimilarityParams, seed: u64) -> Result<Self, DetectError> {
        params.validate()?;
        let mut seen = HashSet::new();
        let mut dim = None;
        for p in &prompts {
            if !seen.insert(p.label.as_str()) {
                return Err(DetectError::DuplicateLabel(p.label.clone()));
            }
            match dim {
                None => dim = Some(p.embedding.dim()),
                Some(d) if d != p.embedding.dim() => {
                    return Err(DetectError::DimensionMismatch {
                        left: d,
                        right: p.embedding.dim(),
                    })
                }
                _ => {}
            }
        }
        Ok(Self {
            prompts,
            params,
            seed,
        })
    }

    /// Builds a vocabulary whose text embeddings come from `space`.
    pub fn from_file(file: &VocabularyFile, space: &EmbeddingSpace) -> Result<Self, DetectError> {
        let params = SimilarityParams::new(file.alpha, file.beta)?;
        let prompts = file
            .prompts
            .iter()
            .map(|p| {
                let embedding = space
                    .get(&p.label)
                    .cloned()
                    .ok_or_else(|| DetectError::UnknownLabel(p.label.clone()))?;
                Ok(Prompt {
                    label: p.label.clone(),
                    split: p.split,
                    embedding,
                })
            })
            .collect::<Result<Vec<_>, DetectError>>()?;
        Self::new(prompts, params, file.seed)
    }

    /// Builds a vocabulary with its own embedding space seeded from the file.
    pub fn standalone(file: &VocabularyFile) -> Result<Self, DetectError> {
        let space = EmbeddingSpace::new(file.seed, file.labels());
        Self::from_file(file, &space)
    }

    pub fn to_file(&self) -> VocabularyFile {
        VocabularyFile {
            prompts: self
                .prompts
                .iter()
                .map(|p| PromptSpec {
                    label: p.label.clone(),
                    split: p.split,
                })
                .collect(),
            alpha: self.params.alpha,
            beta: self.params.beta,
            seed: self.seed,
        }
    }

    pub fn prompts(&self) -> &[Prompt] {
        &self.prompts
    }

    pub fn params(&self) -> &SimilarityParams {
        &self.params
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.prompts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prompts.is_empty()
    }

    pub fn contains(&self, label: &str) -> bool {
        self.prompts.iter().any(|p| p.label == label)
    }

    pub fn split_of(&self, label: &str) -> Option<Split> {
        self.prompts.iter().find(|p| p.label == label).map(|p| p.split)
    }

    /// Adds a prompt at the end of the list. Labels must stay unique.
    pub fn push(&mut self, prompt: Prompt) -> Result<(), DetectError> {
        if self.contains(&prompt.label) {
            return Err(DetectError::DuplicateLabel(prompt.label));
        }
        if let Some(first) = self.prompts.first() {
            if first.embedding.dim() != prompt.embedding.dim() {
                return Err(DetectError::DimensionMismatch {
                    left: first.embedding.dim(),
                    right: prompt.embedding.dim(),
                });
            }
        }
        self.prompts.push(prompt);
        Ok(())
    }

    pub fn restricted_to(&self, split: Split) -> Self {
        Self {
            prompts: self.prompts.iter().filter(|p| p.split == split).cloned().collect(),
            params: self.params,
            seed: self.seed,
        }
    }
}

/// Scores a region embedding against every prompt and returns the winning
/// prompt index, label and sigmoid score. Ties go to the lowest index.
pub fn classify_region<'v>(
    e: &Embedding,
    vocab: &'v Vocabulary,
    p: &SimilarityParams,
) -> Result<(usize, &'v str, f64), DetectError> {
    let mut best: Option<(usize, f64)> = None;
    for (i, prompt) in vocab.prompts.iter().enumerate() {
        let s = similarity(e, &prompt.embedding, p)?;
        if best.is_none_or(|(_, b)| s > b) {
            best = Some((i, s));
        }
    }
    let (i, s) = best.ok_or(DetectError::EmptyVocabulary)?;
    Ok((i, vocab.prompts[i].label.as_str(), super::similarity::sigmoid(s)))
}
