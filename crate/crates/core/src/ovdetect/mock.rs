use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::vocab::classify_region;
use super::{Detection, Detector, Vocabulary};
use crate::geometry::BBox;
use crate::sim::SceneSnapshot;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MockConfig {
    /// Box jitter standard deviation in pixels.
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    #[serde(default = "default_threshold")]
    pub score_threshold: f64,
}

fn default_sigma() -> f64 {
    1.0
}

fn default_threshold() -> f64 {
    0.5
}

impl Default for MockConfig {
    fn default() -> Self {
        Self {
            sigma: default_sigma(),
            score_threshold: default_threshold(),
        }
    }
}

/// Detector over simulated snapshots.
///
/// Objects whose label is not in the vocabulary are never reported. The rest
/// are classified against the vocabulary and kept when the winning score
/// clears the threshold. Jitter is seeded per `(seed, frame, label)`, so an
/// object's box does not depend on which other objects or prompts exist.
pub fn mock_detect(
    scene: &SceneSnapshot,
    vocab: &Vocabulary,
    noise_seed: u64,
    cfg: &MockConfig,
) -> Vec<Detection> {
    let mut out = Vec::new();
    for obj in &scene.objects {
        if !vocab.contains(&obj.label) {
            continue;
        }
        let Ok((_, label, score)) = classify_region(&obj.embedding, vocab, vocab.params()) else {
            continue;
        };
        if score < cfg.score_threshold {
            continue;
        }
        let bbox = if cfg.sigma > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(noise_key(noise_seed, scene.frame_id, &obj.label));
            jitter(&obj.bbox, cfg.sigma, &mut rng)
        } else {
            obj.bbox
        };
        let Some(bbox) = bbox.clip(scene.depth.width, scene.depth.height) else {
            continue;
        };
        out.push(Detection {
            bbox,
            label: label.to_string(),
            score,
            object_id: 0,
        });
    }
    out
}

fn jitter(b: &BBox, sigma: f64, rng: &mut ChaCha8Rng) -> BBox {
    let n = Normal::new(0.0, sigma).expect("sigma is positive");
    let x1 = b.x1 + n.sample(rng);
    let y1 = b.y1 + n.sample(rng);
    let x2 = (b.x2 + n.sample(rng)).max(x1 + 1.0);
    let y2 = (b.y2 + n.sample(rng)).max(y1 + 1.0);
    BBox::new(x1, y1, x2, y2)
}

fn noise_key(seed: u64, frame: u64, label: &str) -> u64 {
    // FNV-1a over the label, then mixed with seed and frame
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h ^ seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ frame.wrapping_mul(0xc2b2_ae3d_27d4_eb4f)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MockDetector {
    pub config: MockConfig,
    pub seed: u64,
}

impl MockDetector {
    pub fn new(config: MockConfig, seed: u64) -> Self {
        Self { config, seed }
    }
}

impl Detector for MockDetector {
    fn detect(&mut self, frame: &SceneSnapshot, vocab: &Vocabulary) -> Vec<Detection> {
        mock_detect(frame, vocab, self.seed, &self.config)
    }
}
