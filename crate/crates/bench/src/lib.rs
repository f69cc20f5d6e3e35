//! Shared inputs for the benchmarks. Everything here is deterministic so
//! runs are comparable across machines.

use std::path::PathBuf;

use ovgrasp_core::eval::ScoredBox;
use ovgrasp_core::geometry::{BBox, DepthFrame, Extrinsics};
use ovgrasp_core::ovdetect::{Embedding, EmbeddingSpace, Prompt, SimilarityParams, Vocabulary};
use ovgrasp_core::sim::{object_catalog, Scenario};

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

pub fn kitchen() -> Scenario {
    Scenario::load(&fixture("kitchen.json")).expect("kitchen fixture")
}

/// A tilted plane with a few holes, the shape a table top gives.
pub fn table_depth(width: u32, height: u32) -> DepthFrame {
    let data = (0..height)
        .flat_map(|v| {
            (0..width).map(move |u| {
                if (u * 7 + v * 13) % 97 == 0 {
                    0
                } else {
                    (500 + v + u / 4) as u16
                }
            })
        })
        .collect();
    DepthFrame::new(width, height, data, 0).expect("consistent dimensions")
}

/// A small rig offset, so registration does real work.
pub fn rig_offset() -> Extrinsics {
    Extrinsics::from_translation([25.0, 0.0, 0.0])
}

/// The fifteen catalog labels as a vocabulary.
pub fn catalog_vocabulary(seed: u64) -> (EmbeddingSpace, Vocabulary) {
    let catalog = object_catalog();
    let space = EmbeddingSpace::new(seed, catalog.iter().map(|c| c.label.as_str()));
    let prompts = catalog
        .iter()
        .map(|c| Prompt {
            label: c.label.clone(),
            split: c.split,
            embedding: space.get(&c.label).expect("label in space").clone(),
        })
        .collect();
    let vocab = Vocabulary::new(prompts, SimilarityParams::default(), seed).expect("valid vocabulary");
    (space, vocab)
}

pub fn region_embedding(space: &EmbeddingSpace, label: &str) -> Embedding {
    let mut e = space.get(label).expect("label in space").clone();
    for (i, x) in e.0.iter_mut().enumerate() {
        *x += 0.01 * ((i as f64) * 0.7).sin();
    }
    e
}

/// `frames` frames with three objects each; every third detection is jittered
/// off its box and scores descend irregularly.
pub fn ap_instance(frames: u64) -> (Vec<ScoredBox>, Vec<(u64, BBox)>) {
    let mut dets = Vec::new();
    let mut gts = Vec::new();
    for f in 0..frames {
        for k in 0..3u64 {
            let x = 50.0 + 150.0 * k as f64;
            let gt = BBox::new(x, 100.0, x + 80.0, 200.0);
            gts.push((f, gt));
            let shift = if (f + k) % 3 == 0 { 45.0 } else { 2.0 };
            let score = ((f * 31 + k * 17) % 101) as f64 / 101.0;
            dets.push(ScoredBox {
                frame: f,
                bbox: BBox::new(gt.x1 + shift, gt.y1, gt.x2 + shift, gt.y2),
                score,
            });
        }
    }
    (dets, gts)
}
