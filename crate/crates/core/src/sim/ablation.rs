//! Keyframe detection dataset for the open- versus closed-vocabulary
//! comparison: the fifteen household objects split into five three-object
//! scenes, twenty keyframes each, with the viewpoint drifting between
//! keyframes.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::scene::{object_catalog, render_snapshot, CameraRig, CatalogEntry, SceneObject};
use crate::eval::{GroundTruth, GtFrame, GtObject};
use crate::geometry::HandCentroid;
use crate::ovdetect::{mock_detect, DetectionRecord, EmbeddingSpace, MockConfig, Vocabulary, VocabularyFile};

pub const SCENE_COUNT: usize = 5;
pub const KEYFRAMES_PER_SCENE: usize = 20;

/// Seeded shuffle of the catalog into five groups of three.
pub fn ablation_groups(seed: u64) -> Vec<Vec<CatalogEntry>> {
    let mut all = object_catalog();
    all.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    all.chunks(all.len() / SCENE_COUNT).map(|c| c.to_vec()).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct KeyframeDataset {
    pub log: Vec<DetectionRecord>,
    pub ground_truth: GroundTruth,
}

fn keyframe_scene(group: &[CatalogEntry], k: usize) -> Vec<SceneObject> {
    let k = k as f64;
    let (dx, dy) = (40.0 * (0.7 * k).sin(), 25.0 * (0.45 * k).cos());
    let z = 620.0 + 15.0 * (k % 7.0);
    group
        .iter()
        .enumerate()
        .map(|(i, e)| {
            let x = (i as f64 - 1.0) * 180.0 + dx;
            SceneObject::new(&e.label, [x, 40.0 + dy, z + 30.0 * i as f64], e.extent, e.grasp_type)
        })
        .collect()
}

/// Runs the mock detector with `vocab` over every keyframe. The embedding
/// space always covers the full catalog, so only the vocabulary differs
/// between an open and a closed run.
pub fn keyframe_dataset(seed: u64, vocab: &VocabularyFile, detector: &MockConfig) -> KeyframeDataset {
    let catalog = object_catalog();
    let space = EmbeddingSpace::new(
        seed,
        catalog.iter().map(|e| e.label.clone()).chain(vocab.labels().map(String::from)),
    );
    let vocab = Vocabulary::from_file(vocab, &space).expect("vocabulary embeds in the catalog space");
    let rig = CameraRig::default();
    let hand = HandCentroid::new(320.0, 470.0, 300.0);
    let mut log = Vec::new();
    let mut frames = Vec::new();
    for (g, group) in ablation_groups(seed).iter().enumerate() {
        for k in 0..KEYFRAMES_PER_SCENE {
            let frame = (g * KEYFRAMES_PER_SCENE + k) as u64;
            let scene = keyframe_scene(group, k);
            let snap = render_snapshot(&scene, hand, &rig, &space, frame, frame * 100_000);
            for d in mock_detect(&snap, &vocab, seed, detector) {
                log.push(DetectionRecord::from_detection(frame, &d));
            }
            frames.push(GtFrame {
                frame,
                objects: snap
                    .objects
                    .iter()
                    .map(|o| GtObject {
                        label: o.label.clone(),
                        bbox: o.bbox,
                        split: catalog.iter().find(|e| e.label == o.label).expect("catalog label").split,
                    })
                    .collect(),
            });
        }
    }
    KeyframeDataset {
        log,
        ground_truth: GroundTruth { frames },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn groups_partition_catalog() {
        let groups = ablation_groups(3);
        assert_eq!(groups.len(), SCENE_COUNT);
        let mut labels: Vec<String> = groups.iter().flatten().map(|e| e.label.clone()).collect();
        labels.sort();
        labels.dedup();
        assert_eq!(labels.len(), 15);
    }

    #[test]
    fn every_object_visible_in_every_keyframe() {
        for group in ablation_groups(0) {
            for k in 0..KEYFRAMES_PER_SCENE {
                let scene = keyframe_scene(&group, k);
                let snap = render_snapshot(
                    &scene,
                    HandCentroid::new(0.0, 0.0, 1.0),
                    &CameraRig::default(),
                    &EmbeddingSpace::new(0, ["x"]),
                    0,
                    0,
                );
                assert_eq!(snap.objects.len(), 3);
            }
        }
    }
}
