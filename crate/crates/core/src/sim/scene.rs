//! Scene objects and box-painted synthetic frames.

use serde::{Deserialize, Serialize};

use crate::eval::GraspType;
use crate::geometry::{project, BBox, DepthFrame, Extrinsics, HandCentroid, Intrinsics, Point3};
use crate::ovdetect::{Embedding, EmbeddingSpace, Split};

/// Depth painted where no object is, mm.
pub const BACKGROUND_DEPTH: u16 = 5000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    pub label: String,
    /// Center in color-camera coordinates, mm.
    pub position: Point3,
    /// (width, height, depth), mm.
    pub extent: [f64; 3],
    pub grasp_type: GraspType,
    /// Assigned from the run's embedding space when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latent_embedding: Option<Embedding>,
}

impl SceneObject {
    pub fn new(label: &str, position: Point3, extent: [f64; 3], grasp_type: GraspType) -> Self {
        Self {
            label: label.to_string(),
            position,
            extent,
            grasp_type,
            latent_embedding: None,
        }
    }

    /// Depth of the camera-facing surface, mm.
    pub fn front_depth(&self) -> f64 {
        self.position[2] - self.extent[2] / 2.0
    }
}

/// Ground truth for one object as seen in a frame.
#[derive(Debug, Clone, PartialEq)]
pub struct VisibleObject {
    /// Index into the scene's object list.
    pub gt_id: u64,
    pub label: String,
    pub bbox: BBox,
    pub embedding: Embedding,
    /// Front-surface depth, mm.
    pub depth_mm: f64,
}

/// What the head-mounted camera sees at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneSnapshot {
    pub frame_id: u64,
    pub timestamp_us: u64,
    pub objects: Vec<VisibleObject>,
    /// Raw frame in the depth camera's pixel grid.
    pub depth: DepthFrame,
    pub hand: HandCentroid,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[derive(Default)]
pub struct CameraRig {
    pub color: Intrinsics,
    pub depth: Intrinsics,
    /// Depth camera to color camera.
    pub extrinsics: Extrinsics,
}


fn projected_box(center: Point3, extent: [f64; 3], intr: &Intrinsics) -> Option<BBox> {
    let (u, v) = project(center, intr).ok()?;
    let hw = intr.fx * extent[0] / (2.0 * center[2]);
    let hh = intr.fy * extent[1] / (2.0 * center[2]);
    BBox::new(u - hw, v - hh, u + hw, v + hh).clip(intr.width, intr.height)
}

/// Projects every object into the color image and paints front-surface
/// depths over a far background in the depth image. Objects behind the
/// camera or fully off-frame are omitted.
pub fn render_snapshot(
    scene: &[SceneObject],
    hand: HandCentroid,
    rig: &CameraRig,
    space: &EmbeddingSpace,
    frame_id: u64,
    timestamp_us: u64,
) -> SceneSnapshot {
    let mut depth = DepthFrame::filled(rig.depth.width, rig.depth.height, BACKGROUND_DEPTH, timestamp_us);
    let mut objects = Vec::new();
    for (i, obj) in scene.iter().enumerate() {
        if obj.front_depth() <= 0.0 {
            continue;
        }
        let Some(bbox) = projected_box(obj.position, obj.extent, &rig.color) else {
            continue;
        };
        let embedding = obj
            .latent_embedding
            .clone()
            .or_else(|| space.get(&obj.label).cloned())
            .unwrap_or_else(|| Embedding(vec![1.0]));
        objects.push(VisibleObject {
            gt_id: i as u64,
            label: obj.label.clone(),
            bbox,
            embedding,
            depth_mm: obj.front_depth().round(),
        });

        let center_d = rig.extrinsics.apply_inverse(obj.position);
        let front = center_d[2] - obj.extent[2] / 2.0;
        if front <= 0.0 {
            continue;
        }
        let Some(dbox) = projected_box(center_d, obj.extent, &rig.depth) else {
            continue;
        };
        let value = front.round().clamp(1.0, u16::MAX as f64) as u16;
        let (u0, u1) = (dbox.x1.round() as u32, (dbox.x2.round() as u32).min(rig.depth.width));
        let (v0, v1) = (dbox.y1.round() as u32, (dbox.y2.round() as u32).min(rig.depth.height));
        for v in v0..v1 {
            for u in u0..u1 {
                if depth.get(u, v).is_some_and(|d| value < d) {
                    depth.set(u, v, value);
                }
            }
        }
    }
    let hand = HandCentroid::new(
        hand.u.clamp(0.0, rig.color.width as f64 - 1.0),
        hand.v.clamp(0.0, rig.color.height as f64 - 1.0),
        hand.d.max(1.0),
    );
    SceneSnapshot {
        frame_id,
        timestamp_us,
        objects,
        depth,
        hand,
    }
}

/// One of the fifteen household test objects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogEntry {
    pub label: String,
    pub grasp_type: GraspType,
    pub split: Split,
    /// Approximate (width, height, depth), mm.
    pub extent: [f64; 3],
}

/// The fifteen-object test set. Extents are rough estimates.
pub fn object_catalog() -> Vec<CatalogEntry> {
    use GraspType::*;
    use Split::*;
    let rows: [(&str, GraspType, Split, [f64; 3]); 15] = [
        ("banana", Pinch, Seen, [180.0, 40.0, 40.0]),
        ("strawberry", Pinch, Seen, [30.0, 35.0, 30.0]),
        ("chewing gum box", Pinch, Unseen, [40.0, 70.0, 40.0]),
        ("storage box", Pinch, Unseen, [90.0, 50.0, 60.0]),
        ("purse", Pinch, Unseen, [150.0, 100.0, 30.0]),
        ("softball", Spherical, Seen, [95.0, 95.0, 95.0]),
        ("apple", Spherical, Seen, [75.0, 75.0, 75.0]),
        ("pear", Spherical, Seen, [65.0, 95.0, 65.0]),
        ("orange", Spherical, Seen, [70.0, 70.0, 70.0]),
        ("plum", Spherical, Seen, [50.0, 50.0, 50.0]),
        ("chips can", Cylindrical, Unseen, [75.0, 100.0, 75.0]),
        ("coffee can", Cylindrical, Unseen, [100.0, 140.0, 100.0]),
        ("cup", Cylindrical, Unseen, [80.0, 95.0, 80.0]),
        ("peach can", Cylindrical, Unseen, [75.0, 110.0, 75.0]),
        ("chilli can", Cylindrical, Unseen, [65.0, 105.0, 65.0]),
    ];
    rows.iter()
        .map(|(label, g, s, e)| CatalogEntry {
            label: label.to_string(),
            grasp_type: *g,
            split: *s,
            extent: *e,
        })
        .collect()
}
