//! Camera models, depth-to-color registration, grasp-point extraction and the
//! per-frame grasp-point graph.
//!
//! Pixel coordinates are `(u, v)` with `u` along the image width. Depth is in
//! millimeters; a depth sample of `0` marks an invalid pixel.

use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Camera-frame point in millimeters.
pub type Point3 = [f64; 3];

/// Edge threshold used when no other value is configured (mixed units).
pub const DEFAULT_EDGE_EPSILON: f64 = 200.0;

/// Side of the square window used to fill an invalid center depth.
const FILL_WINDOW: i64 = 5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("invalid depth {0} mm")]
    InvalidDepth(f64),
    #[error("pixel ({u}, {v}) outside {width}x{height} frame")]
    OutOfFrame {
        u: f64,
        v: f64,
        width: u32,
        height: u32,
    },
    #[error("point is behind the camera (z = {0})")]
    BehindCamera(f64),
    #[error("no valid depth in the window around ({u}, {v})")]
    NoValidDepth { u: u32, v: u32 },
    #[error("box does not intersect the frame")]
    BoxOutsideFrame,
    #[error("invalid intrinsics: {0}")]
    InvalidIntrinsics(String),
    #[error("invalid extrinsics: {0}")]
    InvalidExtrinsics(String),
    #[error("depth frame data length {len} does not match {width}x{height}")]
    FrameSize { len: usize, width: u32, height: u32 },
}

/// Pinhole intrinsics, no distortion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl Intrinsics {
    pub fn new(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        width: u32,
        height: u32,
    ) -> Result<Self, GeometryError> {
        let intr = Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        };
        intr.validate()?;
        Ok(intr)
    }

    /// 640x480 sensor with a 600 px focal length and centered principal point.
    pub fn default_sensor() -> Self {
        Self {
            fx: 600.0,
            fy: 600.0,
            cx: 320.0,
            cy: 240.0,
            width: 640,
            height: 480,
        }
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        if !(self.fx.is_finite() && self.fx > 0.0 && self.fy.is_finite() && self.fy > 0.0) {
            return Err(GeometryError::InvalidIntrinsics(
                "focal lengths must be positive".into(),
            ));
        }
        if !(self.cx >= 0.0 && self.cx < self.width as f64) {
            return Err(GeometryError::InvalidIntrinsics(format!(
                "cx {} outside [0, {})",
                self.cx, self.width
            )));
        }
        if !(self.cy >= 0.0 && self.cy < self.height as f64) {
            return Err(GeometryError::InvalidIntrinsics(format!(
                "cy {} outside [0, {})",
                self.cy, self.height
            )));
        }
        Ok(())
    }

    pub fn contains(&self, u: f64, v: f64) -> bool {
        u >= 0.0 && v >= 0.0 && u < self.width as f64 && v < self.height as f64
    }
}

impl Default for Intrinsics {
    fn default() -> Self {
        Self::default_sensor()
    }
}

/// Rigid transform from the depth camera frame to the color camera frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extrinsics {
    pub rotation: [[f64; 3]; 3],
    /// Millimeters.
    pub translation: [f64; 3],
}

impl Extrinsics {
    pub fn new(rotation: [[f64; 3]; 3], translation: [f64; 3]) -> Result<Self, GeometryError> {
        let ext = Self {
            rotation,
            translation,
        };
        ext.validate()?;
        Ok(ext)
    }

    pub fn identity() -> Self {
        Self {
            rotation: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            translation: [0.0; 3],
        }
    }

    pub fn from_translation(translation: [f64; 3]) -> Self {
        Self {
            translation,
            ..Self::identity()
        }
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        let r = &self.rotation;
        for i in 0..3 {
            for j in 0..3 {
                let dot: f64 = (0..3).map(|k| r[i][k] * r[j][k]).sum();
                let expected = if i == j { 1.0 } else { 0.0 };
                if (dot - expected).abs() > 1e-9 {
                    return Err(GeometryError::InvalidExtrinsics(
                        "rotation is not orthonormal".into(),
                    ));
                }
            }
        }
        let det = r[0][0] * (r[1][1] * r[2][2] - r[1][2] * r[2][1])
            - r[0][1] * (r[1][0] * r[2][2] - r[1][2] * r[2][0])
            + r[0][2] * (r[1][0] * r[2][1] - r[1][1] * r[2][0]);
        if (det - 1.0).abs() > 1e-9 {
            return Err(GeometryError::InvalidExtrinsics(
                "rotation determinant is not +1".into(),
            ));
        }
        if self.translation.iter().any(|t| !t.is_finite()) {
            return Err(GeometryError::InvalidExtrinsics(
                "translation must be finite".into(),
            ));
        }
        Ok(())
    }

    /// `R·p + t`
    pub fn apply(&self, p: Point3) -> Point3 {
        let r = &self.rotation;
        let mut out = self.translation;
        for (i, o) in out.iter_mut().enumerate() {
            *o += r[i][0] * p[0] + r[i][1] * p[1] + r[i][2] * p[2];
        }
        out
    }

    /// `Rᵀ·(p − t)`
    pub fn apply_inverse(&self, p: Point3) -> Point3 {
        let r = &self.rotation;
        let q = [
            p[0] - self.translation[0],
            p[1] - self.translation[1],
            p[2] - self.translation[2],
        ];
        let mut out = [0.0; 3];
        for (j, o) in out.iter_mut().enumerate() {
            *o = r[0][j] * q[0] + r[1][j] * q[1] + r[2][j] * q[2];
        }
        out
    }
}

impl Default for Extrinsics {
    fn default() -> Self {
        Self::identity()
    }
}

/// Row-major 16-bit depth image in millimeters, `0` = invalid.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DepthFrame {
    pub width: u32,
    pub height: u32,
    pub data: Vec<u16>,
    /// Microseconds.
    pub timestamp: u64,
}

impl DepthFrame {
    pub fn new(width: u32, height: u32, data: Vec<u16>, timestamp: u64) -> Result<Self, GeometryError> {
        if data.len() != width as usize * height as usize {
            return Err(GeometryError::FrameSize {
                len: data.len(),
                width,
                height,
            });
        }
        Ok(Self {
            width,
            height,
            data,
            timestamp,
        })
    }

    pub fn filled(width: u32, height: u32, value: u16, timestamp: u64) -> Self {
        Self {
            width,
            height,
            data: vec![value; width as usize * height as usize],
            timestamp,
        }
    }

    pub fn get(&self, u: u32, v: u32) -> Option<u16> {
        if u < self.width && v < self.height {
            Some(self.data[v as usize * self.width as usize + u as usize])
        } else {
            None
        }
    }

    pub fn set(&mut self, u: u32, v: u32, value: u16) {
        if u < self.width && v < self.height {
            let w = self.width as usize;
            self.data[v as usize * w + u as usize] = value;
        }
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Binary PGM (P5, maxval 65535, big-endian samples).
    pub fn write_pgm<W: Write>(&self, mut out: W) -> io::Result<()> {
        write!(out, "P5\n{} {}\n65535\n", self.width, self.height)?;
        let mut buf = Vec::with_capacity(self.data.len() * 2);
        for &d in &self.data {
            buf.extend_from_slice(&d.to_be_bytes());
        }
        out.write_all(&buf)
    }

    pub fn read_pgm<R: BufRead>(mut input: R) -> io::Result<Self> {
        let mut fields = Vec::with_capacity(4);
        let mut token = Vec::new();
        let mut in_comment = false;
        while fields.len() < 4 {
            let mut byte = [0u8; 1];
            input.read_exact(&mut byte)?;
            let b = byte[0];
            if in_comment {
                in_comment = b != b'\n';
                continue;
            }
            if b == b'#' {
                in_comment = true;
            } else if b.is_ascii_whitespace() {
                if !token.is_empty() {
                    fields.push(String::from_utf8_lossy(&token).into_owned());
                    token.clear();
                }
            } else {
                token.push(b);
            }
        }
        let bad = |msg: &str| io::Error::new(io::ErrorKind::InvalidData, msg.to_string());
        if fields[0] != "P5" {
            return Err(bad("not a binary PGM (P5)"));
        }
        let width: u32 = fields[1].parse().map_err(|_| bad("bad width"))?;
        let height: u32 = fields[2].parse().map_err(|_| bad("bad height"))?;
        if fields[3] != "65535" {
            return Err(bad("expected maxval 65535"));
        }
        let mut raw = vec![0u8; width as usize * height as usize * 2];
        input.read_exact(&mut raw)?;
        let data = raw
            .chunks_exact(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]))
            .collect();
        Ok(Self {
            width,
            height,
            data,
            timestamp: 0,
        })
    }
}

/// Axis-aligned box in pixels, `(x1, y1)` top-left and `(x2, y2)` bottom-right.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct BBox {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
}

impl BBox {
    pub fn new(x1: f64, y1: f64, x2: f64, y2: f64) -> Self {
        Self { x1, y1, x2, y2 }
    }

    pub fn is_valid(&self) -> bool {
        self.x1 < self.x2 && self.y1 < self.y2 && [self.x1, self.y1, self.x2, self.y2].iter().all(|c| c.is_finite())
    }

    pub fn center(&self) -> (f64, f64) {
        ((self.x1 + self.x2) / 2.0, (self.y1 + self.y2) / 2.0)
    }

    pub fn width(&self) -> f64 {
        self.x2 - self.x1
    }

    pub fn height(&self) -> f64 {
        self.y2 - self.y1
    }

    pub fn area(&self) -> f64 {
        self.width().max(0.0) * self.height().max(0.0)
    }

    /// Intersection with `[0, width) x [0, height)`, `None` when disjoint.
    pub fn clip(&self, width: u32, height: u32) -> Option<BBox> {
        let b = BBox {
            x1: self.x1.max(0.0),
            y1: self.y1.max(0.0),
            x2: self.x2.min(width as f64),
            y2: self.y2.min(height as f64),
        };
        b.is_valid().then_some(b)
    }
}

impl From<[f64; 4]> for BBox {
    fn from(b: [f64; 4]) -> Self {
        Self::new(b[0], b[1], b[2], b[3])
    }
}

impl From<BBox> for [f64; 4] {
    fn from(b: BBox) -> Self {
        [b.x1, b.y1, b.x2, b.y2]
    }
}

/// A graph node `(u, v, d)` for one detected object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraspPoint {
    pub u: u32,
    pub v: u32,
    /// Millimeters.
    pub d: f64,
    pub object_id: u64,
    pub label: String,
}

/// Hand exoskeleton centroid in the same `(u, v, d)` space as grasp points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct HandCentroid {
    pub u: f64,
    pub v: f64,
    pub d: f64,
}

impl HandCentroid {
    pub fn new(u: f64, v: f64, d: f64) -> Self {
        Self { u, v, d }
    }
}

impl From<[f64; 3]> for HandCentroid {
    fn from(h: [f64; 3]) -> Self {
        Self::new(h[0], h[1], h[2])
    }
}

impl From<HandCentroid> for [f64; 3] {
    fn from(h: HandCentroid) -> Self {
        [h.u, h.v, h.d]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraphEdge {
    pub a: usize,
    pub b: usize,
    pub length: f64,
}

/// Grasp points plus proximity edges. Edges are stored once with `a < b` and
/// read back symmetrically through [`GraspPointGraph::has_edge`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GraspPointGraph {
    pub nodes: Vec<GraspPoint>,
    pub edges: Vec<GraphEdge>,
}

impl GraspPointGraph {
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        self.edges.iter().any(|e| e.a == a && e.b == b)
    }

    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.edges.iter().filter_map(move |e| {
            if e.a == i {
                Some(e.b)
            } else if e.b == i {
                Some(e.a)
            } else {
                None
            }
        })
    }
}

/// Space in which node-to-hand distances are measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistanceSpace {
    /// Literal `(px, px, mm)` Euclidean distance.
    #[default]
    Mixed,
    /// Both points deprojected first, then 3D Euclidean distance in mm.
    Metric,
}

impl std::str::FromStr for DistanceSpace {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mixed" => Ok(Self::Mixed),
            "metric" => Ok(Self::Metric),
            other => Err(format!("unknown distance space '{other}' (expected mixed|metric)")),
        }
    }
}

pub fn deproject(px: (f64, f64), depth: f64, intr: &Intrinsics) -> Result<Point3, GeometryError> {
    if !(depth > 0.0 && depth.is_finite()) {
        return Err(GeometryError::InvalidDepth(depth));
    }
    let (u, v) = px;
    if !intr.contains(u, v) {
        return Err(GeometryError::OutOfFrame {
            u,
            v,
            width: intr.width,
            height: intr.height,
        });
    }
    Ok([
        (u - intr.cx) * depth / intr.fx,
        (v - intr.cy) * depth / intr.fy,
        depth,
    ])
}

pub fn project(point: Point3, intr: &Intrinsics) -> Result<(f64, f64), GeometryError> {
    let [x, y, z] = point;
    if !(z > 0.0) {
        return Err(GeometryError::BehindCamera(z));
    }
    Ok((intr.fx * x / z + intr.cx, intr.fy * y / z + intr.cy))
}

/// Resamples a depth frame into the color camera's pixel grid.
///
/// Each valid depth pixel is deprojected, moved into the color frame and
/// reprojected; collisions keep the nearest sample.
pub fn register_depth(
    depth: &DepthFrame,
    d_intr: &Intrinsics,
    c_intr: &Intrinsics,
    ext: &Extrinsics,
) -> DepthFrame {
    let mut out = DepthFrame::filled(c_intr.width, c_intr.height, 0, depth.timestamp);
    let cw = c_intr.width as usize;
    for v in 0..depth.height {
        for u in 0..depth.width {
            let d = depth.data[v as usize * depth.width as usize + u as usize];
            if d == 0 {
                continue;
            }
            let Ok(p_d) = deproject((u as f64, v as f64), d as f64, d_intr) else {
                continue;
            };
            let p_c = ext.apply(p_d);
            let Ok((uc, vc)) = project(p_c, c_intr) else {
                continue;
            };
            let (uc, vc) = (uc.round(), vc.round());
            if !c_intr.contains(uc, vc) {
                continue;
            }
            let z = p_c[2].round();
            if z < 1.0 || z > u16::MAX as f64 {
                continue;
            }
            let z = z as u16;
            let slot = &mut out.data[vc as usize * cw + uc as usize];
            if *slot == 0 || z < *slot {
                *slot = z;
            }
        }
    }
    out
}

/// Looks up the depth at the box center, falling back to the median of valid
/// samples in a 5x5 window when the center itself is invalid.
pub fn extract_grasp_point(
    bbox: &BBox,
    reg_depth: &DepthFrame,
    object_id: u64,
    label: &str,
) -> Result<GraspPoint, GeometryError> {
    if bbox.clip(reg_depth.width, reg_depth.height).is_none() {
        return Err(GeometryError::BoxOutsideFrame);
    }
    let (cu, cv) = bbox.center();
    let u = cu.round().clamp(0.0, reg_depth.width as f64 - 1.0) as u32;
    let v = cv.round().clamp(0.0, reg_depth.height as f64 - 1.0) as u32;
    let center = reg_depth.get(u, v).unwrap_or(0);
    let d = if center > 0 {
        center as f64
    } else {
        window_median(reg_depth, u, v).ok_or(GeometryError::NoValidDepth { u, v })?
    };
    Ok(GraspPoint {
        u,
        v,
        d,
        object_id,
        label: label.to_string(),
    })
}

fn window_median(frame: &DepthFrame, u: u32, v: u32) -> Option<f64> {
    let half = FILL_WINDOW / 2;
    let mut vals: Vec<u16> = Vec::with_capacity((FILL_WINDOW * FILL_WINDOW) as usize);
    for dv in -half..=half {
        for du in -half..=half {
            let (uu, vv) = (u as i64 + du, v as i64 + dv);
            if uu < 0 || vv < 0 {
                continue;
            }
            if let Some(d) = frame.get(uu as u32, vv as u32) {
                if d > 0 {
                    vals.push(d);
                }
            }
        }
    }
    if vals.is_empty() {
        return None;
    }
    vals.sort_unstable();
    let n = vals.len();
    Some(if n % 2 == 1 {
        vals[n / 2] as f64
    } else {
        (vals[n / 2 - 1] as f64 + vals[n / 2] as f64) / 2.0
    })
}

fn mixed_distance(a: (f64, f64, f64), b: (f64, f64, f64)) -> f64 {
    let (du, dv, dd) = (a.0 - b.0, a.1 - b.1, a.2 - b.2);
    (du * du + dv * dv + dd * dd).sqrt()
}

pub fn build_graph(points: Vec<GraspPoint>, epsilon: f64) -> GraspPointGraph {
    let mut edges = Vec::new();
    for i in 0..points.len() {
        for j in (i + 1)..points.len() {
            let (p, q) = (&points[i], &points[j]);
            let len = mixed_distance(
                (p.u as f64, p.v as f64, p.d),
                (q.u as f64, q.v as f64, q.d),
            );
            if len <= epsilon {
                edges.push(GraphEdge { a: i, b: j, length: len });
            }
        }
    }
    GraspPointGraph {
        nodes: points,
        edges,
    }
}

/// Euclidean node-to-hand distance in mixed `(px, px, mm)` units.
pub fn node_distance(node: &GraspPoint, hand: &HandCentroid) -> f64 {
    mixed_distance((node.u as f64, node.v as f64, node.d), (hand.u, hand.v, hand.d))
}

/// Node-to-hand distance in millimeters after deprojecting both points.
/// Falls back to the mixed distance when either point cannot be deprojected.
pub fn node_distance_metric(node: &GraspPoint, hand: &HandCentroid, intr: &Intrinsics) -> f64 {
    let p = deproject((node.u as f64, node.v as f64), node.d, intr);
    let h = deproject((hand.u, hand.v), hand.d, intr);
    match (p, h) {
        (Ok(p), Ok(h)) => mixed_distance((p[0], p[1], p[2]), (h[0], h[1], h[2])),
        _ => node_distance(node, hand),
    }
}

pub fn node_distance_in(
    space: DistanceSpace,
    node: &GraspPoint,
    hand: &HandCentroid,
    intr: &Intrinsics,
) -> f64 {
    match space {
        DistanceSpace::Mixed => node_distance(node, hand),
        DistanceSpace::Metric => node_distance_metric(node, hand, intr),
    }
}
