//! Run records: per-frame perception/intent lines, per-tick telemetry and a
//! terminal outcome, serialized as JSONL.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::actuation::Telemetry;
use crate::eval::{GroundTruth, GtFrame, GtObject};
use crate::geometry::{BBox, GraspPointGraph, HandCentroid};
use crate::intent::Command;
use crate::ovdetect::{Detection, DetectionRecord, Split};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub scenario: String,
    pub seed: u64,
    pub tau: usize,
    pub activation_radius: f64,
    /// Perception period, seconds.
    pub frame_dt: f64,
    /// Control period, seconds.
    pub control_dt: f64,
    /// Ground-truth split for every label in the scene.
    pub splits: BTreeMap<String, Split>,
}

/// A scene object as the camera saw it this frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GtBox {
    pub gt_id: u64,
    pub label: String,
    #[serde(rename = "box")]
    pub bbox: BBox,
    pub depth_mm: f64,
}

/// The object truly nearest the hand, from ground-truth geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GtNearest {
    pub gt_id: u64,
    pub label: String,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub frame: u64,
    /// Seconds.
    pub t: f64,
    pub hand: HandCentroid,
    pub detections: Vec<Detection>,
    pub graph: GraspPointGraph,
    /// Tracker id of the nearest node.
    pub target: Option<u64>,
    pub target_label: Option<String>,
    pub delta_min: Option<f64>,
    pub gt: Vec<GtBox>,
    pub gt_nearest: Option<GtNearest>,
    pub transcript: Option<String>,
    pub command: Option<Command>,
    /// The command frame as sent on the wire.
    pub wire: Option<[u8; 4]>,
    /// Intent phase after this frame.
    pub phase: String,
    pub queue_fill: usize,
    /// Closure at the start of the frame, before its control ticks.
    pub closure: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceOutcome {
    pub frames: u64,
    pub final_phase: String,
    pub final_closure: f64,
    pub commands: Vec<Command>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioTrace {
    pub header: TraceHeader,
    pub frames: Vec<FrameRecord>,
    pub telemetry: Vec<Telemetry>,
    /// `None` until the run terminates.
    pub outcome: Option<TraceOutcome>,
}

// Lives for one line at a time, so the size spread does not matter.
#[allow(clippy::large_enum_variant)]
#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum TraceLine {
    Header(TraceHeader),
    Frame(FrameRecord),
    Outcome(TraceOutcome),
}

impl ScenarioTrace {
    /// Header, frames and outcome, one JSON object per line.
    pub fn trace_jsonl(&self) -> String {
        let mut out = String::new();
        let mut put = |line: TraceLine| {
            out += &serde_json::to_string(&line).expect("trace serializes");
            out.push('\n');
        };
        put(TraceLine::Header(self.header.clone()));
        for f in &self.frames {
            put(TraceLine::Frame(f.clone()));
        }
        if let Some(o) = &self.outcome {
            put(TraceLine::Outcome(o.clone()));
        }
        out
    }

    pub fn telemetry_jsonl(&self) -> String {
        self.telemetry
            .iter()
            .map(|t| serde_json::to_string(t).expect("telemetry serializes") + "\n")
            .collect()
    }

    pub fn detections_jsonl(&self) -> String {
        self.detection_log()
            .iter()
            .map(|d| serde_json::to_string(d).expect("detection serializes") + "\n")
            .collect()
    }

    pub fn detection_log(&self) -> Vec<DetectionRecord> {
        self.frames
            .iter()
            .flat_map(|f| f.detections.iter().map(move |d| DetectionRecord::from_detection(f.frame, d)))
            .collect()
    }

    pub fn ground_truth(&self) -> GroundTruth {
        GroundTruth {
            frames: self
                .frames
                .iter()
                .map(|f| GtFrame {
                    frame: f.frame,
                    objects: f
                        .gt
                        .iter()
                        .map(|g| GtObject {
                            label: g.label.clone(),
                            bbox: g.bbox,
                            split: self.header.splits.get(&g.label).copied().unwrap_or(Split::Unseen),
                        })
                        .collect(),
                })
                .collect(),
        }
    }

    /// Inverse of [`trace_jsonl`](Self::trace_jsonl) plus
    /// [`telemetry_jsonl`](Self::telemetry_jsonl).
    pub fn parse_jsonl(trace: &str, telemetry: &str) -> Result<Self, String> {
        let mut header = None;
        let mut frames = Vec::new();
        let mut outcome = None;
        for (i, line) in trace.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            match serde_json::from_str(line).map_err(|e| format!("trace line {}: {e}", i + 1))? {
                TraceLine::Header(h) => header = Some(h),
                TraceLine::Frame(f) => frames.push(f),
                TraceLine::Outcome(o) => outcome = Some(o),
            }
        }
        let telemetry = telemetry
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| serde_json::from_str(l).map_err(|e| format!("telemetry line {}: {e}", i + 1)))
            .collect::<Result<_, _>>()?;
        Ok(Self {
            header: header.ok_or("trace has no header line")?,
            frames,
            telemetry,
            outcome,
        })
    }
}
