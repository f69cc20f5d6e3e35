//! Steering UI channel: one JSON object per line in each direction.

use serde::{Deserialize, Serialize};

use crate::actuation::Telemetry;
use crate::geometry::{GraphEdge, GraspPoint, HandCentroid};
use crate::intent::IntentSnapshot;
use crate::ovdetect::Detection;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClientMessage {
    MoveHand { du: f64, dv: f64, dd: f64 },
    Transcript { text: String },
    Reset,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotMessage {
    pub frame: u64,
    pub intent: IntentSnapshot,
    pub telemetry: Option<Telemetry>,
    pub detections: Vec<Detection>,
    pub hand: HandCentroid,
    #[serde(default)]
    pub nodes: Vec<GraspPoint>,
    #[serde(default)]
    pub edges: Vec<GraphEdge>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    Snapshot(SnapshotMessage),
}

impl ClientMessage {
    pub fn parse_line(line: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(line.trim())
    }
}

impl ServerMessage {
    pub fn to_line(&self) -> String {
        let mut s = serde_json::to_string(self).expect("server messages always serialize");
        s.push('\n');
        s
    }
}
