//! Deterministic simulator: scenes, scripted scenarios, the lockstep
//! pipeline, trial scoring and the interactive steering server.

mod ablation;
mod interactive;
mod pipeline;
mod scenario;
mod scene;
mod trace;
mod trial;

use thiserror::Error;

pub use ablation::{ablation_groups, keyframe_dataset, KeyframeDataset, KEYFRAMES_PER_SCENE, SCENE_COUNT};
pub use interactive::{serve_interactive, InteractiveServer, InteractiveSession};
pub use pipeline::{run_scenario, FrameOutput, Pipeline};
pub use scenario::{
    HandPath, Scenario, ScenarioConfig, TranscriptEvent, VocabSource, Waypoint, DEFAULT_INITIAL_HAND, FRAME_DT,
    TICKS_PER_FRAME,
};
pub use scene::{
    object_catalog, render_snapshot, CameraRig, CatalogEntry, SceneObject, SceneSnapshot, VisibleObject,
    BACKGROUND_DEPTH,
};
pub use trace::{FrameRecord, GtBox, GtNearest, ScenarioTrace, TraceHeader, TraceOutcome};
pub use trial::{score_trial, MAINTAIN_SECONDS, MAINTAIN_THRESHOLD};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid scenario at {location}: {message}")]
    ScenarioInvalid { location: String, message: String },
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("port {port} unavailable: {message}")]
    PortUnavailable { port: u16, message: String },
}
