//! Vision- and speech-triggered grasp control for a soft robotic hand:
//! open-vocabulary detection, grasp-point selection, intent, a simulated
//! cable-driven actuator, the wire protocols and the evaluation metrics.

// Validation is written as `!(x > lo)` on purpose so NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod actuation;
pub mod eval;
pub mod geometry;
pub mod intent;
pub mod ovdetect;
pub mod protocol;
pub mod sim;

pub use actuation::{Controller, ControllerConfig, MotorParams, Telemetry};
pub use eval::GraspType;
pub use geometry::{BBox, DistanceSpace, GraspPoint, GraspPointGraph, HandCentroid, Intrinsics};
pub use intent::{Cause, Command, IntentConfig, Phase, Token};
pub use ovdetect::{Detection, Split};
pub use protocol::{ClientMessage, ServerMessage, SnapshotMessage};
pub use sim::{Scenario, ScenarioTrace};
