//! Scores a simulated run on the three-level grasping/maintaining rubric.
//!
//! Grasping: 1 when the first G targets the intended object and closure
//! reaches the closed threshold while the hand is inside the activation
//! radius; 0.5 when G picked a different object; 0 otherwise.
//! Maintaining: 1 when closure stays at or above [`MAINTAIN_THRESHOLD`] for
//! [`MAINTAIN_SECONDS`] after closing; 0.5 when it sags but stays above half
//! closed; 0 when it falls below that or the grasp never happened.

use super::trace::ScenarioTrace;
use crate::actuation::CLOSED_THRESHOLD;
use crate::eval::{GraspType, TrialScore};
use crate::intent::Token;

pub const MAINTAIN_THRESHOLD: f64 = 0.9;
pub const MAINTAIN_SECONDS: f64 = 3.0;
const MOVED_THRESHOLD: f64 = 0.5;

pub fn score_trial(trace: &ScenarioTrace, object: &str, grasp_type: GraspType) -> TrialScore {
    let (grasping, maintaining) = rubric(trace, object);
    TrialScore::new(object, grasp_type, grasping, maintaining).expect("rubric values")
}

fn rubric(trace: &ScenarioTrace, object: &str) -> (f64, f64) {
    let Some(g) = trace
        .frames
        .iter()
        .find(|f| f.command.is_some_and(|c| c.token == Token::Grip))
    else {
        return (0.0, 0.0);
    };
    if g.target_label.as_deref() != Some(object) {
        return (0.5, 0.0);
    }
    let Some(closed_at) = trace
        .telemetry
        .iter()
        .position(|t| t.t > g.t && t.closure >= CLOSED_THRESHOLD)
    else {
        return (0.0, 0.0);
    };
    let t_closed = trace.telemetry[closed_at].t;
    let in_radius = trace
        .frames
        .iter()
        .rev()
        .find(|f| f.t < t_closed)
        .is_some_and(|f| {
            f.target_label.as_deref() == Some(object)
                && f.delta_min.is_some_and(|d| d <= trace.header.activation_radius)
        });
    if !in_radius {
        return (0.0, 0.0);
    }

    let end = t_closed + MAINTAIN_SECONDS;
    let window: Vec<f64> = trace.telemetry[closed_at..]
        .iter()
        .take_while(|t| t.t <= end + 1e-9)
        .map(|t| t.closure)
        .collect();
    let covered = trace.telemetry.last().is_some_and(|t| t.t >= end - 1e-9);
    let lowest = window.iter().copied().fold(f64::INFINITY, f64::min);
    let maintaining = if covered && lowest >= MAINTAIN_THRESHOLD {
        1.0
    } else if lowest >= MOVED_THRESHOLD {
        0.5
    } else {
        0.0
    };
    (1.0, maintaining)
}
