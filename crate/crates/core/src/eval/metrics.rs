use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::actuation::{CLOSED_THRESHOLD, OPEN_THRESHOLD};
use crate::intent::Token;
use crate::sim::ScenarioTrace;

/// Per-run summary derived from a finished trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioMetrics {
    pub frames: u64,
    /// Frames from the hand entering the activation radius to the first G,
    /// both counted.
    pub frames_to_g: Option<u64>,
    pub g_count: usize,
    pub r_count: usize,
    pub s_count: usize,
    /// G emissions whose target is not the object truly nearest the hand.
    pub wrong_object_g: usize,
    pub g_targets: Vec<String>,
    /// Seconds from the first G until closure reaches the closed threshold.
    pub grasp_latency_s: Option<f64>,
    /// Seconds from the first R until closure falls to the open threshold.
    pub release_latency_s: Option<f64>,
    pub final_closure: f64,
    pub final_phase: String,
}

pub fn scenario_metrics(trace: &ScenarioTrace) -> Result<ScenarioMetrics, EvalError> {
    let outcome = trace.outcome.as_ref().ok_or(EvalError::IncompleteTrace)?;
    let radius = trace.header.activation_radius;
    let count = |tok: Token| {
        trace
            .frames
            .iter()
            .filter(|f| f.command.is_some_and(|c| c.token == tok))
            .count()
    };
    let g_frames: Vec<usize> = trace
        .frames
        .iter()
        .enumerate()
        .filter(|(_, f)| f.command.is_some_and(|c| c.token == Token::Grip))
        .map(|(i, _)| i)
        .collect();

    let frames_to_g = g_frames.first().map(|&g| {
        let inside = |i: usize| trace.frames[i].delta_min.is_some_and(|d| d <= radius);
        let mut entry = g;
        while entry > 0 && inside(entry - 1) {
            entry -= 1;
        }
        (g - entry + 1) as u64
    });

    let wrong_object_g = g_frames
        .iter()
        .filter(|&&i| {
            let f = &trace.frames[i];
            f.target_label.as_deref() != f.gt_nearest.as_ref().map(|n| n.label.as_str())
        })
        .count();
    let g_targets = g_frames
        .iter()
        .map(|&i| trace.frames[i].target_label.clone().unwrap_or_default())
        .collect();

    let latency = |tok: Token, reached: fn(f64) -> bool| {
        let f = trace.frames.iter().find(|f| f.command.is_some_and(|c| c.token == tok))?;
        trace
            .telemetry
            .iter()
            .find(|t| t.t > f.t && reached(t.closure))
            .map(|t| t.t - f.t)
    };

    Ok(ScenarioMetrics {
        frames: outcome.frames,
        frames_to_g,
        g_count: g_frames.len(),
        r_count: count(Token::Release),
        s_count: count(Token::Stop),
        wrong_object_g,
        g_targets,
        grasp_latency_s: latency(Token::Grip, |c| c >= CLOSED_THRESHOLD),
        release_latency_s: latency(Token::Release, |c| c <= OPEN_THRESHOLD),
        final_closure: outcome.final_closure,
        final_phase: outcome.final_phase.clone(),
    })
}
