//! Middle-level intent decision-maker.
//!
//! Each perception tick picks the grasp point nearest the hand, feeds it to a
//! stability queue and scans any pending transcript for keywords. A small
//! phase machine gates which symbolic command may be emitted:
//!
//! ```text
//! IDLE --G--> GRASP_TRIGGERED --closed--> HOLDING --R--> RELEASING --open--> IDLE
//!   any --S--> STOPPED --R--> RELEASING
//! ```

use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{node_distance_in, DistanceSpace, GraspPointGraph, HandCentroid, Intrinsics};

pub const DEFAULT_TAU: usize = 5;
pub const DEFAULT_ACTIVATION_RADIUS: f64 = 150.0;
/// Bound on transcripts buffered between ticks.
pub const TRANSCRIPT_INBOX_CAPACITY: usize = 8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IntentError {
    #[error("tau must be at least 1")]
    InvalidTau,
    #[error("activation radius must be positive, got {0}")]
    InvalidRadius(f64),
    #[error("keyword '{0}' may only map to R or S")]
    InvalidKeyword(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Token {
    #[serde(rename = "G")]
    Grip,
    #[serde(rename = "R")]
    Release,
    #[serde(rename = "S")]
    Stop,
}

impl Token {
    pub fn as_byte(self) -> u8 {
        match self {
            Token::Grip => b'G',
            Token::Release => b'R',
            Token::Stop => b'S',
        }
    }

    pub fn from_byte(b: u8) -> Option<Self> {
        match b {
            b'G' => Some(Token::Grip),
            b'R' => Some(Token::Release),
            b'S' => Some(Token::Stop),
            _ => None,
        }
    }

    pub fn as_char(self) -> char {
        self.as_byte() as char
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_char())
    }
}

impl std::str::FromStr for Token {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut bytes = s.trim().bytes();
        match (bytes.next(), bytes.next()) {
            (Some(b), None) => {
                Token::from_byte(b.to_ascii_uppercase()).ok_or_else(|| format!("invalid token '{s}'"))
            }
            _ => Err(format!("invalid token '{s}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Cause {
    Vision,
    Speech,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Command {
    pub token: Token,
    /// Microseconds.
    pub timestamp: u64,
    pub cause: Cause,
}

impl Command {
    pub fn vision_grip(timestamp: u64) -> Self {
        Self {
            token: Token::Grip,
            timestamp,
            cause: Cause::Vision,
        }
    }

    pub fn speech(token: Token, timestamp: u64) -> Self {
        Self {
            token,
            timestamp,
            cause: Cause::Speech,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Phase {
    #[default]
    Idle,
    GraspTriggered,
    Holding,
    Releasing,
    Stopped,
}

impl Phase {
    pub fn as_str(&self) -> &'static str {
        match self {
            Phase::Idle => "IDLE",
            Phase::GraspTriggered => "GRASP_TRIGGERED",
            Phase::Holding => "HOLDING",
            Phase::Releasing => "RELEASING",
            Phase::Stopped => "STOPPED",
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Ring of the most recent in-radius target ids.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StabilityQueue {
    capacity: usize,
    entries: VecDeque<u64>,
}

impl StabilityQueue {
    pub fn new(capacity: usize) -> Self {
        let capacity = capacity.max(1);
        Self {
            capacity,
            entries: VecDeque::with_capacity(capacity),
        }
    }

    /// Appends `id`; a different id restarts the run.
    pub fn push(&mut self, id: u64) {
        if self.entries.back().is_some_and(|&last| last != id) {
            self.entries.clear();
        }
        if self.entries.len() == self.capacity {
            self.entries.pop_front();
        }
        self.entries.push_back(id);
    }

    pub fn clear(&mut self) {
        self.entries.clear();
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// The id filling the whole queue, if any.
    pub fn stable_target(&self) -> Option<u64> {
        let first = *self.entries.front()?;
        (self.entries.len() == self.capacity && self.entries.iter().all(|&e| e == first)).then_some(first)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntentConfig {
    pub tau: usize,
    pub activation_radius: f64,
    /// Lowercase phrase to token. Only R and S are allowed.
    pub keywords: Vec<(String, Token)>,
    #[serde(default)]
    pub distance_space: DistanceSpace,
}

impl IntentConfig {
    pub fn new(tau: usize, activation_radius: f64) -> Result<Self, IntentError> {
        let cfg = Self {
            tau,
            activation_radius,
            ..Self::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), IntentError> {
        if self.tau < 1 {
            return Err(IntentError::InvalidTau);
        }
        if !(self.activation_radius > 0.0 && self.activation_radius.is_finite()) {
            return Err(IntentError::InvalidRadius(self.activation_radius));
        }
        if let Some((k, _)) = self.keywords.iter().find(|(_, t)| *t == Token::Grip) {
            return Err(IntentError::InvalidKeyword(k.clone()));
        }
        Ok(())
    }
}

impl Default for IntentConfig {
    fn default() -> Self {
        Self {
            tau: DEFAULT_TAU,
            activation_radius: DEFAULT_ACTIVATION_RADIUS,
            keywords: vec![
                ("release".to_string(), Token::Release),
                ("stop".to_string(), Token::Stop),
            ],
            distance_space: DistanceSpace::Mixed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntentState {
    pub phase: Phase,
    pub queue: StabilityQueue,
    pub current_target: Option<u64>,
    pub delta_min: Option<f64>,
    /// Cleared after a release completes; set again once the hand leaves the
    /// activation radius or the nearest target changes.
    pub armed: bool,
    /// Set by G, cleared once a release completes. A stopped hand can only
    /// be released while engaged.
    pub engaged: bool,
}

impl IntentState {
    pub fn new(cfg: &IntentConfig) -> Self {
        Self {
            phase: Phase::Idle,
            queue: StabilityQueue::new(cfg.tau),
            current_target: None,
            delta_min: None,
            armed: true,
            engaged: false,
        }
    }

    pub fn snapshot(&self) -> IntentSnapshot {
        IntentSnapshot {
            phase: self.phase.as_str().to_string(),
            queue_fill: self.queue.len(),
            target: self.current_target,
            delta_min: self.delta_min,
        }
    }
}

/// UI view of the intent state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntentSnapshot {
    pub phase: String,
    pub queue_fill: usize,
    pub target: Option<u64>,
    pub delta_min: Option<f64>,
}

/// Plant-side events the phase machine waits on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PlantFeedback {
    pub closed: bool,
    pub open: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct FrameInputs<'a> {
    pub graph: &'a GraspPointGraph,
    pub hand: HandCentroid,
    pub transcript: Option<&'a str>,
    pub plant: PlantFeedback,
    pub timestamp: u64,
    /// Only consulted for the metric distance space.
    pub intrinsics: &'a Intrinsics,
}

/// Nearest node to the hand, ties broken by lowest object id.
pub fn select_target(graph: &GraspPointGraph, hand: &HandCentroid) -> Option<(u64, f64)> {
    select_target_in(graph, hand, DistanceSpace::Mixed, &Intrinsics::default())
}

pub fn select_target_in(
    graph: &GraspPointGraph,
    hand: &HandCentroid,
    space: DistanceSpace,
    intr: &Intrinsics,
) -> Option<(u64, f64)> {
    graph
        .nodes
        .iter()
        .map(|n| (n.object_id, node_distance_in(space, n, hand, intr)))
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
}

/// Feeds one observation to the stability queue and emits G when the same
/// target has been observed inside the activation radius for `tau`
/// consecutive frames while idle.
pub fn step_queue(
    state: &mut IntentState,
    target: Option<u64>,
    delta_min: f64,
    cfg: &IntentConfig,
    timestamp: u64,
) -> Option<Command> {
    let previous = state.queue.stable_target().or(state.current_target);
    state.current_target = target;
    let within = target.is_some() && delta_min <= cfg.activation_radius;
    match target {
        Some(id) if within => {
            if !state.armed && previous.is_some_and(|p| p != id) {
                state.armed = true;
            }
            state.queue.push(id)
        }
        _ => {
            state.queue.clear();
            state.armed = true;
        }
    }
    if state.phase == Phase::Idle && state.armed && state.queue.stable_target().is_some() {
        state.phase = Phase::GraspTriggered;
        state.engaged = true;
        state.queue.clear();
        return Some(Command::vision_grip(timestamp));
    }
    None
}

/// Case-insensitive keyword scan. Stop keywords win over release keywords.
pub fn parse_transcript(text: &str, cfg: &IntentConfig) -> Option<Token> {
    let lowered = text.to_lowercase();
    let hit = |want: Token| {
        cfg.keywords
            .iter()
            .any(|(k, t)| *t == want && !k.is_empty() && lowered.contains(&k.to_lowercase()))
    };
    if hit(Token::Stop) {
        Some(Token::Stop)
    } else if hit(Token::Release) {
        Some(Token::Release)
    } else {
        None
    }
}

/// One perception tick: plant feedback, then speech, then vision.
pub fn advance(
    mut state: IntentState,
    inputs: &FrameInputs<'_>,
    cfg: &IntentConfig,
) -> (IntentState, Option<Command>) {
    match state.phase {
        Phase::GraspTriggered if inputs.plant.closed => state.phase = Phase::Holding,
        Phase::Releasing if inputs.plant.open => {
            state.phase = Phase::Idle;
            state.queue.clear();
            state.armed = false;
            state.engaged = false;
        }
        _ => {}
    }

    let mut command = None;
    if let Some(token) = inputs.transcript.and_then(|t| parse_transcript(t, cfg)) {
        match token {
            Token::Stop => {
                // R was already sent, so the grip is no longer engaged. A
                // later "release" then cannot emit a second R.
                if state.phase == Phase::Releasing {
                    state.engaged = false;
                    state.armed = false;
                }
                state.phase = Phase::Stopped;
                command = Some(Command::speech(Token::Stop, inputs.timestamp));
            }
            Token::Release if state.phase == Phase::Holding || (state.phase == Phase::Stopped && state.engaged) => {
                state.phase = Phase::Releasing;
                command = Some(Command::speech(Token::Release, inputs.timestamp));
            }
            // nothing is held, so there is nothing to release
            Token::Release if state.phase == Phase::Stopped => state.phase = Phase::Idle,
            _ => {}
        }
    }

    let target = select_target_in(inputs.graph, &inputs.hand, cfg.distance_space, inputs.intrinsics);
    let (id, delta) = match target {
        Some((id, d)) => (Some(id), d),
        None => (None, f64::INFINITY),
    };
    state.delta_min = target.map(|(_, d)| d);
    let grip = step_queue(&mut state, id, delta, cfg, inputs.timestamp);
    (state, command.or(grip))
}

/// Bounded FIFO of transcripts received between ticks. Overflow drops the
/// oldest entry.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TranscriptInbox {
    queue: VecDeque<String>,
    dropped: u64,
}

impl TranscriptInbox {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, text: impl Into<String>) {
        if self.queue.len() == TRANSCRIPT_INBOX_CAPACITY {
            self.queue.pop_front();
            self.dropped += 1;
        }
        self.queue.push_back(text.into());
    }

    /// Everything queued, joined into one transcript for the next tick.
    pub fn drain_joined(&mut self) -> Option<String> {
        if self.queue.is_empty() {
            return None;
        }
        let parts: Vec<String> = self.queue.drain(..).collect();
        Some(parts.join(" "))
    }

    pub fn len(&self) -> usize {
        self.queue.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queue.is_empty()
    }

    pub fn dropped(&self) -> u64 {
        self.dropped
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::GraspPoint;

    fn node(id: u64, u: u32, v: u32, d: f64) -> GraspPoint {
        GraspPoint {
            u,
            v,
            d,
            object_id: id,
            label: format!("o{id}"),
        }
    }

    fn graph(nodes: Vec<GraspPoint>) -> GraspPointGraph {
        GraspPointGraph { nodes, edges: vec![] }
    }

    #[test]
    fn select_argmin() {
        let hand = HandCentroid::new(0.0, 0.0, 0.0);
        let g = graph(vec![node(1, 5, 0, 0.0), node(2, 3, 0, 0.0), node(3, 9, 0, 0.0)]);
        assert_eq!(select_target(&g, &hand), Some((2, 3.0)));
        assert_eq!(select_target(&graph(vec![]), &hand), None);
    }

    #[test]
    fn select_tie_lowest_id() {
        let hand = HandCentroid::new(0.0, 0.0, 0.0);
        let g = graph(vec![node(12, 7, 0, 0.0), node(4, 0, 7, 0.0)]);
        assert_eq!(select_target(&g, &hand), Some((4, 7.0)));
    }

    #[test]
    fn grip_on_tau_th_frame() {
        let cfg = IntentConfig::new(5, 150.0).unwrap();
        let mut s = IntentState::new(&cfg);
        for f in 1..=4 {
            assert_eq!(step_queue(&mut s, Some(7), 10.0, &cfg, f), None, "frame {f}");
        }
        let c = step_queue(&mut s, Some(7), 10.0, &cfg, 5).unwrap();
        assert_eq!(c.token, Token::Grip);
        assert_eq!(c.cause, Cause::Vision);
        assert_eq!(s.phase, Phase::GraspTriggered);
    }

    #[test]
    fn target_change_resets_queue() {
        let cfg = IntentConfig::new(5, 150.0).unwrap();
        let mut s = IntentState::new(&cfg);
        for f in 1..=3 {
            assert_eq!(step_queue(&mut s, Some(7), 10.0, &cfg, f), None);
        }
        assert_eq!(step_queue(&mut s, Some(8), 10.0, &cfg, 4), None);
        assert_eq!(s.queue.len(), 1);
        step_queue(&mut s, None, f64::INFINITY, &cfg, 5);
        assert!(s.queue.is_empty());
    }

    #[test]
    fn single_grip_over_long_run() {
        let cfg = IntentConfig::new(5, 150.0).unwrap();
        let mut s = IntentState::new(&cfg);
        let n = (1..=9)
            .filter_map(|f| step_queue(&mut s, Some(7), 10.0, &cfg, f))
            .count();
        assert_eq!(n, 1);
    }

    #[test]
    fn outside_radius_never_grips() {
        let cfg = IntentConfig::new(2, 150.0).unwrap();
        let mut s = IntentState::new(&cfg);
        for f in 0..20 {
            assert_eq!(step_queue(&mut s, Some(1), 151.0, &cfg, f), None);
        }
    }

    #[test]
    fn transcripts() {
        let cfg = IntentConfig::default();
        assert_eq!(parse_transcript("please release the cup", &cfg), Some(Token::Release));
        assert_eq!(parse_transcript("STOP now", &cfg), Some(Token::Stop));
        assert_eq!(parse_transcript("hello there", &cfg), None);
        assert_eq!(parse_transcript("stop, don't release", &cfg), Some(Token::Stop));
        assert_eq!(parse_transcript("  ReLeAsE  ", &cfg), Some(Token::Release));
    }

    fn inputs<'a>(g: &'a GraspPointGraph, k: &'a Intrinsics, text: Option<&'a str>) -> FrameInputs<'a> {
        FrameInputs {
            graph: g,
            hand: HandCentroid::new(100.0, 100.0, 500.0),
            transcript: text,
            plant: PlantFeedback::default(),
            timestamp: 0,
            intrinsics: k,
        }
    }

    #[test]
    fn advance_emits_grip_then_holds_then_releases() {
        let cfg = IntentConfig::new(3, 150.0).unwrap();
        let k = Intrinsics::default();
        let g = graph(vec![node(1, 100, 100, 500.0)]);
        let mut s = IntentState::new(&cfg);
        let mut cmds = vec![];
        for _ in 0..3 {
            let (ns, c) = advance(s, &inputs(&g, &k, None), &cfg);
            s = ns;
            cmds.extend(c);
        }
        assert_eq!(cmds.len(), 1);
        assert_eq!(s.phase, Phase::GraspTriggered);

        let mut inp = inputs(&g, &k, None);
        inp.plant.closed = true;
        let (ns, c) = advance(s, &inp, &cfg);
        assert_eq!((ns.phase, c), (Phase::Holding, None));

        let (ns, c) = advance(ns, &inputs(&g, &k, Some("release")), &cfg);
        assert_eq!(ns.phase, Phase::Releasing);
        assert_eq!(c.unwrap().token, Token::Release);
    }

    #[test]
    fn release_ignored_when_idle() {
        let cfg = IntentConfig::default();
        let k = Intrinsics::default();
        let g = graph(vec![]);
        let s = IntentState::new(&cfg);
        let (ns, c) = advance(s.clone(), &inputs(&g, &k, Some("release")), &cfg);
        assert_eq!(c, None);
        assert_eq!(ns.phase, Phase::Idle);
    }

    #[test]
    fn stop_preempts_grip() {
        let cfg = IntentConfig::new(1, 150.0).unwrap();
        let k = Intrinsics::default();
        let g = graph(vec![node(1, 100, 100, 500.0)]);
        let s = IntentState::new(&cfg);
        let (s, c) = advance(s, &inputs(&g, &k, Some("stop")), &cfg);
        assert_eq!(c.unwrap().token, Token::Stop);
        assert_eq!(s.phase, Phase::Stopped);
        // nothing held: release just leaves the stop
        let (s, c) = advance(s, &inputs(&graph(vec![]), &k, Some("release")), &cfg);
        assert_eq!(c, None);
        assert_eq!(s.phase, Phase::Idle);
    }

    #[test]
    fn release_resumes_after_stop_mid_grasp() {
        let cfg = IntentConfig::new(1, 150.0).unwrap();
        let k = Intrinsics::default();
        let g = graph(vec![node(1, 100, 100, 500.0)]);
        let (s, c) = advance(IntentState::new(&cfg), &inputs(&g, &k, None), &cfg);
        assert_eq!(c.unwrap().token, Token::Grip);
        let (s, c) = advance(s, &inputs(&g, &k, Some("Stop!")), &cfg);
        assert_eq!(c.unwrap().token, Token::Stop);
        let (s, c) = advance(s, &inputs(&g, &k, Some("release")), &cfg);
        assert_eq!(c.unwrap().token, Token::Release);
        assert_eq!(s.phase, Phase::Releasing);
    }

    #[test]
    fn stop_during_release_never_repeats_r() {
        let cfg = IntentConfig::new(1, 150.0).unwrap();
        let k = Intrinsics::default();
        let g = graph(vec![node(1, 100, 100, 500.0)]);
        let (s, _) = advance(IntentState::new(&cfg), &inputs(&g, &k, None), &cfg);
        let mut inp = inputs(&g, &k, None);
        inp.plant.closed = true;
        let (s, _) = advance(s, &inp, &cfg);
        let (s, c) = advance(s, &inputs(&g, &k, Some("release")), &cfg);
        assert_eq!(c.unwrap().token, Token::Release);
        let (s, c) = advance(s, &inputs(&g, &k, Some("stop")), &cfg);
        assert_eq!(c.unwrap().token, Token::Stop);
        let (s, c) = advance(s, &inputs(&g, &k, Some("release")), &cfg);
        assert_eq!((s.phase, c), (Phase::Idle, None));
        // still disarmed: the hand has not left the object
        let (_, c) = advance(s, &inputs(&g, &k, None), &cfg);
        assert_eq!(c, None);
    }

    #[test]
    fn no_regrip_until_hand_leaves() {
        let cfg = IntentConfig::new(1, 150.0).unwrap();
        let k = Intrinsics::default();
        let g = graph(vec![node(1, 100, 100, 500.0)]);
        let mut s = IntentState::new(&cfg);
        s.phase = Phase::Releasing;
        let mut inp = inputs(&g, &k, None);
        inp.plant.open = true;
        let (s, c) = advance(s, &inp, &cfg);
        assert_eq!((s.phase, c), (Phase::Idle, None));
        let (s, c) = advance(s, &inputs(&g, &k, None), &cfg);
        assert_eq!(c, None);
        let empty = graph(vec![]);
        let (s, _) = advance(s, &inputs(&empty, &k, None), &cfg);
        let (_, c) = advance(s, &inputs(&g, &k, None), &cfg);
        assert_eq!(c.unwrap().token, Token::Grip);
    }

    #[test]
    fn inbox_overflow_drops_oldest() {
        let mut inbox = TranscriptInbox::new();
        for i in 0..10 {
            inbox.push(format!("t{i}"));
        }
        assert_eq!(inbox.len(), TRANSCRIPT_INBOX_CAPACITY);
        assert_eq!(inbox.dropped(), 2);
        assert_eq!(inbox.drain_joined().unwrap(), "t2 t3 t4 t5 t6 t7 t8 t9");
        assert!(inbox.drain_joined().is_none());
    }

    #[test]
    fn config_validation() {
        assert_eq!(IntentConfig::new(0, 1.0), Err(IntentError::InvalidTau));
        assert!(IntentConfig::new(1, 0.0).is_err());
        let mut cfg = IntentConfig::default();
        cfg.keywords.push(("grab".into(), Token::Grip));
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn snapshot_json_shape() {
        let s = IntentState::new(&IntentConfig::default());
        let json = serde_json::to_value(s.snapshot()).unwrap();
        assert_eq!(
            json,
            serde_json::json!({"phase":"IDLE","queue_fill":0,"target":null,"delta_min":null})
        );
    }
}
