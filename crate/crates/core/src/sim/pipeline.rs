//! The lockstep loop: one perception frame, then ten control ticks.

use std::collections::BTreeMap;

use super::scenario::{catalog_split, HandPath, Scenario, FRAME_DT, TICKS_PER_FRAME};
use super::scene::{render_snapshot, CameraRig, SceneObject, SceneSnapshot};
use super::trace::{FrameRecord, GtBox, GtNearest, ScenarioTrace, TraceHeader, TraceOutcome};
use super::SimError;
use crate::actuation::{Controller, Telemetry, CLOSED_THRESHOLD, CONTROL_DT, OPEN_THRESHOLD};
use crate::geometry::{
    build_graph, extract_grasp_point, node_distance_in, register_depth, GraspPoint, HandCentroid,
};
use crate::intent::{advance, Command, FrameInputs, IntentConfig, IntentState, PlantFeedback};
use crate::ovdetect::{mock_detect, track_ids, Detection, EmbeddingSpace, MockConfig, Split, Vocabulary};
use crate::protocol::{CommandDecoder, CommandEncoder, SnapshotMessage};

/// Everything one `step` produced.
#[derive(Debug, Clone)]
pub struct FrameOutput {
    pub record: FrameRecord,
    pub telemetry: Vec<Telemetry>,
}

/// All run state for one scenario. Owned by a single thread.
#[derive(Debug, Clone)]
pub struct Pipeline {
    scene: Vec<SceneObject>,
    rig: CameraRig,
    space: EmbeddingSpace,
    vocab: Vocabulary,
    intent_cfg: IntentConfig,
    detector: MockConfig,
    seed: u64,
    edge_epsilon: f64,
    max_track_dist: f64,
    intent: IntentState,
    prev_detections: Vec<Detection>,
    controller: Controller,
    encoder: CommandEncoder,
    decoder: CommandDecoder,
    frame: u64,
    last_telemetry: Option<Telemetry>,
    last_record: Option<FrameRecord>,
}

impl Pipeline {
    pub fn new(s: &Scenario) -> Result<Self, SimError> {
        s.validate()?;
        let vocab_file = s.vocabulary_file();
        let labels: Vec<String> = s
            .scene
            .iter()
            .map(|o| o.label.clone())
            .chain(vocab_file.prompts.iter().map(|p| p.label.clone()))
            .collect();
        let space = EmbeddingSpace::new(s.config.seed, labels);
        let vocab = Vocabulary::from_file(&vocab_file, &space).map_err(|e| SimError::ScenarioInvalid {
            location: "config.vocab".into(),
            message: e.to_string(),
        })?;
        let intent_cfg = s.config.intent();
        let controller = Controller::new(s.config.controller()).map_err(|e| SimError::ScenarioInvalid {
            location: "config".into(),
            message: e.to_string(),
        })?;
        Ok(Self {
            scene: s.scene.clone(),
            rig: s.rig,
            space,
            vocab,
            intent: IntentState::new(&intent_cfg),
            intent_cfg,
            detector: s.config.detector,
            seed: s.config.seed,
            edge_epsilon: s.config.edge_epsilon,
            max_track_dist: s.config.max_track_dist,
            prev_detections: Vec::new(),
            controller,
            encoder: CommandEncoder::new(),
            decoder: CommandDecoder::new(),
            frame: 0,
            last_telemetry: None,
            last_record: None,
        })
    }

    /// Back to frame 0: intent idle, tracker empty, plant at rest.
    pub fn reset(&mut self) {
        self.intent = IntentState::new(&self.intent_cfg);
        self.prev_detections.clear();
        self.controller.reset();
        self.encoder = CommandEncoder::new();
        self.decoder = CommandDecoder::new();
        self.frame = 0;
        self.last_telemetry = None;
        self.last_record = None;
    }

    pub fn frame(&self) -> u64 {
        self.frame
    }

    pub fn intent(&self) -> &IntentState {
        &self.intent
    }

    pub fn controller(&self) -> &Controller {
        &self.controller
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn render(&self, hand: HandCentroid) -> SceneSnapshot {
        render_snapshot(&self.scene, hand, &self.rig, &self.space, self.frame, self.frame * 100_000)
    }

    /// Runs one perception frame and its control ticks.
    pub fn step(&mut self, hand: HandCentroid, transcript: Option<String>) -> FrameOutput {
        let timestamp = self.frame * 100_000;
        let snap = self.render(hand);
        let hand = snap.hand;

        let raw = mock_detect(&snap, &self.vocab, self.seed, &self.detector);
        let detections = track_ids(&self.prev_detections, raw, self.max_track_dist);
        let registered = register_depth(&snap.depth, &self.rig.depth, &self.rig.color, &self.rig.extrinsics);
        let points: Vec<GraspPoint> = detections
            .iter()
            .filter_map(|d| extract_grasp_point(&d.bbox, &registered, d.object_id, &d.label).ok())
            .collect();
        let graph = build_graph(points, self.edge_epsilon);

        let closure = self.controller.closure();
        let plant = PlantFeedback {
            closed: closure >= CLOSED_THRESHOLD,
            open: closure <= OPEN_THRESHOLD,
        };
        let inputs = FrameInputs {
            graph: &graph,
            hand,
            transcript: transcript.as_deref(),
            plant,
            timestamp,
            intrinsics: &self.rig.color,
        };
        let (intent, command) = advance(self.intent.clone(), &inputs, &self.intent_cfg);
        self.intent = intent;

        let wire = command.map(|c| self.encoder.encode(c.token));
        if let Some(bytes) = wire {
            for (token, _seq) in self.decoder.push(&bytes) {
                self.controller.execute(token);
            }
        }

        let mut telemetry = Vec::with_capacity(TICKS_PER_FRAME);
        for _ in 0..TICKS_PER_FRAME {
            telemetry.push(self.controller.tick());
        }
        self.last_telemetry = telemetry.last().cloned();

        let target = self.intent.current_target;
        let target_label = target.and_then(|id| {
            graph.nodes.iter().find(|n| n.object_id == id).map(|n| n.label.clone())
        });
        let gt: Vec<GtBox> = snap
            .objects
            .iter()
            .map(|o| GtBox {
                gt_id: o.gt_id,
                label: o.label.clone(),
                bbox: o.bbox,
                depth_mm: o.depth_mm,
            })
            .collect();
        let record = FrameRecord {
            frame: self.frame,
            t: self.frame as f64 * FRAME_DT,
            hand,
            gt_nearest: self.gt_nearest(&gt, &hand),
            gt,
            detections: detections.clone(),
            graph,
            target,
            target_label,
            delta_min: self.intent.delta_min,
            transcript,
            command,
            wire,
            phase: self.intent.phase.as_str().to_string(),
            queue_fill: self.intent.queue.len(),
            closure,
        };
        self.prev_detections = detections;
        self.last_record = Some(record.clone());
        self.frame += 1;
        FrameOutput { record, telemetry }
    }

    /// Nearest visible object by true box center and front depth, measured
    /// the same way the intent layer measures graph nodes.
    fn gt_nearest(&self, gt: &[GtBox], hand: &HandCentroid) -> Option<GtNearest> {
        gt.iter()
            .map(|g| {
                let (u, v) = g.bbox.center();
                let node = GraspPoint {
                    u: u.round() as u32,
                    v: v.round() as u32,
                    d: g.depth_mm,
                    object_id: g.gt_id,
                    label: g.label.clone(),
                };
                let dist = node_distance_in(self.intent_cfg.distance_space, &node, hand, &self.rig.color);
                (g, dist)
            })
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.gt_id.cmp(&b.0.gt_id)))
            .map(|(g, distance)| GtNearest {
                gt_id: g.gt_id,
                label: g.label.clone(),
                distance,
            })
    }

    /// UI view of the most recent frame.
    pub fn snapshot(&self, hand: HandCentroid) -> SnapshotMessage {
        let (frame, detections, nodes, edges) = match &self.last_record {
            Some(r) => (r.frame, r.detections.clone(), r.graph.nodes.clone(), r.graph.edges.clone()),
            None => (0, Vec::new(), Vec::new(), Vec::new()),
        };
        SnapshotMessage {
            frame,
            intent: self.intent.snapshot(),
            telemetry: self.last_telemetry.clone(),
            detections,
            hand,
            nodes,
            edges,
        }
    }

    pub fn header(&self, name: &str) -> TraceHeader {
        let mut splits = BTreeMap::new();
        for o in &self.scene {
            let split = self
                .vocab
                .split_of(&o.label)
                .or_else(|| catalog_split(&o.label))
                .unwrap_or(Split::Unseen);
            splits.insert(o.label.clone(), split);
        }
        TraceHeader {
            scenario: name.to_string(),
            seed: self.seed,
            tau: self.intent_cfg.tau,
            activation_radius: self.intent_cfg.activation_radius,
            frame_dt: FRAME_DT,
            control_dt: CONTROL_DT,
            splits,
        }
    }

    pub fn outcome(&self, commands: Vec<Command>) -> TraceOutcome {
        TraceOutcome {
            frames: self.frame,
            final_phase: self.intent.phase.as_str().to_string(),
            final_closure: self.controller.closure(),
            commands,
        }
    }
}

/// Plays a scripted scenario to completion. Deterministic for a fixed seed.
pub fn run_scenario(s: &Scenario) -> Result<ScenarioTrace, SimError> {
    if s.hand_path == HandPath::Interactive {
        return Err(SimError::ScenarioInvalid {
            location: "hand_path".into(),
            message: "batch runs need scripted waypoints".into(),
        });
    }
    let mut pipeline = Pipeline::new(s)?;
    let mut events: Vec<(u64, &str)> = s
        .transcripts
        .iter()
        .map(|e| ((e.t * 1e6).round() as u64, e.text.as_str()))
        .collect();
    events.sort_by_key(|e| e.0);
    let mut next_event = 0;

    let mut trace = ScenarioTrace {
        header: pipeline.header(&s.name),
        frames: Vec::new(),
        telemetry: Vec::new(),
        outcome: None,
    };
    let mut commands = Vec::new();
    for k in 0..s.frame_count() {
        let now_us = k * 100_000;
        let mut due = Vec::new();
        while next_event < events.len() && events[next_event].0 <= now_us {
            due.push(events[next_event].1);
            next_event += 1;
        }
        let transcript = (!due.is_empty()).then(|| due.join(" "));
        let hand = s.hand_path.hand_at(k as f64 * FRAME_DT).expect("scripted path");
        let out = pipeline.step(hand, transcript);
        commands.extend(out.record.command);
        trace.frames.push(out.record);
        trace.telemetry.extend(out.telemetry);
    }
    trace.outcome = Some(pipeline.outcome(commands));
    Ok(trace)
}
