//! Scenario files: scene, scripted hand path, timed transcripts and config.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::scene::{object_catalog, CameraRig, SceneObject};
use super::SimError;
use crate::actuation::{ControllerConfig, MotorParams, PidGains, CONTROL_DT};
use crate::geometry::{DistanceSpace, HandCentroid, DEFAULT_EDGE_EPSILON};
use crate::intent::{IntentConfig, DEFAULT_ACTIVATION_RADIUS, DEFAULT_TAU};
use crate::ovdetect::{MockConfig, PromptSpec, Split, VocabularyFile, DEFAULT_MAX_TRACK_DIST};

/// Perception period, seconds.
pub const FRAME_DT: f64 = 0.1;
/// Control ticks per perception frame.
pub const TICKS_PER_FRAME: usize = 10;
/// Hand start for interactive sessions without an explicit one.
pub const DEFAULT_INITIAL_HAND: [f64; 3] = [320.0, 470.0, 300.0];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    /// Seconds.
    pub t: f64,
    pub u: f64,
    pub v: f64,
    /// mm.
    pub d: f64,
}

/// Either timed waypoints or the literal string `"interactive"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "HandPathRepr", into = "HandPathRepr")]
pub enum HandPath {
    Interactive,
    Waypoints(Vec<Waypoint>),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum HandPathRepr {
    Keyword(String),
    Waypoints(Vec<Waypoint>),
}

impl TryFrom<HandPathRepr> for HandPath {
    type Error = String;

    fn try_from(r: HandPathRepr) -> Result<Self, String> {
        match r {
            HandPathRepr::Keyword(k) if k == "interactive" => Ok(HandPath::Interactive),
            HandPathRepr::Keyword(k) => Err(format!("unknown hand_path mode '{k}'")),
            HandPathRepr::Waypoints(w) => Ok(HandPath::Waypoints(w)),
        }
    }
}

impl From<HandPath> for HandPathRepr {
    fn from(p: HandPath) -> Self {
        match p {
            HandPath::Interactive => HandPathRepr::Keyword("interactive".into()),
            HandPath::Waypoints(w) => HandPathRepr::Waypoints(w),
        }
    }
}

impl HandPath {
    /// Piecewise-linear position, held constant outside the waypoint span.
    pub fn hand_at(&self, t: f64) -> Option<HandCentroid> {
        let HandPath::Waypoints(w) = self else {
            return None;
        };
        let first = w.first()?;
        let last = w.last()?;
        let at = |p: &Waypoint| HandCentroid::new(p.u, p.v, p.d);
        if t <= first.t {
            return Some(at(first));
        }
        if t >= last.t {
            return Some(at(last));
        }
        let i = w.partition_point(|p| p.t <= t);
        let (a, b) = (&w[i - 1], &w[i]);
        let s = (t - a.t) / (b.t - a.t);
        Some(HandCentroid::new(
            a.u + s * (b.u - a.u),
            a.v + s * (b.v - a.v),
            a.d + s * (b.d - a.d),
        ))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptEvent {
    pub t: f64,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum VocabSource {
    Path(PathBuf),
    Inline(VocabularyFile),
}

fn d_tau() -> usize {
    DEFAULT_TAU
}
fn d_radius() -> f64 {
    DEFAULT_ACTIVATION_RADIUS
}
fn d_delta_v() -> f64 {
    ControllerConfig::default().delta_v
}
fn d_duration() -> f64 {
    8.0
}
fn d_eps() -> f64 {
    DEFAULT_EDGE_EPSILON
}
fn d_track() -> f64 {
    DEFAULT_MAX_TRACK_DIST
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    #[serde(default = "d_tau")]
    pub tau: usize,
    #[serde(default = "d_radius")]
    pub activation_radius: f64,
    #[serde(default)]
    pub distance_space: DistanceSpace,
    #[serde(default)]
    pub gains: PidGains,
    #[serde(default)]
    pub plant: MotorParams,
    /// Velocity setpoint magnitude, rad/s.
    #[serde(default = "d_delta_v")]
    pub delta_v: f64,
    /// Defaults to the scene's labels, split per the household catalog.
    #[serde(default)]
    pub vocab: Option<VocabSource>,
    #[serde(default)]
    pub seed: u64,
    /// Simulated seconds for scripted runs.
    #[serde(default = "d_duration")]
    pub duration: f64,
    #[serde(default)]
    pub detector: MockConfig,
    #[serde(default = "d_eps")]
    pub edge_epsilon: f64,
    #[serde(default = "d_track")]
    pub max_track_dist: f64,
    #[serde(default)]
    pub initial_hand: Option<HandCentroid>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields defaulted")
    }
}

impl ScenarioConfig {
    pub fn intent(&self) -> IntentConfig {
        IntentConfig {
            tau: self.tau,
            activation_radius: self.activation_radius,
            distance_space: self.distance_space,
            ..IntentConfig::default()
        }
    }

    pub fn controller(&self) -> ControllerConfig {
        ControllerConfig {
            gains: self.gains,
            plant: self.plant,
            delta_v: self.delta_v,
            dt: CONTROL_DT,
            ..ControllerConfig::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    #[serde(default)]
    pub name: String,
    pub scene: Vec<SceneObject>,
    pub hand_path: HandPath,
    #[serde(default)]
    pub transcripts: Vec<TranscriptEvent>,
    #[serde(default)]
    pub config: ScenarioConfig,
    #[serde(default)]
    pub rig: CameraRig,
}

fn invalid(location: impl Into<String>, message: impl Into<String>) -> SimError {
    SimError::ScenarioInvalid {
        location: location.into(),
        message: message.into(),
    }
}

impl Scenario {
    /// Reads, resolves a vocabulary path relative to the file, and validates.
    pub fn load(path: &Path) -> Result<Self, SimError> {
        let text = std::fs::read_to_string(path).map_err(|e| SimError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let mut s: Scenario = serde_json::from_str(&text).map_err(|e| {
            invalid(
                format!("{}:{}:{}", path.display(), e.line(), e.column()),
                e.to_string(),
            )
        })?;
        if let Some(VocabSource::Path(p)) = &s.config.vocab {
            let full = match path.parent() {
                Some(dir) if p.is_relative() => dir.join(p),
                _ => p.clone(),
            };
            let file = VocabularyFile::load(&full).map_err(|e| invalid("config.vocab", e.to_string()))?;
            s.config.vocab = Some(VocabSource::Inline(file));
        }
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let mut seen = HashSet::new();
        for (i, o) in self.scene.iter().enumerate() {
            if o.label.trim().is_empty() {
                return Err(invalid(format!("scene[{i}].label"), "label is empty"));
            }
            if !seen.insert(o.label.as_str()) {
                return Err(invalid(format!("scene[{i}].label"), format!("duplicate label '{}'", o.label)));
            }
            if !o.extent.iter().all(|&e| e > 0.0 && e.is_finite()) {
                return Err(invalid(format!("scene[{i}].extent"), "extent must be positive"));
            }
            if !o.position.iter().all(|p| p.is_finite()) {
                return Err(invalid(format!("scene[{i}].position"), "position must be finite"));
            }
        }
        if let HandPath::Waypoints(w) = &self.hand_path {
            if w.is_empty() {
                return Err(invalid("hand_path", "no waypoints"));
            }
            for i in 1..w.len() {
                if !(w[i].t > w[i - 1].t) {
                    return Err(invalid(format!("hand_path[{i}].t"), "waypoint times must strictly increase"));
                }
            }
        }
        for (i, e) in self.transcripts.iter().enumerate() {
            if !(e.t >= 0.0 && e.t.is_finite()) {
                return Err(invalid(format!("transcripts[{i}].t"), "time must be non-negative"));
            }
        }
        let c = &self.config;
        c.intent().validate().map_err(|e| invalid("config", e.to_string()))?;
        c.controller().validate().map_err(|e| invalid("config", e.to_string()))?;
        if !(c.duration > 0.0 && c.duration.is_finite()) {
            return Err(invalid("config.duration", "duration must be positive"));
        }
        if !(c.detector.sigma >= 0.0) {
            return Err(invalid("config.detector.sigma", "sigma must be non-negative"));
        }
        if let Some(VocabSource::Path(p)) = &c.vocab {
            return Err(invalid("config.vocab", format!("unresolved vocabulary path {}", p.display())));
        }
        self.rig.color.validate().map_err(|e| invalid("rig.color", e.to_string()))?;
        self.rig.depth.validate().map_err(|e| invalid("rig.depth", e.to_string()))?;
        self.rig.extrinsics.validate().map_err(|e| invalid("rig.extrinsics", e.to_string()))?;
        Ok(())
    }

    /// The configured vocabulary, or one prompt per scene label.
    pub fn vocabulary_file(&self) -> VocabularyFile {
        match &self.config.vocab {
            Some(VocabSource::Inline(f)) => f.clone(),
            _ => VocabularyFile {
                prompts: self
                    .scene
                    .iter()
                    .map(|o| PromptSpec {
                        label: o.label.clone(),
                        split: catalog_split(&o.label).unwrap_or(Split::Seen),
                    })
                    .collect(),
                alpha: 1.0,
                beta: 0.0,
                seed: self.config.seed,
            },
        }
    }

    pub fn initial_hand(&self) -> HandCentroid {
        self.config
            .initial_hand
            .or_else(|| self.hand_path.hand_at(0.0))
            .unwrap_or_else(|| DEFAULT_INITIAL_HAND.into())
    }

    /// Number of perception frames in a scripted run, frame 0 included.
    pub fn frame_count(&self) -> u64 {
        (self.config.duration / FRAME_DT + 1e-9).floor() as u64 + 1
    }
}

pub(crate) fn catalog_split(label: &str) -> Option<Split> {
    object_catalog().into_iter().find(|e| e.label == label).map(|e| e.split)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "scene": [{"label": "apple", "position": [0, 0, 600], "extent": [75, 75, 75], "grasp_type": "spherical"}],
        "hand_path": [{"t": 0, "u": 320, "v": 470, "d": 300}, {"t": 2, "u": 320, "v": 240, "d": 560}]
    }"#;

    #[test]
    fn minimal_parses_with_defaults() {
        let s: Scenario = serde_json::from_str(MINIMAL).unwrap();
        s.validate().unwrap();
        assert_eq!(s.config.tau, 5);
        assert_eq!(s.config.activation_radius, 150.0);
        assert_eq!(s.frame_count(), 81);
        let h = s.hand_path.hand_at(1.0).unwrap();
        assert_eq!((h.u, h.v, h.d), (320.0, 355.0, 430.0));
        assert_eq!(s.hand_path.hand_at(9.0).unwrap().d, 560.0);
    }

    #[test]
    fn interactive_keyword() {
        let s: Scenario = serde_json::from_str(
            r#"{"scene": [], "hand_path": "interactive"}"#,
        )
        .unwrap();
        assert_eq!(s.hand_path, HandPath::Interactive);
        assert_eq!(s.initial_hand(), DEFAULT_INITIAL_HAND.into());
        let back = serde_json::to_string(&s.hand_path).unwrap();
        assert_eq!(back, "\"interactive\"");
        assert!(serde_json::from_str::<HandPath>("\"joystick\"").is_err());
    }

    #[test]
    fn non_increasing_waypoints_rejected() {
        let mut s: Scenario = serde_json::from_str(MINIMAL).unwrap();
        if let HandPath::Waypoints(w) = &mut s.hand_path {
            w[1].t = 0.0;
        }
        match s.validate() {
            Err(SimError::ScenarioInvalid { location, .. }) => assert_eq!(location, "hand_path[1].t"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn duplicate_label_rejected() {
        let mut s: Scenario = serde_json::from_str(MINIMAL).unwrap();
        s.scene.push(s.scene[0].clone());
        assert!(matches!(s.validate(), Err(SimError::ScenarioInvalid { location, .. }) if location == "scene[1].label"));
    }

    #[test]
    fn default_vocab_uses_catalog_splits() {
        let mut s: Scenario = serde_json::from_str(MINIMAL).unwrap();
        s.scene.push(SceneObject::new(
            "cup",
            [100.0, 0.0, 600.0],
            [80.0, 95.0, 80.0],
            crate::eval::GraspType::Cylindrical,
        ));
        let v = s.vocabulary_file();
        assert_eq!(v.prompts[0].split, Split::Seen);
        assert_eq!(v.prompts[1].split, Split::Unseen);
    }
}
