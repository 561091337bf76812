//! The wearable's runtime brain: a single-threaded event loop that consumes
//! device events in timestamp order, drives the perception pipeline, and
//! queues prioritized audio-text feedback.
//!
//! Message templates are fixed for golden-file stability:
//!
//! * alert: `Obstacle within {d:.1} meters`
//! * description: `{label} ahead, confidence {c:.0%}`
//! * navigation: `turn {dir} in {m:.0} meters` / `destination reached`
//!
//! The transition table is total: any (mode, event) pair not listed below is
//! an explicit no-op with a debug log entry, never a panic.

mod nav;

pub use nav::{
    haversine_m, initial_bearing_deg, navigate_step, normalize_bearing_delta, Instruction, Route,
    RouteError, RouteProgress, TurnDirection, EARTH_RADIUS_M,
};

use std::collections::BTreeSet;
use std::fmt;
use std::io::{BufRead, BufReader, Read, Write};

use thiserror::Error;

use crate::currency::{classify, CurrencyBackend, CurrencyError, DenominationSet};
use crate::dataset::ClassMap;
use crate::detect::{decode_predictions, nms, DetectError, InferenceBackend};
use crate::face::{
    detect_faces, EmbeddingBackend, FaceCrop, FaceDetectorBackend, FaceError, Registry,
};

#[derive(Debug, Error)]
pub enum OrchestratorError {
    #[error("event at {current} ms precedes previous event at {previous} ms")]
    TimestampRegression { previous: u64, current: u64 },
    #[error("proximity distance must be non-negative, got {0}")]
    NegativeDistance(f64),
    #[error(transparent)]
    Detect(#[from] DetectError),
    #[error(transparent)]
    Face(#[from] FaceError),
    #[error(transparent)]
    Currency(#[from] CurrencyError),
    #[error("trace {path}:{line}: {message}")]
    Trace {
        path: String,
        line: usize,
        message: String,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A hardware-side event with a monotonic millisecond timestamp.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviceEvent {
    pub kind: EventKind,
    pub timestamp_ms: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum EventKind {
    ButtonPress,
    ProximityAlert { distance_m: f64 },
    GpsFix { lat: f64, lon: f64 },
    FrameCaptured { image_ref: String },
}

/// Dispatch priority; `Alert` outranks `Navigation` outranks `Description`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Priority {
    Description,
    Navigation,
    Alert,
}

impl fmt::Display for Priority {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Priority::Description => "DESCRIPTION",
            Priority::Navigation => "NAVIGATION",
            Priority::Alert => "ALERT",
        })
    }
}

/// One audio-text message awaiting dispatch.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedbackMessage {
    pub priority: Priority,
    pub text: String,
    pub created_at_ms: u64,
}

/// Bounded priority queue of feedback messages.
///
/// Overflow drops the lowest-priority, oldest non-alert message (which may be
/// the incoming one). Alerts are never dropped: a queue holding only alerts
/// is allowed to exceed its capacity.
#[derive(Debug, Clone, Default)]
pub struct FeedbackQueue {
    capacity: usize,
    items: Vec<(u64, FeedbackMessage)>,
    next_seq: u64,
}

impl FeedbackQueue {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity,
            items: Vec::new(),
            next_seq: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn push(&mut self, message: FeedbackMessage) {
        let seq = self.next_seq;
        self.next_seq += 1;
        self.items.push((seq, message));
        if self.items.len() > self.capacity {
            let victim = self
                .items
                .iter()
                .enumerate()
                .filter(|(_, (_, m))| m.priority != Priority::Alert)
                .min_by_key(|(_, (seq, m))| (m.priority, *seq))
                .map(|(i, _)| i);
            if let Some(i) = victim {
                self.items.remove(i);
            }
        }
    }

    /// Empty the queue in dispatch order: priority descending, then creation
    /// time, then insertion order.
    pub fn drain(&mut self) -> Vec<FeedbackMessage> {
        let mut items = std::mem::take(&mut self.items);
        items.sort_by(|(sa, ma), (sb, mb)| {
            mb.priority
                .cmp(&ma.priority)
                .then(ma.created_at_ms.cmp(&mb.created_at_ms))
                .then(sa.cmp(sb))
        });
        items.into_iter().map(|(_, m)| m).collect()
    }
}

/// Orchestrator tunables. Every value the original narrative leaves open is
/// pinned here and overridable.
#[derive(Debug, Clone)]
pub struct OrchestratorConfig {
    /// Proximity alerts fire strictly below this distance.
    pub proximity_threshold_m: f64,
    pub queue_capacity: usize,
    /// Detection labels routed to the face-identification branch.
    pub face_labels: BTreeSet<String>,
    /// Detection labels routed to the currency-classification branch.
    pub currency_labels: BTreeSet<String>,
    pub conf_threshold: f64,
    pub nms_iou_threshold: f64,
    pub face_match_threshold: f64,
}

impl Default for OrchestratorConfig {
    fn default() -> Self {
        Self {
            proximity_threshold_m: 1.5,
            queue_capacity: 32,
            face_labels: ["Human face".to_string()].into(),
            currency_labels: ["Banknote".to_string()].into(),
            conf_threshold: 0.25,
            nms_iou_threshold: 0.45,
            face_match_threshold: 0.5,
        }
    }
}

/// The perception stages the event loop drives, all behind backend traits.
pub struct PerceptionPipeline {
    pub detector: Box<dyn InferenceBackend>,
    pub face_detector: Box<dyn FaceDetectorBackend>,
    pub embedder: Box<dyn EmbeddingBackend>,
    pub currency: Box<dyn CurrencyBackend>,
    pub registry: Registry,
    pub class_map: ClassMap,
    pub denominations: DenominationSet,
}

/// Event-loop modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Idle,
    Capturing,
    Describing,
    Navigating,
}

/// Single-owner event-loop state: mode, optional active route, and the
/// feedback queue. Events must arrive in non-decreasing timestamp order.
pub struct Orchestrator {
    mode: Mode,
    route: Option<RouteProgress>,
    queue: FeedbackQueue,
    config: OrchestratorConfig,
    last_timestamp_ms: Option<u64>,
}

fn format_percent(fraction: f64) -> String {
    format!("{:.0}%", fraction.clamp(0.0, 1.0) * 100.0)
}

impl Orchestrator {
    pub fn new(config: OrchestratorConfig) -> Self {
        let queue = FeedbackQueue::new(config.queue_capacity);
        Self {
            mode: Mode::Idle,
            route: None,
            queue,
            config,
            last_timestamp_ms: None,
        }
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn config(&self) -> &OrchestratorConfig {
        &self.config
    }

    /// Activate a route and start navigating.
    pub fn set_route(&mut self, route: Route) {
        self.route = Some(RouteProgress::new(route));
        self.mode = Mode::Navigating;
    }

    pub fn active_route(&self) -> Option<&RouteProgress> {
        self.route.as_ref()
    }

    /// Messages in dispatch order; the queue is emptied.
    pub fn drain_feedback(&mut self) -> Vec<FeedbackMessage> {
        self.queue.drain()
    }

    fn push(&mut self, priority: Priority, text: String, created_at_ms: u64) -> FeedbackMessage {
        let message = FeedbackMessage {
            priority,
            text,
            created_at_ms,
        };
        self.queue.push(message.clone());
        message
    }

    fn resume_mode(&self) -> Mode {
        match &self.route {
            Some(progress) if !progress.completed() => Mode::Navigating,
            _ => Mode::Idle,
        }
    }

    /// Process one event, returning the messages it queued.
    pub fn handle_event(
        &mut self,
        event: &DeviceEvent,
        perception: &mut PerceptionPipeline,
    ) -> Result<Vec<FeedbackMessage>, OrchestratorError> {
        if let Some(previous) = self.last_timestamp_ms {
            if event.timestamp_ms < previous {
                return Err(OrchestratorError::TimestampRegression {
                    previous,
                    current: event.timestamp_ms,
                });
            }
        }
        self.last_timestamp_ms = Some(event.timestamp_ms);
        let now = event.timestamp_ms;

        let mut emitted = Vec::new();
        match &event.kind {
            EventKind::ButtonPress => match self.mode {
                Mode::Idle | Mode::Navigating => {
                    self.mode = Mode::Capturing;
                }
                Mode::Capturing | Mode::Describing => {
                    log::debug!("button press ignored in {:?} mode", self.mode);
                }
            },
            EventKind::ProximityAlert { distance_m } => {
                if *distance_m < 0.0 {
                    return Err(OrchestratorError::NegativeDistance(*distance_m));
                }
                if *distance_m < self.config.proximity_threshold_m {
                    emitted.push(self.push(
                        Priority::Alert,
                        format!("Obstacle within {distance_m:.1} meters"),
                        now,
                    ));
                    // Proximity triggers a capture in any mode.
                    self.mode = Mode::Capturing;
                } else {
                    log::debug!("proximity {distance_m} m above threshold, ignored");
                }
            }
            EventKind::FrameCaptured { image_ref } => match self.mode {
                Mode::Capturing => {
                    self.mode = Mode::Describing;
                    let result = self.describe_frame(image_ref, perception, now);
                    self.mode = self.resume_mode();
                    emitted.extend(result?);
                }
                _ => {
                    log::debug!(
                        "spurious frame `{image_ref}` in {:?} mode ignored",
                        self.mode
                    );
                }
            },
            EventKind::GpsFix { lat, lon } => match self.mode {
                Mode::Navigating => {
                    if let Some(progress) = self.route.as_mut() {
                        if let Some(instruction) = navigate_step(progress, (*lat, *lon)) {
                            let arrived = instruction == Instruction::DestinationReached;
                            emitted.push(self.push(
                                Priority::Navigation,
                                instruction.to_string(),
                                now,
                            ));
                            if arrived {
                                self.route = None;
                                self.mode = Mode::Idle;
                            }
                        }
                    } else {
                        log::debug!("navigating without a route; fix ignored");
                    }
                }
                _ => {
                    log::debug!("gps fix in {:?} mode ignored", self.mode);
                }
            },
        }
        Ok(emitted)
    }

    /// Run detection on a frame and turn each detection into a description,
    /// dispatching face-labeled detections through identification and
    /// banknote-labeled ones through the denomination classifier.
    fn describe_frame(
        &mut self,
        image_ref: &str,
        perception: &mut PerceptionPipeline,
        now: u64,
    ) -> Result<Vec<FeedbackMessage>, OrchestratorError> {
        let (transform, raw) = perception.detector.infer(image_ref)?;
        let detections = nms(
            &decode_predictions(&raw, &transform, self.config.conf_threshold),
            self.config.nms_iou_threshold,
        );

        let (frame_w, frame_h) = transform.image_size();
        let mut face_crops: Option<Vec<FaceCrop>> = None;
        let mut face_cursor = 0usize;

        let mut emitted = Vec::new();
        for det in &detections {
            let label = perception
                .class_map
                .label(det.class_index)
                .unwrap_or("object")
                .to_string();

            let text = if self.config.face_labels.contains(&label) {
                let crops = match &face_crops {
                    Some(c) => c,
                    None => {
                        face_crops = Some(detect_faces(
                            perception.face_detector.as_ref(),
                            image_ref,
                            frame_w,
                            frame_h,
                        )?);
                        face_crops.as_ref().expect("just set")
                    }
                };
                match crops.get(face_cursor) {
                    Some(crop) => {
                        let index = face_cursor;
                        face_cursor += 1;
                        let probe = perception.embedder.embed(image_ref, index, crop)?;
                        let result = perception
                            .registry
                            .identify(&probe, self.config.face_match_threshold)?;
                        match result.person_id {
                            Some(person) => format!(
                                "{person} ahead, confidence {}",
                                format_percent(result.fused_score)
                            ),
                            None => format!(
                                "{label} ahead, confidence {}",
                                format_percent(det.confidence)
                            ),
                        }
                    }
                    // Detector and face stage disagree; fall back to the
                    // plain description.
                    None => format!(
                        "{label} ahead, confidence {}",
                        format_percent(det.confidence)
                    ),
                }
            } else if self.config.currency_labels.contains(&label) {
                let outcome = classify(
                    image_ref,
                    perception.currency.as_ref(),
                    &perception.denominations,
                )?;
                format!(
                    "{} note ahead, confidence {}",
                    outcome.predicted,
                    format_percent(outcome.confidence)
                )
            } else {
                format!(
                    "{label} ahead, confidence {}",
                    format_percent(det.confidence)
                )
            };
            emitted.push(self.push(Priority::Description, text, now));
        }
        Ok(emitted)
    }
}

/// Parse a sensor trace: one `timestamp_ms kind args...` event per line.
/// Kinds are `BUTTON`, `FRAME <image_ref>`, `PROX <meters>`,
/// `GPS <lat> <lon>`. Timestamps must be non-decreasing.
pub fn parse_trace<R: Read>(r: R, path: &str) -> Result<Vec<DeviceEvent>, OrchestratorError> {
    let reader = BufReader::new(r);
    let mut events: Vec<DeviceEvent> = Vec::new();
    let bad = |line: usize, message: String| OrchestratorError::Trace {
        path: path.to_string(),
        line,
        message,
    };

    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split_whitespace();
        let timestamp_ms: u64 = parts
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| bad(lineno, "expected millisecond timestamp".into()))?;
        if let Some(last) = events.last() {
            if timestamp_ms < last.timestamp_ms {
                return Err(bad(lineno, "timestamps must be non-decreasing".into()));
            }
        }
        let kind = match parts.next() {
            Some("BUTTON") => EventKind::ButtonPress,
            Some("FRAME") => {
                let image_ref = parts
                    .next()
                    .ok_or_else(|| bad(lineno, "FRAME needs an image reference".into()))?;
                EventKind::FrameCaptured {
                    image_ref: image_ref.to_string(),
                }
            }
            Some("PROX") => {
                let distance_m: f64 = parts
                    .next()
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| bad(lineno, "PROX needs a distance in meters".into()))?;
                if distance_m < 0.0 {
                    return Err(bad(lineno, "proximity distance must be >= 0".into()));
                }
                EventKind::ProximityAlert { distance_m }
            }
            Some("GPS") => {
                let lat: f64 = parts
                    .next()
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| bad(lineno, "GPS needs latitude and longitude".into()))?;
                let lon: f64 = parts
                    .next()
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| bad(lineno, "GPS needs latitude and longitude".into()))?;
                EventKind::GpsFix { lat, lon }
            }
            Some(other) => return Err(bad(lineno, format!("unknown event kind `{other}`"))),
            None => continue,
        };
        if parts.next().is_some() {
            return Err(bad(lineno, "trailing fields after event".into()));
        }
        events.push(DeviceEvent { kind, timestamp_ms });
    }
    Ok(events)
}

/// Write the feedback log: one `timestamp_ms PRIORITY "text"` line per
/// message, in the order given.
pub fn write_feedback_log<W: Write>(mut w: W, messages: &[FeedbackMessage]) -> std::io::Result<()> {
    for m in messages {
        writeln!(w, "{} {} \"{}\"", m.created_at_ms, m.priority, m.text)?;
    }
    Ok(())
}

/// Replay a full trace: handle every event in order, draining the queue after
/// each one. The concatenated drains form the feedback log.
pub fn replay_trace(
    orchestrator: &mut Orchestrator,
    events: &[DeviceEvent],
    perception: &mut PerceptionPipeline,
) -> Result<Vec<FeedbackMessage>, OrchestratorError> {
    let mut log = Vec::new();
    for event in events {
        orchestrator.handle_event(event, perception)?;
        log.extend(orchestrator.drain_feedback());
    }
    Ok(log)
}

/// A route file: one `lat lon` waypoint per line, comments with `#`.
pub fn parse_route<R: Read>(
    r: R,
    path: &str,
    arrival_radius_m: f64,
) -> Result<Route, OrchestratorError> {
    let reader = BufReader::new(r);
    let mut waypoints = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split_whitespace();
        let mut coord = |what: &str| -> Result<f64, OrchestratorError> {
            parts
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| OrchestratorError::Trace {
                    path: path.to_string(),
                    line: idx + 1,
                    message: format!("expected {what}"),
                })
        };
        let lat = coord("latitude")?;
        let lon = coord("longitude")?;
        waypoints.push((lat, lon));
    }
    Route::new(waypoints, arrival_radius_m).map_err(|e| OrchestratorError::Trace {
        path: path.to_string(),
        line: 0,
        message: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{DatasetManifest, GroundTruthBox, Sample};
    use crate::detect::GridSpec;
    use crate::face::RegistryConfig;
    use crate::mock::{
        seeded_probe, ManifestFaceDetector, ScriptedCurrencyBackend, SeededEmbedder,
        TruthInferenceBackend,
    };
    use crate::synthetic::default_class_map;

    fn message(priority: Priority, text: &str, at: u64) -> FeedbackMessage {
        FeedbackMessage {
            priority,
            text: text.to_string(),
            created_at_ms: at,
        }
    }

    /// Manifest with one multi-object frame, one face frame, one banknote
    /// frame. Chair is class 3, Person 0, Human face 1, Banknote 2.
    fn test_manifest() -> DatasetManifest {
        let boxes = |list: Vec<(usize, [f64; 4])>| {
            list.into_iter()
                .map(|(c, b)| GroundTruthBox::new(c, b[0], b[1], b[2], b[3]).unwrap())
                .collect()
        };
        DatasetManifest {
            samples: vec![
                Sample {
                    image_id: "img_objects".into(),
                    image_width: 640,
                    image_height: 480,
                    boxes: boxes(vec![
                        (3, [0.1, 0.1, 0.3, 0.4]),
                        (0, [0.5, 0.3, 0.7, 0.9]),
                    ]),
                },
                Sample {
                    image_id: "img_face".into(),
                    image_width: 640,
                    image_height: 480,
                    boxes: boxes(vec![(1, [0.4, 0.2, 0.6, 0.5])]),
                },
                Sample {
                    image_id: "img_note".into(),
                    image_width: 640,
                    image_height: 480,
                    boxes: boxes(vec![(2, [0.3, 0.4, 0.6, 0.6])]),
                },
            ],
        }
    }

    fn test_pipeline() -> PerceptionPipeline {
        let class_map = default_class_map();
        let manifest = test_manifest();
        let spec = GridSpec::standard(640, class_map.len()).unwrap();
        let registry_config = RegistryConfig::new(("facenet", 16), ("vggface", 24));

        let mut registry = crate::face::Registry::new(registry_config.clone());
        let probe = seeded_probe(&registry_config, &SeededEmbedder::key_for("img_face", 0));
        registry.enroll("alice", &probe.embeddings, 0).unwrap();

        let currency_script = [(
            "img_note".to_string(),
            ("100".to_string(), 0.99),
        )]
        .into_iter()
        .collect();

        PerceptionPipeline {
            detector: Box::new(TruthInferenceBackend::new(&manifest, spec, 0.9)),
            face_detector: Box::new(ManifestFaceDetector::new(&manifest, &[1])),
            embedder: Box::new(SeededEmbedder::new(registry_config)),
            currency: Box::new(ScriptedCurrencyBackend::new(currency_script)),
            registry,
            class_map,
            denominations: crate::currency::DenominationSet::default_fixture(),
        }
    }

    fn event(kind: EventKind, at: u64) -> DeviceEvent {
        DeviceEvent {
            kind,
            timestamp_ms: at,
        }
    }

    #[test]
    fn queue_drains_by_priority_then_age() {
        let mut q = FeedbackQueue::new(8);
        q.push(message(Priority::Description, "desc", 1));
        q.push(message(Priority::Alert, "alert", 2));
        let drained = q.drain();
        assert_eq!(drained[0].priority, Priority::Alert);
        assert_eq!(drained[1].priority, Priority::Description);
        assert!(q.is_empty());
    }

    #[test]
    fn equal_priority_is_fifo() {
        let mut q = FeedbackQueue::new(8);
        q.push(message(Priority::Alert, "first", 1));
        q.push(message(Priority::Alert, "second", 2));
        let drained = q.drain();
        assert_eq!(drained[0].text, "first");
        assert_eq!(drained[1].text, "second");
    }

    #[test]
    fn overflow_drops_oldest_description_never_alerts() {
        let mut q = FeedbackQueue::new(2);
        q.push(message(Priority::Description, "d1", 1));
        q.push(message(Priority::Description, "d2", 2));
        q.push(message(Priority::Alert, "a", 3));
        let drained = q.drain();
        assert_eq!(drained.len(), 2);
        assert_eq!(drained[0].text, "a");
        assert_eq!(drained[1].text, "d2");
    }

    #[test]
    fn all_alert_queue_may_exceed_capacity() {
        let mut q = FeedbackQueue::new(1);
        q.push(message(Priority::Alert, "a1", 1));
        q.push(message(Priority::Alert, "a2", 2));
        assert_eq!(q.len(), 2);
    }

    #[test]
    fn incoming_description_is_the_victim_when_queue_outranks_it() {
        let mut q = FeedbackQueue::new(1);
        q.push(message(Priority::Navigation, "nav", 1));
        q.push(message(Priority::Description, "desc", 2));
        let drained = q.drain();
        assert_eq!(drained.len(), 1);
        assert_eq!(drained[0].text, "nav");
    }

    #[test]
    fn proximity_below_threshold_alerts_and_triggers_capture() {
        let mut orch = Orchestrator::new(OrchestratorConfig::default());
        let mut pipeline = test_pipeline();
        let emitted = orch
            .handle_event(
                &event(EventKind::ProximityAlert { distance_m: 0.8 }, 1000),
                &mut pipeline,
            )
            .unwrap();
        assert_eq!(emitted.len(), 1);
        assert_eq!(emitted[0].text, "Obstacle within 0.8 meters");
        assert_eq!(emitted[0].priority, Priority::Alert);
        assert_eq!(orch.mode(), Mode::Capturing);
    }

    #[test]
    fn proximity_above_threshold_is_ignored() {
        let mut orch = Orchestrator::new(OrchestratorConfig::default());
        let mut pipeline = test_pipeline();
        let emitted = orch
            .handle_event(
                &event(EventKind::ProximityAlert { distance_m: 3.0 }, 1000),
                &mut pipeline,
            )
            .unwrap();
        assert!(emitted.is_empty());
        assert_eq!(orch.mode(), Mode::Idle);
    }

    #[test]
    fn spurious_frame_in_idle_is_ignored() {
        let mut orch = Orchestrator::new(OrchestratorConfig::default());
        let mut pipeline = test_pipeline();
        let emitted = orch
            .handle_event(
                &event(
                    EventKind::FrameCaptured {
                        image_ref: "img_objects".into(),
                    },
                    1000,
                ),
                &mut pipeline,
            )
            .unwrap();
        assert!(emitted.is_empty());
        assert_eq!(orch.mode(), Mode::Idle);
    }

    #[test]
    fn button_then_frame_describes_in_confidence_order() {
        let mut orch = Orchestrator::new(OrchestratorConfig::default());
        let mut pipeline = test_pipeline();
        orch.handle_event(&event(EventKind::ButtonPress, 1000), &mut pipeline)
            .unwrap();
        assert_eq!(orch.mode(), Mode::Capturing);
        let emitted = orch
            .handle_event(
                &event(
                    EventKind::FrameCaptured {
                        image_ref: "img_objects".into(),
                    },
                    1500,
                ),
                &mut pipeline,
            )
            .unwrap();
        // Chair encoded at confidence 0.90, Person at 0.85.
        assert_eq!(emitted.len(), 2);
        assert_eq!(emitted[0].text, "Chair ahead, confidence 90%");
        assert_eq!(emitted[1].text, "Person ahead, confidence 85%");
        assert_eq!(orch.mode(), Mode::Idle);
    }

    #[test]
    fn face_branch_identifies_enrolled_person() {
        let mut orch = Orchestrator::new(OrchestratorConfig::default());
        let mut pipeline = test_pipeline();
        orch.handle_event(&event(EventKind::ButtonPress, 1000), &mut pipeline)
            .unwrap();
        let emitted = orch
            .handle_event(
                &event(
                    EventKind::FrameCaptured {
                        image_ref: "img_face".into(),
                    },
                    1500,
                ),
                &mut pipeline,
            )
            .unwrap();
        assert_eq!(emitted.len(), 1);
        assert_eq!(emitted[0].text, "alice ahead, confidence 100%");
    }

    #[test]
    fn unknown_face_falls_back_to_class_label() {
        let mut orch = Orchestrator::new(OrchestratorConfig::default());
        let mut pipeline = test_pipeline();
        pipeline.registry = crate::face::Registry::new(pipeline.registry.config().clone());
        orch.handle_event(&event(EventKind::ButtonPress, 1000), &mut pipeline)
            .unwrap();
        let emitted = orch
            .handle_event(
                &event(
                    EventKind::FrameCaptured {
                        image_ref: "img_face".into(),
                    },
                    1500,
                ),
                &mut pipeline,
            )
            .unwrap();
        assert_eq!(emitted.len(), 1);
        assert_eq!(emitted[0].text, "Human face ahead, confidence 90%");
    }

    #[test]
    fn currency_branch_reports_denomination() {
        let mut orch = Orchestrator::new(OrchestratorConfig::default());
        let mut pipeline = test_pipeline();
        orch.handle_event(&event(EventKind::ButtonPress, 1000), &mut pipeline)
            .unwrap();
        let emitted = orch
            .handle_event(
                &event(
                    EventKind::FrameCaptured {
                        image_ref: "img_note".into(),
                    },
                    1500,
                ),
                &mut pipeline,
            )
            .unwrap();
        assert_eq!(emitted.len(), 1);
        assert_eq!(emitted[0].text, "100 note ahead, confidence 99%");
    }

    #[test]
    fn navigation_route_runs_to_destination() {
        let mut orch = Orchestrator::new(OrchestratorConfig::default());
        let mut pipeline = test_pipeline();
        let route = Route::new(vec![(0.0, 0.0), (0.0, 0.01), (0.01, 0.01)], 10.0).unwrap();
        orch.set_route(route);
        assert_eq!(orch.mode(), Mode::Navigating);

        let fixes = [(0.0, 0.0), (0.0, 0.01), (0.01, 0.01)];
        let mut texts = Vec::new();
        for (i, &(lat, lon)) in fixes.iter().enumerate() {
            let emitted = orch
                .handle_event(
                    &event(EventKind::GpsFix { lat, lon }, 1000 * (i as u64 + 1)),
                    &mut pipeline,
                )
                .unwrap();
            texts.extend(emitted.into_iter().map(|m| m.text));
        }
        assert_eq!(texts, vec!["turn left in 0 meters", "destination reached"]);
        assert_eq!(orch.mode(), Mode::Idle);
        assert!(orch.active_route().is_none());
    }

    #[test]
    fn gps_fix_without_route_is_ignored() {
        let mut orch = Orchestrator::new(OrchestratorConfig::default());
        let mut pipeline = test_pipeline();
        let emitted = orch
            .handle_event(
                &event(EventKind::GpsFix { lat: 0.0, lon: 0.0 }, 1000),
                &mut pipeline,
            )
            .unwrap();
        assert!(emitted.is_empty());
    }

    #[test]
    fn timestamps_must_not_regress() {
        let mut orch = Orchestrator::new(OrchestratorConfig::default());
        let mut pipeline = test_pipeline();
        orch.handle_event(&event(EventKind::ButtonPress, 1000), &mut pipeline)
            .unwrap();
        let err = orch
            .handle_event(&event(EventKind::ButtonPress, 500), &mut pipeline)
            .unwrap_err();
        assert!(matches!(
            err,
            OrchestratorError::TimestampRegression { .. }
        ));
    }

    #[test]
    fn transition_table_is_total() {
        // Every (mode, event) pair must be handled without panicking.
        let kinds = [
            EventKind::ButtonPress,
            EventKind::ProximityAlert { distance_m: 0.5 },
            EventKind::ProximityAlert { distance_m: 5.0 },
            EventKind::GpsFix { lat: 0.0, lon: 0.0 },
            EventKind::FrameCaptured {
                image_ref: "img_objects".into(),
            },
        ];
        for with_route in [false, true] {
            for prefix in [
                vec![],
                vec![EventKind::ButtonPress],
                vec![EventKind::ProximityAlert { distance_m: 0.1 }],
            ] {
                for kind in &kinds {
                    let mut orch = Orchestrator::new(OrchestratorConfig::default());
                    let mut pipeline = test_pipeline();
                    if with_route {
                        orch.set_route(
                            Route::new(vec![(0.0, 0.0), (0.0, 0.01)], 10.0).unwrap(),
                        );
                    }
                    let mut t = 0;
                    for k in &prefix {
                        t += 100;
                        orch.handle_event(&event(k.clone(), t), &mut pipeline).unwrap();
                    }
                    orch.handle_event(&event(kind.clone(), t + 100), &mut pipeline)
                        .unwrap();
                }
            }
        }
    }

    #[test]
    fn trace_parsing_round_trips_documented_formats() {
        let text = "1000 BUTTON\n1500 FRAME img_003\n2000 PROX 0.8\n2500 GPS 17.3850 78.4867\n";
        let events = parse_trace(text.as_bytes(), "trace").unwrap();
        assert_eq!(events.len(), 4);
        assert_eq!(events[0].kind, EventKind::ButtonPress);
        assert_eq!(
            events[1].kind,
            EventKind::FrameCaptured {
                image_ref: "img_003".into()
            }
        );
        assert_eq!(
            events[2].kind,
            EventKind::ProximityAlert { distance_m: 0.8 }
        );
        assert_eq!(
            events[3].kind,
            EventKind::GpsFix {
                lat: 17.3850,
                lon: 78.4867
            }
        );
    }

    #[test]
    fn trace_parser_rejects_bad_lines() {
        assert!(parse_trace("1000 WIBBLE\n".as_bytes(), "t").is_err());
        assert!(parse_trace("1000 PROX -2\n".as_bytes(), "t").is_err());
        assert!(parse_trace("2000 BUTTON\n1000 BUTTON\n".as_bytes(), "t").is_err());
        assert!(parse_trace("1000 GPS 1.0\n".as_bytes(), "t").is_err());
    }

    #[test]
    fn feedback_log_line_format() {
        let mut buf = Vec::new();
        write_feedback_log(
            &mut buf,
            &[message(Priority::Alert, "Obstacle within 0.8 meters", 2000)],
        )
        .unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "2000 ALERT \"Obstacle within 0.8 meters\"\n"
        );
    }

    #[test]
    fn replay_is_deterministic() {
        let text = "1000 BUTTON\n1500 FRAME img_objects\n2000 PROX 0.8\n2500 FRAME img_face\n";
        let events = parse_trace(text.as_bytes(), "trace").unwrap();
        let mut logs = Vec::new();
        for _ in 0..2 {
            let mut orch = Orchestrator::new(OrchestratorConfig::default());
            let mut pipeline = test_pipeline();
            let messages = replay_trace(&mut orch, &events, &mut pipeline).unwrap();
            let mut buf = Vec::new();
            write_feedback_log(&mut buf, &messages).unwrap();
            logs.push(buf);
        }
        assert_eq!(logs[0], logs[1]);
        assert!(!logs[0].is_empty());
    }
}
