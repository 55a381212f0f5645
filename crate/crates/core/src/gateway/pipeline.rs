use std::collections::BTreeSet;
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::events::Event;
use super::{Gateway, GatewayError};
use crate::description::{
    assess_threat, compose_description, DescriptionFacts, Group, Item, Landmarks68,
};
use crate::notify::{build_notification, Incident};
use crate::recognition::{identify, normalize_face, Identification};
use crate::vision::{detect_change, region_change, to_grayscale, BoundingBox, Frame, GrayImage};

/// Per-frame extras a camera or a replay corpus may carry.
#[derive(Clone, Debug, Default)]
pub struct FrameHints {
    /// Landmarks for the face they fall inside; other faces use the
    /// configured provider.
    pub landmarks: Option<Landmarks68>,
    /// When the frame arrived; latency is measured from here.
    pub origin: Option<Instant>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimes {
    pub change_ms: f64,
    pub detect_ms: f64,
    pub identify_ms: f64,
    pub describe_ms: f64,
    pub persist_ms: f64,
    pub total_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameOutcome {
    pub active: bool,
    pub events: Vec<Event>,
    pub times: StageTimes,
}

/// How many frames entered each stage.
#[derive(Debug, Default)]
pub struct PipelineStats {
    pub frames: AtomicU64,
    pub active: AtomicU64,
    pub detect: AtomicU64,
    pub identify: AtomicU64,
    pub describe: AtomicU64,
    pub persist: AtomicU64,
    pub events: AtomicU64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineCounts {
    pub frames: u64,
    pub active: u64,
    pub detect: u64,
    pub identify: u64,
    pub describe: u64,
    pub persist: u64,
    pub events: u64,
}

impl PipelineStats {
    pub fn snapshot(&self) -> PipelineCounts {
        let get = |c: &AtomicU64| c.load(Ordering::SeqCst);
        PipelineCounts {
            frames: get(&self.frames),
            active: get(&self.active),
            detect: get(&self.detect),
            identify: get(&self.identify),
            describe: get(&self.describe),
            persist: get(&self.persist),
            events: get(&self.events),
        }
    }
}

fn ms_since(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

/// One person candidate before description.
struct Sighting {
    face: Option<BoundingBox>,
    identification: Option<Identification>,
    person_id: Option<String>,
    facts: DescriptionFacts,
    degraded: Vec<String>,
}

fn centroid(lm: &Landmarks68) -> (f64, f64) {
    let n = lm.points().len() as f64;
    let (sx, sy) = lm.points().iter().fold((0.0, 0.0), |(a, b), &(x, y)| (a + x, b + y));
    (sx / n, sy / n)
}

fn inside(b: &BoundingBox, (x, y): (f64, f64)) -> bool {
    x >= b.x as f64 && y >= b.y as f64 && x < b.right() as f64 && y < b.bottom() as f64
}

impl Gateway {
    /// Runs one frame through every stage.
    ///
    /// Inactive frames stop after the change test, and detections in regions
    /// that did not change are ignored. Active frames yield one
    /// event per detected face, plus one unknown event per reported person
    /// without a face. Adapter failures leave the affected facts unknown and
    /// are listed in `Event::degraded`.
    pub fn process_frame(&self, frame: &Frame, hints: &FrameHints) -> Result<FrameOutcome, GatewayError> {
        let started = Instant::now();
        let origin = hints.origin.unwrap_or(started);
        let camera = self
            .config
            .camera(frame.camera_id())
            .ok_or_else(|| GatewayError::UnknownCamera(frame.camera_id().to_string()))?;
        self.stats.frames.fetch_add(1, Ordering::SeqCst);
        let mut times = StageTimes::default();

        let gray = to_grayscale(frame);
        let reference = self.change_gate(frame, &gray)?;
        let active = reference.is_some();
        times.change_ms = ms_since(started);
        let Some(reference) = reference else {
            times.total_ms = ms_since(started);
            return Ok(FrameOutcome {
                active,
                events: Vec::new(),
                times,
            });
        };
        self.stats.active.fetch_add(1, Ordering::SeqCst);

        let t = Instant::now();
        self.stats.detect.fetch_add(1, Ordering::SeqCst);
        let change = &self.config.change;
        let mut faces = self.detector.detect(&gray);
        faces.retain(|f| region_change(&reference, &gray, f, change).map_or(true, |c| c >= change.region_fraction));
        let mut frame_degraded = Vec::new();
        let persons = match &self.persons {
            Some(p) => p.detect_persons(frame).unwrap_or_else(|e| {
                tracing::warn!(error = %e, "person detector failed");
                frame_degraded.push("persons".to_string());
                Vec::new()
            }),
            None => Vec::new(),
        };
        times.detect_ms = ms_since(t);

        let t = Instant::now();
        self.stats.identify.fetch_add(1, Ordering::SeqCst);
        let mut sightings: Vec<Sighting> = faces.iter().map(|f| self.identify_face(&gray, f)).collect();
        for p in &persons {
            if !faces.iter().any(|f| inside(p, f.center())) {
                sightings.push(Sighting {
                    face: None,
                    identification: None,
                    person_id: None,
                    facts: DescriptionFacts::unknown(String::new()),
                    degraded: Vec::new(),
                });
            }
        }
        times.identify_ms = ms_since(t);

        let t = Instant::now();
        self.stats.describe.fetch_add(1, Ordering::SeqCst);
        let items: BTreeSet<Item> = if sightings.is_empty() {
            BTreeSet::new()
        } else {
            let detector = self.items.read().clone();
            match detector.detect(frame) {
                Ok(v) => v.into_iter().map(|d| d.item).collect(),
                Err(e) => {
                    tracing::warn!(error = %e, "item detector failed");
                    frame_degraded.push("items".to_string());
                    BTreeSet::new()
                }
            }
        };
        let describer = self.describer.read().clone();
        let mut hint = hints.landmarks.as_ref();
        for s in &mut sightings {
            s.facts.location = camera.location.clone();
            s.facts.items = items.clone();
            s.degraded.extend(frame_degraded.iter().cloned());
            let Some(face) = s.face else { continue };
            let lm = match hint {
                Some(h) if inside(&face, centroid(h)) && h.check_within(gray.width(), gray.height()).is_ok() => {
                    hint = None;
                    Some(h.clone())
                }
                _ => self.landmarks.landmarks(&gray, &face),
            };
            let Some(lm) = lm else {
                s.degraded.push("landmarks".into());
                continue;
            };
            match describer.describe(&gray, &lm) {
                Ok(a) => a.apply(&mut s.facts),
                Err(e) => {
                    tracing::warn!(error = %e, "attribute stage failed");
                    s.degraded.push("attributes".into());
                }
            }
        }
        times.describe_ms = ms_since(t);

        let t = Instant::now();
        self.stats.persist.fetch_add(1, Ordering::SeqCst);
        let mut events = Vec::with_capacity(sightings.len());
        if !sightings.is_empty() {
            let image_ref = self.images.put(&frame.encode_png()?)?;
            for s in sightings {
                let e = self.append(frame, s, &image_ref)?;
                self.notify_for(&e, origin);
                events.push(e);
            }
        }
        times.persist_ms = ms_since(t);
        times.total_ms = ms_since(started);
        Ok(FrameOutcome { active, events, times })
    }

    /// Returns the previous frame when this one differs enough from it. The
    /// first frame of a camera, or one whose size changed, only becomes the
    /// new reference.
    fn change_gate(&self, frame: &Frame, gray: &GrayImage) -> Result<Option<GrayImage>, GatewayError> {
        let mut prev = self.prev.lock();
        let cam = frame.camera_id();
        if let Some((last, _)) = prev.get(cam) {
            if frame.timestamp_ms() < *last {
                return Err(GatewayError::OutOfOrder {
                    camera: cam.to_string(),
                    last: *last,
                    got: frame.timestamp_ms(),
                });
            }
        }
        let reference = prev
            .insert(cam.to_string(), (frame.timestamp_ms(), gray.clone()))
            .map(|(_, g)| g)
            .filter(|g| detect_change(g, gray, &self.config.change).is_ok_and(|r| r.active));
        Ok(reference)
    }

    fn identify_face(&self, gray: &GrayImage, face: &BoundingBox) -> Sighting {
        let mut s = Sighting {
            face: Some(*face),
            identification: None,
            person_id: None,
            facts: DescriptionFacts::unknown(String::new()),
            degraded: Vec::new(),
        };
        let rc = &self.config.recognizer;
        let Some(snap) = self.models.latest(rc.backend) else {
            s.degraded.push("identify".into());
            return s;
        };
        let threshold = rc.unknown_threshold.unwrap_or(snap.unknown_threshold);
        let id = normalize_face(gray, face, snap.face_size).and_then(|crop| identify(&crop, &snap, threshold));
        match id {
            Ok(id) => {
                if !id.is_unknown() {
                    match self.profiles.get(&id.label) {
                        Some(p) if p.group != Group::Unknown => {
                            s.facts.identity = Some(p.name.clone());
                            s.facts.group = p.group;
                            s.person_id = Some(p.person_id);
                        }
                        _ => tracing::warn!(label = %id.label, "model class has no profile"),
                    }
                }
                s.identification = Some(id);
            }
            Err(e) => {
                tracing::warn!(error = %e, "identification failed");
                s.degraded.push("identify".into());
            }
        }
        s
    }

    fn append(&self, frame: &Frame, s: Sighting, image_ref: &str) -> Result<Event, GatewayError> {
        let mut seq = self.seq.lock();
        let description = compose_description(&s.facts);
        let e = Event {
            event_id: format!("{:010}-{}", *seq, frame.camera_id()),
            timestamp_ms: frame.timestamp_ms(),
            camera_id: frame.camera_id().to_string(),
            identification: s.identification,
            person_id: s.person_id,
            face: s.face,
            threat: assess_threat(&s.facts),
            facts: s.facts,
            description,
            image_ref: image_ref.to_string(),
            degraded: s.degraded,
        };
        self.events.append(&e)?;
        *seq += 1;
        drop(seq);
        self.stats.events.fetch_add(1, Ordering::SeqCst);
        let _ = self.feed.send(e.clone());
        Ok(e)
    }

    fn notify_for(&self, e: &Event, origin: Instant) {
        let prefs = &self.config.notify.prefs;
        if e.threat < prefs.min_threat {
            return;
        }
        let incident = Incident {
            event_id: e.event_id.clone(),
            camera_id: e.camera_id.clone(),
            identity: e.facts.identity.clone(),
            threat: e.threat,
            description: Some(e.description.clone()),
            image: self.images.path(&e.image_ref),
        };
        match build_notification(&incident, prefs) {
            Ok(n) => {
                self.notify.enqueue(n, origin);
            }
            Err(err) => tracing::warn!(event = %e.event_id, error = %err, "no notification"),
        }
    }
}
