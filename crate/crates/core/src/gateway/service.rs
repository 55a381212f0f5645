use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};
use tokio::sync::broadcast;

use super::adapters::{HttpAdapter, HttpItemDetector, HttpLandmarks, HttpPersonDetector, PersonDetector};
use super::events::{AuditLog, AuditRecord, Event, EventFilter, EventLog, ImageStore};
use super::pipeline::PipelineStats;
use super::{GatewayError, SystemConfig};
use crate::description::{
    AttributeModels, FaceDescriber, Group, ItemDetector, LandmarkProvider, NoItems, TemplateLandmarker,
};
use crate::door::{CommandKind, DeviceLink, DoorCommand, DoorController, DoorState, TcpLink};
use crate::notify::{
    place_call, CallAdapter, DispatchRecord, HttpCallAdapter, MockTransport, Notification, NotifyMode, NotifyQueue,
    SmtpMailer, Transport, TransportResult,
};
use crate::profile::{Demographics, ProfileStore};
use crate::recognition::{load_labels, train_backend, Backend, ModelStore, TrainingMetrics};
use crate::vision::{to_grayscale, FaceDetector, Frame, GrayImage};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub backend: Backend,
    pub version: u64,
    pub classes: Vec<String>,
    pub metrics: TrainingMetrics,
    pub data_digest: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImportSummary {
    pub persons: usize,
    pub images: usize,
    /// Corpus images where no face was found.
    pub missed: Vec<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GrantRequest {
    pub event_id: String,
    #[serde(alias = "duration")]
    pub duration_s: u32,
    #[serde(default)]
    pub operator: Option<String>,
    /// Repeating a command id repeats nothing.
    #[serde(default)]
    pub command_id: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrantResult {
    pub state: DoorState,
    pub audit: AuditRecord,
}

/// The running system. Cheap to share behind an `Arc`; every method takes
/// `&self`.
pub struct Gateway {
    pub(crate) config: SystemConfig,
    pub(crate) detector: FaceDetector,
    pub(crate) models: ModelStore,
    pub(crate) profiles: ProfileStore,
    pub(crate) describer: RwLock<Arc<FaceDescriber>>,
    pub(crate) landmarks: Arc<dyn LandmarkProvider>,
    pub(crate) items: RwLock<Arc<dyn ItemDetector>>,
    pub(crate) persons: Option<Arc<dyn PersonDetector>>,
    pub(crate) events: EventLog,
    pub(crate) images: ImageStore,
    pub(crate) notify: NotifyQueue,
    pub(crate) prev: Mutex<HashMap<String, (u64, GrayImage)>>,
    /// Next event sequence number; held while an event is appended.
    pub(crate) seq: Mutex<u64>,
    pub(crate) feed: broadcast::Sender<Event>,
    pub(crate) stats: PipelineStats,
    audit: AuditLog,
    call: Option<Arc<dyn CallAdapter>>,
    door: DoorController,
    started: Instant,
    grants: AtomicU64,
}

fn wall_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0)
}

fn same_token(a: &str, b: &str) -> bool {
    a.len() == b.len() && a.bytes().zip(b.bytes()).fold(0u8, |acc, (x, y)| acc | (x ^ y)) == 0
}

const ATTRIBUTES_FILE: &str = "attributes.bin";

impl Gateway {
    /// Mail goes over SMTP when configured and to an in-memory mock
    /// otherwise; the door is reached over TCP.
    pub fn open(config: SystemConfig) -> Result<Self, GatewayError> {
        let transport: Arc<dyn Transport> = match &config.notify.smtp {
            Some(smtp) => Arc::new(SmtpMailer::new(smtp)),
            None => Arc::new(MockTransport::new()),
        };
        let d = &config.door;
        let link = Arc::new(TcpLink::new(
            d.device.address.clone(),
            d.device.shared_secret.clone(),
            Duration::from_millis(d.connect_timeout_ms),
        ));
        Self::open_with(config, transport, link)
    }

    pub fn open_with(
        config: SystemConfig,
        transport: Arc<dyn Transport>,
        door: Arc<dyn DeviceLink>,
    ) -> Result<Self, GatewayError> {
        config.validate()?;
        let root = config.data_dir.clone();
        std::fs::create_dir_all(&root)?;
        let timeout = Duration::from_millis(config.adapters.timeout_ms);
        let a = &config.adapters;
        let landmarks: Arc<dyn LandmarkProvider> = match &a.landmarks {
            Some(url) => Arc::new(HttpLandmarks(HttpAdapter::new(url.clone(), timeout)?)),
            None => Arc::new(TemplateLandmarker),
        };
        let items: Arc<dyn ItemDetector> = match &a.item_detector {
            Some(url) => Arc::new(HttpItemDetector(HttpAdapter::new(url.clone(), timeout)?)),
            None => Arc::new(NoItems),
        };
        let persons: Option<Arc<dyn PersonDetector>> = match &a.person_detector {
            Some(url) => Some(Arc::new(HttpPersonDetector(HttpAdapter::new(url.clone(), timeout)?))),
            None => None,
        };
        let call: Option<Arc<dyn CallAdapter>> = match &a.call {
            Some(url) => Some(Arc::new(HttpCallAdapter::new(url.clone(), timeout)?)),
            None => None,
        };
        let attributes = match AttributeModels::load(root.join(ATTRIBUTES_FILE)) {
            Ok(m) => m,
            Err(e) => {
                tracing::info!(error = %e, "no attribute models; attributes stay unknown");
                AttributeModels::default()
            }
        };
        let events = EventLog::open(root.join("events.ndjson"))?;
        let next = events.len() as u64 + 1;
        let notify = NotifyQueue::spawn(
            config.notify.queue_capacity,
            transport,
            call.clone(),
            config.notify.retry,
        );
        let (feed, _) = broadcast::channel(256);
        Ok(Gateway {
            detector: FaceDetector::new(crate::vision::CascadeModel::bundled_frontal_face(), config.scan),
            models: ModelStore::open(root.join("models"))?,
            profiles: ProfileStore::open(root.join("profiles"))?,
            describer: RwLock::new(Arc::new(FaceDescriber::new(attributes, config.hair))),
            landmarks,
            items: RwLock::new(items),
            persons,
            images: ImageStore::open(root.join("images"))?,
            audit: AuditLog::open(root.join("audit.ndjson"))?,
            events,
            notify,
            call,
            door: DoorController::new(door, config.door.heartbeat_ms),
            prev: Mutex::new(HashMap::new()),
            seq: Mutex::new(next),
            feed,
            stats: PipelineStats::default(),
            started: Instant::now(),
            grants: AtomicU64::new(0),
            config,
        })
    }

    pub fn config(&self) -> &SystemConfig {
        &self.config
    }

    pub fn detector(&self) -> &FaceDetector {
        &self.detector
    }

    pub fn models(&self) -> &ModelStore {
        &self.models
    }

    pub fn profiles(&self) -> &ProfileStore {
        &self.profiles
    }

    pub fn events(&self) -> &EventLog {
        &self.events
    }

    pub fn audit(&self) -> &AuditLog {
        &self.audit
    }

    pub fn stats(&self) -> &PipelineStats {
        &self.stats
    }

    pub fn notify_queue(&self) -> &NotifyQueue {
        &self.notify
    }

    pub fn notifications(&self) -> Vec<DispatchRecord> {
        self.notify.records()
    }

    pub fn subscribe(&self) -> broadcast::Receiver<Event> {
        self.feed.subscribe()
    }

    /// Replaces the item source, e.g. with replay annotations.
    pub fn set_item_detector(&self, items: Arc<dyn ItemDetector>) {
        *self.items.write() = items;
    }

    pub fn set_attribute_models(&self, models: AttributeModels) {
        *self.describer.write() = Arc::new(FaceDescriber::new(models, self.config.hair));
    }

    pub fn has_call_adapter(&self) -> bool {
        self.call.is_some()
    }

    /// Milliseconds on the gateway's monotonic clock, as used by the door.
    pub fn now_ms(&self) -> u64 {
        self.started.elapsed().as_millis() as u64
    }

    /// Fails while events or images cannot be written.
    pub fn check_storage(&self) -> Result<(), GatewayError> {
        self.images.probe()?;
        std::fs::OpenOptions::new().append(true).open(self.events.path())?;
        Ok(())
    }

    pub fn authorize(&self, token: &str) -> Result<(), GatewayError> {
        if same_token(token, &self.config.api.token) {
            Ok(())
        } else {
            Err(GatewayError::Unauthorized)
        }
    }

    pub fn query_events(&self, filter: &EventFilter) -> Vec<Event> {
        self.events.filtered(|e| filter.matches(e))
    }

    pub fn event(&self, event_id: &str) -> Option<Event> {
        self.events.find(|e| e.event_id == event_id)
    }

    pub fn image_path(&self, image_ref: &str) -> Option<PathBuf> {
        self.images.path(image_ref).filter(|p| p.exists())
    }

    pub fn door_state(&self) -> DoorState {
        self.door.state()
    }

    /// Auto-close and heartbeats; call every few hundred milliseconds.
    pub fn tick_door(&self) -> DoorState {
        self.door.tick(self.now_ms())
    }

    pub fn door(&self) -> &DoorController {
        &self.door
    }

    /// Unlocks for `duration_s` on behalf of an event. Every attempt that
    /// reaches the door is audited, failed ones included.
    pub fn grant_access(&self, token: &str, req: &GrantRequest) -> Result<GrantResult, GatewayError> {
        self.authorize(token)?;
        if self.event(&req.event_id).is_none() {
            return Err(GatewayError::NotFound(format!("event {}", req.event_id)));
        }
        let operator = req.operator.clone().unwrap_or_else(|| "operator".into());
        let command_id = req.command_id.clone().unwrap_or_else(|| {
            format!("grant-{}-{}", req.event_id, self.grants.fetch_add(1, Ordering::SeqCst) + 1)
        });
        let cmd = DoorCommand::new(
            CommandKind::Unlock {
                duration_s: req.duration_s,
            },
            command_id.clone(),
            operator.clone(),
        );
        let result = self.door.command(&cmd, self.now_ms());
        let audit = AuditRecord {
            at_ms: wall_ms(),
            operator,
            event_id: req.event_id.clone(),
            duration_s: req.duration_s,
            command_id,
            outcome: match &result {
                Ok(_) => "ok".into(),
                Err(e) => e.to_string(),
            },
        };
        self.audit.append(&audit)?;
        Ok(GrantResult { state: result?, audit })
    }

    /// Retrains `backend` from the enrolled profiles and publishes it.
    pub fn train(&self, backend: Backend) -> Result<TrainSummary, GatewayError> {
        let _guard = self.models.try_begin_training(backend).ok_or(GatewayError::Busy(backend))?;
        let set = self.profiles.export_training_set()?;
        let cfg = &self.config.recognizer.train;
        let faces = set.load_faces(cfg.lbp.face_size)?;
        let snap = train_backend(backend, &faces, cfg, &set.digest)?;
        let published = self.models.publish(snap)?;
        tracing::info!(%backend, version = published.version, "model published");
        Ok(TrainSummary {
            backend,
            version: published.version,
            classes: published.classes.clone(),
            metrics: published.metrics.clone(),
            data_digest: published.data_digest.clone(),
        })
    }

    /// Trains the attribute classifiers on `<root>/<attr>/{yes,no}` and
    /// keeps them under the data directory.
    pub fn train_attributes(&self, root: impl AsRef<Path>) -> Result<Vec<(String, f64)>, GatewayError> {
        let models = crate::description::train_attribute_models(root, &Default::default())?;
        models.save(self.config.data_dir.join(ATTRIBUTES_FILE))?;
        let acc = models
            .trained()
            .filter_map(|a| models.get(a).ok().map(|m| (a.to_string(), m.training_accuracy())))
            .collect();
        self.set_attribute_models(models);
        Ok(acc)
    }

    /// Enrolls everyone in `<dir>/people.tsv` and imports the images listed
    /// in `<dir>/labels.tsv`, using the largest detected face of each.
    pub fn import_corpus(&self, dir: impl AsRef<Path>) -> Result<ImportSummary, GatewayError> {
        let dir = dir.as_ref();
        let mut out = ImportSummary::default();
        for (id, d) in read_people(dir.join("people.tsv"))? {
            if self.profiles.get(&id).is_none() {
                self.profiles.enroll_with_id(&id, &d)?;
            }
            out.persons += 1;
        }
        for e in load_labels(dir)? {
            let path = dir.join(&e.image);
            let frame = Frame::load(&path, "enroll", 0)?;
            match self.detector.detect(&to_grayscale(&frame)).first() {
                Some(b) => {
                    self.profiles.import_face_image(&e.person_id, &frame, *b)?;
                    out.images += 1;
                }
                None => out.missed.push(e.image.clone()),
            }
        }
        Ok(out)
    }

    /// Reads the event's description to every configured phone.
    pub fn call_for_event(&self, event_id: &str) -> Result<TransportResult, GatewayError> {
        let e = self
            .event(event_id)
            .ok_or_else(|| GatewayError::NotFound(format!("event {event_id}")))?;
        let n = Notification {
            event_id: e.event_id.clone(),
            recipients: self.config.notify.prefs.phones.clone(),
            subject: format!("{}: call", e.threat),
            body: e.description.clone(),
            attachments: Vec::new(),
            mode: NotifyMode::Call,
        };
        Ok(place_call(&n, self.call.as_deref())?)
    }
}

/// `person_id  name  group  [email]  [phone]`, tab separated with a header.
pub(crate) fn read_people(path: impl AsRef<Path>) -> Result<Vec<(String, Demographics)>, GatewayError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| GatewayError::Corpus(format!("{}: {e}", path.display())))?;
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.starts_with("person_id\tname\tgroup") => {}
        other => return Err(GatewayError::Corpus(format!("unexpected people header {other:?}"))),
    }
    let opt = |s: Option<&str>| s.map(str::trim).filter(|s| !s.is_empty() && *s != "-").map(str::to_string);
    let mut out = Vec::new();
    for (n, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let mut c = line.split('\t');
        let (Some(id), Some(name), Some(group)) = (c.next(), c.next(), c.next()) else {
            return Err(GatewayError::Corpus(format!("people.tsv line {}: {line:?}", n + 2)));
        };
        let group: Group = group
            .trim()
            .parse()
            .map_err(|e| GatewayError::Corpus(format!("people.tsv line {}: {e}", n + 2)))?;
        out.push((
            id.trim().to_string(),
            Demographics {
                name: name.trim().to_string(),
                email: opt(c.next()),
                phone: opt(c.next()),
                group,
            },
        ));
    }
    Ok(out)
}
