//! Ties the stages together: frames in, events and notifications out, plus
//! the event log, door grants, training and the HTTP API.

mod adapters;
pub mod api;
mod config;
mod events;
mod ingest;
mod pipeline;
mod replay;
mod service;

pub use adapters::{
    AdapterDetection, AdapterResponse, AdapterTask, HttpAdapter, HttpItemDetector, HttpLandmarks, HttpPersonDetector,
    PersonDetector,
};
pub use config::{
    AdapterEndpoints, ApiConfig, CameraConfig, DoorSettings, NotifySettings, RecognizerConfig, SystemConfig,
};
pub use events::{read_log, AuditLog, AuditRecord, Event, EventFilter, EventLog, ImageStore, NdjsonLog};
pub use ingest::{Admission, FrameQueue, Ingest};
pub use pipeline::{FrameHints, FrameOutcome, PipelineCounts, PipelineStats, StageTimes};
pub use replay::{load_replay_corpus, IdentificationScore, LatencyStats, ReplayFrame, ReplayOptions, ReplayReport, ScoredFrame};
pub use service::{GrantRequest, GrantResult, Gateway, ImportSummary, TrainSummary};

use crate::recognition::Backend;

#[derive(Debug, thiserror::Error)]
pub enum GatewayError {
    #[error("config: {0}")]
    Config(String),
    #[error("unknown camera {0:?}")]
    UnknownCamera(String),
    #[error("frame from {camera} at {got} ms is older than {last} ms")]
    OutOfOrder { camera: String, last: u64, got: u64 },
    #[error("storage: {0}")]
    Storage(String),
    #[error("adapter: {0}")]
    Adapter(String),
    #[error("unauthorized")]
    Unauthorized,
    #[error("not found: {0}")]
    NotFound(String),
    #[error("{0} training already in progress")]
    Busy(Backend),
    #[error("corpus: {0}")]
    Corpus(String),
    #[error(transparent)]
    Vision(#[from] crate::vision::VisionError),
    #[error(transparent)]
    Recognition(#[from] crate::recognition::RecognitionError),
    #[error(transparent)]
    Profile(#[from] crate::profile::ProfileError),
    #[error(transparent)]
    Description(#[from] crate::description::DescriptionError),
    #[error(transparent)]
    Door(#[from] crate::door::DoorError),
    #[error(transparent)]
    Notify(#[from] crate::notify::NotifyError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl GatewayError {
    /// Failures of the event log or image directory; ingestion pauses on these.
    pub fn is_storage(&self) -> bool {
        matches!(self, GatewayError::Storage(_) | GatewayError::Io(_))
    }
}
