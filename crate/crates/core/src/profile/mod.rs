//! Enrollment of known people, capture guidance and the training-set export.

mod guidance;
mod store;

pub use guidance::{
    angular_speed, phrase, position_feedback, rotation_feedback, Column, GuidanceKind, GuidanceMessage, GyroSample,
    Row, CENTERED, COME_CLOSER, DEFAULT_MIN_AREA_FRACTION, DEFAULT_ROTATION_LIMIT_DPS, TOO_FAST,
};
pub use store::{
    AddImageOutcome, CaptureQuality, Demographics, ImageRecord, PersonProfile, ProfileStore, TrainingEntry,
    TrainingSet,
};

#[derive(Debug, thiserror::Error)]
pub enum ProfileError {
    #[error("invalid name")]
    InvalidName,
    #[error("invalid email {0:?}")]
    InvalidEmail(String),
    #[error("invalid phone {0:?}")]
    InvalidPhone(String),
    #[error("group must be friend, family or caregiver")]
    InvalidGroup,
    #[error("{name:?} with phone {phone:?} is already enrolled")]
    Duplicate { name: String, phone: Option<String> },
    #[error("unknown person {0:?}")]
    UnknownPerson(String),
    #[error("no face detected")]
    NoFace,
    #[error("{0} faces detected, expected one")]
    MultipleFaces(usize),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("{0}")]
    Frame(String),
    #[error("{0}")]
    Gyro(String),
    #[error("profile record {path}: {message}")]
    Record { path: String, message: String },
    #[error(transparent)]
    Vision(#[from] crate::vision::VisionError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
