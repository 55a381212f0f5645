//! Capture guidance shown while a face image is being taken.

use serde::{Deserialize, Serialize};

use super::ProfileError;
use crate::vision::BoundingBox;

pub const COME_CLOSER: &str = "Please come closer";
pub const TOO_FAST: &str = "too fast";
pub const CENTERED: &str = "Face in center";

pub const DEFAULT_MIN_AREA_FRACTION: f64 = 0.05;
pub const DEFAULT_ROTATION_LIMIT_DPS: f64 = 20.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Row {
    Top,
    Center,
    Bottom,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Column {
    Left,
    Center,
    Right,
}

impl Row {
    pub const ALL: [Row; 3] = [Row::Top, Row::Center, Row::Bottom];

    pub fn as_str(&self) -> &'static str {
        match self {
            Row::Top => "top",
            Row::Center => "center",
            Row::Bottom => "bottom",
        }
    }
}

impl Column {
    pub const ALL: [Column; 3] = [Column::Left, Column::Center, Column::Right];

    pub fn as_str(&self) -> &'static str {
        match self {
            Column::Left => "left",
            Column::Center => "center",
            Column::Right => "right",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GuidanceKind {
    /// Face is off-center; the cell says where it currently is.
    Position { row: Row, column: Column },
    TooSmall,
    TooFast,
    /// Centered and large enough.
    Ok,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GuidanceMessage {
    #[serde(flatten)]
    pub kind: GuidanceKind,
    pub text: String,
}

impl GuidanceMessage {
    pub fn new(kind: GuidanceKind) -> Self {
        GuidanceMessage {
            text: phrase(kind),
            kind,
        }
    }

    pub fn cell(row: Row, column: Column) -> Self {
        if (row, column) == (Row::Center, Column::Center) {
            Self::new(GuidanceKind::Ok)
        } else {
            Self::new(GuidanceKind::Position { row, column })
        }
    }

    pub fn is_ok(&self) -> bool {
        self.kind == GuidanceKind::Ok
    }
}

/// The phrase table.
pub fn phrase(kind: GuidanceKind) -> String {
    match kind {
        GuidanceKind::Ok => CENTERED.to_string(),
        GuidanceKind::TooSmall => COME_CLOSER.to_string(),
        GuidanceKind::TooFast => TOO_FAST.to_string(),
        GuidanceKind::Position { row, column } => match (row, column) {
            (Row::Center, Column::Center) => CENTERED.to_string(),
            _ => format!("Face in {} {}", row.as_str(), column.as_str()),
        },
    }
}

fn third(v: f64, extent: u32) -> usize {
    ((3.0 * v / extent as f64).floor().max(0.0) as usize).min(2)
}

/// Too-small check first, then the 3x3 cell holding the box center.
pub fn position_feedback(
    face: &BoundingBox,
    frame_w: u32,
    frame_h: u32,
    min_area_fraction: f64,
) -> Result<GuidanceMessage, ProfileError> {
    if frame_w == 0 || frame_h == 0 {
        return Err(ProfileError::Frame(format!("degenerate frame {frame_w}x{frame_h}")));
    }
    let fraction = face.area() as f64 / (frame_w as f64 * frame_h as f64);
    if fraction < min_area_fraction {
        return Ok(GuidanceMessage::new(GuidanceKind::TooSmall));
    }
    let (cx, cy) = face.center();
    Ok(GuidanceMessage::cell(
        Row::ALL[third(cy, frame_h)],
        Column::ALL[third(cx, frame_w)],
    ))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GyroSample {
    pub timestamp_ms: u64,
    /// Degrees, unwrapped.
    pub yaw: f64,
}

/// Angular speed between the first and last sample of the window.
pub fn angular_speed(samples: &[GyroSample]) -> Result<f64, ProfileError> {
    if samples.len() < 2 {
        return Err(ProfileError::Gyro("need at least two samples".into()));
    }
    if samples.windows(2).any(|w| w[1].timestamp_ms <= w[0].timestamp_ms) {
        return Err(ProfileError::Gyro("timestamps must strictly increase".into()));
    }
    let (a, b) = (samples[0], samples[samples.len() - 1]);
    let dt = (b.timestamp_ms - a.timestamp_ms) as f64 / 1000.0;
    Ok((b.yaw - a.yaw).abs() / dt)
}

/// `too fast` when the speed is strictly above `limit_dps`.
pub fn rotation_feedback(samples: &[GyroSample], limit_dps: f64) -> Result<Option<GuidanceMessage>, ProfileError> {
    Ok((angular_speed(samples)? > limit_dps).then(|| GuidanceMessage::new(GuidanceKind::TooFast)))
}
