use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::GatewayError;
use crate::description::HairThresholds;
use crate::door::DeviceConfig;
use crate::notify::{NotifyPrefs, RetryPolicy, SmtpConfig};
use crate::profile::CaptureQuality;
use crate::recognition::{Backend, TrainConfig};
use crate::vision::{ChangeParams, ScanParams};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CameraConfig {
    pub id: String,
    /// Directory watched for new frames.
    #[serde(default)]
    pub source: String,
    /// Phrase ending the description, e.g. "in front of the entrance".
    pub location: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RecognizerConfig {
    pub backend: Backend,
    /// Overrides the threshold stored with the model.
    pub unknown_threshold: Option<f64>,
    pub train: TrainConfig,
}

impl Default for RecognizerConfig {
    fn default() -> Self {
        RecognizerConfig {
            backend: Backend::LbpSvm,
            unknown_threshold: None,
            train: TrainConfig::default(),
        }
    }
}

/// Base URLs of external inference services. Unset means not used.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdapterEndpoints {
    pub person_detector: Option<String>,
    pub item_detector: Option<String>,
    pub landmarks: Option<String>,
    pub call: Option<String>,
    pub timeout_ms: u64,
}

impl Default for AdapterEndpoints {
    fn default() -> Self {
        AdapterEndpoints {
            person_detector: None,
            item_detector: None,
            landmarks: None,
            call: None,
            timeout_ms: 2_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DoorSettings {
    #[serde(flatten)]
    pub device: DeviceConfig,
    pub heartbeat_ms: u64,
    pub connect_timeout_ms: u64,
}

impl Default for DoorSettings {
    fn default() -> Self {
        DoorSettings {
            device: DeviceConfig::default(),
            heartbeat_ms: 5_000,
            connect_timeout_ms: 1_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ApiConfig {
    pub bind: String,
    /// Bearer token required on every route but `/health`.
    pub token: String,
}

impl Default for ApiConfig {
    fn default() -> Self {
        ApiConfig {
            bind: "127.0.0.1:8080".into(),
            token: "change-me".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NotifySettings {
    #[serde(flatten)]
    pub prefs: NotifyPrefs,
    pub retry: RetryPolicy,
    /// Without SMTP settings mail goes to an in-memory mock.
    pub smtp: Option<SmtpConfig>,
    pub queue_capacity: usize,
}

impl Default for NotifySettings {
    fn default() -> Self {
        NotifySettings {
            prefs: NotifyPrefs::default(),
            retry: RetryPolicy::default(),
            smtp: None,
            queue_capacity: 64,
        }
    }
}

/// Whole-system settings, read from TOML. Every field has a default except
/// the camera list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SystemConfig {
    /// Profiles, models, event log and images live under here. Relative
    /// paths resolve against the config file's directory.
    pub data_dir: PathBuf,
    pub cameras: Vec<CameraConfig>,
    pub change: ChangeParams,
    pub scan: ScanParams,
    pub recognizer: RecognizerConfig,
    pub guidance: CaptureQuality,
    pub hair: HairThresholds,
    /// Frames waiting for the pipeline; the oldest is dropped when full.
    pub frame_queue: usize,
    pub door: DoorSettings,
    pub notify: NotifySettings,
    pub adapters: AdapterEndpoints,
    pub api: ApiConfig,
}

impl Default for SystemConfig {
    fn default() -> Self {
        SystemConfig {
            data_dir: PathBuf::from("doorwatch-data"),
            cameras: vec![
                CameraConfig {
                    id: "front_door".into(),
                    source: String::new(),
                    location: "in front of the entrance".into(),
                },
                CameraConfig {
                    id: "back_door".into(),
                    source: String::new(),
                    location: "at the back door".into(),
                },
            ],
            change: ChangeParams::default(),
            scan: ScanParams::default(),
            recognizer: RecognizerConfig::default(),
            guidance: CaptureQuality::default(),
            hair: HairThresholds::default(),
            frame_queue: 16,
            door: DoorSettings::default(),
            notify: NotifySettings::default(),
            adapters: AdapterEndpoints::default(),
            api: ApiConfig::default(),
        }
    }
}

impl SystemConfig {
    pub fn from_toml(text: &str) -> Result<Self, GatewayError> {
        let raw: toml::Value = toml::from_str(text).map_err(|e| GatewayError::Config(e.to_string()))?;
        let c: SystemConfig = raw.clone().try_into().map_err(|e: toml::de::Error| GatewayError::Config(e.to_string()))?;
        let known = toml::Value::try_from(&c).map_err(|e| GatewayError::Config(e.to_string()))?;
        let mut unknown = Vec::new();
        unknown_keys(&raw, &known, "", &mut unknown);
        if !unknown.is_empty() {
            return Err(GatewayError::Config(format!("unknown keys: {}", unknown.join(", "))));
        }
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, GatewayError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| GatewayError::Config(format!("{}: {e}", path.display())))?;
        let mut c = Self::from_toml(&text)?;
        if c.data_dir.is_relative() {
            if let Some(dir) = path.parent() {
                c.data_dir = dir.join(&c.data_dir);
            }
        }
        Ok(c)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        let mut seen = HashSet::new();
        for c in &self.cameras {
            if c.id.trim().is_empty() {
                return Err(GatewayError::Config("camera with empty id".into()));
            }
            if !seen.insert(c.id.as_str()) {
                return Err(GatewayError::Config(format!("duplicate camera id {:?}", c.id)));
            }
            if c.location.trim().is_empty() {
                return Err(GatewayError::Config(format!("camera {:?} has no location phrase", c.id)));
            }
        }
        if self.frame_queue == 0 {
            return Err(GatewayError::Config("frame_queue must be at least 1".into()));
        }
        if self.api.token.is_empty() {
            return Err(GatewayError::Config("empty api token".into()));
        }
        self.door.device.validate().map_err(|e| GatewayError::Config(e.to_string()))?;
        Ok(())
    }

    pub fn camera(&self, id: &str) -> Option<&CameraConfig> {
        self.cameras.iter().find(|c| c.id == id)
    }
}

/// Keys present in `raw` that did not survive a parse and re-serialize;
/// serde's `flatten` rules out `deny_unknown_fields`.
fn unknown_keys(raw: &toml::Value, known: &toml::Value, prefix: &str, out: &mut Vec<String>) {
    match (raw, known) {
        (toml::Value::Table(r), toml::Value::Table(k)) => {
            for (key, v) in r {
                let path = if prefix.is_empty() { key.clone() } else { format!("{prefix}.{key}") };
                match k.get(key) {
                    Some(kv) => unknown_keys(v, kv, &path, out),
                    None => out.push(path),
                }
            }
        }
        (toml::Value::Array(r), toml::Value::Array(k)) => {
            for (i, (rv, kv)) in r.iter().zip(k).enumerate() {
                unknown_keys(rv, kv, &format!("{prefix}[{i}]"), out);
            }
        }
        _ => {}
    }
}
