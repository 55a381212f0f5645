//! Outbound notifications: MMS through a carrier mail gateway, plain email,
//! phone calls through an HTTP adapter, and a local alert tone.

mod call;
mod queue;
mod transport;

pub use call::{place_call, CallAdapter, HttpCallAdapter};
pub use queue::{DispatchRecord, NotifyQueue};
pub use transport::{
    dispatch, render_message, MockTransport, RetryPolicy, SmtpConfig, SmtpMailer, Transport, TransportError,
    TransportResult,
};

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::description::ThreatLevel;

#[derive(Debug, thiserror::Error)]
pub enum NotifyError {
    #[error("event {0} has no description")]
    MissingDescription(String),
    #[error("event {0} has no scene image")]
    MissingImage(String),
    #[error("no recipients for {0:?}")]
    NoRecipients(NotifyMode),
    #[error("invalid phone {0:?}: need 10 to 15 digits")]
    InvalidPhone(String),
    #[error("invalid address {0:?}")]
    InvalidAddress(String),
    #[error("call adapter not configured")]
    NotConfigured,
    #[error("call adapter: {0}")]
    Adapter(String),
    #[error("message build failed: {0}")]
    Build(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NotifyMode {
    Mms,
    Email,
    Call,
    Tone,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NotifyAttachment {
    pub path: PathBuf,
    pub media_type: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Notification {
    pub event_id: String,
    pub recipients: Vec<String>,
    pub subject: String,
    pub body: String,
    pub attachments: Vec<NotifyAttachment>,
    pub mode: NotifyMode,
}

/// What a notification is built from.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Incident {
    pub event_id: String,
    pub camera_id: String,
    /// Display name; `None` when unknown.
    pub identity: Option<String>,
    pub threat: ThreatLevel,
    pub description: Option<String>,
    pub image: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NotifyPrefs {
    pub mode: NotifyMode,
    pub from: String,
    pub emails: Vec<String>,
    pub phones: Vec<String>,
    /// Carrier MMS mail gateway domain.
    pub mms_gateway: String,
    /// Events below this level are not sent.
    pub min_threat: ThreatLevel,
}

impl Default for NotifyPrefs {
    fn default() -> Self {
        NotifyPrefs {
            mode: NotifyMode::Email,
            from: "doorwatch@localhost".into(),
            emails: Vec::new(),
            phones: Vec::new(),
            mms_gateway: "mms.example.net".into(),
            min_threat: ThreatLevel::None,
        }
    }
}

pub fn format_mms_address(phone: &str, carrier_gateway: &str) -> Result<String, NotifyError> {
    if !(10..=15).contains(&phone.len()) || !phone.bytes().all(|b| b.is_ascii_digit()) {
        return Err(NotifyError::InvalidPhone(phone.to_string()));
    }
    let gw = carrier_gateway.trim();
    if gw.is_empty() || gw.contains('@') || gw.chars().any(char::is_whitespace) {
        return Err(NotifyError::InvalidAddress(carrier_gateway.to_string()));
    }
    Ok(format!("{phone}@{gw}"))
}

fn media_type(path: &std::path::Path) -> &'static str {
    match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
        Some("png") => "image/png",
        Some("jpg" | "jpeg") => "image/jpeg",
        Some("ppm") => "image/x-portable-pixmap",
        _ => "application/octet-stream",
    }
}

/// Subject `<threat>: <name or unknown> at <camera>`, body the description
/// as given.
pub fn build_notification(incident: &Incident, prefs: &NotifyPrefs) -> Result<Notification, NotifyError> {
    let body = incident
        .description
        .clone()
        .filter(|d| !d.trim().is_empty())
        .ok_or_else(|| NotifyError::MissingDescription(incident.event_id.clone()))?;
    let image = incident
        .image
        .clone()
        .ok_or_else(|| NotifyError::MissingImage(incident.event_id.clone()))?;
    let who = incident.identity.as_deref().unwrap_or("unknown");
    let recipients = match prefs.mode {
        NotifyMode::Email => prefs.emails.clone(),
        NotifyMode::Mms => prefs
            .phones
            .iter()
            .map(|p| format_mms_address(p, &prefs.mms_gateway))
            .collect::<Result<_, _>>()?,
        NotifyMode::Call => prefs.phones.clone(),
        NotifyMode::Tone => Vec::new(),
    };
    if matches!(prefs.mode, NotifyMode::Email | NotifyMode::Mms | NotifyMode::Call) && recipients.is_empty() {
        return Err(NotifyError::NoRecipients(prefs.mode));
    }
    let attachments = match prefs.mode {
        NotifyMode::Email | NotifyMode::Mms => vec![NotifyAttachment {
            media_type: media_type(&image).to_string(),
            path: image,
        }],
        _ => Vec::new(),
    };
    Ok(Notification {
        event_id: incident.event_id.clone(),
        recipients,
        subject: format!("{}: {who} at {}", incident.threat, incident.camera_id),
        body,
        attachments,
        mode: prefs.mode,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn incident(identity: Option<&str>, threat: ThreatLevel) -> Incident {
        Incident {
            event_id: "e1".into(),
            camera_id: "front_door".into(),
            identity: identity.map(str::to_string),
            threat,
            description: Some(match identity {
                Some(n) => format!("A friend, named {n} at the front door"),
                None => "An unknown person who has a gun at the front door".into(),
            }),
            image: Some("scene.png".into()),
        }
    }

    fn prefs(mode: NotifyMode) -> NotifyPrefs {
        NotifyPrefs {
            mode,
            emails: vec!["a@example.org".into()],
            phones: vec!["9015551234".into()],
            ..NotifyPrefs::default()
        }
    }

    #[test]
    fn named_and_unknown() {
        let n = build_notification(&incident(Some("John"), ThreatLevel::None), &prefs(NotifyMode::Mms)).unwrap();
        assert!(n.body.contains("John"));
        assert_eq!(n.recipients, vec!["9015551234@mms.example.net"]);
        assert_eq!(n.attachments[0].media_type, "image/png");
        let u = build_notification(&incident(None, ThreatLevel::High), &prefs(NotifyMode::Email)).unwrap();
        assert!(u.subject.starts_with("high:"));
        assert!(u.body.contains("unknown"));
    }

    #[test]
    fn missing_parts() {
        let mut i = incident(None, ThreatLevel::High);
        i.image = None;
        assert!(matches!(build_notification(&i, &prefs(NotifyMode::Email)), Err(NotifyError::MissingImage(_))));
        let mut i = incident(None, ThreatLevel::High);
        i.description = None;
        assert!(matches!(build_notification(&i, &prefs(NotifyMode::Email)), Err(NotifyError::MissingDescription(_))));
        let empty = NotifyPrefs::default();
        assert!(matches!(
            build_notification(&incident(None, ThreatLevel::High), &empty),
            Err(NotifyError::NoRecipients(NotifyMode::Email))
        ));
    }

    #[test]
    fn mms_addresses() {
        assert_eq!(format_mms_address("9015551234", "mms.example.net").unwrap(), "9015551234@mms.example.net");
        assert!(format_mms_address("90155512a4", "mms.example.net").is_err());
        assert!(format_mms_address("901555123", "mms.example.net").is_err());
        assert!(format_mms_address("1234567890123456", "mms.example.net").is_err());
    }
}
