use std::sync::atomic::{AtomicU32, Ordering};
use std::time::{Duration, Instant};

use lettre::message::header::ContentType;
use lettre::message::{Attachment, Mailbox, MultiPart, SinglePart};
use lettre::transport::smtp::authentication::Credentials;
use lettre::Message;
use parking_lot::Mutex;
use serde::{Deserialize, Serialize};

use super::{Notification, NotifyError};

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("{message}")]
pub struct TransportError {
    pub message: String,
    /// No point retrying.
    pub permanent: bool,
}

impl TransportError {
    pub fn transient(message: impl Into<String>) -> Self {
        TransportError {
            message: message.into(),
            permanent: false,
        }
    }
}

/// Mail submission.
pub trait Transport: Send + Sync {
    fn sender(&self) -> &str;
    fn submit(&self, message: &Message) -> Result<(), TransportError>;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_backoff_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 3,
            base_backoff_ms: 100,
        }
    }
}

impl RetryPolicy {
    /// Wait after failed attempt `n` (1-based): base, 2 base, 4 base, ...
    pub fn backoff(&self, n: u32) -> Duration {
        Duration::from_millis(self.base_backoff_ms.saturating_mul(1u64 << (n.saturating_sub(1)).min(20)))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TransportResult {
    pub accepted: bool,
    pub attempts: u32,
    pub latency_ms: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// Waits taken between attempts.
    #[serde(default)]
    pub backoff_ms: Vec<u64>,
}

fn mailbox(s: &str) -> Result<Mailbox, NotifyError> {
    s.parse().map_err(|_| NotifyError::InvalidAddress(s.to_string()))
}

/// multipart/mixed: the description as text/plain, then each image.
pub fn render_message(n: &Notification, from: &str) -> Result<Message, NotifyError> {
    let mut b = Message::builder().from(mailbox(from)?).subject(n.subject.clone());
    for r in &n.recipients {
        b = b.to(mailbox(r)?);
    }
    let mut parts = MultiPart::mixed().singlepart(SinglePart::plain(n.body.clone()));
    for a in &n.attachments {
        let bytes = std::fs::read(&a.path)?;
        let name = a
            .path
            .file_name()
            .map(|f| f.to_string_lossy().into_owned())
            .unwrap_or_else(|| "scene".into());
        let ct = ContentType::parse(&a.media_type).map_err(|e| NotifyError::Build(e.to_string()))?;
        parts = parts.singlepart(Attachment::new(name).body(bytes, ct));
    }
    b.multipart(parts).map_err(|e| NotifyError::Build(e.to_string()))
}

/// Renders and submits, retrying transient failures with doubling waits.
/// Never panics and never returns an error: failures are in the result.
pub fn dispatch(n: &Notification, transport: &dyn Transport, retry: &RetryPolicy) -> TransportResult {
    let started = Instant::now();
    let mut out = TransportResult::default();
    let message = match render_message(n, transport.sender()) {
        Ok(m) => m,
        Err(e) => {
            out.error = Some(e.to_string());
            out.latency_ms = started.elapsed().as_secs_f64() * 1e3;
            return out;
        }
    };
    let max = retry.max_attempts.max(1);
    while out.attempts < max {
        out.attempts += 1;
        match transport.submit(&message) {
            Ok(()) => {
                out.accepted = true;
                out.error = None;
                break;
            }
            Err(e) => {
                tracing::warn!(event = %n.event_id, attempt = out.attempts, error = %e, "submit failed");
                out.error = Some(e.message.clone());
                if e.permanent || out.attempts == max {
                    break;
                }
                let wait = retry.backoff(out.attempts);
                out.backoff_ms.push(wait.as_millis() as u64);
                std::thread::sleep(wait);
            }
        }
    }
    out.latency_ms = started.elapsed().as_secs_f64() * 1e3;
    out
}

/// Records rendered messages; can be scripted to fail.
pub struct MockTransport {
    sender: String,
    fail_first: AtomicU32,
    always_fail: bool,
    sent: Mutex<Vec<(Instant, Vec<u8>)>>,
    attempts: AtomicU32,
}

impl MockTransport {
    pub fn new() -> Self {
        Self::scripted(0, false)
    }

    pub fn failing_first(n: u32) -> Self {
        Self::scripted(n, false)
    }

    pub fn always_failing() -> Self {
        Self::scripted(0, true)
    }

    fn scripted(fail_first: u32, always_fail: bool) -> Self {
        MockTransport {
            sender: "doorwatch@localhost".into(),
            fail_first: AtomicU32::new(fail_first),
            always_fail,
            sent: Mutex::new(Vec::new()),
            attempts: AtomicU32::new(0),
        }
    }

    /// Raw RFC 5322 bytes of every accepted message.
    pub fn sent(&self) -> Vec<Vec<u8>> {
        self.sent.lock().iter().map(|(_, m)| m.clone()).collect()
    }

    pub fn accepted_at(&self) -> Vec<Instant> {
        self.sent.lock().iter().map(|(t, _)| *t).collect()
    }

    pub fn attempts(&self) -> u32 {
        self.attempts.load(Ordering::SeqCst)
    }
}

impl Default for MockTransport {
    fn default() -> Self {
        Self::new()
    }
}

impl Transport for MockTransport {
    fn sender(&self) -> &str {
        &self.sender
    }

    fn submit(&self, message: &Message) -> Result<(), TransportError> {
        self.attempts.fetch_add(1, Ordering::SeqCst);
        if self.always_fail {
            return Err(TransportError::transient("mock failure"));
        }
        if self
            .fail_first
            .fetch_update(Ordering::SeqCst, Ordering::SeqCst, |n| n.checked_sub(1))
            .is_ok()
        {
            return Err(TransportError::transient("mock failure"));
        }
        self.sent.lock().push((Instant::now(), message.formatted()));
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SmtpConfig {
    pub host: String,
    pub port: u16,
    pub username: Option<String>,
    pub password: Option<String>,
    pub from: String,
    pub timeout_ms: u64,
}

impl Default for SmtpConfig {
    fn default() -> Self {
        SmtpConfig {
            host: "localhost".into(),
            port: 25,
            username: None,
            password: None,
            from: "doorwatch@localhost".into(),
            timeout_ms: 5_000,
        }
    }
}

/// Plain SMTP submission. TLS is left to a local relay.
pub struct SmtpMailer {
    from: String,
    inner: lettre::SmtpTransport,
}

impl SmtpMailer {
    pub fn new(config: &SmtpConfig) -> Self {
        let mut b = lettre::SmtpTransport::builder_dangerous(config.host.clone())
            .port(config.port)
            .timeout(Some(Duration::from_millis(config.timeout_ms)));
        if let (Some(u), Some(p)) = (&config.username, &config.password) {
            b = b.credentials(Credentials::new(u.clone(), p.clone()));
        }
        SmtpMailer {
            from: config.from.clone(),
            inner: b.build(),
        }
    }
}

impl Transport for SmtpMailer {
    fn sender(&self) -> &str {
        &self.from
    }

    fn submit(&self, message: &Message) -> Result<(), TransportError> {
        lettre::Transport::send(&self.inner, message)
            .map(|_| ())
            .map_err(|e| TransportError {
                permanent: e.is_permanent(),
                message: e.to_string(),
            })
    }
}
