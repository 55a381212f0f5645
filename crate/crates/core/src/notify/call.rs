use std::time::{Duration, Instant};

use serde::Serialize;

use super::{Notification, NotifyError, TransportResult};

/// Places a voice call that reads `text` to `phone`.
pub trait CallAdapter: Send + Sync {
    fn call(&self, phone: &str, text: &str) -> Result<(), NotifyError>;
}

/// POSTs `{"phone":..,"text":..}` to a text-to-speech calling service.
pub struct HttpCallAdapter {
    endpoint: String,
    client: reqwest::blocking::Client,
}

#[derive(Serialize)]
struct CallRequest<'a> {
    phone: &'a str,
    text: &'a str,
}

impl HttpCallAdapter {
    pub fn new(endpoint: impl Into<String>, timeout: Duration) -> Result<Self, NotifyError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| NotifyError::Adapter(e.to_string()))?;
        Ok(HttpCallAdapter {
            endpoint: endpoint.into(),
            client,
        })
    }
}

impl CallAdapter for HttpCallAdapter {
    fn call(&self, phone: &str, text: &str) -> Result<(), NotifyError> {
        let resp = self
            .client
            .post(&self.endpoint)
            .json(&CallRequest { phone, text })
            .send()
            .map_err(|e| NotifyError::Adapter(e.to_string()))?;
        if !resp.status().is_success() {
            return Err(NotifyError::Adapter(format!("{} returned {}", self.endpoint, resp.status())));
        }
        Ok(())
    }
}

/// Calls every recipient with the description. Without an adapter nothing
/// is attempted.
pub fn place_call(n: &Notification, adapter: Option<&dyn CallAdapter>) -> Result<TransportResult, NotifyError> {
    let adapter = adapter.ok_or(NotifyError::NotConfigured)?;
    let started = Instant::now();
    let mut out = TransportResult::default();
    let mut failures = Vec::new();
    for phone in &n.recipients {
        out.attempts += 1;
        if let Err(e) = adapter.call(phone, &n.body) {
            failures.push(format!("{phone}: {e}"));
        }
    }
    out.accepted = failures.len() < n.recipients.len();
    if !failures.is_empty() {
        out.error = Some(failures.join("; "));
    }
    out.latency_ms = started.elapsed().as_secs_f64() * 1e3;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::notify::NotifyMode;
    use parking_lot::Mutex;

    #[derive(Default)]
    struct Recorder(Mutex<Vec<(String, String)>>);

    impl CallAdapter for Recorder {
        fn call(&self, phone: &str, text: &str) -> Result<(), NotifyError> {
            self.0.lock().push((phone.into(), text.into()));
            Ok(())
        }
    }

    fn note() -> Notification {
        Notification {
            event_id: "e".into(),
            recipients: vec!["9015551234".into(), "9015551235".into()],
            subject: "s".into(),
            body: "A caregiver, named Ahmed at the front door".into(),
            attachments: Vec::new(),
            mode: NotifyMode::Call,
        }
    }

    #[test]
    fn reads_description_to_each_phone() {
        let r = Recorder::default();
        let out = place_call(&note(), Some(&r)).unwrap();
        assert!(out.accepted);
        assert_eq!(out.attempts, 2);
        assert_eq!(r.0.lock()[1], ("9015551235".into(), note().body));
    }

    #[test]
    fn unconfigured() {
        assert!(matches!(place_call(&note(), None), Err(NotifyError::NotConfigured)));
    }
}
