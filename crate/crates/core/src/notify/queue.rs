use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use crossbeam_channel::{Sender, TrySendError};
use parking_lot::Mutex;
use serde::{Deserialize, Serialize};

use super::{dispatch, place_call, CallAdapter, Notification, NotifyMode, RetryPolicy, Transport, TransportResult};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DispatchRecord {
    pub event_id: String,
    pub mode: NotifyMode,
    pub result: TransportResult,
    /// From the frame's arrival to the transport accepting the message.
    pub end_to_end_ms: f64,
}

struct Job {
    note: Notification,
    origin: Instant,
}

struct Shared {
    records: Mutex<Vec<DispatchRecord>>,
    pending: AtomicUsize,
    dropped: AtomicU64,
}

/// Bounded hand-off to a single sending thread. Enqueueing never blocks.
pub struct NotifyQueue {
    tx: Option<Sender<Job>>,
    shared: Arc<Shared>,
    worker: Option<JoinHandle<()>>,
}

fn deliver(
    note: &Notification,
    transport: &dyn Transport,
    call: Option<&dyn CallAdapter>,
    retry: &RetryPolicy,
) -> TransportResult {
    match note.mode {
        NotifyMode::Email | NotifyMode::Mms => dispatch(note, transport, retry),
        NotifyMode::Call => place_call(note, call).unwrap_or_else(|e| TransportResult {
            error: Some(e.to_string()),
            ..TransportResult::default()
        }),
        NotifyMode::Tone => {
            tracing::info!(event = %note.event_id, "alert tone");
            TransportResult {
                accepted: true,
                attempts: 1,
                ..TransportResult::default()
            }
        }
    }
}

impl NotifyQueue {
    pub fn spawn(
        capacity: usize,
        transport: Arc<dyn Transport>,
        call: Option<Arc<dyn CallAdapter>>,
        retry: RetryPolicy,
    ) -> Self {
        let (tx, rx) = crossbeam_channel::bounded::<Job>(capacity.max(1));
        let shared = Arc::new(Shared {
            records: Mutex::new(Vec::new()),
            pending: AtomicUsize::new(0),
            dropped: AtomicU64::new(0),
        });
        let worker = {
            let shared = shared.clone();
            std::thread::Builder::new()
                .name("notify".into())
                .spawn(move || {
                    for job in rx {
                        let result = deliver(&job.note, transport.as_ref(), call.as_deref(), &retry);
                        let rec = DispatchRecord {
                            event_id: job.note.event_id.clone(),
                            mode: job.note.mode,
                            end_to_end_ms: job.origin.elapsed().as_secs_f64() * 1e3,
                            result,
                        };
                        if !rec.result.accepted {
                            tracing::warn!(event = %rec.event_id, error = ?rec.result.error, "notification failed");
                        }
                        shared.records.lock().push(rec);
                        shared.pending.fetch_sub(1, Ordering::SeqCst);
                    }
                })
                .expect("spawn notify thread")
        };
        NotifyQueue {
            tx: Some(tx),
            shared,
            worker: Some(worker),
        }
    }

    /// `origin` is when the triggering frame arrived. Returns false when the
    /// queue is full and the notification was dropped.
    pub fn enqueue(&self, note: Notification, origin: Instant) -> bool {
        let Some(tx) = &self.tx else { return false };
        self.shared.pending.fetch_add(1, Ordering::SeqCst);
        match tx.try_send(Job { note, origin }) {
            Ok(()) => true,
            Err(TrySendError::Full(j) | TrySendError::Disconnected(j)) => {
                self.shared.pending.fetch_sub(1, Ordering::SeqCst);
                self.shared.dropped.fetch_add(1, Ordering::SeqCst);
                tracing::warn!(event = %j.note.event_id, "notify queue full, dropped");
                false
            }
        }
    }

    pub fn records(&self) -> Vec<DispatchRecord> {
        self.shared.records.lock().clone()
    }

    pub fn dropped(&self) -> u64 {
        self.shared.dropped.load(Ordering::SeqCst)
    }

    pub fn pending(&self) -> usize {
        self.shared.pending.load(Ordering::SeqCst)
    }

    /// True once everything enqueued so far has been handled.
    pub fn wait_idle(&self, timeout: Duration) -> bool {
        let until = Instant::now() + timeout;
        while self.pending() > 0 {
            if Instant::now() >= until {
                return false;
            }
            std::thread::sleep(Duration::from_millis(2));
        }
        true
    }

    /// Drains what is queued, then stops the worker.
    pub fn shutdown(mut self) -> Vec<DispatchRecord> {
        self.stop();
        self.records()
    }

    fn stop(&mut self) {
        self.tx.take();
        if let Some(w) = self.worker.take() {
            let _ = w.join();
        }
    }
}

impl Drop for NotifyQueue {
    fn drop(&mut self) {
        self.stop();
    }
}
