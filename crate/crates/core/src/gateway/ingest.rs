use std::collections::VecDeque;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use parking_lot::{Condvar, Mutex};

use super::{FrameHints, Gateway};
use crate::vision::Frame;

struct QueueState<T> {
    items: VecDeque<T>,
    closed: bool,
}

/// Bounded FIFO that never blocks the producer: at capacity the oldest
/// entry is discarded to make room.
pub struct FrameQueue<T> {
    state: Mutex<QueueState<T>>,
    ready: Condvar,
    capacity: usize,
    dropped: AtomicU64,
}

impl<T> FrameQueue<T> {
    pub fn new(capacity: usize) -> Self {
        FrameQueue {
            state: Mutex::new(QueueState {
                items: VecDeque::with_capacity(capacity.max(1)),
                closed: false,
            }),
            ready: Condvar::new(),
            capacity: capacity.max(1),
            dropped: AtomicU64::new(0),
        }
    }

    /// Returns the entry evicted to make room, if any.
    pub fn push(&self, item: T) -> Option<T> {
        let mut s = self.state.lock();
        let evicted = if s.items.len() == self.capacity {
            self.dropped.fetch_add(1, Ordering::SeqCst);
            s.items.pop_front()
        } else {
            None
        };
        s.items.push_back(item);
        drop(s);
        self.ready.notify_one();
        evicted
    }

    /// Waits up to `timeout`; `None` on timeout or once closed and drained.
    pub fn pop(&self, timeout: Duration) -> Option<T> {
        let until = Instant::now() + timeout;
        let mut s = self.state.lock();
        loop {
            if let Some(x) = s.items.pop_front() {
                return Some(x);
            }
            if s.closed || self.ready.wait_until(&mut s, until).timed_out() {
                return s.items.pop_front();
            }
        }
    }

    pub fn close(&self) {
        self.state.lock().closed = true;
        self.ready.notify_all();
    }

    pub fn is_closed(&self) -> bool {
        self.state.lock().closed
    }

    pub fn len(&self) -> usize {
        self.state.lock().items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dropped(&self) -> u64 {
        self.dropped.load(Ordering::SeqCst)
    }
}

type Job = (Frame, FrameHints);

/// What became of a submitted frame.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Admission {
    Queued,
    /// Queued, and the oldest waiting frame was discarded for it.
    Displaced { camera_id: String, timestamp_ms: u64 },
    /// Refused while ingestion is paused.
    Paused,
}

/// Camera-facing entry point: frames are queued and a single worker runs
/// them through the pipeline.
pub struct Ingest {
    queue: Arc<FrameQueue<Job>>,
    paused: Arc<AtomicBool>,
    worker: Option<JoinHandle<()>>,
}

const STORAGE_BACKOFF: Duration = Duration::from_secs(1);

impl Ingest {
    pub fn spawn(gateway: Arc<Gateway>) -> Self {
        let queue = Arc::new(FrameQueue::new(gateway.config().frame_queue));
        let paused = Arc::new(AtomicBool::new(false));
        let worker = {
            let (queue, paused) = (queue.clone(), paused.clone());
            std::thread::Builder::new()
                .name("pipeline".into())
                .spawn(move || loop {
                    let Some((frame, hints)) = queue.pop(Duration::from_millis(200)) else {
                        if queue.is_closed() {
                            return;
                        }
                        continue;
                    };
                    match gateway.process_frame(&frame, &hints) {
                        Ok(_) => {}
                        Err(e) if e.is_storage() => {
                            tracing::error!(error = %e, "storage failure; pausing ingestion");
                            paused.store(true, Ordering::SeqCst);
                            while !queue.is_closed() {
                                std::thread::sleep(STORAGE_BACKOFF);
                                if gateway.check_storage().is_ok() {
                                    tracing::info!("storage writable again; resuming");
                                    break;
                                }
                            }
                            paused.store(false, Ordering::SeqCst);
                        }
                        Err(e) => tracing::warn!(camera = frame.camera_id(), error = %e, "frame skipped"),
                    }
                })
                .expect("spawn pipeline thread")
        };
        Ingest {
            queue,
            paused,
            worker: Some(worker),
        }
    }

    /// Never blocks. While paused after a storage failure frames are
    /// refused; otherwise the oldest waiting frame gives way at capacity.
    pub fn submit(&self, frame: Frame, hints: FrameHints) -> Admission {
        if self.is_paused() {
            return Admission::Paused;
        }
        let hints = FrameHints {
            origin: hints.origin.or_else(|| Some(Instant::now())),
            ..hints
        };
        match self.queue.push((frame, hints)) {
            Some((old, _)) => {
                tracing::debug!(camera = old.camera_id(), ts = old.timestamp_ms(), "dropped oldest frame");
                Admission::Displaced {
                    camera_id: old.camera_id().to_string(),
                    timestamp_ms: old.timestamp_ms(),
                }
            }
            None => Admission::Queued,
        }
    }

    pub fn is_paused(&self) -> bool {
        self.paused.load(Ordering::SeqCst)
    }

    pub fn dropped(&self) -> u64 {
        self.queue.dropped()
    }

    pub fn backlog(&self) -> usize {
        self.queue.len()
    }

    /// Processes what is queued, then stops.
    pub fn shutdown(mut self) {
        self.stop();
    }

    fn stop(&mut self) {
        self.queue.close();
        if let Some(w) = self.worker.take() {
            let _ = w.join();
        }
    }
}

impl Drop for Ingest {
    fn drop(&mut self) {
        self.stop();
    }
}
