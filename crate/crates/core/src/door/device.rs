use std::io::{BufRead, BufReader, ErrorKind, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use parking_lot::Mutex;
use serde::{Deserialize, Serialize};

use super::{decode_frame, encode_frame, DoorError, RelayCmd, RelayState, WireMessage, DEFAULT_WATCHDOG_SECONDS};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DeviceConfig {
    /// `host:port` the switch listens on.
    pub address: String,
    pub shared_secret: String,
    pub watchdog_seconds: f64,
}

impl Default for DeviceConfig {
    fn default() -> Self {
        DeviceConfig {
            address: "127.0.0.1:7010".into(),
            shared_secret: "change-me".into(),
            watchdog_seconds: DEFAULT_WATCHDOG_SECONDS,
        }
    }
}

impl DeviceConfig {
    pub fn validate(&self) -> Result<(), DoorError> {
        if !(self.watchdog_seconds > 0.0) || !self.watchdog_seconds.is_finite() {
            return Err(DoorError::Config(format!("watchdog_seconds {}", self.watchdog_seconds)));
        }
        if self.shared_secret.is_empty() {
            return Err(DoorError::Config("empty shared secret".into()));
        }
        Ok(())
    }

    pub fn watchdog_ms(&self) -> u64 {
        (self.watchdog_seconds * 1000.0).ceil() as u64
    }
}

/// The switch's logic without any I/O. Time is passed in.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DeviceCore {
    secret: String,
    watchdog_ms: u64,
    relay: RelayState,
    last_heard_ms: u64,
    rejected: u64,
}

impl DeviceCore {
    pub fn new(secret: impl Into<String>, watchdog_ms: u64, now_ms: u64) -> Self {
        DeviceCore {
            secret: secret.into(),
            watchdog_ms,
            relay: RelayState::Off,
            last_heard_ms: now_ms,
            rejected: 0,
        }
    }

    pub fn relay(&self) -> RelayState {
        self.relay
    }

    pub fn rejected(&self) -> u64 {
        self.rejected
    }

    pub fn handle(&mut self, msg: &WireMessage, now_ms: u64) -> WireMessage {
        self.tick(now_ms);
        match msg {
            WireMessage::Command { auth, id, .. } if *auth != self.secret => {
                self.rejected += 1;
                tracing::warn!(id = %id, "rejected frame with wrong secret");
                WireMessage::Error {
                    error: "auth".into(),
                    id: Some(id.clone()),
                }
            }
            WireMessage::Command { cmd, id, .. } => {
                self.last_heard_ms = now_ms;
                match cmd {
                    RelayCmd::On => self.relay = RelayState::On,
                    RelayCmd::Off => self.relay = RelayState::Off,
                    RelayCmd::Status => {}
                }
                WireMessage::Reply {
                    state: self.relay,
                    id: id.clone(),
                }
            }
            WireMessage::Reply { id, .. } | WireMessage::Error { id: Some(id), .. } => WireMessage::Error {
                error: "not a command".into(),
                id: Some(id.clone()),
            },
            WireMessage::Error { id: None, .. } => WireMessage::Error {
                error: "not a command".into(),
                id: None,
            },
        }
    }

    /// Decodes and handles one line; unreadable lines get an error reply.
    pub fn handle_line(&mut self, line: &[u8], now_ms: u64) -> WireMessage {
        match decode_frame(line) {
            Ok(m) => self.handle(&m, now_ms),
            Err(e) => {
                self.rejected += 1;
                tracing::warn!(error = %e, "rejected frame");
                WireMessage::Error {
                    error: e.to_string(),
                    id: None,
                }
            }
        }
    }

    /// Drops the relay after `watchdog_ms` without a valid frame.
    pub fn tick(&mut self, now_ms: u64) {
        if self.relay == RelayState::On && now_ms.saturating_sub(self.last_heard_ms) >= self.watchdog_ms {
            tracing::warn!("watchdog expired, relay off");
            self.relay = RelayState::Off;
        }
    }
}

/// Simulated relay switch on a TCP port, one connection at a time.
pub struct DeviceSim;

pub struct DeviceHandle {
    addr: SocketAddr,
    core: Arc<Mutex<DeviceCore>>,
    started: Instant,
    stop: Arc<AtomicBool>,
    threads: Vec<JoinHandle<()>>,
}

impl DeviceHandle {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn relay(&self) -> RelayState {
        let mut c = self.core.lock();
        c.tick(self.started.elapsed().as_millis() as u64);
        c.relay()
    }

    pub fn rejected(&self) -> u64 {
        self.core.lock().rejected()
    }

    pub fn shutdown(mut self) {
        self.stop_threads();
    }

    fn stop_threads(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        for t in self.threads.drain(..) {
            let _ = t.join();
        }
    }
}

impl Drop for DeviceHandle {
    fn drop(&mut self) {
        self.stop_threads();
    }
}

const POLL: Duration = Duration::from_millis(10);

fn serve(stream: TcpStream, core: &Mutex<DeviceCore>, started: Instant, stop: &AtomicBool) -> std::io::Result<()> {
    stream.set_read_timeout(Some(POLL * 5))?;
    stream.set_nodelay(true)?;
    let mut writer = stream.try_clone()?;
    let mut reader = BufReader::new(stream);
    let mut line = Vec::new();
    while !stop.load(Ordering::SeqCst) {
        match reader.read_until(b'\n', &mut line) {
            Ok(0) => return Ok(()),
            Ok(_) if line.ends_with(b"\n") => {
                let reply = core.lock().handle_line(&line, started.elapsed().as_millis() as u64);
                writer.write_all(&encode_frame(&reply))?;
                line.clear();
            }
            Ok(_) => {}
            Err(e) if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(())
}

impl DeviceSim {
    pub fn spawn(config: &DeviceConfig) -> Result<DeviceHandle, DoorError> {
        config.validate()?;
        let listener = TcpListener::bind(&config.address)?;
        listener.set_nonblocking(true)?;
        let addr = listener.local_addr()?;
        let started = Instant::now();
        let core = Arc::new(Mutex::new(DeviceCore::new(config.shared_secret.clone(), config.watchdog_ms(), 0)));
        let stop = Arc::new(AtomicBool::new(false));

        let server = {
            let (core, stop) = (core.clone(), stop.clone());
            std::thread::spawn(move || {
                while !stop.load(Ordering::SeqCst) {
                    match listener.accept() {
                        Ok((stream, peer)) => {
                            let _ = stream.set_nonblocking(false);
                            if let Err(e) = serve(stream, &core, started, &stop) {
                                tracing::debug!(%peer, error = %e, "connection closed");
                            }
                        }
                        Err(e) if e.kind() == ErrorKind::WouldBlock => std::thread::sleep(POLL),
                        Err(e) => {
                            tracing::warn!(error = %e, "accept failed");
                            std::thread::sleep(POLL);
                        }
                    }
                }
            })
        };
        let watchdog = {
            let (core, stop) = (core.clone(), stop.clone());
            std::thread::spawn(move || {
                while !stop.load(Ordering::SeqCst) {
                    core.lock().tick(started.elapsed().as_millis() as u64);
                    std::thread::sleep(POLL);
                }
            })
        };
        Ok(DeviceHandle {
            addr,
            core,
            started,
            stop,
            threads: vec![server, watchdog],
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn on(id: &str, auth: &str) -> WireMessage {
        WireMessage::Command {
            cmd: RelayCmd::On,
            id: id.into(),
            auth: auth.into(),
        }
    }

    #[test]
    fn watchdog_turns_relay_off() {
        let mut d = DeviceCore::new("s", 1_000, 0);
        d.handle(&on("1", "s"), 0);
        assert_eq!(d.relay(), RelayState::On);
        d.tick(999);
        assert_eq!(d.relay(), RelayState::On);
        d.tick(1_000);
        assert_eq!(d.relay(), RelayState::Off);
    }

    #[test]
    fn wrong_secret_changes_nothing() {
        let mut d = DeviceCore::new("s", 1_000, 0);
        let r = d.handle(&on("1", "nope"), 0);
        assert!(matches!(r, WireMessage::Error { .. }));
        assert_eq!(d.relay(), RelayState::Off);
        assert_eq!(d.rejected(), 1);
        let r = d.handle_line(b"garbage\n", 0);
        assert!(matches!(r, WireMessage::Error { id: None, .. }));
    }

    #[test]
    fn on_then_off() {
        let mut d = DeviceCore::new("s", 1_000, 0);
        d.handle(&on("1", "s"), 0);
        let r = d.handle(
            &WireMessage::Command {
                cmd: RelayCmd::Off,
                id: "2".into(),
                auth: "s".into(),
            },
            10,
        );
        assert_eq!(
            r,
            WireMessage::Reply {
                state: RelayState::Off,
                id: "2".into()
            }
        );
    }

    #[test]
    fn config_validation() {
        let mut c = DeviceConfig::default();
        assert!(c.validate().is_ok());
        c.watchdog_seconds = 0.0;
        assert!(c.validate().is_err());
    }
}
