use std::io::{BufRead, BufReader, Write};
use std::net::{TcpStream, ToSocketAddrs};
use std::sync::Arc;
use std::time::Duration;

use parking_lot::Mutex;

use super::{
    encode_frame, handle_command, tick, decode_frame, DeviceAction, DeviceCore, DoorCommand, DoorError, DoorState,
    Lock, RelayCmd, RelayState, WireMessage,
};

/// Carries relay commands to the switch and returns the state it reports.
pub trait DeviceLink: Send + Sync {
    fn send(&self, cmd: RelayCmd, id: &str, now_ms: u64) -> Result<RelayState, DoorError>;
}

/// In-process link to a [`DeviceCore`], with a switchable fault for tests.
pub struct LocalLink {
    core: Arc<Mutex<DeviceCore>>,
    secret: String,
    down: Mutex<bool>,
}

impl LocalLink {
    pub fn new(core: Arc<Mutex<DeviceCore>>, secret: impl Into<String>) -> Self {
        LocalLink {
            core,
            secret: secret.into(),
            down: Mutex::new(false),
        }
    }

    pub fn set_down(&self, down: bool) {
        *self.down.lock() = down;
    }

    pub fn core(&self) -> &Arc<Mutex<DeviceCore>> {
        &self.core
    }
}

fn reply_state(reply: WireMessage, id: &str) -> Result<RelayState, DoorError> {
    match reply {
        WireMessage::Reply { state, id: r } if r == id => Ok(state),
        WireMessage::Error { error, .. } => Err(DoorError::Rejected(error)),
        other => Err(DoorError::Malformed(format!("unexpected reply {other:?}"))),
    }
}

impl DeviceLink for LocalLink {
    fn send(&self, cmd: RelayCmd, id: &str, now_ms: u64) -> Result<RelayState, DoorError> {
        if *self.down.lock() {
            return Err(DoorError::Unreachable("link down".into()));
        }
        let msg = WireMessage::Command {
            cmd,
            id: id.to_string(),
            auth: self.secret.clone(),
        };
        let reply = self.core.lock().handle(&msg, now_ms);
        reply_state(reply, id)
    }
}

/// Line-protocol client. Reconnects on the next send after any failure.
pub struct TcpLink {
    address: String,
    secret: String,
    timeout: Duration,
    conn: Mutex<Option<BufReader<TcpStream>>>,
}

impl TcpLink {
    pub fn new(address: impl Into<String>, secret: impl Into<String>, timeout: Duration) -> Self {
        TcpLink {
            address: address.into(),
            secret: secret.into(),
            timeout,
            conn: Mutex::new(None),
        }
    }

    fn connect(&self) -> Result<BufReader<TcpStream>, DoorError> {
        let addr = self
            .address
            .to_socket_addrs()
            .map_err(|e| DoorError::Unreachable(format!("{}: {e}", self.address)))?
            .next()
            .ok_or_else(|| DoorError::Unreachable(self.address.clone()))?;
        let s = TcpStream::connect_timeout(&addr, self.timeout)
            .map_err(|e| DoorError::Unreachable(format!("{}: {e}", self.address)))?;
        s.set_read_timeout(Some(self.timeout))?;
        s.set_write_timeout(Some(self.timeout))?;
        s.set_nodelay(true)?;
        Ok(BufReader::new(s))
    }

    fn exchange(conn: &mut BufReader<TcpStream>, frame: &[u8]) -> Result<WireMessage, DoorError> {
        conn.get_mut().write_all(frame)?;
        let mut line = Vec::new();
        if conn.read_until(b'\n', &mut line)? == 0 {
            return Err(DoorError::Unreachable("connection closed".into()));
        }
        decode_frame(&line)
    }
}

impl DeviceLink for TcpLink {
    fn send(&self, cmd: RelayCmd, id: &str, _now_ms: u64) -> Result<RelayState, DoorError> {
        let frame = encode_frame(&WireMessage::Command {
            cmd,
            id: id.to_string(),
            auth: self.secret.clone(),
        });
        let mut guard = self.conn.lock();
        if guard.is_none() {
            *guard = Some(self.connect()?);
        }
        let result = Self::exchange(guard.as_mut().expect("connected"), &frame);
        if matches!(result, Err(DoorError::Io(_) | DoorError::Unreachable(_))) {
            *guard = None;
        }
        reply_state(result?, id)
    }
}

struct Inner {
    state: DoorState,
    last_contact_ms: Option<u64>,
    seq: u64,
}

/// Serializes commands and ticks through one lock and mirrors them onto
/// the switch. Any doubt resolves towards locked.
pub struct DoorController {
    inner: Mutex<Inner>,
    link: Arc<dyn DeviceLink>,
    heartbeat_ms: u64,
}

impl DoorController {
    /// `heartbeat_ms` should be well under the switch watchdog.
    pub fn new(link: Arc<dyn DeviceLink>, heartbeat_ms: u64) -> Self {
        DoorController {
            inner: Mutex::new(Inner {
                state: DoorState::locked(),
                last_contact_ms: None,
                seq: 0,
            }),
            link,
            heartbeat_ms,
        }
    }

    pub fn state(&self) -> DoorState {
        self.inner.lock().state.clone()
    }

    fn send(&self, inner: &mut Inner, cmd: RelayCmd, now_ms: u64) -> Result<RelayState, DoorError> {
        inner.seq += 1;
        let id = format!("c{}", inner.seq);
        let r = self.link.send(cmd, &id, now_ms);
        if r.is_ok() {
            inner.last_contact_ms = Some(now_ms);
        }
        r
    }

    /// Makes the switch agree with `inner.state`, or relocks when the switch
    /// reports off while we think it is on.
    fn settle(&self, inner: &mut Inner, reported: RelayState, now_ms: u64) {
        match (inner.state.lock, reported) {
            (Lock::Locked, RelayState::On) => {
                if let Err(e) = self.send(inner, RelayCmd::Off, now_ms) {
                    tracing::warn!(error = %e, "could not turn relay off; watchdog will");
                }
            }
            (Lock::Unlocked, RelayState::Off) => inner.state = inner.state.relock(),
            _ => {}
        }
    }

    pub fn command(&self, cmd: &DoorCommand, now_ms: u64) -> Result<DoorState, DoorError> {
        let mut inner = self.inner.lock();
        let (next, actions) = handle_command(&inner.state, cmd, now_ms)?;
        let before = std::mem::replace(&mut inner.state, next);
        for action in actions {
            match action {
                DeviceAction::Energize => match self.send(&mut inner, RelayCmd::On, now_ms) {
                    Ok(s) => self.settle(&mut inner, s, now_ms),
                    Err(e) => {
                        // never believe the door is open when the switch did not confirm it
                        inner.state = DoorState {
                            last_command_id: before.last_command_id.clone(),
                            ..before.relock()
                        };
                        return Err(e);
                    }
                },
                DeviceAction::DeEnergize => {
                    if let Err(e) = self.send(&mut inner, RelayCmd::Off, now_ms) {
                        tracing::warn!(error = %e, "relay off not confirmed");
                    }
                }
                DeviceAction::Report => {
                    let s = self.send(&mut inner, RelayCmd::Status, now_ms)?;
                    self.settle(&mut inner, s, now_ms);
                }
            }
        }
        Ok(inner.state.clone())
    }

    /// Auto-close plus heartbeats while unlocked.
    pub fn tick(&self, now_ms: u64) -> DoorState {
        let mut inner = self.inner.lock();
        let (next, actions) = tick(&inner.state, now_ms);
        inner.state = next;
        if actions.contains(&DeviceAction::DeEnergize) {
            if let Err(e) = self.send(&mut inner, RelayCmd::Off, now_ms) {
                tracing::warn!(error = %e, "relay off not confirmed");
            }
        } else if inner.state.lock == Lock::Unlocked {
            let due = inner
                .last_contact_ms
                .map_or(true, |t| now_ms.saturating_sub(t) >= self.heartbeat_ms);
            if due {
                if let Ok(s) = self.send(&mut inner, RelayCmd::Status, now_ms) {
                    self.settle(&mut inner, s, now_ms);
                }
            }
        }
        inner.state.clone()
    }

    /// Queries the switch and converges both sides.
    pub fn reconcile(&self, now_ms: u64) -> Result<(DoorState, RelayState), DoorError> {
        let mut inner = self.inner.lock();
        let s = self.send(&mut inner, RelayCmd::Status, now_ms)?;
        self.settle(&mut inner, s, now_ms);
        let after = if inner.state.lock == Lock::Locked && s == RelayState::On {
            self.send(&mut inner, RelayCmd::Status, now_ms)?
        } else {
            s
        };
        Ok((inner.state.clone(), after))
    }
}
