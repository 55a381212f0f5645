//! Fail-secure door lock: the controller state machine, the line protocol
//! spoken with the relay switch, a simulated switch and the controller that
//! drives it.
//!
//! The solenoid is inverted: relay on means unlocked, so losing power or
//! the network leaves the door locked.

mod controller;
mod device;
mod protocol;

pub use controller::{DeviceLink, DoorController, LocalLink, TcpLink};
pub use device::{DeviceConfig, DeviceCore, DeviceHandle, DeviceSim};
pub use protocol::{decode_frame, encode_frame, RelayCmd, RelayState, WireMessage};

use serde::{Deserialize, Serialize};

pub const MIN_UNLOCK_SECONDS: u32 = 1;
pub const MAX_UNLOCK_SECONDS: u32 = 300;
pub const DEFAULT_UNLOCK_SECONDS: u32 = 10;
pub const DEFAULT_WATCHDOG_SECONDS: f64 = 30.0;

#[derive(Debug, thiserror::Error)]
pub enum DoorError {
    #[error("unlock duration {0}s outside {MIN_UNLOCK_SECONDS}..={MAX_UNLOCK_SECONDS}")]
    Duration(u32),
    #[error("malformed frame: {0}")]
    Malformed(String),
    #[error("bad auth field")]
    BadAuth,
    #[error("unknown cmd {0:?}")]
    UnknownCmd(String),
    #[error("device rejected command: {0}")]
    Rejected(String),
    #[error("device unreachable: {0}")]
    Unreachable(String),
    #[error("invalid device config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Lock {
    /// De-energized.
    Locked,
    /// Energized.
    Unlocked,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DoorState {
    pub lock: Lock,
    /// Milliseconds; set exactly when unlocked.
    pub auto_close_deadline: Option<u64>,
    pub last_command_id: Option<String>,
}

impl DoorState {
    pub fn locked() -> Self {
        DoorState {
            lock: Lock::Locked,
            auto_close_deadline: None,
            last_command_id: None,
        }
    }

    pub fn is_locked(&self) -> bool {
        self.lock == Lock::Locked
    }

    fn relock(&self) -> Self {
        DoorState {
            lock: Lock::Locked,
            auto_close_deadline: None,
            last_command_id: self.last_command_id.clone(),
        }
    }
}

impl Default for DoorState {
    fn default() -> Self {
        Self::locked()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum CommandKind {
    Unlock { duration_s: u32 },
    Lock,
    Status,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DoorCommand {
    #[serde(flatten)]
    pub kind: CommandKind,
    pub command_id: String,
    pub issued_by: String,
}

impl DoorCommand {
    pub fn new(kind: CommandKind, command_id: impl Into<String>, issued_by: impl Into<String>) -> Self {
        DoorCommand {
            kind,
            command_id: command_id.into(),
            issued_by: issued_by.into(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeviceAction {
    Energize,
    DeEnergize,
    Report,
}

/// Applies one command at `now_ms`. A repeat of the last command id changes
/// nothing and emits nothing.
pub fn handle_command(
    state: &DoorState,
    cmd: &DoorCommand,
    now_ms: u64,
) -> Result<(DoorState, Vec<DeviceAction>), DoorError> {
    if let CommandKind::Unlock { duration_s } = cmd.kind {
        if !(MIN_UNLOCK_SECONDS..=MAX_UNLOCK_SECONDS).contains(&duration_s) {
            return Err(DoorError::Duration(duration_s));
        }
    }
    if state.last_command_id.as_deref() == Some(cmd.command_id.as_str()) {
        return Ok((state.clone(), Vec::new()));
    }
    let id = Some(cmd.command_id.clone());
    Ok(match cmd.kind {
        CommandKind::Unlock { duration_s } => (
            DoorState {
                lock: Lock::Unlocked,
                auto_close_deadline: Some(now_ms + duration_s as u64 * 1000),
                last_command_id: id,
            },
            vec![DeviceAction::Energize],
        ),
        CommandKind::Lock => {
            let actions = if state.is_locked() {
                Vec::new()
            } else {
                vec![DeviceAction::DeEnergize]
            };
            (
                DoorState {
                    last_command_id: id,
                    ..state.relock()
                },
                actions,
            )
        }
        CommandKind::Status => (
            DoorState {
                last_command_id: id,
                ..state.clone()
            },
            vec![DeviceAction::Report],
        ),
    })
}

/// Relocks once the deadline is reached (inclusive).
pub fn tick(state: &DoorState, now_ms: u64) -> (DoorState, Vec<DeviceAction>) {
    match (state.lock, state.auto_close_deadline) {
        (Lock::Unlocked, Some(d)) if now_ms >= d => (state.relock(), vec![DeviceAction::DeEnergize]),
        (Lock::Unlocked, None) => (state.relock(), vec![DeviceAction::DeEnergize]),
        _ => (state.clone(), Vec::new()),
    }
}
