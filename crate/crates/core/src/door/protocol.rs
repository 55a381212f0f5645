//! One JSON object per `\n`-terminated line, keys sorted, no whitespace.
//!
//! ```text
//! {"auth":"s","cmd":"on","id":"7"}
//! {"id":"7","state":"on"}
//! {"error":"auth","id":"7"}
//! ```

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::DoorError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelayCmd {
    On,
    Off,
    Status,
}

impl RelayCmd {
    pub fn as_str(&self) -> &'static str {
        match self {
            RelayCmd::On => "on",
            RelayCmd::Off => "off",
            RelayCmd::Status => "status",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelayState {
    On,
    Off,
}

impl RelayState {
    pub fn as_str(&self) -> &'static str {
        match self {
            RelayState::On => "on",
            RelayState::Off => "off",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum WireMessage {
    Command { cmd: RelayCmd, id: String, auth: String },
    Reply { state: RelayState, id: String },
    /// Sent back for frames the device refuses; `id` is absent when the
    /// frame could not be read at all.
    Error { error: String, id: Option<String> },
}

pub fn encode_frame(msg: &WireMessage) -> Vec<u8> {
    let mut m = Map::new();
    let s = |v: &str| Value::String(v.to_string());
    match msg {
        WireMessage::Command { cmd, id, auth } => {
            m.insert("auth".into(), s(auth));
            m.insert("cmd".into(), s(cmd.as_str()));
            m.insert("id".into(), s(id));
        }
        WireMessage::Reply { state, id } => {
            m.insert("id".into(), s(id));
            m.insert("state".into(), s(state.as_str()));
        }
        WireMessage::Error { error, id } => {
            m.insert("error".into(), s(error));
            if let Some(id) = id {
                m.insert("id".into(), s(id));
            }
        }
    }
    // serde_json's default map is ordered by key
    let mut out = serde_json::to_vec(&Value::Object(m)).expect("string map serializes");
    out.push(b'\n');
    out
}

fn take_str(m: &mut Map<String, Value>, key: &str) -> Result<Option<String>, DoorError> {
    match m.remove(key) {
        None => Ok(None),
        Some(Value::String(s)) => Ok(Some(s)),
        Some(other) => Err(DoorError::Malformed(format!("{key} is not a string: {other}"))),
    }
}

fn no_extra(m: &Map<String, Value>) -> Result<(), DoorError> {
    match m.keys().next() {
        Some(k) => Err(DoorError::Malformed(format!("unexpected key {k:?}"))),
        None => Ok(()),
    }
}

/// Reads one line. A single trailing newline is allowed; anything else that
/// is not exactly one canonical record is an error.
pub fn decode_frame(bytes: &[u8]) -> Result<WireMessage, DoorError> {
    let line = bytes.strip_suffix(b"\n").unwrap_or(bytes);
    if line.contains(&b'\n') {
        return Err(DoorError::Malformed("more than one line".into()));
    }
    let mut m = match serde_json::from_slice::<Value>(line) {
        Ok(Value::Object(m)) => m,
        Ok(_) => return Err(DoorError::Malformed("not an object".into())),
        Err(e) => return Err(DoorError::Malformed(e.to_string())),
    };
    if m.contains_key("cmd") {
        let cmd = take_str(&mut m, "cmd")?.unwrap_or_default();
        let auth = match m.remove("auth") {
            Some(Value::String(a)) if !a.is_empty() => a,
            _ => return Err(DoorError::BadAuth),
        };
        let id = take_str(&mut m, "id")?.ok_or_else(|| DoorError::Malformed("missing id".into()))?;
        no_extra(&m)?;
        let cmd = match cmd.as_str() {
            "on" => RelayCmd::On,
            "off" => RelayCmd::Off,
            "status" => RelayCmd::Status,
            _ => return Err(DoorError::UnknownCmd(cmd)),
        };
        Ok(WireMessage::Command { cmd, id, auth })
    } else if m.contains_key("state") {
        let state = match take_str(&mut m, "state")?.as_deref() {
            Some("on") => RelayState::On,
            Some("off") => RelayState::Off,
            other => return Err(DoorError::Malformed(format!("state {other:?}"))),
        };
        let id = take_str(&mut m, "id")?.ok_or_else(|| DoorError::Malformed("missing id".into()))?;
        no_extra(&m)?;
        Ok(WireMessage::Reply { state, id })
    } else if m.contains_key("error") {
        let error = take_str(&mut m, "error")?.unwrap_or_default();
        let id = take_str(&mut m, "id")?;
        no_extra(&m)?;
        Ok(WireMessage::Error { error, id })
    } else {
        Err(DoorError::Malformed("no cmd, state or error key".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn fixture_bytes() {
        let m = WireMessage::Command {
            cmd: RelayCmd::On,
            id: "7".into(),
            auth: "s".into(),
        };
        assert_eq!(encode_frame(&m), br#"{"auth":"s","cmd":"on","id":"7"}"#.iter().chain(b"\n").copied().collect::<Vec<_>>());
        let r = WireMessage::Reply {
            state: RelayState::Off,
            id: "7".into(),
        };
        assert_eq!(encode_frame(&r), b"{\"id\":\"7\",\"state\":\"off\"}\n".to_vec());
    }

    #[test]
    fn decode_errors() {
        assert!(matches!(decode_frame(b"garbage\n"), Err(DoorError::Malformed(_))));
        assert!(matches!(decode_frame(br#"{"cmd":"on","id":"1"}"#), Err(DoorError::BadAuth)));
        assert!(matches!(decode_frame(br#"{"auth":"","cmd":"on","id":"1"}"#), Err(DoorError::BadAuth)));
        assert!(matches!(decode_frame(br#"{"auth":"s","cmd":"open","id":"1"}"#), Err(DoorError::UnknownCmd(_))));
        assert!(matches!(decode_frame(br#"{"auth":"s","cmd":"on","id":"1","x":1}"#), Err(DoorError::Malformed(_))));
        assert!(matches!(decode_frame(b"{\"id\":\"1\",\"state\":\"on\"}\n\n"), Err(DoorError::Malformed(_))));
    }

    fn message() -> impl Strategy<Value = WireMessage> {
        let text = || "\\PC{0,12}";
        prop_oneof![
            (0usize..3, text(), "\\PC{1,12}").prop_map(|(c, id, auth)| WireMessage::Command {
                cmd: [RelayCmd::On, RelayCmd::Off, RelayCmd::Status][c],
                id,
                auth,
            }),
            (any::<bool>(), text()).prop_map(|(on, id)| WireMessage::Reply {
                state: if on { RelayState::On } else { RelayState::Off },
                id,
            }),
            (text(), proptest::option::of(text())).prop_map(|(error, id)| WireMessage::Error { error, id }),
        ]
    }

    proptest! {
        #[test]
        fn round_trip(m in message()) {
            let bytes = encode_frame(&m);
            prop_assert_eq!(bytes.iter().filter(|&&b| b == b'\n').count(), 1);
            let back = decode_frame(&bytes).unwrap();
            prop_assert_eq!(&back, &m);
            prop_assert_eq!(encode_frame(&back), bytes);
        }
    }
}
