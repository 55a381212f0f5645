use std::fs::{self, File, OpenOptions};
use std::io::{Read, Seek, SeekFrom, Write};
use std::marker::PhantomData;
use std::path::{Path, PathBuf};

use parking_lot::{Mutex, RwLock};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::GatewayError;
use crate::description::{DescriptionFacts, ThreatLevel};
use crate::recognition::Identification;
use crate::vision::BoundingBox;

/// One person seen at one camera.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Event {
    /// `<seq>-<camera>`, zero-padded so ids sort in append order.
    pub event_id: String,
    pub timestamp_ms: u64,
    pub camera_id: String,
    /// `None` when a person was reported without a usable face.
    pub identification: Option<Identification>,
    /// Enrolled id on a match.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub person_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub face: Option<BoundingBox>,
    pub facts: DescriptionFacts,
    pub description: String,
    pub threat: ThreatLevel,
    /// `<sha256>.png` under the image directory.
    pub image_ref: String,
    /// Stages that fell back to unknown, e.g. `items` after an adapter timeout.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub degraded: Vec<String>,
}

/// Conjunction of the set fields.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventFilter {
    /// Inclusive lower bound on `timestamp_ms`.
    pub since: Option<u64>,
    pub camera: Option<String>,
    pub threat: Option<ThreatLevel>,
}

impl EventFilter {
    pub fn matches(&self, e: &Event) -> bool {
        self.since.map_or(true, |s| e.timestamp_ms >= s)
            && self.camera.as_deref().map_or(true, |c| e.camera_id == c)
            && self.threat.map_or(true, |t| e.threat == t)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub at_ms: u64,
    pub operator: String,
    pub event_id: String,
    pub duration_s: u32,
    pub command_id: String,
    /// `ok` or the error text.
    pub outcome: String,
}

/// Newline-delimited JSON, one writer. Each record goes out in a single
/// write followed by fsync; a torn tail left by a crash is cut on reopen.
pub struct NdjsonLog<T> {
    path: PathBuf,
    file: Mutex<File>,
    records: RwLock<Vec<T>>,
    _t: PhantomData<fn() -> T>,
}

/// Reads every complete record; returns them and the byte length they span.
fn read_prefix<T: DeserializeOwned>(bytes: &[u8]) -> (Vec<T>, usize) {
    let mut out = Vec::new();
    let mut good = 0;
    let mut start = 0;
    while let Some(n) = bytes[start..].iter().position(|&b| b == b'\n') {
        let line = &bytes[start..start + n];
        match serde_json::from_slice::<T>(line) {
            Ok(r) => out.push(r),
            Err(_) => break,
        }
        start += n + 1;
        good = start;
    }
    (out, good)
}

impl<T: Serialize + DeserializeOwned + Clone> NdjsonLog<T> {
    pub fn open(path: impl AsRef<Path>) -> Result<Self, GatewayError> {
        let path = path.as_ref().to_path_buf();
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        let mut file = OpenOptions::new().read(true).append(true).create(true).open(&path)?;
        let mut bytes = Vec::new();
        file.read_to_end(&mut bytes)?;
        let (records, good) = read_prefix::<T>(&bytes);
        if good < bytes.len() {
            tracing::warn!(path = %path.display(), kept = records.len(), cut = bytes.len() - good, "truncating torn log tail");
            file.set_len(good as u64)?;
            file.sync_all()?;
        }
        file.seek(SeekFrom::End(0))?;
        Ok(NdjsonLog {
            path,
            file: Mutex::new(file),
            records: RwLock::new(records),
            _t: PhantomData,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&self, record: &T) -> Result<(), GatewayError> {
        let mut line = serde_json::to_vec(record).map_err(|e| GatewayError::Storage(e.to_string()))?;
        line.push(b'\n');
        let mut f = self.file.lock();
        f.write_all(&line)?;
        f.sync_data()?;
        self.records.write().push(record.clone());
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.records.read().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn all(&self) -> Vec<T> {
        self.records.read().clone()
    }

    pub fn filtered(&self, keep: impl Fn(&T) -> bool) -> Vec<T> {
        self.records.read().iter().filter(|r| keep(r)).cloned().collect()
    }

    pub fn find(&self, keep: impl Fn(&T) -> bool) -> Option<T> {
        self.records.read().iter().find(|r| keep(r)).cloned()
    }
}

/// Every record in `path` up to the first torn or unreadable line, without
/// modifying the file.
pub fn read_log<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<Vec<T>, GatewayError> {
    match fs::read(path.as_ref()) {
        Ok(bytes) => Ok(read_prefix(&bytes).0),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Vec::new()),
        Err(e) => Err(e.into()),
    }
}

pub type EventLog = NdjsonLog<Event>;
pub type AuditLog = NdjsonLog<AuditRecord>;

/// Content-addressed PNG files.
pub struct ImageStore {
    dir: PathBuf,
}

impl ImageStore {
    pub fn open(dir: impl AsRef<Path>) -> Result<Self, GatewayError> {
        fs::create_dir_all(dir.as_ref())?;
        Ok(ImageStore {
            dir: dir.as_ref().to_path_buf(),
        })
    }

    /// Stores `png` and returns its reference. Identical bytes share a file.
    pub fn put(&self, png: &[u8]) -> Result<String, GatewayError> {
        let name = format!("{}.png", hex::encode(Sha256::digest(png)));
        let path = self.dir.join(&name);
        if !path.exists() {
            let tmp = self.dir.join(format!(".{name}.tmp"));
            {
                let mut f = File::create(&tmp)?;
                f.write_all(png)?;
                f.sync_all()?;
            }
            fs::rename(&tmp, &path)?;
        }
        Ok(name)
    }

    /// Writes and removes a scratch file.
    pub fn probe(&self) -> Result<(), GatewayError> {
        let tmp = self.dir.join(".probe.tmp");
        File::create(&tmp)?.write_all(b"ok")?;
        fs::remove_file(&tmp)?;
        Ok(())
    }

    /// Path of a stored reference; `None` for refs that are not of the
    /// `<hex>.png` form.
    pub fn path(&self, image_ref: &str) -> Option<PathBuf> {
        let hex = image_ref.strip_suffix(".png")?;
        (hex.len() == 64 && hex.bytes().all(|b| b.is_ascii_hexdigit())).then(|| self.dir.join(image_ref))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::description::DescriptionFacts;

    pub(crate) fn event(seq: u64, camera: &str, ts: u64, threat: ThreatLevel) -> Event {
        Event {
            event_id: format!("{seq:010}-{camera}"),
            timestamp_ms: ts,
            camera_id: camera.into(),
            identification: None,
            person_id: None,
            face: None,
            facts: DescriptionFacts::unknown("at the back door"),
            description: "An unknown person at the back door".into(),
            threat,
            image_ref: "x.png".into(),
            degraded: Vec::new(),
        }
    }

    #[test]
    fn append_query_reopen() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("events.ndjson");
        let log = EventLog::open(&path).unwrap();
        log.append(&event(1, "front_door", 10, ThreatLevel::None)).unwrap();
        log.append(&event(2, "back_door", 20, ThreatLevel::High)).unwrap();
        let high = EventFilter {
            threat: Some(ThreatLevel::High),
            ..Default::default()
        };
        assert_eq!(log.filtered(|e| high.matches(e)).len(), 1);
        let future = EventFilter {
            since: Some(1_000),
            ..Default::default()
        };
        assert!(log.filtered(|e| future.matches(e)).is_empty());
        drop(log);
        assert_eq!(EventLog::open(&path).unwrap().len(), 2);
    }

    #[test]
    fn torn_tail_is_cut() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("events.ndjson");
        let log = EventLog::open(&path).unwrap();
        for i in 0..3 {
            log.append(&event(i, "front_door", i * 10, ThreatLevel::None)).unwrap();
        }
        let full = log.all();
        drop(log);
        let bytes = fs::read(&path).unwrap();
        for cut in 0..bytes.len() {
            fs::write(&path, &bytes[..cut]).unwrap();
            let back = EventLog::open(&path).unwrap().all();
            assert_eq!(back[..], full[..back.len()], "cut at {cut}");
            // the reopened file holds only whole lines
            let kept = fs::read(&path).unwrap();
            assert!(kept.is_empty() || kept.ends_with(b"\n"));
        }
    }

    #[test]
    fn images_are_content_addressed() {
        let dir = tempfile::tempdir().unwrap();
        let s = ImageStore::open(dir.path()).unwrap();
        let a = s.put(b"one").unwrap();
        assert_eq!(a, s.put(b"one").unwrap());
        assert_ne!(a, s.put(b"two").unwrap());
        assert_eq!(fs::read(s.path(&a).unwrap()).unwrap(), b"one");
        assert!(s.path("../etc/passwd").is_none());
    }
}
