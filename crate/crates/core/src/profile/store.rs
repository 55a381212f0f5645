use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::{SystemTime, UNIX_EPOCH};

use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{
    position_feedback, rotation_feedback, GuidanceKind, GuidanceMessage, GyroSample, ProfileError,
    DEFAULT_MIN_AREA_FRACTION, DEFAULT_ROTATION_LIMIT_DPS,
};
use crate::description::Group;
use crate::recognition::{normalize_face, LabeledFace};
use crate::vision::{to_grayscale, BoundingBox, FaceDetector, Frame};

const RECORD: &str = "profile.json";
const IMAGES: &str = "images";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Demographics {
    pub name: String,
    #[serde(default)]
    pub email: Option<String>,
    #[serde(default)]
    pub phone: Option<String>,
    pub group: Group,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageRecord {
    /// `<sha256 of the PNG>.png` under the person's `images/`.
    pub image_ref: String,
    pub face: BoundingBox,
    pub width: u32,
    pub height: u32,
    pub captured_ms: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PersonProfile {
    pub person_id: String,
    pub name: String,
    pub email: Option<String>,
    pub phone: Option<String>,
    pub group: Group,
    pub images: Vec<ImageRecord>,
    pub enrolled_ms: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CaptureQuality {
    pub min_area_fraction: f64,
    /// Captures taken while the phone turns faster than this are blurred.
    pub max_rotation_dps: f64,
}

impl Default for CaptureQuality {
    fn default() -> Self {
        CaptureQuality {
            min_area_fraction: DEFAULT_MIN_AREA_FRACTION,
            max_rotation_dps: DEFAULT_ROTATION_LIMIT_DPS,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum AddImageOutcome {
    Accepted(ImageRecord),
    Rejected(GuidanceMessage),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingEntry {
    pub person_id: String,
    pub image_ref: String,
    pub path: PathBuf,
    pub face: BoundingBox,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingSet {
    pub entries: Vec<TrainingEntry>,
    /// sha256 over the sorted `(person, image, box)` rows.
    pub digest: String,
}

impl TrainingSet {
    pub fn persons(&self) -> usize {
        let mut ids: Vec<&str> = self.entries.iter().map(|e| e.person_id.as_str()).collect();
        ids.dedup();
        ids.len()
    }

    /// Crops each stored face box and normalizes it to `side x side`.
    pub fn load_faces(&self, side: u32) -> Result<Vec<LabeledFace>, ProfileError> {
        self.entries
            .iter()
            .map(|e| {
                let gray = to_grayscale(&Frame::load(&e.path, "profile", 0)?);
                let face = normalize_face(&gray, &e.face, side).map_err(|err| ProfileError::Record {
                    path: e.path.display().to_string(),
                    message: err.to_string(),
                })?;
                Ok(LabeledFace {
                    face,
                    label: e.person_id.clone(),
                    source: e.path.clone(),
                })
            })
            .collect()
    }
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

fn valid_email(e: &str) -> bool {
    let mut parts = e.split('@');
    let (Some(local), Some(domain), None) = (parts.next(), parts.next(), parts.next()) else {
        return false;
    };
    !local.is_empty()
        && domain.contains('.')
        && !domain.starts_with('.')
        && !domain.ends_with('.')
        && !e.chars().any(char::is_whitespace)
}

fn clean(d: &Demographics) -> Result<Demographics, ProfileError> {
    let name = d.name.trim();
    if name.is_empty() || name.chars().any(char::is_control) {
        return Err(ProfileError::InvalidName);
    }
    if d.group == Group::Unknown {
        return Err(ProfileError::InvalidGroup);
    }
    let email = d.email.as_deref().map(str::trim).filter(|e| !e.is_empty());
    if let Some(e) = email {
        if !valid_email(e) {
            return Err(ProfileError::InvalidEmail(e.to_string()));
        }
    }
    let phone = d.phone.as_deref().map(str::trim).filter(|p| !p.is_empty());
    if let Some(p) = phone {
        if !p.bytes().all(|b| b.is_ascii_digit()) {
            return Err(ProfileError::InvalidPhone(p.to_string()));
        }
    }
    Ok(Demographics {
        name: name.to_string(),
        email: email.map(str::to_string),
        phone: phone.map(str::to_string),
        group: d.group,
    })
}

/// Directory-backed profiles: `<root>/<person_id>/profile.json` plus
/// content-addressed `images/`. Records are replaced by rename, images are
/// never rewritten.
pub struct ProfileStore {
    root: PathBuf,
    profiles: RwLock<BTreeMap<String, PersonProfile>>,
    writer: Mutex<()>,
    counter: AtomicU64,
}

impl ProfileStore {
    pub fn open(root: impl AsRef<Path>) -> Result<Self, ProfileError> {
        let root = root.as_ref().to_path_buf();
        std::fs::create_dir_all(&root)?;
        let mut profiles = BTreeMap::new();
        for entry in std::fs::read_dir(&root)? {
            let path = entry?.path().join(RECORD);
            if !path.is_file() {
                continue;
            }
            let text = std::fs::read_to_string(&path)?;
            let p: PersonProfile = serde_json::from_str(&text).map_err(|e| ProfileError::Record {
                path: path.display().to_string(),
                message: e.to_string(),
            })?;
            profiles.insert(p.person_id.clone(), p);
        }
        Ok(ProfileStore {
            root,
            profiles: RwLock::new(profiles),
            writer: Mutex::new(()),
            counter: AtomicU64::new(0),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn get(&self, person_id: &str) -> Option<PersonProfile> {
        self.profiles.read().get(person_id).cloned()
    }

    pub fn list(&self) -> Vec<PersonProfile> {
        self.profiles.read().values().cloned().collect()
    }

    pub fn len(&self) -> usize {
        self.profiles.read().len()
    }

    pub fn is_empty(&self) -> bool {
        self.profiles.read().is_empty()
    }

    pub fn image_path(&self, person_id: &str, image_ref: &str) -> PathBuf {
        self.root.join(person_id).join(IMAGES).join(image_ref)
    }

    fn write_record(&self, p: &PersonProfile) -> Result<(), ProfileError> {
        let dir = self.root.join(&p.person_id);
        std::fs::create_dir_all(dir.join(IMAGES))?;
        let tmp = dir.join(format!(".{RECORD}.tmp"));
        let text = serde_json::to_string_pretty(p).map_err(|e| ProfileError::Record {
            path: tmp.display().to_string(),
            message: e.to_string(),
        })?;
        std::fs::write(&tmp, text)?;
        std::fs::rename(&tmp, dir.join(RECORD))?;
        Ok(())
    }

    fn fresh_id(&self, d: &Demographics) -> String {
        let n = self.counter.fetch_add(1, Ordering::Relaxed);
        let mut h = Sha256::new();
        h.update(d.name.as_bytes());
        h.update([0]);
        h.update(d.phone.as_deref().unwrap_or("").as_bytes());
        h.update([0]);
        h.update(now_ms().to_le_bytes());
        h.update(n.to_le_bytes());
        format!("p{}", &hex::encode(h.finalize())[..12])
    }

    /// Enrolls under a generated id.
    pub fn enroll(&self, demographics: &Demographics) -> Result<PersonProfile, ProfileError> {
        self.enroll_inner(None, demographics)
    }

    /// Enrolls under a caller-chosen id, e.g. one that matches corpus labels.
    pub fn enroll_with_id(&self, person_id: &str, demographics: &Demographics) -> Result<PersonProfile, ProfileError> {
        let ok = !person_id.is_empty()
            && person_id
                .bytes()
                .all(|b| b.is_ascii_alphanumeric() || b == b'_' || b == b'-');
        if !ok {
            return Err(ProfileError::Record {
                path: person_id.to_string(),
                message: "person id must be [A-Za-z0-9_-]+".into(),
            });
        }
        self.enroll_inner(Some(person_id.to_string()), demographics)
    }

    fn enroll_inner(&self, id: Option<String>, demographics: &Demographics) -> Result<PersonProfile, ProfileError> {
        let d = clean(demographics)?;
        let _w = self.writer.lock();
        {
            let profiles = self.profiles.read();
            if profiles.values().any(|p| p.name == d.name && p.phone == d.phone) {
                return Err(ProfileError::Duplicate {
                    name: d.name,
                    phone: d.phone,
                });
            }
            if let Some(id) = &id {
                if profiles.contains_key(id) {
                    return Err(ProfileError::Record {
                        path: id.clone(),
                        message: "person id already in use".into(),
                    });
                }
            }
        }
        let person_id = match id {
            Some(id) => id,
            None => loop {
                let id = self.fresh_id(&d);
                if !self.profiles.read().contains_key(&id) {
                    break id;
                }
            },
        };
        let p = PersonProfile {
            person_id: person_id.clone(),
            name: d.name,
            email: d.email,
            phone: d.phone,
            group: d.group,
            images: Vec::new(),
            enrolled_ms: now_ms(),
        };
        self.write_record(&p)?;
        self.profiles.write().insert(person_id, p.clone());
        Ok(p)
    }

    /// Guided capture: exactly one face, large enough, centered, away from
    /// every frame edge, and (when gyro samples are given) not blurred by
    /// turning too fast.
    pub fn add_face_image(
        &self,
        person_id: &str,
        frame: &Frame,
        detector: &FaceDetector,
        quality: &CaptureQuality,
        gyro: &[GyroSample],
    ) -> Result<AddImageOutcome, ProfileError> {
        if self.get(person_id).is_none() {
            return Err(ProfileError::UnknownPerson(person_id.to_string()));
        }
        if gyro.len() >= 2 {
            if let Some(m) = rotation_feedback(gyro, quality.max_rotation_dps)? {
                return Ok(AddImageOutcome::Rejected(m));
            }
        }
        let faces = detector.detect(&to_grayscale(frame));
        let face = match faces.as_slice() {
            [] => return Err(ProfileError::NoFace),
            [f] => *f,
            many => return Err(ProfileError::MultipleFaces(many.len())),
        };
        let (w, h) = (frame.width(), frame.height());
        let mut msg = position_feedback(&face, w, h, quality.min_area_fraction)?;
        if msg.is_ok() && face.touches_edge(w, h) {
            msg = edge_message(&face, w, h);
        }
        if !msg.is_ok() {
            return Ok(AddImageOutcome::Rejected(msg));
        }
        Ok(AddImageOutcome::Accepted(self.store_image(person_id, frame, face)?))
    }

    /// Stores a frame with a known face box, no guidance checks. Used for
    /// bulk imports of already curated images.
    pub fn import_face_image(&self, person_id: &str, frame: &Frame, face: BoundingBox) -> Result<ImageRecord, ProfileError> {
        if self.get(person_id).is_none() {
            return Err(ProfileError::UnknownPerson(person_id.to_string()));
        }
        if !frame.bounds().contains(&face) || face.width == 0 || face.height == 0 {
            return Err(ProfileError::Frame(format!("face box {face:?} outside frame")));
        }
        self.store_image(person_id, frame, face)
    }

    fn store_image(&self, person_id: &str, frame: &Frame, face: BoundingBox) -> Result<ImageRecord, ProfileError> {
        let png = frame.encode_png()?;
        let image_ref = format!("{}.png", hex::encode(Sha256::digest(&png)));
        let _w = self.writer.lock();
        let mut p = self
            .get(person_id)
            .ok_or_else(|| ProfileError::UnknownPerson(person_id.to_string()))?;
        let path = self.image_path(person_id, &image_ref);
        if !path.exists() {
            std::fs::create_dir_all(path.parent().expect("images dir"))?;
            let tmp = path.with_extension("tmp");
            std::fs::write(&tmp, &png)?;
            std::fs::rename(&tmp, &path)?;
        }
        let record = ImageRecord {
            image_ref,
            face,
            width: frame.width(),
            height: frame.height(),
            captured_ms: frame.timestamp_ms(),
        };
        if let Some(existing) = p.images.iter().find(|r| r.image_ref == record.image_ref) {
            return Ok(existing.clone());
        }
        p.images.push(record.clone());
        self.write_record(&p)?;
        self.profiles.write().insert(p.person_id.clone(), p);
        Ok(record)
    }

    /// Everyone with at least one image. Needs two such people.
    pub fn export_training_set(&self) -> Result<TrainingSet, ProfileError> {
        let profiles = self.profiles.read();
        let mut entries: Vec<TrainingEntry> = profiles
            .values()
            .flat_map(|p| {
                p.images.iter().map(|r| TrainingEntry {
                    person_id: p.person_id.clone(),
                    image_ref: r.image_ref.clone(),
                    path: self.image_path(&p.person_id, &r.image_ref),
                    face: r.face,
                })
            })
            .collect();
        entries.sort_by(|a, b| (&a.person_id, &a.image_ref).cmp(&(&b.person_id, &b.image_ref)));
        let set = TrainingSet {
            digest: {
                let mut h = Sha256::new();
                for e in &entries {
                    let f = e.face;
                    h.update(format!("{}\t{}\t{},{},{},{}\n", e.person_id, e.image_ref, f.x, f.y, f.width, f.height));
                }
                hex::encode(h.finalize())
            },
            entries,
        };
        if set.persons() < 2 {
            return Err(ProfileError::InsufficientData(format!(
                "{} person(s) with images, need 2",
                set.persons()
            )));
        }
        Ok(set)
    }
}

/// Position hint for a box that is centered but cut off by a frame edge:
/// the cell is pushed towards the edge it touches.
fn edge_message(face: &BoundingBox, w: u32, h: u32) -> GuidanceMessage {
    use super::{Column, Row};
    let row = if face.y == 0 && face.bottom() < h {
        Row::Top
    } else if face.bottom() >= h && face.y > 0 {
        Row::Bottom
    } else {
        Row::Center
    };
    let column = if face.x == 0 && face.right() < w {
        Column::Left
    } else if face.right() >= w && face.x > 0 {
        Column::Right
    } else {
        Column::Center
    };
    // a box touching opposite edges keeps the center cell, which is still
    // reported as a position rather than ok
    GuidanceMessage {
        kind: GuidanceKind::Position { row, column },
        text: super::phrase(GuidanceKind::Position { row, column }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vision::GrayImage;

    fn john() -> Demographics {
        Demographics {
            name: "John".into(),
            email: Some("j@x.org".into()),
            phone: Some("9015550000".into()),
            group: Group::Friend,
        }
    }

    #[test]
    fn enroll_validation_and_duplicates() {
        let dir = tempfile::tempdir().unwrap();
        let s = ProfileStore::open(dir.path()).unwrap();
        let p = s.enroll(&john()).unwrap();
        assert!(p.images.is_empty());
        assert!(matches!(s.enroll(&john()), Err(ProfileError::Duplicate { .. })));
        let mut bad = john();
        bad.name = "  ".into();
        assert!(matches!(s.enroll(&bad), Err(ProfileError::InvalidName)));
        let mut bad = john();
        bad.phone = Some("901-555".into());
        assert!(matches!(s.enroll(&bad), Err(ProfileError::InvalidPhone(_))));
        let mut bad = john();
        bad.email = Some("nobody".into());
        assert!(matches!(s.enroll(&bad), Err(ProfileError::InvalidEmail(_))));
        let again = ProfileStore::open(dir.path()).unwrap();
        assert_eq!(again.get(&p.person_id), Some(p));
    }

    #[test]
    fn blank_frame_has_no_face() {
        let dir = tempfile::tempdir().unwrap();
        let s = ProfileStore::open(dir.path()).unwrap();
        let p = s.enroll(&john()).unwrap();
        let blank = Frame::from_gray("phone", 1, &GrayImage::filled(160, 120, 128));
        let r = s.add_face_image(&p.person_id, &blank, &FaceDetector::bundled(), &CaptureQuality::default(), &[]);
        assert!(matches!(r, Err(ProfileError::NoFace)));
        assert_eq!(ProfileError::NoFace.to_string(), "no face detected");
        assert!(matches!(
            s.add_face_image("nobody", &blank, &FaceDetector::bundled(), &CaptureQuality::default(), &[]),
            Err(ProfileError::UnknownPerson(_))
        ));
    }

    #[test]
    fn export_digest_tracks_content() {
        let dir = tempfile::tempdir().unwrap();
        let s = ProfileStore::open(dir.path()).unwrap();
        let a = s.enroll(&john()).unwrap();
        let frame = |v: u8| Frame::from_gray("phone", 1, &GrayImage::from_fn(40, 40, |x, y| (x + y) as u8 ^ v));
        let face = BoundingBox::new(5, 5, 30, 30);
        s.import_face_image(&a.person_id, &frame(0), face).unwrap();
        assert!(matches!(s.export_training_set(), Err(ProfileError::InsufficientData(_))));
        let mut maria = john();
        maria.name = "Maria".into();
        let b = s.enroll(&maria).unwrap();
        s.import_face_image(&b.person_id, &frame(1), face).unwrap();
        let one = s.export_training_set().unwrap();
        assert_eq!(one, s.export_training_set().unwrap());
        assert_eq!(one.entries.len(), 2);
        // re-adding identical bytes is a no-op
        s.import_face_image(&b.person_id, &frame(1), face).unwrap();
        assert_eq!(one.digest, s.export_training_set().unwrap().digest);
        s.import_face_image(&b.person_id, &frame(2), face).unwrap();
        assert_ne!(one.digest, s.export_training_set().unwrap().digest);
        let faces = one.load_faces(16).unwrap();
        assert_eq!(faces[0].face.width(), 16);
    }
}
