use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{Backend, LbpParams, LinearSvm, RecognitionError, SubspaceModel};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum BackendParams {
    LbpSvm { lbp: LbpParams, svm: LinearSvm },
    Subspace(SubspaceModel),
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingMetrics {
    pub samples: usize,
    pub classes: usize,
    pub training_accuracy: f64,
    pub duration_ms: u64,
}

/// A trained recognizer, immutable once published.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSnapshot {
    pub backend: Backend,
    /// Assigned by [`ModelStore::publish`]; 0 means unpublished.
    pub version: u64,
    pub classes: Vec<String>,
    pub params: BackendParams,
    /// Side of the square face crop `identify` expects.
    pub face_size: u32,
    /// Threshold suggested at training time (see `Identification`).
    pub unknown_threshold: f64,
    pub trained_at_ms: u64,
    pub data_digest: String,
    pub metrics: TrainingMetrics,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelManifest {
    pub backend: Backend,
    pub version: u64,
    pub classes: Vec<String>,
    pub data_digest: String,
    pub trained_at_ms: u64,
    pub unknown_threshold: f64,
    pub metrics: TrainingMetrics,
    /// sha256 of `model.bin`.
    pub model_sha256: String,
}

const MANIFEST: &str = "manifest.json";
const MODEL_BIN: &str = "model.bin";

/// Versioned snapshots under `<root>/<backend>/<version>/`.
///
/// A version directory is staged under a temporary name and renamed into
/// place, and only then swapped into the in-memory slot, so readers never
/// see a partial snapshot.
pub struct ModelStore {
    root: PathBuf,
    current: RwLock<BTreeMap<Backend, Arc<ModelSnapshot>>>,
    publish_lock: Mutex<()>,
    training: Mutex<HashSet<Backend>>,
}

/// Held while a backend is training; dropping it frees the slot.
pub struct TrainingGuard<'a> {
    store: &'a ModelStore,
    backend: Backend,
}

impl Drop for TrainingGuard<'_> {
    fn drop(&mut self) {
        self.store.training.lock().remove(&self.backend);
    }
}

impl ModelStore {
    /// Opens (creating if needed) a store and loads the newest version of
    /// each backend.
    pub fn open(root: impl AsRef<Path>) -> Result<Self, RecognitionError> {
        let root = root.as_ref().to_path_buf();
        fs::create_dir_all(&root)?;
        let store = ModelStore {
            root,
            current: RwLock::new(BTreeMap::new()),
            publish_lock: Mutex::new(()),
            training: Mutex::new(HashSet::new()),
        };
        for backend in Backend::ALL {
            if let Some(&v) = store.versions(backend)?.last() {
                let snap = store.load(backend, v)?;
                store.current.write().insert(backend, Arc::new(snap));
            }
        }
        Ok(store)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn backend_dir(&self, backend: Backend) -> PathBuf {
        self.root.join(backend.as_str())
    }

    /// Published versions in increasing order.
    pub fn versions(&self, backend: Backend) -> Result<Vec<u64>, RecognitionError> {
        let dir = self.backend_dir(backend);
        if !dir.exists() {
            return Ok(Vec::new());
        }
        let mut out = Vec::new();
        for entry in fs::read_dir(&dir)? {
            let entry = entry?;
            let name = entry.file_name();
            if let Some(v) = name.to_str().and_then(|s| s.parse::<u64>().ok()) {
                if entry.path().join(MANIFEST).exists() {
                    out.push(v);
                }
            }
        }
        out.sort_unstable();
        Ok(out)
    }

    pub fn latest(&self, backend: Backend) -> Option<Arc<ModelSnapshot>> {
        self.current.read().get(&backend).cloned()
    }

    pub fn manifest(&self, backend: Backend, version: u64) -> Result<ModelManifest, RecognitionError> {
        let path = self.backend_dir(backend).join(version.to_string()).join(MANIFEST);
        let text = fs::read_to_string(&path)?;
        serde_json::from_str(&text).map_err(|e| RecognitionError::Store(format!("{}: {e}", path.display())))
    }

    pub fn load(&self, backend: Backend, version: u64) -> Result<ModelSnapshot, RecognitionError> {
        let dir = self.backend_dir(backend).join(version.to_string());
        let manifest = self.manifest(backend, version)?;
        let bytes = fs::read(dir.join(MODEL_BIN))?;
        if hex::encode(Sha256::digest(&bytes)) != manifest.model_sha256 {
            return Err(RecognitionError::Store(format!(
                "{}: model.bin does not match manifest digest",
                dir.display()
            )));
        }
        let snap: ModelSnapshot =
            bincode::deserialize(&bytes).map_err(|e| RecognitionError::Store(e.to_string()))?;
        if snap.backend != backend || snap.version != version {
            return Err(RecognitionError::Store(format!(
                "{}: snapshot is {} v{}",
                dir.display(),
                snap.backend,
                snap.version
            )));
        }
        Ok(snap)
    }

    /// Assigns the next version, persists, then makes it current.
    pub fn publish(&self, mut snapshot: ModelSnapshot) -> Result<Arc<ModelSnapshot>, RecognitionError> {
        let _g = self.publish_lock.lock();
        let backend = snapshot.backend;
        let on_disk = self.versions(backend)?.last().copied().unwrap_or(0);
        let in_memory = self.latest(backend).map(|s| s.version).unwrap_or(0);
        snapshot.version = on_disk.max(in_memory) + 1;

        let bytes = bincode::serialize(&snapshot).map_err(|e| RecognitionError::Store(e.to_string()))?;
        let manifest = ModelManifest {
            backend,
            version: snapshot.version,
            classes: snapshot.classes.clone(),
            data_digest: snapshot.data_digest.clone(),
            trained_at_ms: snapshot.trained_at_ms,
            unknown_threshold: snapshot.unknown_threshold,
            metrics: snapshot.metrics.clone(),
            model_sha256: hex::encode(Sha256::digest(&bytes)),
        };
        let parent = self.backend_dir(backend);
        fs::create_dir_all(&parent)?;
        let staging = parent.join(format!(".staging-{}", snapshot.version));
        if staging.exists() {
            fs::remove_dir_all(&staging)?;
        }
        fs::create_dir(&staging)?;
        fs::write(staging.join(MODEL_BIN), &bytes)?;
        let json = serde_json::to_string_pretty(&manifest).map_err(|e| RecognitionError::Store(e.to_string()))?;
        fs::write(staging.join(MANIFEST), json)?;
        fs::rename(&staging, parent.join(snapshot.version.to_string()))?;

        let snap = Arc::new(snapshot);
        self.current.write().insert(backend, snap.clone());
        Ok(snap)
    }

    /// Claims the training slot for `backend`, or `None` if it is taken.
    pub fn try_begin_training(&self, backend: Backend) -> Option<TrainingGuard<'_>> {
        let mut t = self.training.lock();
        if t.insert(backend) {
            Some(TrainingGuard { store: self, backend })
        } else {
            None
        }
    }

    pub fn is_training(&self, backend: Backend) -> bool {
        self.training.lock().contains(&backend)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::recognition::{train_svm, FeatureVector, SvmConfig};

    fn snapshot() -> ModelSnapshot {
        let data = vec![
            (FeatureVector::new(vec![0.0, 1.0]), "a".to_string()),
            (FeatureVector::new(vec![1.0, 0.0]), "b".to_string()),
        ];
        let svm = train_svm(&data, &SvmConfig::default()).unwrap();
        ModelSnapshot {
            backend: Backend::LbpSvm,
            version: 0,
            classes: svm.classes().to_vec(),
            params: BackendParams::LbpSvm {
                lbp: LbpParams::default(),
                svm,
            },
            face_size: 128,
            unknown_threshold: 0.0,
            trained_at_ms: 1,
            data_digest: "d".into(),
            metrics: TrainingMetrics::default(),
        }
    }

    #[test]
    fn publish_increments_and_reloads() {
        let dir = tempfile::tempdir().unwrap();
        let store = ModelStore::open(dir.path()).unwrap();
        assert!(store.latest(Backend::LbpSvm).is_none());
        let a = store.publish(snapshot()).unwrap();
        let b = store.publish(snapshot()).unwrap();
        assert_eq!((a.version, b.version), (1, 2));
        assert_eq!(store.versions(Backend::LbpSvm).unwrap(), vec![1, 2]);
        let m = store.manifest(Backend::LbpSvm, 2).unwrap();
        assert_eq!(m.classes, vec!["a", "b"]);
        drop(store);
        let reopened = ModelStore::open(dir.path()).unwrap();
        assert_eq!(*reopened.latest(Backend::LbpSvm).unwrap(), *b);
        assert_eq!(reopened.publish(snapshot()).unwrap().version, 3);
    }

    #[test]
    fn staging_dirs_are_ignored() {
        let dir = tempfile::tempdir().unwrap();
        fs::create_dir_all(dir.path().join("lbp_svm/.staging-1")).unwrap();
        fs::create_dir_all(dir.path().join("lbp_svm/4")).unwrap();
        let store = ModelStore::open(dir.path()).unwrap();
        assert!(store.versions(Backend::LbpSvm).unwrap().is_empty());
    }

    #[test]
    fn corrupted_model_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let store = ModelStore::open(dir.path()).unwrap();
        store.publish(snapshot()).unwrap();
        fs::write(dir.path().join("lbp_svm/1/model.bin"), b"junk").unwrap();
        assert!(matches!(
            store.load(Backend::LbpSvm, 1),
            Err(RecognitionError::Store(_))
        ));
    }

    #[test]
    fn training_slot_is_exclusive() {
        let dir = tempfile::tempdir().unwrap();
        let store = ModelStore::open(dir.path()).unwrap();
        let g = store.try_begin_training(Backend::Eigenface).unwrap();
        assert!(store.try_begin_training(Backend::Eigenface).is_none());
        assert!(store.try_begin_training(Backend::LbpSvm).is_some());
        drop(g);
        assert!(store.try_begin_training(Backend::Eigenface).is_some());
    }
}
