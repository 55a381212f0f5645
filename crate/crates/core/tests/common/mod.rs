#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::{Arc, OnceLock};

use doorwatch::door::{DeviceCore, LocalLink};
use doorwatch::gateway::{Gateway, SystemConfig};
use doorwatch::notify::{MockTransport, NotifyMode};
use parking_lot::Mutex;

pub const ASSETS: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/assets");

pub fn asset(rel: &str) -> PathBuf {
    Path::new(ASSETS).join(rel)
}

fn copy_dir(from: &Path, to: &Path) {
    std::fs::create_dir_all(to).unwrap();
    for e in std::fs::read_dir(from).unwrap() {
        let e = e.unwrap();
        let target = to.join(e.file_name());
        if e.file_type().unwrap().is_dir() {
            copy_dir(&e.path(), &target);
        } else {
            std::fs::copy(e.path(), target).unwrap();
        }
    }
}

pub fn config(data_dir: &Path) -> SystemConfig {
    let mut c = SystemConfig {
        data_dir: data_dir.to_path_buf(),
        ..SystemConfig::default()
    };
    c.notify.prefs.mode = NotifyMode::Email;
    c.notify.prefs.emails = vec!["home@example.org".into()];
    c.api.token = "test-token".into();
    c
}

pub struct Rig {
    pub gw: Arc<Gateway>,
    pub mail: Arc<MockTransport>,
    pub door: Arc<LocalLink>,
    pub dir: tempfile::TempDir,
}

pub fn open(dir: tempfile::TempDir, tweak: impl FnOnce(&mut SystemConfig)) -> Rig {
    let mut c = config(dir.path());
    tweak(&mut c);
    let mail = Arc::new(MockTransport::new());
    let door = Arc::new(LocalLink::new(Arc::new(Mutex::new(DeviceCore::new("s", 30_000, 0))), "s"));
    let gw = Arc::new(Gateway::open_with(c, mail.clone(), door.clone()).unwrap());
    Rig { gw, mail, door, dir }
}

/// A data directory with the desk corpus enrolled and lbp_svm plus the
/// attribute models trained, built once per test binary.
fn template() -> &'static Path {
    static T: OnceLock<PathBuf> = OnceLock::new();
    T.get_or_init(|| {
        let bin = std::env::current_exe().unwrap();
        let name = bin.file_stem().unwrap().to_string_lossy().to_string();
        let root = Path::new(env!("CARGO_TARGET_TMPDIR")).join(format!("trained-{name}"));
        let _ = std::fs::remove_dir_all(&root);
        let rig = open(tempfile::tempdir().unwrap(), |_| {});
        rig.gw.import_corpus(asset("corpus")).unwrap();
        rig.gw.train(rig.gw.config().recognizer.backend).unwrap();
        rig.gw.train_attributes(asset("attrs")).unwrap();
        copy_dir(rig.dir.path(), &root);
        root
    })
}

/// A fresh copy of the trained template.
pub fn trained(tweak: impl FnOnce(&mut SystemConfig)) -> Rig {
    let dir = tempfile::tempdir().unwrap();
    copy_dir(template(), dir.path());
    open(dir, tweak)
}

pub fn empty(tweak: impl FnOnce(&mut SystemConfig)) -> Rig {
    open(tempfile::tempdir().unwrap(), tweak)
}
