use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{normalize_face, RecognitionError};
use crate::vision::{to_grayscale, FaceDetector, Frame, GrayImage};

/// One row of `labels.tsv`: image path relative to the corpus root.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CorpusEntry {
    pub image: PathBuf,
    pub person_id: String,
}

#[derive(Clone, Debug)]
pub struct LabeledFace {
    pub face: GrayImage,
    pub label: String,
    pub source: PathBuf,
}

/// Reads `<root>/labels.tsv` (header `image<TAB>person_id`).
pub fn load_labels(root: impl AsRef<Path>) -> Result<Vec<CorpusEntry>, RecognitionError> {
    let path = root.as_ref().join("labels.tsv");
    let text = std::fs::read_to_string(&path)
        .map_err(|e| RecognitionError::Corpus(format!("{}: {e}", path.display())))?;
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim_end() == "image\tperson_id" => {}
        other => {
            return Err(RecognitionError::Corpus(format!(
                "unexpected labels header {other:?}"
            )))
        }
    }
    let mut out = Vec::new();
    for (n, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut cols = line.split('\t');
        match (cols.next(), cols.next(), cols.next()) {
            (Some(img), Some(pid), None) if !img.is_empty() && !pid.is_empty() => out.push(CorpusEntry {
                image: PathBuf::from(img),
                person_id: pid.trim_end().to_string(),
            }),
            _ => {
                return Err(RecognitionError::Corpus(format!(
                    "labels.tsv line {}: {line:?}",
                    n + 2
                )))
            }
        }
    }
    Ok(out)
}

/// Detects the largest face in each listed image and normalizes it to
/// `side x side`. Images without a detection are returned separately.
pub fn load_faces(
    root: impl AsRef<Path>,
    entries: &[CorpusEntry],
    detector: &FaceDetector,
    side: u32,
) -> Result<(Vec<LabeledFace>, Vec<CorpusEntry>), RecognitionError> {
    let root = root.as_ref();
    let mut faces = Vec::new();
    let mut missed = Vec::new();
    for e in entries {
        let path = root.join(&e.image);
        let gray = to_grayscale(&Frame::load(&path, "corpus", 0)?);
        match detector.detect(&gray).first() {
            Some(b) => faces.push(LabeledFace {
                face: normalize_face(&gray, b, side)?,
                label: e.person_id.clone(),
                source: e.image.clone(),
            }),
            None => missed.push(e.clone()),
        }
    }
    Ok((faces, missed))
}

/// Per-label shuffled split: each label contributes `round(n * fraction)`
/// items to the training side, kept within `1..n` when it has two or more.
pub fn split_train_test<T: Clone>(
    items: &[T],
    label: impl Fn(&T) -> &str,
    train_fraction: f64,
    seed: u64,
) -> (Vec<T>, Vec<T>) {
    let mut by_label: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, it) in items.iter().enumerate() {
        by_label.entry(label(it)).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for idx in by_label.values_mut() {
        idx.shuffle(&mut rng);
        let n = idx.len();
        let mut k = (n as f64 * train_fraction).round() as usize;
        if n >= 2 {
            k = k.clamp(1, n - 1);
        } else {
            k = n;
        }
        let (a, b) = idx.split_at(k);
        let mut a = a.to_vec();
        let mut b = b.to_vec();
        a.sort_unstable();
        b.sort_unstable();
        train.extend(a.into_iter().map(|i| items[i].clone()));
        test.extend(b.into_iter().map(|i| items[i].clone()));
    }
    (train, test)
}
