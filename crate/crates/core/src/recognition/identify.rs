use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::svm::argmax;
use super::{
    lbp_feature, split_train_test, train_eigenface, train_fisherface, train_svm, Backend, BackendParams,
    FeatureVector, Identification, LabeledFace, LbpParams, ModelSnapshot, RecognitionError,
    SubspaceConfig, SubspaceModel, SvmConfig, TrainingMetrics, UNKNOWN,
};
use crate::vision::{BoundingBox, GrayImage};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub lbp: LbpParams,
    pub svm: SvmConfig,
    pub subspace: SubspaceConfig,
    /// Faces are shrunk to this side before eigenface/fisherface.
    pub subspace_side: u32,
    /// Margin below which `lbp_svm` answers unknown.
    pub svm_unknown_margin: f64,
    /// Subspace thresholds sit at this percentile of genuine scores on a
    /// split held out from the training faces.
    pub genuine_percentile: f64,
    pub calibration_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lbp: LbpParams::default(),
            svm: SvmConfig::default(),
            subspace: SubspaceConfig::default(),
            subspace_side: 64,
            svm_unknown_margin: 0.0,
            genuine_percentile: 5.0,
            calibration_seed: 17,
        }
    }
}

/// Crops `bbox` out of `gray` and resamples it to `side x side`.
pub fn normalize_face(gray: &GrayImage, bbox: &BoundingBox, side: u32) -> Result<GrayImage, RecognitionError> {
    Ok(gray.crop(bbox)?.resize(side, side))
}

/// Nearest-rank percentile (`p` in 0..=100) of `scores`.
pub fn calibrate_threshold(scores: &[f64], percentile: f64) -> Option<f64> {
    if scores.is_empty() {
        return None;
    }
    let mut s = scores.to_vec();
    s.sort_by(f64::total_cmp);
    let rank = ((percentile.clamp(0.0, 100.0) / 100.0) * s.len() as f64).ceil() as usize;
    Some(s[rank.saturating_sub(1).min(s.len() - 1)])
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

fn fit_subspace(
    backend: Backend,
    faces: &[GrayImage],
    labels: &[String],
    config: &SubspaceConfig,
) -> Result<SubspaceModel, RecognitionError> {
    let mut distinct = labels.to_vec();
    distinct.sort();
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(RecognitionError::TooFewClasses {
            needed: 2,
            got: distinct.len(),
        });
    }
    if backend == Backend::Eigenface {
        train_eigenface(faces, labels, config)
    } else {
        train_fisherface(faces, labels)
    }
}

/// Fits on part of the faces and scores the rest against their own class.
/// Falls back to accepting everything when the faces are too few to split.
fn calibrate_subspace(backend: Backend, faces: &[GrayImage], labels: &[String], config: &TrainConfig) -> f64 {
    let idx: Vec<(usize, &str)> = labels.iter().map(String::as_str).enumerate().collect();
    let (fit, held) = split_train_test(&idx, |x| x.1, 0.7, config.calibration_seed);
    let sub_faces: Vec<GrayImage> = fit.iter().map(|&(i, _)| faces[i].clone()).collect();
    let sub_labels: Vec<String> = fit.iter().map(|&(i, _)| labels[i].clone()).collect();
    let Ok(model) = fit_subspace(backend, &sub_faces, &sub_labels, &config.subspace) else {
        return f64::NEG_INFINITY;
    };
    let mut genuine = Vec::new();
    for &(i, _) in &held {
        let Ok(c) = model.classes().binary_search(&labels[i]) else {
            continue;
        };
        let Ok(p) = model.project(&faces[i]) else {
            continue;
        };
        let d = model
            .exemplars()
            .iter()
            .filter(|(k, _)| *k == c)
            .map(|(_, e)| e.iter().zip(&p).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt())
            .fold(f64::INFINITY, f64::min);
        genuine.push(-d);
    }
    calibrate_threshold(&genuine, config.genuine_percentile).unwrap_or(f64::NEG_INFINITY)
}

/// Trains `backend` on normalized `face_size` crops. The snapshot comes back
/// unversioned; publishing assigns the version.
pub fn train_backend(
    backend: Backend,
    faces: &[LabeledFace],
    config: &TrainConfig,
    data_digest: &str,
) -> Result<ModelSnapshot, RecognitionError> {
    let started = Instant::now();
    if faces.is_empty() {
        return Err(RecognitionError::Empty);
    }
    let side = config.lbp.face_size;
    if let Some(f) = faces
        .iter()
        .find(|f| f.face.width() != side || f.face.height() != side)
    {
        return Err(RecognitionError::DimensionMismatch {
            expected: (side * side) as usize,
            got: f.face.pixels().len(),
        });
    }
    let (params, classes, accuracy, threshold) = match backend {
        Backend::LbpSvm => {
            let samples = faces
                .iter()
                .map(|f| Ok((lbp_feature(&f.face, &config.lbp)?, f.label.clone())))
                .collect::<Result<Vec<_>, RecognitionError>>()?;
            let svm = train_svm(&samples, &config.svm)?;
            let classes = svm.classes().to_vec();
            let acc = svm.training_accuracy();
            (
                BackendParams::LbpSvm { lbp: config.lbp, svm },
                classes,
                acc,
                config.svm_unknown_margin,
            )
        }
        Backend::Eigenface | Backend::Fisherface => {
            let small: Vec<GrayImage> = faces
                .iter()
                .map(|f| f.face.resize(config.subspace_side, config.subspace_side))
                .collect();
            let labels: Vec<String> = faces.iter().map(|f| f.label.clone()).collect();
            let model = fit_subspace(backend, &small, &labels, &config.subspace)?;
            let correct = (0..model.exemplars().len())
                .filter(|&i| {
                    let (own, p) = &model.exemplars()[i];
                    model.nearest_projected(p, Some(i)).0 == *own
                })
                .count();
            let threshold = calibrate_subspace(backend, &small, &labels, config);
            let classes = model.classes().to_vec();
            // leave-one-out accuracy; resubstitution is trivially perfect
            (
                BackendParams::Subspace(model),
                classes,
                correct as f64 / faces.len() as f64,
                threshold,
            )
        }
    };
    Ok(ModelSnapshot {
        backend,
        version: 0,
        metrics: TrainingMetrics {
            samples: faces.len(),
            classes: classes.len(),
            training_accuracy: accuracy,
            duration_ms: started.elapsed().as_millis() as u64,
        },
        classes,
        params,
        face_size: side,
        unknown_threshold: threshold,
        trained_at_ms: now_ms(),
        data_digest: data_digest.to_string(),
    })
}

/// Matches a normalized face crop against `model`. The answer is
/// [`UNKNOWN`] exactly when the score falls below `unknown_threshold`.
pub fn identify(
    face: &GrayImage,
    model: &ModelSnapshot,
    unknown_threshold: f64,
) -> Result<Identification, RecognitionError> {
    if model.classes.is_empty() {
        return Err(RecognitionError::Untrained(model.backend));
    }
    if face.width() != model.face_size || face.height() != model.face_size {
        return Err(RecognitionError::DimensionMismatch {
            expected: (model.face_size * model.face_size) as usize,
            got: face.pixels().len(),
        });
    }
    let (class, score) = match &model.params {
        BackendParams::LbpSvm { lbp, svm } => {
            let f: FeatureVector = lbp_feature(face, lbp)?;
            argmax(&svm.margins(&f)?)
        }
        BackendParams::Subspace(m) => {
            let (w, h) = m.input_size();
            let (c, d) = m.nearest(&face.resize(w, h))?;
            (c, -d)
        }
    };
    let label = if score < unknown_threshold {
        UNKNOWN.to_string()
    } else {
        model.classes[class].clone()
    };
    Ok(Identification {
        label,
        score,
        backend: model.backend,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn toy_faces() -> Vec<LabeledFace> {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut out = Vec::new();
        for (k, label) in ["a", "b", "c"].iter().enumerate() {
            for _ in 0..4 {
                let face = GrayImage::from_fn(32, 32, |x, y| {
                    let base = match k {
                        0 => x * 8,
                        1 => y * 8,
                        _ => ((x / 4 + y / 4) % 2) * 200,
                    };
                    (base as i32 + rng.gen_range(-6..=6)).clamp(0, 255) as u8
                });
                out.push(LabeledFace {
                    face,
                    label: label.to_string(),
                    source: Default::default(),
                });
            }
        }
        out
    }

    fn config() -> TrainConfig {
        TrainConfig {
            lbp: LbpParams {
                face_size: 32,
                grid: 4,
                ..LbpParams::default()
            },
            subspace_side: 16,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn every_backend_recovers_training_faces() {
        let faces = toy_faces();
        for backend in Backend::ALL {
            let snap = train_backend(backend, &faces, &config(), "x").unwrap();
            for f in &faces {
                let id = identify(&f.face, &snap, f64::NEG_INFINITY).unwrap();
                assert_eq!(id.label, f.label, "{backend}");
                assert_eq!(id, identify(&f.face, &snap, f64::NEG_INFINITY).unwrap());
            }
        }
    }

    #[test]
    fn threshold_rule() {
        let faces = toy_faces();
        let snap = train_backend(Backend::Eigenface, &faces, &config(), "x").unwrap();
        let id = identify(&faces[0].face, &snap, f64::INFINITY).unwrap();
        assert!(id.is_unknown());
        assert!(id.score < f64::INFINITY);
    }

    #[test]
    fn wrong_face_size() {
        let faces = toy_faces();
        let snap = train_backend(Backend::LbpSvm, &faces, &config(), "x").unwrap();
        assert!(matches!(
            identify(&GrayImage::filled(31, 32, 0), &snap, 0.0),
            Err(RecognitionError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn percentile_nearest_rank() {
        let s = [5.0, 1.0, 3.0, 2.0, 4.0];
        assert_eq!(calibrate_threshold(&s, 0.0), Some(1.0));
        assert_eq!(calibrate_threshold(&s, 40.0), Some(2.0));
        assert_eq!(calibrate_threshold(&s, 100.0), Some(5.0));
        assert_eq!(calibrate_threshold(&[], 5.0), None);
    }
}
