//! One-vs-rest linear SVM trained by stochastic primal subgradient descent.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{FeatureVector, RecognitionError};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvmConfig {
    pub c: f64,
    /// Passes over the training set.
    pub max_iters: usize,
    pub seed: u64,
}

impl Default for SvmConfig {
    fn default() -> Self {
        SvmConfig {
            c: 1.0,
            max_iters: 200,
            seed: 7,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearSvm {
    classes: Vec<String>,
    dim: usize,
    /// One weight row per class.
    weights: Vec<Vec<f64>>,
    biases: Vec<f64>,
    training_accuracy: f64,
}

impl LinearSvm {
    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    pub fn training_accuracy(&self) -> f64 {
        self.training_accuracy
    }

    pub fn margins(&self, x: &FeatureVector) -> Result<Vec<f64>, RecognitionError> {
        if x.len() != self.dim {
            return Err(RecognitionError::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        Ok(self
            .weights
            .iter()
            .zip(&self.biases)
            .map(|(w, b)| dot(w, x.as_slice()) + b)
            .collect())
    }

    /// Index and value of the largest margin; ties go to the lower index.
    pub fn best(&self, x: &FeatureVector) -> Result<(usize, f64), RecognitionError> {
        Ok(argmax(&self.margins(x)?))
    }

    pub fn predict(&self, x: &FeatureVector) -> Result<(&str, f64), RecognitionError> {
        let (i, m) = self.best(x)?;
        Ok((&self.classes[i], m))
    }
}

pub(crate) fn argmax(values: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, &v) in values.iter().enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Trains one binary hinge-loss classifier per class.
///
/// Each binary problem minimizes `lambda/2 |w|^2 + mean(hinge)` with
/// `lambda = 1 / (C n)`, step `1 / (lambda t)` and a constant feature folded
/// in for the bias. Samples are visited in a seeded shuffled order, so the
/// result is a pure function of the inputs and the seed.
pub fn train_svm(
    samples: &[(FeatureVector, String)],
    config: &SvmConfig,
) -> Result<LinearSvm, RecognitionError> {
    if samples.is_empty() {
        return Err(RecognitionError::Empty);
    }
    if !(config.c > 0.0) || config.max_iters == 0 {
        return Err(RecognitionError::InvalidParams(format!("{config:?}")));
    }
    let dim = samples[0].0.len();
    if let Some((x, _)) = samples.iter().find(|(x, _)| x.len() != dim) {
        return Err(RecognitionError::DimensionMismatch {
            expected: dim,
            got: x.len(),
        });
    }
    let mut classes: Vec<String> = samples.iter().map(|(_, l)| l.clone()).collect();
    classes.sort();
    classes.dedup();
    if classes.len() < 2 {
        return Err(RecognitionError::TooFewClasses {
            needed: 2,
            got: classes.len(),
        });
    }
    let labels: Vec<usize> = samples
        .iter()
        .map(|(_, l)| classes.binary_search(l).expect("label collected above"))
        .collect();
    let n = samples.len();
    let lambda = 1.0 / (config.c * n as f64);

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut schedule = Vec::with_capacity(n * config.max_iters);
    for _ in 0..config.max_iters {
        order.shuffle(&mut rng);
        schedule.extend_from_slice(&order);
    }

    let mut weights = Vec::with_capacity(classes.len());
    let mut biases = Vec::with_capacity(classes.len());
    for class in 0..classes.len() {
        // w = scale * v keeps the shrink step O(1)
        let mut v = vec![0.0f64; dim + 1];
        let mut scale = 1.0f64;
        for (t, &i) in schedule.iter().enumerate() {
            let t = (t + 1) as f64;
            let eta = 1.0 / (lambda * t);
            let x = samples[i].0.as_slice();
            let y = if labels[i] == class { 1.0 } else { -1.0 };
            let margin = scale * (dot(&v[..dim], x) + v[dim]);
            let shrink = 1.0 - eta * lambda;
            if shrink <= 0.0 {
                v.iter_mut().for_each(|e| *e = 0.0);
                scale = 1.0;
            } else {
                scale *= shrink;
            }
            if y * margin < 1.0 {
                let step = eta * y / scale;
                for (vj, xj) in v[..dim].iter_mut().zip(x) {
                    *vj += step * xj;
                }
                v[dim] += step;
            }
            if scale < 1e-9 {
                v.iter_mut().for_each(|e| *e *= scale);
                scale = 1.0;
            }
        }
        let w: Vec<f64> = v[..dim].iter().map(|e| e * scale).collect();
        biases.push(v[dim] * scale);
        weights.push(w);
    }

    let mut svm = LinearSvm {
        classes,
        dim,
        weights,
        biases,
        training_accuracy: 0.0,
    };
    let correct = samples
        .iter()
        .zip(&labels)
        .filter(|((x, _), &l)| svm.best(x).map(|(i, _)| i == l).unwrap_or(false))
        .count();
    svm.training_accuracy = correct as f64 / n as f64;
    Ok(svm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn clusters(seed: u64) -> Vec<(FeatureVector, String)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::new();
        for (cx, cy, label) in [(-2.0, -2.0, "a"), (2.0, 2.0, "b")] {
            for _ in 0..10 {
                let x = cx + rng.gen_range(-0.5..0.5);
                let y = cy + rng.gen_range(-0.5..0.5);
                out.push((FeatureVector::new(vec![x, y]), label.to_string()));
            }
        }
        out
    }

    #[test]
    fn separable_clusters() {
        let svm = train_svm(&clusters(1), &SvmConfig::default()).unwrap();
        assert_eq!(svm.training_accuracy(), 1.0);
        let (label, _) = svm.predict(&FeatureVector::new(vec![1.8, 2.1])).unwrap();
        assert_eq!(label, "b");
    }

    #[test]
    fn deterministic_for_seed() {
        let data = clusters(2);
        let a = train_svm(&data, &SvmConfig::default()).unwrap();
        let b = train_svm(&data, &SvmConfig::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn three_classes() {
        let mut data = clusters(3);
        for k in 0..10 {
            let d = k as f64 * 0.05;
            data.push((FeatureVector::new(vec![2.0 + d, -2.0 - d]), "c".into()));
        }
        let svm = train_svm(&data, &SvmConfig::default()).unwrap();
        assert_eq!(svm.classes().len(), 3);
        assert_eq!(svm.training_accuracy(), 1.0);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(
            train_svm(&[], &SvmConfig::default()),
            Err(RecognitionError::Empty)
        ));
        let one = vec![(FeatureVector::new(vec![1.0]), "a".to_string())];
        assert!(matches!(
            train_svm(&one, &SvmConfig::default()),
            Err(RecognitionError::TooFewClasses { .. })
        ));
        let ragged = vec![
            (FeatureVector::new(vec![1.0]), "a".to_string()),
            (FeatureVector::new(vec![1.0, 2.0]), "b".to_string()),
        ];
        assert!(matches!(
            train_svm(&ragged, &SvmConfig::default()),
            Err(RecognitionError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn margin_dimension_checked() {
        let svm = train_svm(&clusters(4), &SvmConfig::default()).unwrap();
        assert!(svm.margins(&FeatureVector::new(vec![0.0; 3])).is_err());
    }
}
