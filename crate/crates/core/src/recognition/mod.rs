//! Person identification: LBP histograms with a linear SVM, plus
//! eigenface and fisherface baselines.

mod corpus;
mod identify;
mod lbp;
mod metrics;
mod model;
mod subspace;
mod svm;

pub use corpus::{load_faces, load_labels, split_train_test, CorpusEntry, LabeledFace};
pub use identify::{calibrate_threshold, identify, normalize_face, train_backend, TrainConfig};
pub use lbp::{
    lbp_code, lbp_feature, transitions, uniform_mapping, LbpParams, UniformMapping,
};
pub use metrics::{f_measure, ClassScores, Confusion};
pub use model::{
    BackendParams, ModelManifest, ModelSnapshot, ModelStore, TrainingGuard, TrainingMetrics,
};
pub use subspace::{train_eigenface, train_fisherface, SubspaceConfig, SubspaceModel};
pub use svm::{train_svm, LinearSvm, SvmConfig};

use serde::{Deserialize, Serialize};

/// Label returned when no enrolled person is close enough.
pub const UNKNOWN: &str = "UNKNOWN";

#[derive(Debug, thiserror::Error)]
pub enum RecognitionError {
    #[error("unsupported number of sampling points {0} (expected 4, 8 or 16)")]
    UnsupportedPoints(u32),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("pixel ({x}, {y}) is closer than {radius} to the border")]
    OutOfBounds { x: u32, y: u32, radius: u32 },
    #[error("face {width}x{height} is smaller than the {grid}x{grid} grid")]
    FaceTooSmall { width: u32, height: u32, grid: u32 },
    #[error("need at least {needed} classes, got {got}")]
    TooFewClasses { needed: usize, got: usize },
    #[error("no training samples")]
    Empty,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("singular scatter matrix")]
    SingularScatter,
    #[error("requested {requested} components but only {available} are available")]
    TooManyComponents { requested: usize, available: usize },
    #[error("model not trained for backend {0}")]
    Untrained(Backend),
    #[error("corpus: {0}")]
    Corpus(String),
    #[error("model store: {0}")]
    Store(String),
    #[error(transparent)]
    Vision(#[from] crate::vision::VisionError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    LbpSvm,
    Eigenface,
    Fisherface,
}

impl Backend {
    pub const ALL: [Backend; 3] = [Backend::LbpSvm, Backend::Eigenface, Backend::Fisherface];

    pub fn as_str(&self) -> &'static str {
        match self {
            Backend::LbpSvm => "lbp_svm",
            Backend::Eigenface => "eigenface",
            Backend::Fisherface => "fisherface",
        }
    }
}

impl std::fmt::Display for Backend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Backend {
    type Err = RecognitionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Backend::ALL
            .into_iter()
            .find(|b| b.as_str() == s)
            .ok_or_else(|| RecognitionError::InvalidParams(format!("unknown backend {s:?}")))
    }
}

/// Dense real feature vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector(Vec<f64>);

impl FeatureVector {
    pub fn new(values: Vec<f64>) -> Self {
        FeatureVector(values)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn l1_norm(&self) -> f64 {
        self.0.iter().map(|v| v.abs()).sum()
    }
}

/// Outcome of matching one face against a model.
///
/// `score` is the winning one-vs-rest margin for `lbp_svm` and the negated
/// exemplar distance for the subspace backends, so larger is always better
/// and the label is [`UNKNOWN`] exactly when `score < threshold`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Identification {
    pub label: String,
    pub score: f64,
    pub backend: Backend,
}

impl Identification {
    pub fn is_unknown(&self) -> bool {
        self.label == UNKNOWN
    }
}
