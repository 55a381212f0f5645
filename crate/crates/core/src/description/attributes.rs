use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    hair_color, part_regions, Attribute, DescriptionError, DescriptionFacts, HairColor, HairThresholds,
    Landmarks68, Tri,
};
use crate::recognition::{lbp_feature, train_svm, LbpParams, LinearSvm, SvmConfig};
use crate::vision::{BoundingBox, GrayImage};

const YES: &str = "yes";
const NO: &str = "no";

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AttributeConfig {
    /// Part crops are resampled to a square of `lbp.face_size`.
    pub lbp: LbpParams,
    pub svm: SvmConfig,
}

impl Default for AttributeConfig {
    fn default() -> Self {
        AttributeConfig {
            lbp: LbpParams {
                face_size: 64,
                grid: 4,
                ..LbpParams::default()
            },
            svm: SvmConfig::default(),
        }
    }
}

/// Normalized part crop with its yes/no label.
#[derive(Clone, Debug)]
pub struct AttributeSample {
    pub crop: GrayImage,
    pub present: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttributeLabel {
    pub present: bool,
    /// Confidence in `present`, from 0.5 at the decision boundary towards 1.
    pub confidence: f64,
}

impl From<AttributeLabel> for Tri {
    fn from(l: AttributeLabel) -> Tri {
        l.present.into()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttributeModel {
    pub attribute: Attribute,
    pub lbp: LbpParams,
    svm: LinearSvm,
}

impl AttributeModel {
    pub fn training_accuracy(&self) -> f64 {
        self.svm.training_accuracy()
    }
}

fn region_union(a: BoundingBox, b: BoundingBox) -> BoundingBox {
    let x0 = a.x.min(b.x);
    let y0 = a.y.min(b.y);
    BoundingBox::new(x0, y0, a.right().max(b.right()) - x0, a.bottom().max(b.bottom()) - y0)
}

/// Region each attribute classifier looks at. The mask covers mouth and chin
/// together; the others use their own part.
fn attribute_region(lm: &Landmarks68, width: u32, height: u32, attr: Attribute) -> Result<Option<BoundingBox>, DescriptionError> {
    let r = part_regions(lm, width, height)?;
    Ok(match attr {
        Attribute::Beard => r.beard,
        Attribute::Mustache => r.mustache,
        Attribute::Eyeglasses => r.eyes,
        Attribute::Mask => match (r.mustache, r.beard) {
            (Some(a), Some(b)) => Some(region_union(a, b)),
            (a, b) => a.or(b),
        },
    })
}

/// Crop for `attr`, resampled to `side x side`, or `None` when the part
/// was too small to keep.
pub fn attribute_crop(
    gray: &GrayImage,
    lm: &Landmarks68,
    attr: Attribute,
    side: u32,
) -> Result<Option<GrayImage>, DescriptionError> {
    match attribute_region(lm, gray.width(), gray.height(), attr)? {
        Some(b) => Ok(Some(gray.crop(&b)?.resize(side, side))),
        None => Ok(None),
    }
}

/// Reads `<root>/<attr>/{yes,no}/*.png` with `.lm` sidecars. Images whose
/// part is too small are skipped.
pub fn load_attribute_corpus(
    root: impl AsRef<Path>,
    attr: Attribute,
    side: u32,
) -> Result<Vec<AttributeSample>, DescriptionError> {
    let mut out = Vec::new();
    for (dir, present) in [(YES, true), (NO, false)] {
        let d = root.as_ref().join(attr.as_str()).join(dir);
        let mut pngs: Vec<_> = std::fs::read_dir(&d)
            .map_err(|e| DescriptionError::Corpus(format!("{}: {e}", d.display())))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "png"))
            .collect();
        pngs.sort();
        for png in pngs {
            let gray = GrayImage::load(&png)?;
            let lm = Landmarks68::load(png.with_extension("lm"))?;
            if let Some(crop) = attribute_crop(&gray, &lm, attr, side)? {
                out.push(AttributeSample { crop, present });
            }
        }
    }
    if out.is_empty() {
        return Err(DescriptionError::Corpus(format!("no samples for {attr}")));
    }
    Ok(out)
}

pub fn train_attribute_model(
    attr: Attribute,
    samples: &[AttributeSample],
    config: &AttributeConfig,
) -> Result<AttributeModel, DescriptionError> {
    let data = samples
        .iter()
        .map(|s| {
            let label = if s.present { YES } else { NO };
            Ok((lbp_feature(&s.crop, &config.lbp)?, label.to_string()))
        })
        .collect::<Result<Vec<_>, DescriptionError>>()?;
    let svm = train_svm(&data, &config.svm)?;
    Ok(AttributeModel {
        attribute: attr,
        lbp: config.lbp,
        svm,
    })
}

/// Decides from the yes-minus-no margin gap; confidence is its logistic.
pub fn classify_attribute(crop: &GrayImage, model: &AttributeModel) -> Result<AttributeLabel, DescriptionError> {
    let side = model.lbp.face_size;
    let crop = if crop.width() == side && crop.height() == side {
        crop.clone()
    } else {
        crop.resize(side, side)
    };
    let m = model.svm.margins(&lbp_feature(&crop, &model.lbp)?)?;
    let at = |name: &str| model.svm.classes().iter().position(|c| c == name);
    let gap = match (at(YES), at(NO)) {
        (Some(y), Some(n)) => m[y] - m[n],
        _ => return Err(DescriptionError::Untrained(model.attribute)),
    };
    Ok(AttributeLabel {
        present: gap >= 0.0,
        confidence: 1.0 / (1.0 + (-gap.abs()).exp()),
    })
}

/// Per-attribute classifiers; any subset may be missing.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AttributeModels {
    models: BTreeMap<Attribute, AttributeModel>,
}

impl AttributeModels {
    pub fn insert(&mut self, model: AttributeModel) {
        self.models.insert(model.attribute, model);
    }

    pub fn get(&self, attr: Attribute) -> Result<&AttributeModel, DescriptionError> {
        self.models.get(&attr).ok_or(DescriptionError::Untrained(attr))
    }

    pub fn trained(&self) -> impl Iterator<Item = Attribute> + '_ {
        self.models.keys().copied()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), DescriptionError> {
        let bytes = bincode::serialize(self).map_err(|e| DescriptionError::Corpus(e.to_string()))?;
        std::fs::write(path.as_ref(), bytes)
            .map_err(|e| DescriptionError::Corpus(format!("{}: {e}", path.as_ref().display())))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, DescriptionError> {
        let bytes = std::fs::read(path.as_ref())
            .map_err(|e| DescriptionError::Corpus(format!("{}: {e}", path.as_ref().display())))?;
        bincode::deserialize(&bytes).map_err(|e| DescriptionError::Corpus(e.to_string()))
    }
}

/// Trains every attribute found under `root`.
pub fn train_attribute_models(root: impl AsRef<Path>, config: &AttributeConfig) -> Result<AttributeModels, DescriptionError> {
    let mut models = AttributeModels::default();
    for attr in Attribute::ALL {
        let samples = load_attribute_corpus(root.as_ref(), attr, config.lbp.face_size)?;
        models.insert(train_attribute_model(attr, &samples, config)?);
    }
    Ok(models)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FaceAttributes {
    pub hair: HairColor,
    pub beard: Tri,
    pub mustache: Tri,
    pub eyeglasses: Tri,
    pub mask: Tri,
}

impl FaceAttributes {
    pub fn apply(&self, facts: &mut DescriptionFacts) {
        facts.hair_color = self.hair;
        facts.has_beard = self.beard;
        facts.has_mustache = self.mustache;
        facts.has_eyeglasses = self.eyeglasses;
        facts.has_mask = self.mask;
    }
}

/// Hair and attribute classification for one face.
#[derive(Clone, Debug, Default)]
pub struct FaceDescriber {
    pub models: AttributeModels,
    pub hair: HairThresholds,
}

impl FaceDescriber {
    pub fn new(models: AttributeModels, hair: HairThresholds) -> Self {
        FaceDescriber { models, hair }
    }

    /// Anything without a model or a large enough part stays unknown.
    pub fn describe(&self, gray: &GrayImage, lm: &Landmarks68) -> Result<FaceAttributes, DescriptionError> {
        let regions = part_regions(lm, gray.width(), gray.height())?;
        let hair = match regions.head {
            Some(b) => hair_color(&gray.crop(&b)?, &self.hair)?,
            None => HairColor::Unknown,
        };
        let mut out = FaceAttributes {
            hair,
            ..FaceAttributes::default()
        };
        for attr in self.models.trained().collect::<Vec<_>>() {
            let model = self.models.get(attr)?;
            let Some(crop) = attribute_crop(gray, lm, attr, model.lbp.face_size)? else {
                continue;
            };
            let t: Tri = classify_attribute(&crop, model)?.into();
            match attr {
                Attribute::Beard => out.beard = t,
                Attribute::Mustache => out.mustache = t,
                Attribute::Eyeglasses => out.eyeglasses = t,
                Attribute::Mask => out.mask = t,
            }
        }
        Ok(out)
    }
}
