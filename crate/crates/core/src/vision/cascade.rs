use std::path::Path;

use roxmltree::{Document, Node};

use super::VisionError;

/// One weighted rectangle of a Haar feature, in base-window coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeightedRect {
    pub x: u32,
    pub y: u32,
    pub width: u32,
    pub height: u32,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HaarFeature {
    pub rects: Vec<WeightedRect>,
}

impl HaarFeature {
    /// Sum of `weight * area`; zero for the usual difference-of-boxes features.
    pub fn weighted_area(&self) -> f64 {
        self.rects
            .iter()
            .map(|r| r.weight * (r.width * r.height) as f64)
            .sum()
    }
}

/// Decision stump: `left` when the normalized feature value is below `split`.
#[derive(Clone, Debug, PartialEq)]
pub struct WeakClassifier {
    pub feature: HaarFeature,
    pub split: f64,
    pub left: f64,
    pub right: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Stage {
    pub threshold: f64,
    pub weak: Vec<WeakClassifier>,
}

/// A boosted cascade of stump classifiers over Haar features.
#[derive(Clone, Debug, PartialEq)]
pub struct CascadeModel {
    window_width: u32,
    window_height: u32,
    stages: Vec<Stage>,
}

// Stage thresholds are compared with a small tolerance, as in the reference
// detector the bundled cascade was trained for.
const STAGE_EPS: f64 = 1e-5;

impl CascadeModel {
    pub fn new(window_width: u32, window_height: u32, stages: Vec<Stage>) -> Result<Self, VisionError> {
        let model = CascadeModel {
            window_width,
            window_height,
            stages,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn window(&self) -> (u32, u32) {
        (self.window_width, self.window_height)
    }

    pub fn stages(&self) -> &[Stage] {
        &self.stages
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, VisionError> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    /// Parses the stump-based cascade XML layout (`opencv_storage/cascade`
    /// with `stages`, `weakClassifiers`, `internalNodes`, `leafValues` and a
    /// shared `features` list).
    pub fn parse(document: &str) -> Result<Self, VisionError> {
        if document.trim().is_empty() {
            return Err(VisionError::CascadeParse("empty document".into()));
        }
        let doc = Document::parse(document).map_err(|e| VisionError::CascadeParse(e.to_string()))?;
        let cascade = doc
            .descendants()
            .find(|n| n.has_tag_name("cascade"))
            .ok_or_else(|| VisionError::CascadeParse("no <cascade> element".into()))?;

        if let Some(kind) = child_text(cascade, "featureType") {
            if kind.trim() != "HAAR" {
                return Err(VisionError::CascadeParse(format!(
                    "unsupported feature type {kind}"
                )));
            }
        }
        let width: u32 = parse_num(required_text(cascade, "width")?)?;
        let height: u32 = parse_num(required_text(cascade, "height")?)?;

        let features_node = child(cascade, "features")
            .ok_or_else(|| VisionError::CascadeParse("missing <features>".into()))?;
        let mut features = Vec::new();
        for f in items(features_node) {
            if let Some(t) = child_text(f, "tilted") {
                if t.trim() != "0" {
                    return Err(VisionError::CascadeParse(
                        "tilted features are not supported".into(),
                    ));
                }
            }
            let rects_node = child(f, "rects")
                .ok_or_else(|| VisionError::CascadeParse("feature without <rects>".into()))?;
            let mut rects = Vec::new();
            for r in items(rects_node) {
                let vals = numbers(r.text().unwrap_or(""))?;
                if vals.len() != 5 {
                    return Err(VisionError::CascadeParse(format!(
                        "rect needs 5 numbers, got {}",
                        vals.len()
                    )));
                }
                for v in &vals[..4] {
                    if *v < 0.0 || v.fract() != 0.0 {
                        return Err(VisionError::CascadeInvalid(format!(
                            "rect coordinate {v} is not a non-negative integer"
                        )));
                    }
                }
                rects.push(WeightedRect {
                    x: vals[0] as u32,
                    y: vals[1] as u32,
                    width: vals[2] as u32,
                    height: vals[3] as u32,
                    weight: vals[4],
                });
            }
            features.push(HaarFeature { rects });
        }

        let stages_node = child(cascade, "stages")
            .ok_or_else(|| VisionError::CascadeParse("missing <stages>".into()))?;
        let mut stages = Vec::new();
        for s in items(stages_node) {
            let threshold: f64 = parse_num(required_text(s, "stageThreshold")?)?;
            let weak_node = child(s, "weakClassifiers")
                .ok_or_else(|| VisionError::CascadeParse("stage without weakClassifiers".into()))?;
            let mut weak = Vec::new();
            for w in items(weak_node) {
                let nodes = numbers(required_text(w, "internalNodes")?)?;
                let leaves = numbers(required_text(w, "leafValues")?)?;
                if nodes.len() != 4 || leaves.len() != 2 {
                    return Err(VisionError::CascadeParse(
                        "only single-split (stump) weak classifiers are supported".into(),
                    ));
                }
                let idx = nodes[2];
                if idx < 0.0 || idx.fract() != 0.0 || idx as usize >= features.len() {
                    return Err(VisionError::CascadeInvalid(format!(
                        "feature index {idx} out of range"
                    )));
                }
                weak.push(WeakClassifier {
                    feature: features[idx as usize].clone(),
                    split: nodes[3],
                    left: leaves[0],
                    right: leaves[1],
                });
            }
            stages.push(Stage {
                threshold: threshold - STAGE_EPS,
                weak,
            });
        }
        CascadeModel::new(width, height, stages)
    }

    fn validate(&self) -> Result<(), VisionError> {
        if self.window_width < 3 || self.window_height < 3 {
            return Err(VisionError::CascadeInvalid(format!(
                "window {}x{} too small",
                self.window_width, self.window_height
            )));
        }
        if self.stages.is_empty() {
            return Err(VisionError::CascadeInvalid("cascade has no stages".into()));
        }
        for (si, stage) in self.stages.iter().enumerate() {
            if stage.weak.is_empty() {
                return Err(VisionError::CascadeInvalid(format!("stage {si} is empty")));
            }
            for wc in &stage.weak {
                if wc.feature.rects.is_empty() {
                    return Err(VisionError::CascadeInvalid("feature without rectangles".into()));
                }
                for r in &wc.feature.rects {
                    if r.width == 0
                        || r.height == 0
                        || r.x + r.width > self.window_width
                        || r.y + r.height > self.window_height
                    {
                        return Err(VisionError::CascadeInvalid(format!(
                            "rectangle {}x{}+{}+{} outside {}x{} window",
                            r.width, r.height, r.x, r.y, self.window_width, self.window_height
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

fn child<'a, 'i>(node: Node<'a, 'i>, name: &str) -> Option<Node<'a, 'i>> {
    node.children().find(|c| c.has_tag_name(name))
}

fn child_text<'a>(node: Node<'a, '_>, name: &str) -> Option<&'a str> {
    child(node, name).and_then(|c| c.text())
}

fn required_text<'a>(node: Node<'a, '_>, name: &str) -> Result<&'a str, VisionError> {
    child_text(node, name).ok_or_else(|| VisionError::CascadeParse(format!("missing <{name}>")))
}

fn items<'a, 'i>(node: Node<'a, 'i>) -> impl Iterator<Item = Node<'a, 'i>> {
    node.children().filter(|c| c.has_tag_name("_"))
}

fn parse_num<T: std::str::FromStr>(s: &str) -> Result<T, VisionError> {
    s.trim()
        .parse()
        .map_err(|_| VisionError::CascadeParse(format!("bad number {s:?}")))
}

fn numbers(s: &str) -> Result<Vec<f64>, VisionError> {
    s.split_whitespace().map(parse_num).collect()
}
