use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

use super::{BoundingBox, CascadeModel, GrayImage, IntegralImage, VisionError};

/// Sliding-window scan configuration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScanParams {
    /// Growth factor between successive window sizes; must exceed 1.
    pub scale_factor: f64,
    /// Smallest window side in source pixels (clamped up to the model window).
    pub min_size: u32,
    pub max_size: Option<u32>,
    /// Stride in pyramid pixels; halved (min 1) once windows exceed twice the base size.
    pub step: u32,
    /// Raw hits a merged detection needs; 0 returns raw hits unmerged.
    pub min_neighbors: usize,
}

impl Default for ScanParams {
    fn default() -> Self {
        ScanParams {
            scale_factor: 1.1,
            min_size: 24,
            max_size: None,
            step: 2,
            min_neighbors: 3,
        }
    }
}

const GROUP_IOU: f64 = 0.3;
const CONTAINED_FRACTION: f64 = 0.6;

/// Multi-scale Haar-cascade detection.
///
/// The image is resampled into a pyramid so every window is evaluated at the
/// model's base resolution; each window is variance-normalized over its
/// interior (one pixel in from the border) and windows with zero variance are
/// rejected outright. Result boxes are sorted by area, largest first.
pub fn detect_faces(
    gray: &GrayImage,
    model: &CascadeModel,
    scan: &ScanParams,
) -> Result<Vec<BoundingBox>, VisionError> {
    if !(scan.scale_factor > 1.0) || scan.step == 0 {
        return Err(VisionError::OutOfBounds(format!(
            "invalid scan parameters: scale_factor {} step {}",
            scan.scale_factor, scan.step
        )));
    }
    let (ww, wh) = model.window();
    let (iw, ih) = (gray.width(), gray.height());
    let compiled = Compiled::new(model);
    let mut raw = Vec::new();
    let mut factor = 1.0f64;
    loop {
        let win_w = (ww as f64 * factor).round() as u32;
        let win_h = (wh as f64 * factor).round() as u32;
        let sw = (iw as f64 / factor).round() as u32;
        let sh = (ih as f64 / factor).round() as u32;
        if sw < ww || sh < wh || win_w > iw || win_h > ih {
            break;
        }
        if scan.max_size.is_some_and(|m| win_w > m || win_h > m) {
            break;
        }
        if win_w >= scan.min_size && win_h >= scan.min_size {
            let scaled = gray.resize(sw, sh);
            let ii = IntegralImage::with_squares(&scaled);
            let step = if factor > 2.0 { (scan.step / 2).max(1) } else { scan.step } as usize;
            for y in (0..=sh - wh).step_by(step) {
                for x in (0..=sw - ww).step_by(step) {
                    if compiled.accepts(&ii, x, y) {
                        let x0 = ((x as f64 * factor).round() as u32).min(iw - 1);
                        let y0 = ((y as f64 * factor).round() as u32).min(ih - 1);
                        raw.push(BoundingBox::new(
                            x0,
                            y0,
                            win_w.min(iw - x0),
                            win_h.min(ih - y0),
                        ));
                    }
                }
            }
        }
        factor *= scan.scale_factor;
    }
    let mut out = if scan.min_neighbors == 0 {
        raw
    } else {
        group(&raw, scan.min_neighbors)
    };
    out.sort_by(|a, b| {
        b.area()
            .cmp(&a.area())
            .then(a.y.cmp(&b.y))
            .then(a.x.cmp(&b.x))
    });
    Ok(out)
}

/// Flattened cascade with per-rect offsets, evaluated per window.
struct Compiled {
    window: (u32, u32),
    stages: Vec<(f64, Vec<CompiledStump>)>,
}

struct CompiledStump {
    rects: Vec<(u32, u32, u32, u32, f64)>,
    split: f64,
    left: f64,
    right: f64,
}

impl Compiled {
    fn new(model: &CascadeModel) -> Self {
        let stages = model
            .stages()
            .iter()
            .map(|s| {
                let weak = s
                    .weak
                    .iter()
                    .map(|w| CompiledStump {
                        rects: w
                            .feature
                            .rects
                            .iter()
                            .map(|r| (r.x, r.y, r.width, r.height, r.weight))
                            .collect(),
                        split: w.split,
                        left: w.left,
                        right: w.right,
                    })
                    .collect();
                (s.threshold, weak)
            })
            .collect();
        Compiled {
            window: model.window(),
            stages,
        }
    }

    fn accepts(&self, ii: &IntegralImage, x: u32, y: u32) -> bool {
        let (ww, wh) = self.window;
        let (nw, nh) = (ww - 2, wh - 2);
        let area = (nw * nh) as i128;
        let sum = ii.rect_sum(x + 1, y + 1, nw, nh) as i128;
        let sq = ii.rect_sq_sum(x + 1, y + 1, nw, nh) as i128;
        let spread = area * sq - sum * sum;
        if spread <= 0 {
            return false;
        }
        let norm = (spread as f64).sqrt();
        for (threshold, weak) in &self.stages {
            let mut total = 0.0;
            for stump in weak {
                let mut value = 0.0;
                for &(rx, ry, rw, rh, weight) in &stump.rects {
                    value += weight * ii.rect_sum(x + rx, y + ry, rw, rh) as f64;
                }
                total += if value / norm < stump.split {
                    stump.left
                } else {
                    stump.right
                };
            }
            if total < *threshold {
                return false;
            }
        }
        true
    }
}

/// Clusters raw hits by IoU and averages clusters with enough members.
fn group(raw: &[BoundingBox], min_neighbors: usize) -> Vec<BoundingBox> {
    let n = raw.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    for i in 0..n {
        for j in i + 1..n {
            if raw[i].iou(&raw[j]) > GROUP_IOU {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut clusters: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for i in 0..n {
        let root = find(&mut parent, i);
        clusters.entry(root).or_default().push(i);
    }
    let merged: Vec<(BoundingBox, usize)> = clusters
        .values()
        .filter(|members| members.len() >= min_neighbors)
        .map(|members| {
            let k = members.len() as f64;
            let mean = |f: &dyn Fn(&BoundingBox) -> u32| {
                (members.iter().map(|&i| f(&raw[i]) as f64).sum::<f64>() / k).round() as u32
            };
            let x0 = mean(&|b| b.x);
            let y0 = mean(&|b| b.y);
            let x1 = mean(&|b| b.right());
            let y1 = mean(&|b| b.bottom());
            (BoundingBox::new(x0, y0, x1 - x0, y1 - y0), members.len())
        })
        .filter(|(b, _)| b.width > 0 && b.height > 0)
        .collect();
    merged
        .iter()
        .filter(|(a, _)| {
            !merged.iter().any(|(b, _)| {
                b.area() > a.area()
                    && a.intersection_area(b) as f64 >= CONTAINED_FRACTION * a.area() as f64
            })
        })
        .map(|(b, _)| *b)
        .collect()
}

static BUNDLED: OnceLock<Arc<CascadeModel>> = OnceLock::new();

const BUNDLED_XML: &str = include_str!("../../assets/cascades/haarcascade_frontalface_default.xml");

impl CascadeModel {
    /// The 24x24 frontal-face cascade shipped under `assets/cascades/`.
    pub fn bundled_frontal_face() -> Arc<CascadeModel> {
        BUNDLED
            .get_or_init(|| {
                Arc::new(CascadeModel::parse(BUNDLED_XML).expect("bundled cascade is valid"))
            })
            .clone()
    }
}

/// A cascade paired with its scan settings.
#[derive(Clone, Debug)]
pub struct FaceDetector {
    model: Arc<CascadeModel>,
    scan: ScanParams,
}

impl FaceDetector {
    pub fn new(model: Arc<CascadeModel>, scan: ScanParams) -> Self {
        FaceDetector { model, scan }
    }

    pub fn bundled() -> Self {
        FaceDetector::new(CascadeModel::bundled_frontal_face(), ScanParams::default())
    }

    pub fn scan(&self) -> &ScanParams {
        &self.scan
    }

    pub fn model(&self) -> &CascadeModel {
        &self.model
    }

    pub fn detect(&self, gray: &GrayImage) -> Vec<BoundingBox> {
        // parameters were validated when the detector was configured
        detect_faces(gray, &self.model, &self.scan).unwrap_or_default()
    }
}
