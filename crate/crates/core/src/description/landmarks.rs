use std::path::Path;

use serde::{Deserialize, Serialize};

use super::DescriptionError;
use crate::vision::{BoundingBox, GrayImage};

pub const LANDMARK_COUNT: usize = 68;

/// 68 facial points in the iBUG order: jaw 0-16, brows 17-26, nose 27-35,
/// eyes 36-47, mouth 48-67.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Landmarks68 {
    points: Vec<(f64, f64)>,
}

impl Landmarks68 {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self, DescriptionError> {
        if points.len() != LANDMARK_COUNT {
            return Err(DescriptionError::MalformedLandmarks(format!(
                "expected {LANDMARK_COUNT} points, got {}",
                points.len()
            )));
        }
        if points.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
            return Err(DescriptionError::MalformedLandmarks("non-finite coordinate".into()));
        }
        Ok(Landmarks68 { points })
    }

    /// Sidecar format: one `x y` pair per line.
    pub fn parse(text: &str) -> Result<Self, DescriptionError> {
        let mut points = Vec::with_capacity(LANDMARK_COUNT);
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let mut it = line.split_whitespace().map(str::parse::<f64>);
            match (it.next(), it.next(), it.next()) {
                (Some(Ok(x)), Some(Ok(y)), None) => points.push((x, y)),
                _ => {
                    return Err(DescriptionError::MalformedLandmarks(format!(
                        "line {}: {line:?}",
                        n + 1
                    )))
                }
            }
        }
        Self::new(points)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, DescriptionError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| DescriptionError::MalformedLandmarks(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_text(&self) -> String {
        self.points.iter().map(|(x, y)| format!("{x:.2} {y:.2}\n")).collect()
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn point(&self, i: usize) -> (f64, f64) {
        self.points[i]
    }

    /// Every point inside `[0, width) x [0, height)`.
    pub fn check_within(&self, width: u32, height: u32) -> Result<(), DescriptionError> {
        match self
            .points
            .iter()
            .position(|&(x, y)| x < 0.0 || y < 0.0 || x >= width as f64 || y >= height as f64)
        {
            Some(i) => Err(DescriptionError::MalformedLandmarks(format!(
                "point {i} {:?} outside {width}x{height}",
                self.points[i]
            ))),
            None => Ok(()),
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Landmarks68 {
            points: self.points.iter().map(|&(x, y)| (x * factor, y * factor)).collect(),
        }
    }

    /// `(min_x, min_y, max_x, max_y)` over the points in `range`.
    pub fn extent(&self, range: std::ops::RangeInclusive<usize>) -> (f64, f64, f64, f64) {
        let mut e = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        for &(x, y) in &self.points[range] {
            e = (e.0.min(x), e.1.min(y), e.2.max(x), e.3.max(y));
        }
        e
    }
}

/// Mean frontal layout in unit face coordinates; `(0, 0)` is the top-left of
/// the square the face was framed in.
#[rustfmt::skip]
pub const TEMPLATE_68: [(f64, f64); LANDMARK_COUNT] = [
    // jaw
    (0.0600, 0.3000), (0.0685, 0.4346), (0.0935, 0.5641), (0.1342, 0.6833),
    (0.1889, 0.7879), (0.2555, 0.8737), (0.3316, 0.9375), (0.4142, 0.9767),
    (0.5000, 0.9900), (0.5858, 0.9767), (0.6684, 0.9375), (0.7445, 0.8737),
    (0.8111, 0.7879), (0.8658, 0.6833), (0.9065, 0.5641), (0.9315, 0.4346),
    (0.9400, 0.3000),
    // brows
    (0.1600, 0.2800), (0.2300, 0.2517), (0.3000, 0.2400), (0.3700, 0.2517), (0.4400, 0.2800),
    (0.5600, 0.2800), (0.6300, 0.2517), (0.7000, 0.2400), (0.7700, 0.2517), (0.8400, 0.2800),
    // nose
    (0.5000, 0.3600), (0.5000, 0.4333), (0.5000, 0.5066), (0.5000, 0.5799),
    (0.4200, 0.6200), (0.4600, 0.6250), (0.5000, 0.6300), (0.5400, 0.6250), (0.5800, 0.6200),
    // eyes
    (0.2400, 0.4000), (0.2900, 0.3750), (0.3500, 0.3750), (0.4000, 0.4000), (0.3500, 0.4250), (0.2900, 0.4250),
    (0.6000, 0.4000), (0.6500, 0.3750), (0.7100, 0.3750), (0.7600, 0.4000), (0.7100, 0.4250), (0.6500, 0.4250),
    // outer lips
    (0.3500, 0.7800), (0.4000, 0.7550), (0.4500, 0.7450), (0.5000, 0.7500), (0.5500, 0.7450),
    (0.6000, 0.7550), (0.6500, 0.7800), (0.6000, 0.8150), (0.5500, 0.8300), (0.5000, 0.8350),
    (0.4500, 0.8300), (0.4000, 0.8150),
    // inner lips
    (0.3700, 0.7800), (0.4500, 0.7700), (0.5000, 0.7720), (0.5500, 0.7700), (0.6300, 0.7800),
    (0.5500, 0.7900), (0.5000, 0.7920), (0.4500, 0.7900),
];

/// Supplies landmarks for a detected face.
pub trait LandmarkProvider: Send + Sync {
    fn landmarks(&self, gray: &GrayImage, face: &BoundingBox) -> Option<Landmarks68>;
}

/// Places [`TEMPLATE_68`] inside a cascade detection box. The cascade's box
/// sits slightly up and left of the framing square and is a little smaller,
/// which the offsets undo.
#[derive(Clone, Copy, Debug, Default)]
pub struct TemplateLandmarker;

const BOX_SCALE: f64 = 0.934;
const BOX_DX: f64 = 0.0387;
const BOX_DY: f64 = 0.0117;

impl TemplateLandmarker {
    pub fn place(face: &BoundingBox, width: u32, height: u32) -> Landmarks68 {
        let (bx, by) = (face.x as f64, face.y as f64);
        let (bw, bh) = (face.width as f64, face.height as f64);
        let max_x = (width.max(1) - 1) as f64;
        let max_y = (height.max(1) - 1) as f64;
        let points = TEMPLATE_68
            .iter()
            .map(|&(u, v)| {
                let x = bx + (u + BOX_DX) / BOX_SCALE * bw;
                let y = by + (v + BOX_DY) / BOX_SCALE * bh;
                (x.clamp(0.0, max_x), y.clamp(0.0, max_y))
            })
            .collect();
        Landmarks68 { points }
    }
}

impl LandmarkProvider for TemplateLandmarker {
    fn landmarks(&self, gray: &GrayImage, face: &BoundingBox) -> Option<Landmarks68> {
        Some(Self::place(face, gray.width(), gray.height()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn template_matches_generator_formulas() {
        use std::f64::consts::PI;
        for k in 0..17 {
            let t = PI - k as f64 * PI / 16.0;
            let (u, v) = TEMPLATE_68[k];
            assert!((u - (0.5 + 0.44 * t.cos())).abs() < 1e-4, "jaw {k}");
            assert!((v - (0.30 + 0.69 * t.sin())).abs() < 1e-4, "jaw {k}");
        }
    }

    #[test]
    fn parse_round_trip() {
        let pts: Vec<(f64, f64)> = (0..68).map(|i| (i as f64, 2.0 * i as f64 + 0.5)).collect();
        let lm = Landmarks68::new(pts).unwrap();
        assert_eq!(Landmarks68::parse(&lm.to_text()).unwrap(), lm);
    }

    #[test]
    fn wrong_count_rejected() {
        assert!(Landmarks68::parse("1 2\n3 4\n").is_err());
        assert!(Landmarks68::parse(&"1 2 3\n".repeat(68)).is_err());
        assert!(Landmarks68::new(vec![(0.0, 0.0); 67]).is_err());
    }

    #[test]
    fn bounds_check() {
        let lm = Landmarks68::new(vec![(5.0, 5.0); 68]).unwrap();
        assert!(lm.check_within(10, 10).is_ok());
        assert!(lm.check_within(5, 10).is_err());
    }

    #[test]
    fn placed_template_stays_inside() {
        let lm = TemplateLandmarker::place(&BoundingBox::new(0, 0, 50, 50), 50, 50);
        assert!(lm.check_within(50, 50).is_ok());
        let (x0, _, x1, _) = lm.extent(0..=16);
        assert!(x0 < 10.0 && x1 > 40.0);
    }
}
