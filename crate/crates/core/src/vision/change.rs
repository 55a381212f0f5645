use serde::{Deserialize, Serialize};

use super::{BoundingBox, GrayImage, VisionError};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChangeParams {
    /// A pixel counts as changed when its absolute difference exceeds this.
    pub per_pixel_delta: u8,
    /// Frame is active when the changed fraction exceeds this.
    pub activity_fraction: f64,
    /// Detections whose box changed less than this are treated as part of
    /// the static background.
    pub region_fraction: f64,
}

impl Default for ChangeParams {
    fn default() -> Self {
        ChangeParams {
            per_pixel_delta: 25,
            activity_fraction: 0.01,
            region_fraction: 0.1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChangeReport {
    pub changed_fraction: f64,
    pub active: bool,
}

/// Frame-difference activity test.
pub fn detect_change(
    prev: &GrayImage,
    curr: &GrayImage,
    params: &ChangeParams,
) -> Result<ChangeReport, VisionError> {
    if prev.width() != curr.width() || prev.height() != curr.height() {
        return Err(VisionError::DimensionMismatch(
            prev.width(),
            prev.height(),
            curr.width(),
            curr.height(),
        ));
    }
    let changed = prev
        .pixels()
        .iter()
        .zip(curr.pixels())
        .filter(|(&a, &b)| a.abs_diff(b) > params.per_pixel_delta)
        .count();
    let changed_fraction = changed as f64 / prev.pixels().len() as f64;
    Ok(ChangeReport {
        changed_fraction,
        active: changed_fraction > params.activity_fraction,
    })
}

/// Changed fraction inside `area`, which must lie within both images.
pub fn region_change(
    prev: &GrayImage,
    curr: &GrayImage,
    area: &BoundingBox,
    params: &ChangeParams,
) -> Result<f64, VisionError> {
    if prev.width() != curr.width() || prev.height() != curr.height() {
        return Err(VisionError::DimensionMismatch(
            prev.width(),
            prev.height(),
            curr.width(),
            curr.height(),
        ));
    }
    let a = prev.crop(area)?;
    let b = curr.crop(area)?;
    Ok(detect_change(&a, &b, params)?.changed_fraction)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identical_frames_are_inactive() {
        let img = GrayImage::from_fn(20, 10, |x, y| (x + y) as u8);
        let r = detect_change(&img, &img, &ChangeParams::default()).unwrap();
        assert_eq!(r.changed_fraction, 0.0);
        assert!(!r.active);
    }

    #[test]
    fn full_swing_is_active() {
        let a = GrayImage::filled(8, 8, 0);
        let b = GrayImage::filled(8, 8, 255);
        let r = detect_change(&a, &b, &ChangeParams::default()).unwrap();
        assert_eq!(r.changed_fraction, 1.0);
        assert!(r.active);
    }

    #[test]
    fn single_pixel_in_ten_thousand() {
        let a = GrayImage::filled(100, 100, 10);
        let mut px = a.pixels().to_vec();
        px[4321] = 200;
        let b = GrayImage::new(100, 100, px).unwrap();
        let r = detect_change(&a, &b, &ChangeParams::default()).unwrap();
        assert_eq!(r.changed_fraction, 0.0001);
        assert!(!r.active);
    }

    #[test]
    fn delta_is_strict() {
        let a = GrayImage::filled(4, 4, 100);
        let b = GrayImage::filled(4, 4, 125);
        let r = detect_change(&a, &b, &ChangeParams::default()).unwrap();
        assert_eq!(r.changed_fraction, 0.0);
    }

    #[test]
    fn mismatched_dimensions() {
        let a = GrayImage::filled(4, 4, 0);
        let b = GrayImage::filled(4, 5, 0);
        assert!(matches!(
            detect_change(&a, &b, &ChangeParams::default()),
            Err(VisionError::DimensionMismatch(..))
        ));
    }

    #[test]
    fn region_change_counts_inside_only() {
        let a = GrayImage::filled(10, 10, 0);
        let b = GrayImage::from_fn(10, 10, |x, _| if x < 5 { 255 } else { 0 });
        let p = ChangeParams::default();
        let left = BoundingBox { x: 0, y: 0, width: 5, height: 10 };
        let right = BoundingBox { x: 5, y: 0, width: 5, height: 10 };
        assert_eq!(region_change(&a, &b, &left, &p).unwrap(), 1.0);
        assert_eq!(region_change(&a, &b, &right, &p).unwrap(), 0.0);
    }

    proptest! {
        #[test]
        fn symmetric_and_reflexive(
            a in proptest::collection::vec(any::<u8>(), 64),
            b in proptest::collection::vec(any::<u8>(), 64),
            delta in any::<u8>(),
        ) {
            let a = GrayImage::new(8, 8, a).unwrap();
            let b = GrayImage::new(8, 8, b).unwrap();
            let p = ChangeParams { per_pixel_delta: delta, ..ChangeParams::default() };
            let ab = detect_change(&a, &b, &p).unwrap();
            let ba = detect_change(&b, &a, &p).unwrap();
            prop_assert_eq!(ab, ba);
            prop_assert_eq!(detect_change(&a, &a, &p).unwrap().changed_fraction, 0.0);
        }
    }
}
