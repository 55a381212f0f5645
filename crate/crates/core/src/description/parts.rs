use serde::{Deserialize, Serialize};

use super::{DescriptionError, Landmarks68};
use crate::vision::{BoundingBox, GrayImage};

/// Parts smaller than this on either side are dropped.
pub const MIN_PART_SIDE: u32 = 20;

const MOUTH_PAD: f64 = 0.10;
const EYE_PAD: f64 = 0.25;
const HEAD_HEIGHT: f64 = 0.4;

#[derive(Clone, Debug, PartialEq)]
pub struct FacePart {
    pub region: BoundingBox,
    pub image: GrayImage,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct FaceParts {
    pub beard: Option<FacePart>,
    pub mustache: Option<FacePart>,
    pub eyes: Option<FacePart>,
    pub head: Option<FacePart>,
}

/// Region boxes before cropping, `None` where a part was too small.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartRegions {
    pub beard: Option<BoundingBox>,
    pub mustache: Option<BoundingBox>,
    pub eyes: Option<BoundingBox>,
    pub head: Option<BoundingBox>,
}

// Padding is a fraction of the part's width on all four sides; landmark
// strips such as the eye line are much wider than tall.
fn padded(x0: f64, y0: f64, x1: f64, y1: f64, pad: f64, w: u32, h: u32) -> Option<BoundingBox> {
    let m = (x1 - x0) * pad;
    kept(x0 - m, y0 - m, x1 + m, y1 + m, w, h)
}

fn kept(x0: f64, y0: f64, x1: f64, y1: f64, w: u32, h: u32) -> Option<BoundingBox> {
    BoundingBox::from_edges_clipped(
        x0.round() as i64,
        y0.round() as i64,
        x1.round() as i64,
        y1.round() as i64,
        w,
        h,
    )
    .filter(|b| b.width >= MIN_PART_SIDE && b.height >= MIN_PART_SIDE)
}

/// Landmark-derived boxes on a `width x height` image.
///
/// * mustache: x over points 48..54, y from the nose base (33) to the top
///   of the upper lip (51), padded by 10% of its width
/// * beard: x over the jaw points 4..12, y from the lower lip (57) to the
///   chin (8), padded by 10% of its width
/// * eyes: extent of 36..47, padded by 25% of its width
/// * head: full landmark width, ending at the highest brow point and
///   reaching up 0.4 of the landmark height
pub fn part_regions(lm: &Landmarks68, width: u32, height: u32) -> Result<PartRegions, DescriptionError> {
    lm.check_within(width, height)?;
    let p = |i: usize| lm.point(i);

    let mustache = padded(p(48).0, p(33).1, p(54).0, p(51).1, MOUTH_PAD, width, height);
    let beard = padded(p(4).0, p(57).1, p(12).0, p(8).1, MOUTH_PAD, width, height);
    let (ex0, ey0, ex1, ey1) = lm.extent(36..=47);
    let eyes = padded(ex0, ey0, ex1, ey1, EYE_PAD, width, height);

    let (fx0, fy0, fx1, fy1) = lm.extent(0..=67);
    let (_, brow_top, _, _) = lm.extent(17..=26);
    let head = kept(fx0, brow_top - HEAD_HEIGHT * (fy1 - fy0), fx1, brow_top, width, height);

    Ok(PartRegions {
        beard,
        mustache,
        eyes,
        head,
    })
}

pub fn crop_face_parts(face: &GrayImage, lm: &Landmarks68) -> Result<FaceParts, DescriptionError> {
    let r = part_regions(lm, face.width(), face.height())?;
    let crop = |b: Option<BoundingBox>| -> Result<Option<FacePart>, DescriptionError> {
        match b {
            Some(region) => Ok(Some(FacePart {
                region,
                image: face.crop(&region)?,
            })),
            None => Ok(None),
        }
    };
    Ok(FaceParts {
        beard: crop(r.beard)?,
        mustache: crop(r.mustache)?,
        eyes: crop(r.eyes)?,
        head: crop(r.head)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::description::TEMPLATE_68;

    fn template_at(side: f64, off: (f64, f64)) -> Landmarks68 {
        Landmarks68::new(
            TEMPLATE_68
                .iter()
                .map(|&(u, v)| (off.0 + u * side, off.1 + v * side))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn mustache_closed_form() {
        // symmetric template on a 200 px square with a 50 px top margin
        let lm = template_at(200.0, (0.0, 50.0));
        let r = part_regions(&lm, 200, 260).unwrap();
        // x 70..130 and y 176..200, each side grown by 6
        assert_eq!(r.mustache, Some(BoundingBox::new(64, 170, 72, 36)));
        // x 48..152 and y 125..135, grown by 26
        assert_eq!(r.eyes, Some(BoundingBox::new(22, 99, 156, 62)));
    }

    #[test]
    fn head_lies_above_brows() {
        let lm = template_at(200.0, (0.0, 80.0));
        let r = part_regions(&lm, 200, 300).unwrap();
        let head = r.head.unwrap();
        assert_eq!(head.bottom(), 128);
        assert_eq!(head.x, 12);
    }

    #[test]
    fn small_chin_drops_beard() {
        let lm = template_at(60.0, (0.0, 0.0));
        let r = part_regions(&lm, 60, 60).unwrap();
        assert!(r.beard.is_none());
        assert!(r.mustache.is_none());
    }

    #[test]
    fn parts_stay_inside() {
        let lm = template_at(180.0, (10.0, 5.0));
        let img = GrayImage::from_fn(200, 200, |x, y| (x ^ y) as u8);
        let parts = crop_face_parts(&img, &lm).unwrap();
        for p in [&parts.beard, &parts.mustache, &parts.eyes, &parts.head].into_iter().flatten() {
            assert!(img.bounds().contains(&p.region));
            assert_eq!(p.image.width(), p.region.width);
        }
    }

    #[test]
    fn landmarks_outside_image() {
        let lm = template_at(200.0, (0.0, 0.0));
        assert!(part_regions(&lm, 100, 100).is_err());
    }
}
