//! Circular local binary patterns with uniform (u2) histogram pooling.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{FeatureVector, RecognitionError};
use crate::vision::GrayImage;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct LbpParams {
    pub radius: u32,
    pub points: u32,
    /// The face is split into `grid x grid` cells.
    pub grid: u32,
    /// Side of the square face crop features are computed on.
    pub face_size: u32,
}

impl Default for LbpParams {
    fn default() -> Self {
        LbpParams {
            radius: 1,
            points: 8,
            grid: 7,
            face_size: 128,
        }
    }
}

impl LbpParams {
    pub fn validate(&self) -> Result<(), RecognitionError> {
        if !matches!(self.points, 4 | 8 | 16) {
            return Err(RecognitionError::UnsupportedPoints(self.points));
        }
        if self.radius < 1 || self.grid < 1 || self.face_size < self.grid {
            return Err(RecognitionError::InvalidParams(format!("{self:?}")));
        }
        Ok(())
    }

    /// Integer sample offsets `(dx, dy)` for each bit, bit `k` at angle
    /// `2*pi*k/P` counter-clockwise from +x (screen y points down). Circle
    /// positions are snapped to the nearest pixel, so codes depend only on
    /// the order of pixel values.
    pub fn offsets(&self) -> Vec<(i64, i64)> {
        let r = self.radius as f64;
        (0..self.points)
            .map(|k| {
                let theta = 2.0 * PI * k as f64 / self.points as f64;
                ((r * theta.cos()).round() as i64, (-r * theta.sin()).round() as i64)
            })
            .collect()
    }

    /// Histogram length: `grid^2` cells of `bins(P)` entries.
    pub fn dimension(&self) -> Result<usize, RecognitionError> {
        Ok((self.grid * self.grid) as usize * uniform_mapping(self.points)?.bins())
    }
}

/// LBP code of pixel `(x, y)`; bit `k` is set when sample `k` is at least
/// the center value.
pub fn lbp_code(gray: &GrayImage, x: u32, y: u32, params: &LbpParams) -> Result<u32, RecognitionError> {
    params.validate()?;
    let r = params.radius;
    if x < r || y < r || x + r >= gray.width() || y + r >= gray.height() {
        return Err(RecognitionError::OutOfBounds { x, y, radius: r });
    }
    let center = gray.get(x, y);
    let mut code = 0u32;
    for (k, (dx, dy)) in params.offsets().into_iter().enumerate() {
        let v = gray.get((x as i64 + dx) as u32, (y as i64 + dy) as u32);
        if v >= center {
            code |= 1 << k;
        }
    }
    Ok(code)
}

/// Lookup from raw code to histogram bin.
#[derive(Clone, Debug)]
pub struct UniformMapping {
    points: u32,
    table: Vec<u16>,
    bins: usize,
}

impl UniformMapping {
    pub fn points(&self) -> u32 {
        self.points
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    /// Index of the pooled bin shared by every non-uniform code.
    pub fn non_uniform_bin(&self) -> usize {
        self.bins - 1
    }

    pub fn bin(&self, code: u32) -> usize {
        self.table[code as usize] as usize
    }

    pub fn is_uniform(&self, code: u32) -> bool {
        self.bin(code) != self.non_uniform_bin()
    }
}

/// Circular 0/1 transitions in a `points`-bit code.
pub fn transitions(code: u32, points: u32) -> u32 {
    let mask = (1u32 << points) - 1;
    let rotated = ((code >> 1) | (code << (points - 1))) & mask;
    (code ^ rotated).count_ones()
}

/// Uniform codes (at most two transitions) get their own bins in increasing
/// code order; everything else lands in one trailing bin.
pub fn uniform_mapping(points: u32) -> Result<UniformMapping, RecognitionError> {
    if !matches!(points, 4 | 8 | 16) {
        return Err(RecognitionError::UnsupportedPoints(points));
    }
    let n = 1usize << points;
    let mut table = vec![0u16; n];
    let mut next = 0u16;
    let mut non_uniform = Vec::new();
    for code in 0..n as u32 {
        if transitions(code, points) <= 2 {
            table[code as usize] = next;
            next += 1;
        } else {
            non_uniform.push(code);
        }
    }
    for code in non_uniform {
        table[code as usize] = next;
    }
    Ok(UniformMapping {
        points,
        table,
        bins: next as usize + 1,
    })
}

/// Spatial histogram of uniform LBP codes.
///
/// Every pixel of the crop contributes (samples beyond the border replicate
/// the edge). Cells are `floor(side / grid)` pixels, the last row and column
/// absorbing the remainder; each cell's histogram is L1-normalized.
pub fn lbp_feature(face: &GrayImage, params: &LbpParams) -> Result<FeatureVector, RecognitionError> {
    params.validate()?;
    let g = params.grid;
    let (w, h) = (face.width(), face.height());
    if w < g || h < g {
        return Err(RecognitionError::FaceTooSmall {
            width: w,
            height: h,
            grid: g,
        });
    }
    let mapping = uniform_mapping(params.points)?;
    let bins = mapping.bins();
    let offsets = params.offsets();
    let (cw, ch) = (w / g, h / g);
    let mut hist = vec![0.0f64; (g * g) as usize * bins];
    let mut counts = vec![0u32; (g * g) as usize];
    for y in 0..h {
        let cy = (y / ch).min(g - 1);
        for x in 0..w {
            let cx = (x / cw).min(g - 1);
            let center = face.get(x, y);
            let mut code = 0u32;
            for (k, &(dx, dy)) in offsets.iter().enumerate() {
                if face.get_clamped(x as i64 + dx, y as i64 + dy) >= center {
                    code |= 1 << k;
                }
            }
            let cell = (cy * g + cx) as usize;
            hist[cell * bins + mapping.bin(code)] += 1.0;
            counts[cell] += 1;
        }
    }
    for (cell, &n) in counts.iter().enumerate() {
        let n = n as f64;
        for v in &mut hist[cell * bins..(cell + 1) * bins] {
            *v /= n;
        }
    }
    Ok(FeatureVector::new(hist))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_patch_sets_every_bit() {
        let img = GrayImage::filled(3, 3, 90);
        assert_eq!(lbp_code(&img, 1, 1, &LbpParams::default()).unwrap(), 255);
    }

    #[test]
    fn bright_center_clears_every_bit() {
        let img = GrayImage::from_fn(3, 3, |x, y| if (x, y) == (1, 1) { 200 } else { 10 });
        assert_eq!(lbp_code(&img, 1, 1, &LbpParams::default()).unwrap(), 0);
    }

    #[test]
    fn bit_order_is_counter_clockwise_from_east() {
        // only the east neighbour (bit 0) and the north neighbour (bit 2) are bright
        let img = GrayImage::from_fn(3, 3, |x, y| match (x, y) {
            (2, 1) | (1, 0) => 200,
            (1, 1) => 100,
            _ => 0,
        });
        assert_eq!(lbp_code(&img, 1, 1, &LbpParams::default()).unwrap(), 0b101);
    }

    #[test]
    fn border_pixels_are_rejected() {
        let img = GrayImage::filled(5, 5, 0);
        let p = LbpParams::default();
        assert!(matches!(
            lbp_code(&img, 0, 2, &p),
            Err(RecognitionError::OutOfBounds { .. })
        ));
        assert!(lbp_code(&img, 4, 2, &p).is_err());
        assert!(lbp_code(&img, 3, 3, &p).is_ok());
    }

    #[test]
    fn mapping_sizes() {
        let m = uniform_mapping(8).unwrap();
        assert_eq!(m.bins(), 59);
        assert!(m.is_uniform(0));
        assert!(m.is_uniform(255));
        assert!(!m.is_uniform(0b0101_0101));
        assert_eq!(m.bin(0b0101_0101), 58);
        assert_eq!(uniform_mapping(4).unwrap().bins(), 15);
        assert_eq!(uniform_mapping(16).unwrap().bins(), 16 * 15 + 3);
        assert!(matches!(
            uniform_mapping(6),
            Err(RecognitionError::UnsupportedPoints(6))
        ));
    }

    #[test]
    fn flat_face_histogram() {
        let p = LbpParams::default();
        let f = lbp_feature(&GrayImage::filled(128, 128, 60), &p).unwrap();
        assert_eq!(f.len(), 2891);
        let m = uniform_mapping(8).unwrap();
        let b255 = m.bin(255);
        for cell in 0..49 {
            let h = &f.as_slice()[cell * 59..(cell + 1) * 59];
            assert_eq!(h[b255], 1.0);
            assert_eq!(h.iter().sum::<f64>(), 1.0);
        }
    }

    #[test]
    fn remainder_goes_to_last_cells() {
        // 10 pixels over a 3-cell grid: cells of 3, 3, 4
        let p = LbpParams {
            grid: 3,
            face_size: 10,
            ..LbpParams::default()
        };
        let f = lbp_feature(&GrayImage::filled(10, 10, 1), &p).unwrap();
        let total: f64 = f.as_slice().iter().sum();
        assert!((total - 9.0).abs() < 1e-12);
    }

    #[test]
    fn face_smaller_than_grid() {
        let p = LbpParams::default();
        assert!(matches!(
            lbp_feature(&GrayImage::filled(5, 20, 0), &p),
            Err(RecognitionError::FaceTooSmall { .. })
        ));
    }
}
