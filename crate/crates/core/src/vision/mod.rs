//! Front of the monitoring pipeline: frames, activity gating, summed-area
//! tables and Haar-cascade face detection.

mod cascade;
mod change;
mod detect;
mod geometry;
mod image;
mod integral;

pub use cascade::{CascadeModel, HaarFeature, Stage, WeakClassifier, WeightedRect};
pub use change::{detect_change, region_change, ChangeParams, ChangeReport};
pub use detect::{detect_faces, FaceDetector, ScanParams};
pub use geometry::BoundingBox;
pub use image::{Frame, GrayImage};
pub use integral::IntegralImage;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum VisionError {
    #[error("invalid image dimensions {width}x{height}")]
    InvalidDimensions { width: u32, height: u32 },
    #[error("pixel buffer has {actual} bytes, expected {expected}")]
    BufferLength { expected: usize, actual: usize },
    #[error("image dimensions differ: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(u32, u32, u32, u32),
    #[error("out of bounds: {0}")]
    OutOfBounds(String),
    #[error("image decode/encode failed: {0}")]
    Decode(String),
    #[error("cascade parse error: {0}")]
    CascadeParse(String),
    #[error("invalid cascade: {0}")]
    CascadeInvalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// BT.601 luminance, rounded to nearest.
pub fn to_grayscale(frame: &Frame) -> GrayImage {
    let pixels = frame
        .pixels()
        .chunks_exact(3)
        .map(|p| {
            // integer form of round(0.299 R + 0.587 G + 0.114 B)
            let v = 299 * p[0] as u32 + 587 * p[1] as u32 + 114 * p[2] as u32;
            ((v + 500) / 1000).min(255) as u8
        })
        .collect();
    GrayImage::new(frame.width(), frame.height(), pixels).expect("frame dimensions are validated")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn solid(r: u8, g: u8, b: u8) -> Frame {
        Frame::new("cam", 0, 4, 3, [r, g, b].repeat(12)).unwrap()
    }

    #[test]
    fn grayscale_reference_colors() {
        assert!(to_grayscale(&solid(0, 0, 0)).pixels().iter().all(|&v| v == 0));
        assert!(to_grayscale(&solid(255, 255, 255))
            .pixels()
            .iter()
            .all(|&v| v == 255));
        // round(0.299 * 255) = round(76.245)
        assert!(to_grayscale(&solid(255, 0, 0)).pixels().iter().all(|&v| v == 76));
    }

    #[test]
    fn grayscale_matches_float_formula() {
        for r in (0..=255).step_by(17) {
            for g in (0..=255).step_by(15) {
                for b in (0..=255).step_by(51) {
                    let expect = (0.299 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64)
                        .round()
                        .clamp(0.0, 255.0) as u8;
                    let got = to_grayscale(&solid(r, g, b)).get(0, 0);
                    assert_eq!(got, expect, "rgb=({r},{g},{b})");
                }
            }
        }
    }

    #[test]
    fn grayscale_round_trip_is_idempotent() {
        let gray = GrayImage::from_fn(13, 7, |x, y| (x * 19 + y * 31) as u8);
        let again = to_grayscale(&Frame::from_gray("c", 0, &gray));
        assert_eq!(again, gray);
    }
}
