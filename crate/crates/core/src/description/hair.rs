use serde::{Deserialize, Serialize};

use super::{DescriptionError, HairColor};
use crate::vision::GrayImage;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HairThresholds {
    /// Mean intensity below this is black.
    pub black_below: f64,
    /// Mean intensity above this is white.
    pub white_above: f64,
}

impl Default for HairThresholds {
    fn default() -> Self {
        HairThresholds {
            black_below: 60.0,
            white_above: 150.0,
        }
    }
}

/// Classifies the head region by the mean of its intensity histogram.
pub fn hair_color(head: &GrayImage, t: &HairThresholds) -> Result<HairColor, DescriptionError> {
    if head.pixels().is_empty() {
        return Err(DescriptionError::EmptyRegion);
    }
    let mut hist = [0u64; 256];
    for &p in head.pixels() {
        hist[p as usize] += 1;
    }
    let total: u64 = hist.iter().sum();
    let mean = hist
        .iter()
        .enumerate()
        .map(|(v, &n)| v as f64 * n as f64)
        .sum::<f64>()
        / total as f64;
    Ok(if mean < t.black_below {
        HairColor::Black
    } else if mean > t.white_above {
        HairColor::White
    } else {
        HairColor::Brown
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thresholds() {
        let t = HairThresholds::default();
        let c = |v| hair_color(&GrayImage::filled(8, 8, v), &t).unwrap();
        assert_eq!(c(0), HairColor::Black);
        assert_eq!(c(255), HairColor::White);
        assert_eq!(c(100), HairColor::Brown);
        assert_eq!(c(60), HairColor::Brown);
        assert_eq!(c(150), HairColor::Brown);
        assert_eq!(c(151), HairColor::White);
    }
}
