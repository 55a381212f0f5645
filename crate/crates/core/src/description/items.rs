use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{DescriptionError, Item};
use crate::vision::{BoundingBox, Frame};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ItemDetection {
    pub item: Item,
    pub confidence: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region: Option<BoundingBox>,
}

/// Source of carried-item labels for a frame.
pub trait ItemDetector: Send + Sync {
    fn detect(&self, frame: &Frame) -> Result<Vec<ItemDetection>, DescriptionError>;
}

/// Reports nothing.
#[derive(Clone, Copy, Debug, Default)]
pub struct NoItems;

impl ItemDetector for NoItems {
    fn detect(&self, _frame: &Frame) -> Result<Vec<ItemDetection>, DescriptionError> {
        Ok(Vec::new())
    }
}

/// Replays hand annotations keyed by camera and timestamp.
#[derive(Clone, Debug, Default)]
pub struct AnnotatedItems {
    by_frame: HashMap<(String, u64), Vec<Item>>,
}

impl AnnotatedItems {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, camera_id: impl Into<String>, timestamp_ms: u64, items: impl IntoIterator<Item = Item>) {
        self.by_frame
            .entry((camera_id.into(), timestamp_ms))
            .or_default()
            .extend(items);
    }

    /// Parses an annotation cell: `-` or empty for none, otherwise a
    /// comma-separated list such as `gun,mask`.
    pub fn parse_cell(cell: &str) -> Result<Vec<Item>, DescriptionError> {
        let cell = cell.trim();
        if cell.is_empty() || cell == "-" {
            return Ok(Vec::new());
        }
        cell.split(',').map(|s| s.trim().parse()).collect()
    }

    pub fn len(&self) -> usize {
        self.by_frame.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_frame.is_empty()
    }
}

impl ItemDetector for AnnotatedItems {
    fn detect(&self, frame: &Frame) -> Result<Vec<ItemDetection>, DescriptionError> {
        Ok(self
            .by_frame
            .get(&(frame.camera_id().to_string(), frame.timestamp_ms()))
            .map(|items| {
                items
                    .iter()
                    .map(|&item| ItemDetection {
                        item,
                        confidence: 1.0,
                        region: None,
                    })
                    .collect()
            })
            .unwrap_or_default())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vision::GrayImage;

    #[test]
    fn annotations_match_by_camera_and_time() {
        let mut a = AnnotatedItems::new();
        a.insert("back_door", 2500, AnnotatedItems::parse_cell("gun, mask").unwrap());
        let g = GrayImage::filled(4, 4, 0);
        let hit = a.detect(&Frame::from_gray("back_door", 2500, &g)).unwrap();
        assert_eq!(hit.iter().map(|d| d.item).collect::<Vec<_>>(), vec![Item::Gun, Item::Mask]);
        assert!(a.detect(&Frame::from_gray("front_door", 2500, &g)).unwrap().is_empty());
        assert!(NoItems.detect(&Frame::from_gray("x", 0, &g)).unwrap().is_empty());
    }

    #[test]
    fn cell_parsing() {
        assert!(AnnotatedItems::parse_cell("-").unwrap().is_empty());
        assert_eq!(AnnotatedItems::parse_cell("baseball bat").unwrap(), vec![Item::BaseballBat]);
        assert!(AnnotatedItems::parse_cell("bazooka").is_err());
    }
}
