//! Clients for external inference services.
//!
//! Each call is an HTTP POST of the PNG-encoded image with the task in the
//! `X-Task` header (`persons`, `items` or `landmarks`); the landmark task
//! also passes the face box as `x`, `y`, `w`, `h` query parameters. The
//! reply is JSON:
//!
//! ```text
//! {"detections": [{"label": "gun", "confidence": 0.91, "box": {"x": 10, "y": 20, "width": 40, "height": 30}}],
//!  "landmarks": [[x, y], ...]}
//! ```
//!
//! Either key may be absent. Boxes outside the image, confidences outside
//! [0, 1] and landmark sets that leave the image are discarded.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::GatewayError;
use crate::description::{DescriptionError, ItemDetection, ItemDetector, LandmarkProvider, Landmarks68};
use crate::vision::{BoundingBox, Frame, GrayImage};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdapterTask {
    Persons,
    Items,
    Landmarks,
}

impl AdapterTask {
    pub fn as_str(&self) -> &'static str {
        match self {
            AdapterTask::Persons => "persons",
            AdapterTask::Items => "items",
            AdapterTask::Landmarks => "landmarks",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdapterDetection {
    pub label: String,
    pub confidence: f64,
    #[serde(rename = "box", default, skip_serializing_if = "Option::is_none")]
    pub bbox: Option<BoundingBox>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AdapterResponse {
    #[serde(default)]
    pub detections: Vec<AdapterDetection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub landmarks: Option<Vec<[f64; 2]>>,
}

impl AdapterResponse {
    /// Drops detections that do not fit a `width x height` image.
    pub fn validated(mut self, width: u32, height: u32) -> Self {
        let before = self.detections.len();
        self.detections.retain(|d| {
            (0.0..=1.0).contains(&d.confidence)
                && d.bbox.map_or(true, |b| {
                    b.width > 0 && b.height > 0 && b.right() <= width && b.bottom() <= height
                })
        });
        if self.detections.len() != before {
            tracing::warn!(dropped = before - self.detections.len(), "adapter detections out of bounds");
        }
        self
    }
}

/// Persons reported by something other than the face cascade.
pub trait PersonDetector: Send + Sync {
    fn detect_persons(&self, frame: &Frame) -> Result<Vec<BoundingBox>, GatewayError>;
}

#[derive(Clone)]
pub struct HttpAdapter {
    endpoint: String,
    client: reqwest::blocking::Client,
}

impl HttpAdapter {
    pub fn new(endpoint: impl Into<String>, timeout: Duration) -> Result<Self, GatewayError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| GatewayError::Adapter(e.to_string()))?;
        Ok(HttpAdapter {
            endpoint: endpoint.into(),
            client,
        })
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    pub fn call(
        &self,
        task: AdapterTask,
        png: Vec<u8>,
        query: &[(&str, String)],
        width: u32,
        height: u32,
    ) -> Result<AdapterResponse, GatewayError> {
        let err = |e: reqwest::Error| GatewayError::Adapter(format!("{} {}: {e}", self.endpoint, task.as_str()));
        let resp = self
            .client
            .post(&self.endpoint)
            .header("X-Task", task.as_str())
            .header("Content-Type", "image/png")
            .query(query)
            .body(png)
            .send()
            .map_err(err)?;
        if !resp.status().is_success() {
            return Err(GatewayError::Adapter(format!("{} returned {}", self.endpoint, resp.status())));
        }
        Ok(resp.json::<AdapterResponse>().map_err(err)?.validated(width, height))
    }
}

pub struct HttpPersonDetector(pub HttpAdapter);

impl PersonDetector for HttpPersonDetector {
    fn detect_persons(&self, frame: &Frame) -> Result<Vec<BoundingBox>, GatewayError> {
        let png = frame.encode_png()?;
        let r = self.0.call(AdapterTask::Persons, png, &[], frame.width(), frame.height())?;
        Ok(r.detections.into_iter().filter_map(|d| d.bbox).collect())
    }
}

pub struct HttpItemDetector(pub HttpAdapter);

impl ItemDetector for HttpItemDetector {
    fn detect(&self, frame: &Frame) -> Result<Vec<ItemDetection>, DescriptionError> {
        let png = frame.encode_png()?;
        let r = self
            .0
            .call(AdapterTask::Items, png, &[], frame.width(), frame.height())
            .map_err(|e| DescriptionError::Items(e.to_string()))?;
        Ok(r.detections
            .into_iter()
            .filter_map(|d| match d.label.parse() {
                Ok(item) => Some(ItemDetection {
                    item,
                    confidence: d.confidence,
                    region: d.bbox,
                }),
                Err(_) => {
                    tracing::debug!(label = %d.label, "ignoring unknown item label");
                    None
                }
            })
            .collect())
    }
}

pub struct HttpLandmarks(pub HttpAdapter);

impl LandmarkProvider for HttpLandmarks {
    fn landmarks(&self, gray: &GrayImage, face: &BoundingBox) -> Option<Landmarks68> {
        let png = gray.encode_png().ok()?;
        let q = [
            ("x", face.x.to_string()),
            ("y", face.y.to_string()),
            ("w", face.width.to_string()),
            ("h", face.height.to_string()),
        ];
        let r = match self.0.call(AdapterTask::Landmarks, png, &q, gray.width(), gray.height()) {
            Ok(r) => r,
            Err(e) => {
                tracing::warn!(error = %e, "landmark adapter failed");
                return None;
            }
        };
        let lm = Landmarks68::new(r.landmarks?.into_iter().map(|[x, y]| (x, y)).collect()).ok()?;
        lm.check_within(gray.width(), gray.height()).ok()?;
        Some(lm)
    }
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::description::Item;

    const ITEMS: &str = r#"{"detections":[
        {"label":"gun","confidence":0.9,"box":{"x":1,"y":1,"width":10,"height":10}},
        {"label":"knife","confidence":0.8,"box":{"x":60,"y":1,"width":10,"height":10}},
        {"label":"kite","confidence":0.7},
        {"label":"mask","confidence":1.5}]}"#;

    fn frame() -> Frame {
        Frame::from_gray("front_door", 0, &GrayImage::filled(64, 48, 90))
    }

    #[test]
    fn items_are_validated() {
        let url = stub::serve(ITEMS, Duration::ZERO);
        let d = HttpItemDetector(HttpAdapter::new(url, Duration::from_secs(2)).unwrap());
        let got = d.detect(&frame()).unwrap();
        // the knife box leaves the 64 px frame, kite is no item, mask confidence > 1
        assert_eq!(got.len(), 1);
        assert_eq!(got[0].item, Item::Gun);
    }

    #[test]
    fn timeout_is_an_error() {
        let url = stub::serve(ITEMS, Duration::from_millis(800));
        let d = HttpItemDetector(HttpAdapter::new(url, Duration::from_millis(150)).unwrap());
        let t = std::time::Instant::now();
        assert!(d.detect(&frame()).is_err());
        assert!(t.elapsed() < Duration::from_millis(700));
    }

    #[test]
    fn landmarks_outside_image_rejected() {
        let url = stub::serve(
            Box::leak(format!(r#"{{"landmarks":{}}}"#, serde_json::to_string(&vec![[100.0, 1.0]; 68]).unwrap()).into_boxed_str()),
            Duration::ZERO,
        );
        let p = HttpLandmarks(HttpAdapter::new(url, Duration::from_secs(2)).unwrap());
        let g = GrayImage::filled(64, 48, 90);
        assert!(p.landmarks(&g, &BoundingBox { x: 0, y: 0, width: 30, height: 30 }).is_none());
    }
}
