//! Haar face detection over the annotated scenes, then the frame-difference
//! gate over consecutive frames of the recorded session.
//!
//!     cargo run --release --example detect

use std::collections::HashMap;
use std::time::Instant;

use doorwatch::vision::{detect_change, to_grayscale, BoundingBox, ChangeParams, FaceDetector, Frame};

const ASSETS: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/assets");

fn main() -> anyhow::Result<()> {
    let detector = FaceDetector::bundled();
    let annotations = std::fs::read_to_string(format!("{ASSETS}/detection/annotations.tsv"))?;
    let mut found = 0;
    let mut total = 0;
    for line in annotations.lines().skip(1) {
        let c: Vec<&str> = line.split('\t').collect();
        let truth = BoundingBox {
            x: c[1].parse()?,
            y: c[2].parse()?,
            width: c[3].parse()?,
            height: c[4].parse()?,
        };
        let gray = to_grayscale(&Frame::load(format!("{ASSETS}/detection/{}", c[0]), "scene", 0)?);
        let t = Instant::now();
        let faces = detector.detect(&gray);
        let best = faces.iter().map(|f| f.iou(&truth)).fold(0.0, f64::max);
        total += 1;
        if best >= 0.5 {
            found += 1;
        }
        println!(
            "{:<14} {:>2} detections  best IoU {best:.2}  {:>6.1} ms",
            c[0],
            faces.len(),
            t.elapsed().as_secs_f64() * 1e3
        );
    }
    println!("{found}/{total} annotated faces found at IoU >= 0.5\n");

    let frames = std::fs::read_to_string(format!("{ASSETS}/replay/frames.tsv"))?;
    let params = ChangeParams::default();
    let mut last = HashMap::new();
    for line in frames.lines().skip(1) {
        let c: Vec<&str> = line.split('\t').collect();
        let gray = to_grayscale(&Frame::load(format!("{ASSETS}/replay/{}", c[2]), c[1], c[0].parse()?)?);
        match last.insert(c[1].to_string(), gray.clone()) {
            Some(prev) => {
                let r = detect_change(&prev, &gray, &params)?;
                println!("{:>5} {:<10} changed {:>6.2}%  active={}", c[0], c[1], 100.0 * r.changed_fraction, r.active);
            }
            None => println!("{:>5} {:<10} first frame, reference only", c[0], c[1]),
        }
    }
    Ok(())
}
