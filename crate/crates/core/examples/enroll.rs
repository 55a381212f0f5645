//! Guided enrollment: one person, four capture attempts. Each is either
//! stored or answered with the placement phrase a phone app would show.
//!
//!     cargo run --release --example enroll

use doorwatch::description::Group;
use doorwatch::profile::{AddImageOutcome, CaptureQuality, Demographics, GyroSample, ProfileStore};
use doorwatch::vision::{to_grayscale, FaceDetector, Frame, GrayImage};

const PORTRAIT: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/assets/corpus/p01/00.png");

/// The portrait placed on a flat canvas of `side` pixels with its top-left
/// corner at `(ox, oy)`.
fn placed(portrait: &GrayImage, side: u32, ox: u32, oy: u32) -> Frame {
    let fill = portrait.mean() as u8;
    let canvas = GrayImage::from_fn(side, side, |x, y| {
        if x >= ox && y >= oy && x - ox < portrait.width() && y - oy < portrait.height() {
            portrait.get(x - ox, y - oy)
        } else {
            fill
        }
    });
    Frame::from_gray("phone", 0, &canvas)
}

fn gyro(degrees_per_second: f64) -> Vec<GyroSample> {
    (0..5)
        .map(|i| GyroSample {
            timestamp_ms: i * 100,
            yaw: degrees_per_second * i as f64 / 10.0,
        })
        .collect()
}

fn main() -> anyhow::Result<()> {
    let dir = tempfile::tempdir()?;
    let store = ProfileStore::open(dir.path())?;
    let detector = FaceDetector::bundled();
    let quality = CaptureQuality::default();
    let person = store.enroll(&Demographics {
        name: "John".into(),
        email: Some("john@example.org".into()),
        phone: None,
        group: Group::Friend,
    })?;
    println!("enrolled {} ({})", person.name, person.person_id);

    let portrait = to_grayscale(&Frame::load(PORTRAIT, "phone", 0)?);
    let attempts = [
        ("off to the corner", placed(&portrait, 480, 240, 0), gyro(5.0)),
        ("far away", placed(&portrait, 960, 360, 360), gyro(5.0)),
        ("centered, phone turning", placed(&portrait, 480, 120, 120), gyro(35.0)),
        ("centered, phone steady", placed(&portrait, 480, 120, 120), gyro(5.0)),
    ];
    for (what, frame, samples) in attempts {
        match store.add_face_image(&person.person_id, &frame, &detector, &quality, &samples) {
            Ok(AddImageOutcome::Accepted(r)) => println!("{what:<24} stored {}", r.image_ref),
            Ok(AddImageOutcome::Rejected(m)) => println!("{what:<24} \"{}\"", m.text),
            Err(e) => println!("{what:<24} error: {e}"),
        }
    }
    let n = store.get(&person.person_id).map_or(0, |p| p.images.len());
    println!("{n} image(s) on file");
    Ok(())
}
