//! Trains every recognition backend on the bundled desk corpus with a fixed
//! 70/30 split and prints held-out F-measures.
//!
//!     cargo run --release --example recognize [corpus_dir]

use std::time::Instant;

use doorwatch::recognition::{
    identify, load_faces, load_labels, split_train_test, train_backend, Backend, Confusion,
    TrainConfig, UNKNOWN,
};
use doorwatch::vision::FaceDetector;

fn main() -> anyhow::Result<()> {
    let root = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/assets/corpus").to_string());
    let entries = load_labels(&root)?;
    let (train, test) = split_train_test(&entries, |e| &e.person_id, 0.7, 2020);
    let config = TrainConfig::default();
    let detector = FaceDetector::bundled();
    let t = Instant::now();
    let (train_faces, train_missed) = load_faces(&root, &train, &detector, config.lbp.face_size)?;
    let (test_faces, test_missed) = load_faces(&root, &test, &detector, config.lbp.face_size)?;
    println!(
        "{} train / {} test images, {} without a face, loaded in {:.1}s",
        train.len(),
        test.len(),
        train_missed.len() + test_missed.len(),
        t.elapsed().as_secs_f64()
    );
    for backend in Backend::ALL {
        let t = Instant::now();
        let snap = train_backend(backend, &train_faces, &config, "example")?;
        let trained = t.elapsed();
        let mut closed = Confusion::new();
        let mut open = Confusion::new();
        for f in &test_faces {
            closed.add(&f.label, &identify(&f.face, &snap, f64::NEG_INFINITY)?.label);
            open.add(&f.label, &identify(&f.face, &snap, snap.unknown_threshold)?.label);
        }
        for m in &test_missed {
            closed.add(&m.person_id, UNKNOWN);
            open.add(&m.person_id, UNKNOWN);
        }
        println!(
            "{backend:<10} train {:>6.2}s  training acc {:.3}  F closed-set {:.3}  F with threshold {:.3} ({:.3})",
            trained.as_secs_f64(),
            snap.metrics.training_accuracy,
            closed.macro_f(),
            open.macro_f(),
            snap.unknown_threshold,
        );
    }
    Ok(())
}
