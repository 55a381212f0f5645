//! Enrolls the desk corpus, trains the recognizer and attribute models,
//! then replays a recorded two-camera session and prints what happened.
//!
//!     cargo run --release --example replay [replay_dir]

use std::sync::Arc;

use doorwatch::door::{DeviceCore, LocalLink};
use doorwatch::gateway::{Gateway, ReplayOptions, ReplayReport, SystemConfig};
use doorwatch::notify::{MockTransport, NotifyMode};
use parking_lot::Mutex;

const ASSETS: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/assets");

fn main() -> anyhow::Result<()> {
    let replay_dir = std::env::args().nth(1).unwrap_or_else(|| format!("{ASSETS}/replay"));
    let data = tempfile::tempdir()?;
    let mut config = SystemConfig {
        data_dir: data.path().to_path_buf(),
        ..SystemConfig::default()
    };
    config.notify.prefs.mode = NotifyMode::Email;
    config.notify.prefs.emails = vec!["home@example.org".into()];

    let mail = Arc::new(MockTransport::new());
    let core = Arc::new(Mutex::new(DeviceCore::new("s", 30_000, 0)));
    let gw = Gateway::open_with(config, mail.clone(), Arc::new(LocalLink::new(core, "s")))?;

    let imported = gw.import_corpus(format!("{ASSETS}/corpus"))?;
    println!("enrolled {} people, {} images ({} without a face)", imported.persons, imported.images, imported.missed.len());
    let trained = gw.train(gw.config().recognizer.backend)?;
    println!(
        "{} v{} trained on {} faces in {} ms",
        trained.backend, trained.version, trained.metrics.samples, trained.metrics.duration_ms
    );
    for (attr, acc) in gw.train_attributes(format!("{ASSETS}/attrs"))? {
        println!("  {attr:<11} training accuracy {acc:.3}");
    }

    let report = gw.replay(&replay_dir, &ReplayOptions::default())?;
    println!("\n{} frames, {} active, {} events", report.frames, report.active_frames, report.events);
    for f in &report.per_frame {
        let label = ReplayReport::predicted_label(f);
        let truth = f.truth.as_deref().unwrap_or("-");
        println!(
            "{:>6} {:<10} active={:<5} truth={truth:<8} got={label:<8} {:>6.1} ms",
            f.timestamp_ms, f.camera_id, f.active, f.times.total_ms
        );
        for (d, t) in f.descriptions.iter().zip(&f.threats) {
            println!("         [{t}] {d}");
        }
    }
    for (stage, s) in &report.stages {
        println!("{stage:<9} median {:>7.2} ms  max {:>7.2} ms  (n={})", s.median_ms, s.max_ms, s.count);
    }
    println!(
        "frame to mail accepted: median {:.1} ms over {} notifications ({} failed)",
        report.end_to_end.median_ms, report.notifications_sent, report.notifications_failed
    );
    if let Some(id) = &report.identification {
        println!("identification over {} frames: macro F {:.3}, accuracy {:.3}", id.scored, id.macro_f, id.accuracy);
    }
    println!("{} messages in the mock outbox", mail.sent().len());
    Ok(())
}
