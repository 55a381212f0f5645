//! Builds an MMS alert for an armed stranger, shows the MIME message, then
//! sends it through a mock transport that fails twice before accepting,
//! and finally through the background queue.
//!
//!     cargo run --example notify

use std::sync::Arc;
use std::time::{Duration, Instant};

use doorwatch::description::ThreatLevel;
use doorwatch::notify::{
    build_notification, dispatch, render_message, Incident, MockTransport, NotifyMode, NotifyPrefs, NotifyQueue,
    RetryPolicy,
};

const SCENE: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/assets/replay/back_door_2500.png");

fn main() -> anyhow::Result<()> {
    let incident = Incident {
        event_id: "0000000004-back_door".into(),
        camera_id: "back_door".into(),
        identity: None,
        threat: ThreatLevel::High,
        description: Some("An unknown person who has a gun at the back door".into()),
        image: Some(SCENE.into()),
    };
    let prefs = NotifyPrefs {
        mode: NotifyMode::Mms,
        phones: vec!["9015550142".into()],
        mms_gateway: "mms.example.net".into(),
        ..NotifyPrefs::default()
    };
    let n = build_notification(&incident, &prefs)?;
    println!("to {:?}\nsubject {:?}", n.recipients, n.subject);

    let raw = render_message(&n, &prefs.from)?.formatted();
    let text = String::from_utf8_lossy(&raw);
    for line in text.lines().filter(|l| !l.starts_with(char::is_whitespace)).take(14) {
        println!("  | {}", &line[..line.len().min(90)]);
    }
    println!("  | ... {} bytes total", raw.len());

    let flaky = MockTransport::failing_first(2);
    let retry = RetryPolicy {
        max_attempts: 3,
        base_backoff_ms: 50,
    };
    let r = dispatch(&n, &flaky, &retry);
    println!(
        "\nflaky transport: accepted={} after {} attempts, backoff {:?} ms, {:.1} ms",
        r.accepted, r.attempts, r.backoff_ms, r.latency_ms
    );

    let mock = Arc::new(MockTransport::new());
    let queue = NotifyQueue::spawn(8, mock.clone(), None, retry);
    let origin = Instant::now();
    queue.enqueue(n.clone(), origin);
    let email = build_notification(
        &incident,
        &NotifyPrefs {
            mode: NotifyMode::Email,
            emails: vec!["home@example.org".into()],
            ..NotifyPrefs::default()
        },
    )?;
    queue.enqueue(email, origin);
    queue.wait_idle(Duration::from_secs(5));
    for rec in queue.shutdown() {
        println!("queued {:?}: accepted={} {:.2} ms after the event", rec.mode, rec.result.accepted, rec.end_to_end_ms);
    }
    println!("{} messages in the mock outbox", mock.sent().len());
    Ok(())
}
