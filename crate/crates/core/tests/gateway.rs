mod common;

use std::collections::HashSet;
use std::sync::Arc;
use std::time::{Duration, Instant};

use common::{asset, empty, trained};
use doorwatch::description::{AnnotatedItems, Item, ThreatLevel};
use doorwatch::gateway::{
    load_replay_corpus, Admission, AdapterEndpoints, EventFilter, FrameHints, Ingest, ReplayOptions,
};
use doorwatch::recognition::{f_measure, UNKNOWN};
use doorwatch::vision::Frame;

fn frame(rel: &str, camera: &str, ts: u64) -> Frame {
    Frame::load(asset(rel), camera, ts).unwrap()
}

#[test]
fn enrolled_subject_at_front_door() {
    let rig = trained(|_| {});
    let gw = &rig.gw;
    let prime = gw.process_frame(&frame("replay/front_door_1000.png", "front_door", 1000), &FrameHints::default()).unwrap();
    assert!(!prime.active && prime.events.is_empty());
    let out = gw.process_frame(&frame("replay/front_door_6000.png", "front_door", 6000), &FrameHints::default()).unwrap();
    assert!(out.active);
    assert_eq!(out.events.len(), 1, "{:?}", out.events);
    let e = &out.events[0];
    let victor = gw.profiles().get("p05").unwrap();
    assert_eq!(e.person_id.as_deref(), Some("p05"));
    assert_eq!(e.facts.identity.as_deref(), Some(victor.name.as_str()));
    assert_eq!(e.facts.location, "in front of the entrance");
    assert!(e.description.starts_with("A family member, named Victor"), "{}", e.description);
    assert!(e.description.ends_with("in front of the entrance"), "{}", e.description);
    assert_eq!(e.threat, ThreatLevel::None);
    assert!(gw.image_path(&e.image_ref).unwrap().exists());
    assert_eq!(gw.query_events(&EventFilter::default()), out.events);
}

#[test]
fn armed_stranger_is_high_threat() {
    let rig = trained(|_| {});
    let gw = &rig.gw;
    let mut items = AnnotatedItems::new();
    items.insert("back_door", 2500, [Item::Gun]);
    gw.set_item_detector(Arc::new(items));
    gw.process_frame(&frame("replay/back_door_1500.png", "back_door", 1500), &FrameHints::default()).unwrap();
    let out = gw.process_frame(&frame("replay/back_door_2500.png", "back_door", 2500), &FrameHints::default()).unwrap();
    assert_eq!(out.events.len(), 1);
    let e = &out.events[0];
    assert_eq!(e.person_id, None);
    assert_eq!(e.identification.as_ref().map(|i| i.label.as_str()), Some(UNKNOWN));
    assert_eq!(e.threat, ThreatLevel::High);
    assert!(e.description.starts_with("An unknown person"), "{}", e.description);
    assert!(e.description.contains("who has a gun"), "{}", e.description);
    assert!(e.description.ends_with("at the back door"));

    assert!(gw.notify_queue().wait_idle(Duration::from_secs(10)));
    let sent = rig.mail.sent();
    assert_eq!(sent.len(), 1);
    let text = String::from_utf8_lossy(&sent[0]);
    assert!(text.contains("Subject: high: unknown at back_door"));
    assert!(text.contains("image/png"));
}

#[test]
fn static_pair_yields_nothing() {
    let rig = empty(|_| {});
    let gw = &rig.gw;
    for ts in [1000, 2000, 3000] {
        let out = gw.process_frame(&frame("replay/front_door_3000.png", "front_door", ts), &FrameHints::default()).unwrap();
        assert!(!out.active);
        assert!(out.events.is_empty());
    }
    let s = gw.stats().snapshot();
    assert_eq!((s.frames, s.active, s.detect, s.events), (3, 0, 0, 0));
    assert!(gw.events().is_empty());
}

#[test]
fn out_of_order_and_unknown_camera_are_refused() {
    let rig = empty(|_| {});
    let gw = &rig.gw;
    gw.process_frame(&frame("replay/front_door_1000.png", "front_door", 5000), &FrameHints::default()).unwrap();
    assert!(gw.process_frame(&frame("replay/front_door_1000.png", "front_door", 4000), &FrameHints::default()).is_err());
    assert!(gw.process_frame(&frame("replay/front_door_1000.png", "garage", 6000), &FrameHints::default()).is_err());
}

#[test]
fn every_active_frame_passes_each_stage_once() {
    let rig = empty(|_| {});
    let report = rig.gw.replay(asset("replay"), &ReplayOptions::default()).unwrap();
    let s = rig.gw.stats().snapshot();
    assert_eq!(s.frames, 10);
    assert_eq!(s.active as usize, report.active_frames);
    for stage in [s.detect, s.identify, s.describe, s.persist] {
        assert_eq!(stage, s.active);
    }
    assert_eq!(s.events as usize, report.events);
    for (name, l) in &report.stages {
        assert!(l.median_ms >= 0.0 && l.max_ms >= l.median_ms, "{name}: {l:?}");
    }
    assert!(report.end_to_end.median_ms >= 0.0);
    assert!(report.identification.is_some());
}

#[test]
fn empty_corpus_gives_an_empty_report() {
    let rig = empty(|_| {});
    let dir = tempfile::tempdir().unwrap();
    let report = rig.gw.replay(dir.path(), &ReplayOptions::default()).unwrap();
    assert_eq!((report.frames, report.events), (0, 0));
    assert!(report.identification.is_none());
    std::fs::write(dir.path().join("stray.png"), b"").unwrap();
    assert!(rig.gw.replay(dir.path(), &ReplayOptions::default()).is_err());
}

/// f01..f09 show p01 p02 p03 p01 p02 p04 p03 p01 p04 while the truth column
/// says p01 p02 p03 p01 p03 p04 p03 p02 p04. Counting by hand with a
/// recognizer that names whoever is shown:
///   p01 tp 2 fp 1 fn 0    p02 tp 1 fp 1 fn 1
///   p03 tp 2 fp 0 fn 1    p04 tp 2 fp 0 fn 0
#[test]
fn toy_replay_f_matches_hand_count() {
    let hand = [(2, 1, 0), (1, 1, 1), (2, 0, 1), (2, 0, 0)];
    let expected = hand
        .iter()
        .map(|&(tp, fp, fn_)| {
            let p = tp as f64 / (tp + fp) as f64;
            let r = tp as f64 / (tp + fn_) as f64;
            f_measure(p, r)
        })
        .sum::<f64>()
        / hand.len() as f64;
    assert!((expected - 0.775).abs() < 1e-12);

    let rig = trained(|_| {});
    let report = rig.gw.replay(asset("replay_toy"), &ReplayOptions::default()).unwrap();
    let id = report.identification.unwrap();
    assert_eq!((id.scored, id.gated), (9, 0));
    assert!((id.macro_f - expected).abs() < 1e-9, "replay F {} vs hand {expected}", id.macro_f);
}

#[test]
fn unreachable_adapter_degrades_but_still_reports() {
    let dead = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/persons", dead.local_addr().unwrap());
    drop(dead);
    let rig = empty(|c| {
        c.adapters = AdapterEndpoints {
            person_detector: Some(url.clone()),
            item_detector: Some(url.clone()),
            timeout_ms: 300,
            ..AdapterEndpoints::default()
        }
    });
    let gw = &rig.gw;
    gw.process_frame(&frame("replay/back_door_1500.png", "back_door", 1500), &FrameHints::default()).unwrap();
    let out = gw.process_frame(&frame("replay/back_door_2500.png", "back_door", 2500), &FrameHints::default()).unwrap();
    assert_eq!(out.events.len(), 1);
    let d = &out.events[0].degraded;
    assert!(d.contains(&"persons".to_string()) && d.contains(&"items".to_string()), "{d:?}");
    assert!(out.events[0].facts.items.is_empty());
}

#[test]
fn backpressure_drops_oldest_and_never_emits_for_them() {
    let rig = empty(|c| c.frame_queue = 2);
    let ingest = Ingest::spawn(rig.gw.clone());
    let toy = load_replay_corpus(asset("replay_toy")).unwrap();
    let mut dropped = HashSet::new();
    let mut submitted = 0;
    for round in 0..3u64 {
        for f in &toy {
            let ts = round * 100_000 + f.timestamp_ms;
            match ingest.submit(Frame::load(&f.image, "front_door", ts).unwrap(), FrameHints::default()) {
                Admission::Queued => {}
                Admission::Displaced { timestamp_ms, .. } => {
                    dropped.insert(timestamp_ms);
                }
                Admission::Paused => panic!("paused"),
            }
            submitted += 1;
        }
    }
    assert!(!dropped.is_empty(), "queue never filled");
    assert_eq!(ingest.dropped() as usize, dropped.len());
    ingest.shutdown();
    let s = rig.gw.stats().snapshot();
    assert_eq!(s.frames as usize, submitted - dropped.len());
    for e in rig.gw.events().all() {
        assert!(!dropped.contains(&e.timestamp_ms), "event {} from a dropped frame", e.event_id);
    }
}

#[test]
fn storage_failure_pauses_then_resumes() {
    let rig = empty(|_| {});
    let gw = rig.gw.clone();
    let ingest = Ingest::spawn(gw.clone());
    let images = rig.dir.path().join("images");
    std::fs::remove_dir_all(&images).unwrap();
    std::fs::write(&images, b"not a directory").unwrap();

    ingest.submit(frame("replay/back_door_1500.png", "back_door", 1500), FrameHints::default());
    ingest.submit(frame("replay/back_door_2500.png", "back_door", 2500), FrameHints::default());
    let t = Instant::now();
    while !ingest.is_paused() {
        assert!(t.elapsed() < Duration::from_secs(20), "never paused");
        std::thread::sleep(Duration::from_millis(20));
    }
    assert_eq!(
        ingest.submit(frame("replay/back_door_3500.png", "back_door", 3500), FrameHints::default()),
        Admission::Paused
    );
    assert!(gw.events().is_empty());

    std::fs::remove_file(&images).unwrap();
    std::fs::create_dir(&images).unwrap();
    let t = Instant::now();
    while ingest.is_paused() {
        assert!(t.elapsed() < Duration::from_secs(10), "never resumed");
        std::thread::sleep(Duration::from_millis(20));
    }
    assert_eq!(
        ingest.submit(frame("replay/back_door_4500.png", "back_door", 4500), FrameHints::default()),
        Admission::Queued
    );
    ingest.shutdown();
    assert_eq!(gw.events().len(), 1);
    assert_eq!(gw.events().all()[0].timestamp_ms, 4500);
}
