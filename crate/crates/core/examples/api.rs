//! Serves the HTTP API on an ephemeral port over a gateway that has just
//! replayed the recorded session, then plays operator: lists high-threat
//! events, grants access from one of them and watches the door relock.
//!
//!     cargo run --release --example api

use std::sync::Arc;
use std::time::Duration;

use doorwatch::door::{DeviceCore, LocalLink};
use doorwatch::gateway::{api, Gateway, ReplayOptions, SystemConfig};
use doorwatch::notify::MockTransport;
use parking_lot::Mutex;
use serde_json::{json, Value};

const REPLAY: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/assets/replay");

fn main() -> anyhow::Result<()> {
    let data = tempfile::tempdir()?;
    let mut config = SystemConfig {
        data_dir: data.path().to_path_buf(),
        ..SystemConfig::default()
    };
    config.api.token = "example-token".into();
    let core = Arc::new(Mutex::new(DeviceCore::new("s", 30_000, 0)));
    let gw = Arc::new(Gateway::open_with(
        config,
        Arc::new(MockTransport::new()),
        Arc::new(LocalLink::new(core, "s")),
    )?);
    // no one enrolled: every face is a stranger
    let report = gw.replay(REPLAY, &ReplayOptions::default())?;
    println!("replayed {} frames into {} events", report.frames, report.events);

    let rt = tokio::runtime::Runtime::new()?;
    let listener = rt.block_on(tokio::net::TcpListener::bind("127.0.0.1:0"))?;
    let base = format!("http://{}", listener.local_addr()?);
    let server = api::router(gw.clone());
    rt.spawn(async move { axum::serve(listener, server).await });
    {
        let gw = gw.clone();
        std::thread::spawn(move || loop {
            gw.tick_door();
            std::thread::sleep(Duration::from_millis(100));
        });
    }

    let http = reqwest::blocking::Client::new();
    let get = |path: &str| http.get(format!("{base}{path}")).bearer_auth("example-token").send();

    let anonymous = http.get(format!("{base}/events")).send()?;
    println!("GET /events without a token -> {}", anonymous.status());
    let health: Value = http.get(format!("{base}/health")).send()?.json()?;
    println!("GET /health -> {health}");

    let high: Vec<Value> = get("/events?threat=high")?.json()?;
    for e in &high {
        println!("  {} {}", e["event_id"].as_str().unwrap_or("?"), e["description"].as_str().unwrap_or("?"));
    }
    let event_id = high
        .first()
        .and_then(|e| e["event_id"].as_str())
        .ok_or_else(|| anyhow::anyhow!("no high-threat event"))?;

    let missing = http
        .post(format!("{base}/door/grant"))
        .bearer_auth("example-token")
        .json(&json!({"event_id": "nope", "duration": 2}))
        .send()?;
    println!("grant on an unknown event -> {}", missing.status());
    let grant: Value = http
        .post(format!("{base}/door/grant"))
        .bearer_auth("example-token")
        .json(&json!({"event_id": event_id, "duration": 1, "operator": "example"}))
        .send()?
        .json()?;
    println!("grant -> {}", grant["state"]);
    std::thread::sleep(Duration::from_millis(1300));
    println!("door after 1.3 s -> {}", get("/door/state")?.text()?);

    let train = http.post(format!("{base}/recognizer/train")).bearer_auth("example-token").send()?;
    println!("train with no profiles -> {} {}", train.status(), train.text()?);
    Ok(())
}
