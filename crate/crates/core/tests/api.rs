mod common;

use axum::body::Body;
use axum::http::{header, Request, StatusCode};
use axum::Router;
use common::{asset, empty, trained, Rig};
use doorwatch::gateway::{api, FrameHints};
use doorwatch::recognition::Backend;
use doorwatch::vision::{to_grayscale, Frame, GrayImage};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

const TOKEN: &str = "test-token";

async fn call(app: &Router, req: Request<Body>) -> (StatusCode, Value) {
    let res = app.clone().oneshot(req).await.unwrap();
    let status = res.status();
    let bytes = res.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

fn get(uri: &str) -> Request<Body> {
    Request::get(uri).header(header::AUTHORIZATION, format!("Bearer {TOKEN}")).body(Body::empty()).unwrap()
}

fn post_json(uri: &str, body: Value) -> Request<Body> {
    Request::post(uri)
        .header(header::AUTHORIZATION, format!("Bearer {TOKEN}"))
        .header(header::CONTENT_TYPE, "application/json")
        .body(Body::from(body.to_string()))
        .unwrap()
}

/// One unknown back-door event and one empty front-door priming frame.
fn with_event(rig: &Rig) -> String {
    let gw = &rig.gw;
    for (img, ts) in [("replay/back_door_1500.png", 1500), ("replay/back_door_2500.png", 2500)] {
        gw.process_frame(&Frame::load(asset(img), "back_door", ts).unwrap(), &FrameHints::default()).unwrap();
    }
    gw.events().all()[0].event_id.clone()
}

#[tokio::test]
async fn token_is_required() {
    let rig = empty(|_| {});
    let app = api::router(rig.gw.clone());
    let (s, body) = call(&app, Request::get("/health").body(Body::empty()).unwrap()).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(body["status"], "ok");
    for uri in ["/events", "/door/state", "/stream/events"] {
        let (s, _) = call(&app, Request::get(uri).body(Body::empty()).unwrap()).await;
        assert_eq!(s, StatusCode::UNAUTHORIZED, "{uri}");
        let wrong = Request::get(uri).header(header::AUTHORIZATION, "Bearer nope").body(Body::empty()).unwrap();
        assert_eq!(call(&app, wrong).await.0, StatusCode::UNAUTHORIZED, "{uri}");
    }
    let res = app
        .clone()
        .oneshot(Request::get(format!("/stream/events?token={TOKEN}")).body(Body::empty()).unwrap())
        .await
        .unwrap();
    assert_eq!(res.status(), StatusCode::OK);
    assert_eq!(res.headers()[header::CONTENT_TYPE], "text/event-stream");
}

#[tokio::test]
async fn grant_unlocks_and_audits() {
    let rig = empty(|_| {});
    let event_id = with_event(&rig);
    let app = api::router(rig.gw.clone());

    let (s, _) = call(&app, post_json("/door/grant", json!({"event_id": "0000000099-x", "duration": 5}))).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    let (s, _) = call(&app, post_json("/door/grant", json!({"event_id": event_id, "duration": 0}))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let bad = Request::post("/door/grant")
        .header(header::AUTHORIZATION, "Bearer nope")
        .header(header::CONTENT_TYPE, "application/json")
        .body(Body::from(json!({"event_id": event_id, "duration": 5}).to_string()))
        .unwrap();
    assert_eq!(call(&app, bad).await.0, StatusCode::UNAUTHORIZED);
    assert_eq!(call(&app, get("/door/state")).await.1["lock"], "LOCKED");

    let (s, body) = call(&app, post_json("/door/grant", json!({"event_id": event_id, "duration": 5, "operator": "ann"}))).await;
    assert_eq!(s, StatusCode::OK, "{body}");
    assert_eq!(body["state"]["lock"], "UNLOCKED");
    assert_eq!(body["audit"]["operator"], "ann");
    assert_eq!(body["audit"]["event_id"], event_id.as_str());
    assert_eq!(call(&app, get("/door/state")).await.1["lock"], "UNLOCKED");
    assert!(rig.gw.audit().find(|a| a.event_id == event_id && a.outcome == "ok").is_some());

    rig.door.set_down(true);
    let (s, _) = call(&app, post_json("/door/grant", json!({"event_id": event_id, "duration": 5}))).await;
    assert_eq!(s, StatusCode::BAD_GATEWAY);
    // unauthenticated requests never reach the door, so they leave no audit
    let audits = rig.gw.audit().all();
    assert_eq!(audits.len(), 3, "{audits:?}");
    assert_ne!(audits.last().unwrap().outcome, "ok");
}

#[tokio::test]
async fn event_queries_filter_conjunctively() {
    let rig = empty(|_| {});
    let event_id = with_event(&rig);
    let app = api::router(rig.gw.clone());
    let (_, all) = call(&app, get("/events")).await;
    assert_eq!(all.as_array().unwrap().len(), 1);
    let (_, medium) = call(&app, get("/events?threat=medium&camera=back_door")).await;
    assert_eq!(medium[0]["event_id"], event_id.as_str());
    assert!(call(&app, get("/events?threat=high")).await.1.as_array().unwrap().is_empty());
    assert!(call(&app, get("/events?camera=front_door")).await.1.as_array().unwrap().is_empty());
    assert!(call(&app, get("/events?since=99999999")).await.1.as_array().unwrap().is_empty());
    assert_eq!(call(&app, get("/events?since=2500")).await.1.as_array().unwrap().len(), 1);
    assert_eq!(call(&app, get("/events?threat=purple")).await.0, StatusCode::BAD_REQUEST);

    let image_ref = all[0]["image_ref"].as_str().unwrap();
    let res = app.clone().oneshot(get(&format!("/images/{image_ref}"))).await.unwrap();
    assert_eq!(res.status(), StatusCode::OK);
    assert_eq!(res.headers()[header::CONTENT_TYPE], "image/png");
    assert_eq!(call(&app, get("/images/..%2Fevents.ndjson")).await.0, StatusCode::NOT_FOUND);

    let (s, _) = call(&app, post_json("/call", json!({"event_id": event_id}))).await;
    assert_eq!(s, StatusCode::SERVICE_UNAVAILABLE);
}

#[tokio::test]
async fn train_publishes_and_refuses_overlap() {
    let rig = trained(|_| {});
    let app = api::router(rig.gw.clone());
    let before = rig.gw.models().latest(Backend::LbpSvm).unwrap().version;
    let (s, body) = call(&app, post_json("/recognizer/train", json!({}))).await;
    assert_eq!(s, StatusCode::OK, "{body}");
    assert_eq!(body["version"], before + 1);
    assert_eq!(body["classes"].as_array().unwrap().len(), 16);

    let guard = rig.gw.models().try_begin_training(Backend::LbpSvm).unwrap();
    let (s, _) = call(&app, post_json("/recognizer/train", json!({"backend": "lbp_svm"}))).await;
    assert_eq!(s, StatusCode::CONFLICT);
    drop(guard);
    assert_eq!(rig.gw.models().latest(Backend::LbpSvm).unwrap().version, before + 1);

    let lonely = empty(|_| {});
    let app = api::router(lonely.gw.clone());
    let (s, _) = call(&app, post_json("/recognizer/train", json!({}))).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
}

fn png_body(gray: &GrayImage) -> Vec<u8> {
    Frame::from_gray("upload", 0, gray).encode_png().unwrap()
}

#[tokio::test]
async fn guided_enrollment_over_http() {
    let rig = empty(|_| {});
    let app = api::router(rig.gw.clone());
    let (s, p) = call(&app, post_json("/profiles", json!({"name": "Ann", "group": "family"}))).await;
    assert_eq!(s, StatusCode::CREATED);
    let id = p["person_id"].as_str().unwrap().to_string();

    let portrait = to_grayscale(&Frame::load(asset("corpus/p01/00.png"), "x", 0).unwrap());
    let fill = portrait.mean() as u8;
    let place = |side: u32, ox: u32, oy: u32| {
        GrayImage::from_fn(side, side, |x, y| {
            if x >= ox && y >= oy && x - ox < portrait.width() && y - oy < portrait.height() {
                portrait.get(x - ox, y - oy)
            } else {
                fill
            }
        })
    };
    let upload = |png: Vec<u8>, gyro: Option<&str>| {
        let mut r = Request::post(format!("/profiles/{id}/images")).header(header::AUTHORIZATION, format!("Bearer {TOKEN}"));
        if let Some(g) = gyro {
            r = r.header("x-gyro", g);
        }
        r.body(Body::from(png)).unwrap()
    };

    let (s, body) = call(&app, upload(png_body(&place(480, 240, 0)), None)).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["text"], "Face in top right");
    let (s, body) = call(&app, upload(png_body(&place(960, 360, 360)), None)).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["text"], "Please come closer");
    let fast = r#"[{"timestamp_ms":0,"yaw":0.0},{"timestamp_ms":500,"yaw":15.0}]"#;
    let (s, body) = call(&app, upload(png_body(&place(480, 120, 120)), Some(fast))).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["kind"], "too_fast");
    let (s, body) = call(&app, upload(png_body(&place(480, 120, 120)), None)).await;
    assert_eq!(s, StatusCode::OK, "{body}");
    assert_eq!(body["status"], "accepted");
    assert_eq!(rig.gw.profiles().get(&id).unwrap().images.len(), 1);

    let (s, _) = call(&app, upload(b"not a png".to_vec(), None)).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, _) = call(&app, post_json("/profiles/nobody/images", json!({}))).await;
    assert!(s.is_client_error());
}
