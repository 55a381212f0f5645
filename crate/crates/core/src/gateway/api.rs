//! HTTP API. Every route except `/health` needs `Authorization: Bearer
//! <token>`; the event stream also accepts `?token=` since browsers cannot
//! set headers on an `EventSource`.
//!
//! | route | |
//! |---|---|
//! | `GET /health` | liveness and counters |
//! | `GET /events?since&camera&threat` | logged events |
//! | `GET /images/{ref}` | scene image of an event |
//! | `POST /profiles` | enroll, body `Demographics` |
//! | `POST /profiles/{id}/images` | guided capture, body PNG, optional `X-Gyro` JSON samples |
//! | `POST /recognizer/train` | optional body `{"backend": "lbp_svm"}` |
//! | `POST /door/grant` | `{"event_id", "duration", "operator"?, "command_id"?}` |
//! | `GET /door/state` | |
//! | `POST /call` | `{"event_id"}`, phones the event description |
//! | `GET /stream/events` | server-sent events, one `event` message per new event |

use std::convert::Infallible;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{FromRequestParts, Path, Query, State};
use axum::http::request::Parts;
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::sse::{Event as SseEvent, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{async_trait, Json, Router};
use futures::{Stream, StreamExt};
use serde::Deserialize;
use serde_json::json;
use tokio_stream::wrappers::BroadcastStream;

use super::service::GrantRequest;
use super::{EventFilter, Gateway, GatewayError};
use crate::door::DoorError;
use crate::notify::NotifyError;
use crate::profile::{AddImageOutcome, Demographics, GyroSample, ProfileError};
use crate::recognition::Backend;
use crate::vision::Frame;

pub struct ApiError(GatewayError);

impl<E: Into<GatewayError>> From<E> for ApiError {
    fn from(e: E) -> Self {
        ApiError(e.into())
    }
}

fn status_of(e: &GatewayError) -> StatusCode {
    use GatewayError as G;
    match e {
        G::Unauthorized => StatusCode::UNAUTHORIZED,
        G::NotFound(_) | G::UnknownCamera(_) => StatusCode::NOT_FOUND,
        G::Busy(_) => StatusCode::CONFLICT,
        G::Config(_) | G::Corpus(_) | G::OutOfOrder { .. } | G::Vision(_) => StatusCode::BAD_REQUEST,
        G::Profile(p) => match p {
            ProfileError::UnknownPerson(_) => StatusCode::NOT_FOUND,
            ProfileError::Duplicate { .. } => StatusCode::CONFLICT,
            ProfileError::Io(_) | ProfileError::Record { .. } => StatusCode::INTERNAL_SERVER_ERROR,
            _ => StatusCode::UNPROCESSABLE_ENTITY,
        },
        G::Recognition(_) => StatusCode::UNPROCESSABLE_ENTITY,
        G::Door(DoorError::Duration(_)) => StatusCode::BAD_REQUEST,
        G::Door(_) | G::Adapter(_) => StatusCode::BAD_GATEWAY,
        G::Notify(NotifyError::NotConfigured) => StatusCode::SERVICE_UNAVAILABLE,
        _ => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = status_of(&self.0);
        (status, Json(json!({ "error": self.0.to_string() }))).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

/// Proof the request carried the configured token.
pub struct Authed(String);

#[async_trait]
impl FromRequestParts<Arc<Gateway>> for Authed {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, gw: &Arc<Gateway>) -> Result<Self, Self::Rejection> {
        let bearer = parts
            .headers
            .get(header::AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "))
            .map(str::to_string);
        let query = parts.uri.query().and_then(|q| {
            q.split('&')
                .find_map(|kv| kv.strip_prefix("token="))
                .map(str::to_string)
        });
        let token = bearer.or(query).ok_or(GatewayError::Unauthorized)?;
        gw.authorize(&token)?;
        Ok(Authed(token))
    }
}

async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T, GatewayError> + Send + 'static,
) -> ApiResult<T> {
    match tokio::task::spawn_blocking(f).await {
        Ok(r) => r.map_err(ApiError),
        Err(e) => Err(ApiError(GatewayError::Storage(format!("worker failed: {e}")))),
    }
}

async fn health(State(gw): State<Arc<Gateway>>) -> Json<serde_json::Value> {
    let models: serde_json::Map<String, serde_json::Value> = Backend::ALL
        .iter()
        .filter_map(|&b| gw.models().latest(b).map(|s| (b.to_string(), json!(s.version))))
        .collect();
    Json(json!({
        "status": "ok",
        "events": gw.events().len(),
        "profiles": gw.profiles().len(),
        "models": models,
        "door": gw.door_state(),
        "call_adapter": gw.has_call_adapter(),
        "pipeline": gw.stats().snapshot(),
    }))
}

#[derive(Deserialize)]
struct EventsQuery {
    since: Option<u64>,
    camera: Option<String>,
    threat: Option<String>,
}

async fn events(State(gw): State<Arc<Gateway>>, _: Authed, Query(q): Query<EventsQuery>) -> ApiResult<Response> {
    let threat = match q.threat.as_deref() {
        Some(t) => Some(t.parse().map_err(|e: String| GatewayError::Config(e))?),
        None => None,
    };
    let filter = EventFilter {
        since: q.since,
        camera: q.camera,
        threat,
    };
    Ok(Json(gw.query_events(&filter)).into_response())
}

async fn image(State(gw): State<Arc<Gateway>>, _: Authed, Path(image_ref): Path<String>) -> ApiResult<Response> {
    let path = gw
        .image_path(&image_ref)
        .ok_or_else(|| GatewayError::NotFound(format!("image {image_ref}")))?;
    let bytes = blocking(move || Ok(std::fs::read(path)?)).await?;
    Ok(([(header::CONTENT_TYPE, "image/png")], bytes).into_response())
}

async fn create_profile(
    State(gw): State<Arc<Gateway>>,
    _: Authed,
    Json(d): Json<Demographics>,
) -> ApiResult<Response> {
    let p = blocking(move || Ok(gw.profiles().enroll(&d)?)).await?;
    Ok((StatusCode::CREATED, Json(p)).into_response())
}

async fn add_image(
    State(gw): State<Arc<Gateway>>,
    _: Authed,
    Path(id): Path<String>,
    headers: HeaderMap,
    body: Bytes,
) -> ApiResult<Response> {
    let gyro: Vec<GyroSample> = match headers.get("x-gyro").and_then(|v| v.to_str().ok()) {
        Some(s) => serde_json::from_str(s).map_err(|e| GatewayError::Config(format!("X-Gyro: {e}")))?,
        None => Vec::new(),
    };
    let outcome = blocking(move || {
        let frame = Frame::decode(&body, "enroll", 0)?;
        Ok(gw
            .profiles()
            .add_face_image(&id, &frame, gw.detector(), &gw.config().guidance, &gyro)?)
    })
    .await?;
    let status = match outcome {
        AddImageOutcome::Accepted(_) => StatusCode::OK,
        AddImageOutcome::Rejected(_) => StatusCode::UNPROCESSABLE_ENTITY,
    };
    Ok((status, Json(outcome)).into_response())
}

#[derive(Deserialize)]
struct TrainRequest {
    backend: Option<Backend>,
}

async fn train(State(gw): State<Arc<Gateway>>, _: Authed, body: Bytes) -> ApiResult<Response> {
    let req: TrainRequest = if body.iter().all(u8::is_ascii_whitespace) {
        TrainRequest { backend: None }
    } else {
        serde_json::from_slice(&body).map_err(|e| GatewayError::Config(e.to_string()))?
    };
    let backend = req.backend.unwrap_or(gw.config().recognizer.backend);
    let s = blocking(move || gw.train(backend)).await?;
    Ok(Json(s).into_response())
}

async fn grant(State(gw): State<Arc<Gateway>>, Authed(token): Authed, Json(req): Json<GrantRequest>) -> ApiResult<Response> {
    let r = blocking(move || gw.grant_access(&token, &req)).await?;
    Ok(Json(r).into_response())
}

async fn door_state(State(gw): State<Arc<Gateway>>, _: Authed) -> Response {
    Json(gw.door_state()).into_response()
}

#[derive(Deserialize)]
struct CallRequest {
    event_id: String,
}

async fn call(State(gw): State<Arc<Gateway>>, _: Authed, Json(req): Json<CallRequest>) -> ApiResult<Response> {
    let r = blocking(move || gw.call_for_event(&req.event_id)).await?;
    Ok(Json(r).into_response())
}

async fn stream(
    State(gw): State<Arc<Gateway>>,
    _: Authed,
) -> Sse<impl Stream<Item = Result<SseEvent, Infallible>>> {
    let s = BroadcastStream::new(gw.subscribe()).filter_map(|r| async move {
        match r {
            Ok(e) => SseEvent::default().event("event").id(e.event_id.clone()).json_data(&e).ok().map(Ok),
            // lagged subscribers catch up through /events?since
            Err(_) => None,
        }
    });
    Sse::new(s).keep_alive(KeepAlive::default())
}

pub fn router(gw: Arc<Gateway>) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/events", get(events))
        .route("/images/:image_ref", get(image))
        .route("/profiles", post(create_profile))
        .route("/profiles/:id/images", post(add_image))
        .route("/recognizer/train", post(train))
        .route("/door/grant", post(grant))
        .route("/door/state", get(door_state))
        .route("/call", post(call))
        .route("/stream/events", get(stream))
        .with_state(gw)
}

/// Serves until `shutdown` resolves.
pub async fn serve(
    gw: Arc<Gateway>,
    bind: &str,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(bind).await?;
    tracing::info!(addr = %listener.local_addr()?, "api listening");
    axum::serve(listener, router(gw)).with_graceful_shutdown(shutdown).await
}
