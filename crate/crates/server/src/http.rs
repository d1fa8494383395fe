//! HTTP API for the dashboard. Every body is JSON; streamed frames are the
//! same `pub` record text the TCP protocol carries.

use std::convert::Infallible;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::Duration;

use aerogh_core::telemetry::{validate_topic, Delivery, Subscription, TopicPattern, WireRecord};
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::Stream;
use serde::Deserialize;
use serde_json::{json, Value};
use tokio::sync::mpsc;

use crate::Hub;

#[derive(Clone)]
struct AppState {
    hub: Hub,
    /// Set at shutdown so open event streams end and let the server drain.
    stop: Arc<AtomicBool>,
}

pub fn router(hub: Hub, stop: Arc<AtomicBool>) -> Router {
    Router::new()
        .route("/api/state", get(state))
        .route("/api/history", get(history))
        .route("/api/stream", get(stream))
        .route("/api/command", post(command))
        .route("/api/command/{id}", get(command_status))
        .fallback(not_found)
        .with_state(AppState { hub, stop })
}

fn bad_request(reason: impl ToString) -> Response {
    (StatusCode::BAD_REQUEST, Json(json!({ "error": reason.to_string() }))).into_response()
}

async fn not_found() -> Response {
    (StatusCode::NOT_FOUND, Json(json!({ "error": "no such route" }))).into_response()
}

async fn state(State(app): State<AppState>) -> Response {
    Json(app.hub.broker.retained()).into_response()
}

#[derive(Deserialize)]
struct HistoryQuery {
    topic: String,
    from: Option<f64>,
    to: Option<f64>,
}

async fn history(State(app): State<AppState>, q: Result<Query<HistoryQuery>, axum::extract::rejection::QueryRejection>) -> Response {
    let Ok(Query(q)) = q else {
        return bad_request("expected ?topic=<topic>&from=<s>&to=<s>");
    };
    if let Err(e) = validate_topic(&q.topic) {
        return bad_request(e);
    }
    let from = q.from.unwrap_or(0.0);
    let to = q.to.unwrap_or(f64::INFINITY);
    if from.is_nan() || to.is_nan() || from > to {
        return bad_request(format!("empty time range [{from}, {to}]"));
    }
    Json(app.hub.broker.history(&q.topic, from, to)).into_response()
}

#[derive(Deserialize)]
struct StreamQuery {
    pattern: Option<String>,
}

async fn stream(State(app): State<AppState>, Query(q): Query<StreamQuery>) -> Response {
    let pattern = q.pattern.unwrap_or_else(|| "gh/*/*".into());
    if let Err(e) = TopicPattern::parse(&pattern) {
        return bad_request(e);
    }
    let sub = match app.hub.broker.subscribe(&pattern) {
        Ok(s) => s,
        Err(e) => return bad_request(e),
    };
    Sse::new(bridge(sub, app.stop)).keep_alive(KeepAlive::default()).into_response()
}

/// Subscriptions block, so a plain thread pumps them into an async channel.
/// It ends when the client goes away, the subscriber overflows or the
/// server stops.
fn bridge(sub: Subscription, stop: Arc<AtomicBool>) -> impl Stream<Item = Result<Event, Infallible>> {
    let (tx, rx) = mpsc::channel::<String>(256);
    std::thread::spawn(move || loop {
        if stop.load(Ordering::Acquire) || tx.is_closed() {
            return;
        }
        let line = match sub.recv_timeout(Duration::from_millis(250)) {
            Delivery::Frame(f) => WireRecord::Pub(f).to_line(),
            Delivery::Idle => continue,
            Delivery::Overflow => {
                let _ = tx.blocking_send(WireRecord::Overflow { pattern: sub.pattern().to_string() }.to_line());
                return;
            }
            Delivery::Closed => return,
        };
        if tx.blocking_send(line).is_err() {
            return;
        }
    });
    futures::stream::unfold(rx, |mut rx| async move { rx.recv().await.map(|line| (Ok(Event::default().data(line)), rx)) })
}

async fn command(State(app): State<AppState>, body: String) -> Response {
    let mut value: Value = match serde_json::from_str(&body) {
        Ok(v) => v,
        Err(e) => return bad_request(format!("body is not JSON: {e}")),
    };
    // the record tag is optional here; the route already says what it is
    if let Some(obj) = value.as_object_mut() {
        obj.entry("t").or_insert_with(|| json!("cmd"));
    }
    let (kind, payload, id) = match serde_json::from_value::<WireRecord>(value) {
        Ok(WireRecord::Cmd { kind, payload, id }) => (kind, payload, id),
        Ok(_) => return bad_request("body must be a cmd record"),
        Err(e) => return bad_request(e),
    };
    let gateway = app.hub.gateway.clone();
    let ack = match tokio::task::spawn_blocking(move || gateway.submit(&kind, &payload, &id)).await {
        Ok(a) => a,
        Err(e) => return (StatusCode::INTERNAL_SERVER_ERROR, Json(json!({ "error": e.to_string() }))).into_response(),
    };
    let code = if ack.ok {
        StatusCode::OK
    } else if ack.is_pending() {
        StatusCode::GATEWAY_TIMEOUT
    } else {
        StatusCode::BAD_REQUEST
    };
    (code, Json(WireRecord::Ack(ack))).into_response()
}

async fn command_status(State(app): State<AppState>, Path(id): Path<String>) -> Response {
    match app.hub.gateway.status(&id) {
        Some(ack) => Json(WireRecord::Ack(ack)).into_response(),
        None => (StatusCode::NOT_FOUND, Json(json!({ "error": format!("unknown command id {id}") }))).into_response(),
    }
}

/// Serve `router` on an already-bound listener until `stop` is set.
pub async fn run(listener: std::net::TcpListener, hub: Hub, stop: Arc<AtomicBool>) -> std::io::Result<()> {
    listener.set_nonblocking(true)?;
    let listener = tokio::net::TcpListener::from_std(listener)?;
    let addr: Option<SocketAddr> = listener.local_addr().ok();
    log::info!("http listening on {addr:?}");
    let flag = stop.clone();
    axum::serve(listener, router(hub, stop))
        .with_graceful_shutdown(async move {
            while !flag.load(Ordering::Acquire) {
                tokio::time::sleep(Duration::from_millis(100)).await;
            }
        })
        .await
}
