use std::convert::Infallible;
use std::net::SocketAddr;
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::{Query, State};
use axum::http::{header, StatusCode};
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use futures::Stream;
use serde::Deserialize;
use serde_json::json;

use super::{parse_bound, Hub, Publisher};
use crate::controller::{slice_log, Command, DailyTime, Mode};
use crate::model::PathMode;
use crate::runtime::BenchRig;

/// Minimum spacing between two `/events` messages.
const EVENT_PERIOD: Duration = Duration::from_secs(1);

fn error(status: StatusCode, msg: impl Into<String>) -> Response {
    (status, Json(json!({ "error": msg.into() }))).into_response()
}

fn accepted(command: &str) -> Response {
    (StatusCode::ACCEPTED, Json(json!({ "accepted": command }))).into_response()
}

fn enqueue(hub: &Hub, c: Command, name: &str) -> Response {
    if hub.enqueue(c) {
        accepted(name)
    } else {
        error(StatusCode::SERVICE_UNAVAILABLE, "controller not running")
    }
}

async fn status(State(hub): State<Hub>) -> Response {
    Json(hub.status().as_ref().clone()).into_response()
}

fn pnm(bytes: Option<&Vec<u8>>, content_type: &'static str) -> Response {
    match bytes {
        Some(b) => ([(header::CONTENT_TYPE, content_type)], Bytes::from(b.clone())).into_response(),
        None => error(StatusCode::NOT_FOUND, "no frame captured yet"),
    }
}

async fn thermal(State(hub): State<Hub>) -> Response {
    pnm(hub.frames().thermal.as_ref(), "image/x-portable-graymap")
}

async fn overlay(State(hub): State<Hub>) -> Response {
    pnm(hub.frames().overlay.as_ref(), "image/x-portable-pixmap")
}

#[derive(Deserialize)]
struct LogQuery {
    since: Option<String>,
    until: Option<String>,
}

async fn log(State(hub): State<Hub>, Query(q): Query<LogQuery>) -> Response {
    let since = match parse_bound(q.since.as_deref()) {
        Ok(v) => v,
        Err(e) => return error(StatusCode::BAD_REQUEST, e),
    };
    let until = match parse_bound(q.until.as_deref()) {
        Ok(v) => v,
        Err(e) => return error(StatusCode::BAD_REQUEST, e),
    };
    let text = slice_log(&hub.log(), since, until);
    ([(header::CONTENT_TYPE, "text/csv; charset=utf-8")], text).into_response()
}

async fn aerate(State(hub): State<Hub>) -> Response {
    if hub.status().mode == Mode::Fault {
        return error(StatusCode::CONFLICT, "controller in FAULT");
    }
    enqueue(&hub, Command::AerateNow, "AERATE_NOW")
}

async fn stop(State(hub): State<Hub>) -> Response {
    enqueue(&hub, Command::Stop, "STOP")
}

/// Parses a JSON body by hand so every malformed payload maps to 400.
fn json_field(body: &Bytes, field: &str) -> Result<String, Response> {
    let v: serde_json::Value =
        serde_json::from_slice(body).map_err(|e| error(StatusCode::BAD_REQUEST, format!("malformed JSON: {e}")))?;
    let obj = v.as_object().ok_or_else(|| error(StatusCode::BAD_REQUEST, "expected a JSON object"))?;
    if obj.len() != 1 {
        return Err(error(StatusCode::BAD_REQUEST, format!("expected exactly the field {field:?}")));
    }
    obj.get(field)
        .and_then(|v| v.as_str())
        .map(str::to_string)
        .ok_or_else(|| error(StatusCode::BAD_REQUEST, format!("{field:?} must be a string")))
}

async fn schedule(State(hub): State<Hub>, body: Bytes) -> Response {
    let text = match json_field(&body, "time") {
        Ok(t) => t,
        Err(r) => return r,
    };
    match text.parse::<DailyTime>() {
        Ok(t) => {
            if hub.enqueue(Command::SetSchedule(t)) {
                (StatusCode::ACCEPTED, Json(json!({ "accepted": "SET_SCHEDULE", "time": t.to_string() }))).into_response()
            } else {
                error(StatusCode::SERVICE_UNAVAILABLE, "controller not running")
            }
        }
        Err(e) => error(StatusCode::BAD_REQUEST, e),
    }
}

async fn path_mode(State(hub): State<Hub>, body: Bytes) -> Response {
    let text = match json_field(&body, "mode") {
        Ok(t) => t,
        Err(r) => return r,
    };
    match text.parse::<PathMode>() {
        Ok(m) => enqueue(&hub, Command::SetPathMode(m), "SET_PATH_MODE"),
        Err(e) => error(StatusCode::BAD_REQUEST, e),
    }
}

/// Server-sent snapshots: the current one immediately, then at most one per
/// second whenever a newer snapshot has been published.
fn snapshot_stream(hub: Hub) -> impl Stream<Item = Result<Event, Infallible>> {
    let rx = hub.subscribe();
    futures::stream::unfold((rx, true), |(mut rx, first)| async move {
        if !first {
            tokio::time::sleep(EVENT_PERIOD).await;
            rx.changed().await.ok()?;
        }
        let snap = rx.borrow_and_update().clone();
        let ev = Event::default().event("status").json_data(snap.as_ref()).ok()?;
        Some((Ok(ev), (rx, false)))
    })
}

async fn events(State(hub): State<Hub>) -> Sse<impl Stream<Item = Result<Event, Infallible>>> {
    Sse::new(snapshot_stream(hub)).keep_alive(KeepAlive::default())
}

async fn not_found() -> Response {
    error(StatusCode::NOT_FOUND, "no such endpoint")
}

pub fn router(hub: Hub) -> Router {
    Router::new()
        .route("/status", get(status))
        .route("/frames/thermal", get(thermal))
        .route("/frames/overlay", get(overlay))
        .route("/log", get(log))
        .route("/events", get(events))
        .route("/commands/aerate", post(aerate))
        .route("/commands/stop", post(stop))
        .route("/schedule", put(schedule))
        .route("/path_mode", put(path_mode))
        .fallback(not_found)
        .with_state(hub)
}

/// Runs the rig on the wall clock, one tick per second, and serves the
/// telemetry API on `addr` until Ctrl-C.
pub async fn serve(mut rig: BenchRig, addr: SocketAddr) -> anyhow::Result<()> {
    let (hub, mut publisher): (Hub, Publisher) = super::channel(&rig);
    publisher.tick(&mut rig, chrono::Utc::now())?;
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    let ticker = tokio::spawn(async move {
        let mut interval = tokio::time::interval(Duration::from_secs(1));
        interval.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Skip);
        loop {
            interval.tick().await;
            if let Err(e) = publisher.tick(&mut rig, chrono::Utc::now()) {
                eprintln!("simulation error: {e}");
                break;
            }
        }
    });
    axum::serve(listener, router(hub))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    ticker.abort();
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use axum::body::Body;
    use axum::http::Request;
    use chrono::{Duration as ChronoDuration, TimeZone, Utc};
    use http_body_util::BodyExt;
    use tower::ServiceExt;

    use crate::sim::Scenario;
    use crate::telemetry::StatusSnapshot;

    fn booted() -> (BenchRig, Hub, Publisher) {
        let mut rig = BenchRig::new(Scenario::reference(1, 1));
        let (hub, mut p) = super::super::channel(&rig);
        p.tick(&mut rig, Utc.with_ymd_and_hms(2024, 5, 1, 8, 0, 0).unwrap()).unwrap();
        (rig, hub, p)
    }

    async fn call(hub: &Hub, method: &str, uri: &str, body: &str) -> (StatusCode, Vec<u8>) {
        let req = Request::builder().method(method).uri(uri).body(Body::from(body.to_string())).unwrap();
        let resp = router(hub.clone()).oneshot(req).await.unwrap();
        let status = resp.status();
        (status, resp.into_body().collect().await.unwrap().to_bytes().to_vec())
    }

    #[tokio::test]
    async fn status_after_boot() {
        let (_, hub, _) = booted();
        let (code, body) = call(&hub, "GET", "/status", "").await;
        assert_eq!(code, StatusCode::OK);
        let v: serde_json::Value = serde_json::from_slice(&body).unwrap();
        assert_eq!(v["mode"], "IDLE");
        assert_eq!(v["schedule"], "11:00");
        assert_eq!(v["aeration_phase"], "NONE");
        let snap: StatusSnapshot = serde_json::from_slice(&body).unwrap();
        assert_eq!(serde_json::to_value(&snap).unwrap(), v);
    }

    #[tokio::test]
    async fn aerate_reaches_aerating_in_one_tick() {
        let (mut rig, hub, mut p) = booted();
        let (code, _) = call(&hub, "POST", "/commands/aerate", "").await;
        assert_eq!(code, StatusCode::ACCEPTED);
        let t = rig.now() + ChronoDuration::seconds(1);
        p.tick(&mut rig, t).unwrap();
        assert_eq!(hub.status().mode, Mode::Aerating);
    }

    #[tokio::test]
    async fn schedule_validation_and_round_trip() {
        let (mut rig, hub, mut p) = booted();
        for bad in [r#"{"time":"25:99"}"#, "nope", r#"{"time":7}"#, r#"{"when":"07:00"}"#, "[]"] {
            assert_eq!(call(&hub, "PUT", "/schedule", bad).await.0, StatusCode::BAD_REQUEST, "{bad}");
        }
        assert_eq!(call(&hub, "PUT", "/schedule", r#"{"time":"07:15"}"#).await.0, StatusCode::ACCEPTED);
        let t = rig.now() + ChronoDuration::seconds(1);
        p.tick(&mut rig, t).unwrap();
        assert_eq!(hub.status().schedule, "07:15");
    }

    #[tokio::test]
    async fn fault_rejects_aerate() {
        let (mut rig, hub, mut p) = booted();
        rig.controller.gantry_mut().end_stop_fault = true;
        hub.enqueue(Command::AerateNow);
        let mut t = rig.now();
        for _ in 0..400 {
            t += ChronoDuration::seconds(1);
            p.tick(&mut rig, t).unwrap();
            if hub.status().mode == Mode::Fault {
                break;
            }
        }
        assert_eq!(hub.status().mode, Mode::Fault);
        assert_eq!(call(&hub, "POST", "/commands/aerate", "").await.0, StatusCode::CONFLICT);
        assert_eq!(call(&hub, "POST", "/commands/stop", "").await.0, StatusCode::ACCEPTED);
    }

    #[tokio::test]
    async fn frames_log_and_unknown_paths() {
        let (mut rig, hub, mut p) = booted();
        let (code, body) = call(&hub, "GET", "/frames/thermal", "").await;
        assert_eq!(code, StatusCode::OK);
        assert!(body.starts_with(b"P5\n96 60\n255\n"));
        let (code, body) = call(&hub, "GET", "/frames/overlay", "").await;
        assert_eq!(code, StatusCode::OK);
        assert!(body.starts_with(b"P6\n"));
        // a few log slots
        let mut t = rig.now();
        for _ in 0..6 {
            t += ChronoDuration::seconds(300);
            p.tick(&mut rig, t).unwrap();
            t += ChronoDuration::seconds(1);
            p.tick(&mut rig, t).unwrap();
        }
        let (code, full) = call(&hub, "GET", "/log", "").await;
        assert_eq!(code, StatusCode::OK);
        let full = String::from_utf8(full).unwrap();
        assert!(full.lines().count() >= 6);
        let cut = "2024-05-01T08:15:00Z";
        let (_, a) = call(&hub, "GET", &format!("/log?until={cut}"), "").await;
        let (_, b) = call(&hub, "GET", &format!("/log?since={cut}"), "").await;
        assert_eq!(String::from_utf8([a, b].concat()).unwrap(), full);
        assert_eq!(call(&hub, "GET", "/log?since=yesterday", "").await.0, StatusCode::BAD_REQUEST);
        assert_eq!(call(&hub, "GET", "/nope", "").await.0, StatusCode::NOT_FOUND);
        assert_eq!(call(&hub, "PUT", "/path_mode", r#"{"mode":"spiral"}"#).await.0, StatusCode::ACCEPTED);
        assert_eq!(call(&hub, "PUT", "/path_mode", r#"{"mode":"zigzag"}"#).await.0, StatusCode::BAD_REQUEST);
    }

    #[tokio::test(start_paused = true)]
    async fn events_are_rate_limited() {
        use futures::StreamExt;
        let (mut rig, hub, mut p) = booted();
        let mut stream = Box::pin(snapshot_stream(hub.clone()));
        let start = tokio::time::Instant::now();
        let _ = stream.next().await.unwrap().unwrap();
        for _ in 0..5 {
            let t = rig.now() + ChronoDuration::seconds(1);
            p.tick(&mut rig, t).unwrap();
        }
        let _ = stream.next().await.unwrap().unwrap();
        let t = rig.now() + ChronoDuration::seconds(1);
        p.tick(&mut rig, t).unwrap();
        let _ = stream.next().await.unwrap().unwrap();
        assert!(start.elapsed() >= Duration::from_secs(2));
    }
}
