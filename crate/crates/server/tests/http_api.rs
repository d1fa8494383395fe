mod common;

use std::net::{SocketAddr, TcpListener};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use aerogh_core::telemetry::{command_channel, Broker, BrokerConfig, CommandInbox, FrameValue, TelemetryFrame, WireRecord};
use aerogh_core::controller::CommandAck;
use aerogh_server::{http, Hub};
use common::*;
use serde_json::json;

struct Fixture {
    addr: SocketAddr,
    hub: Hub,
    inbox: Option<CommandInbox>,
    stop: Arc<AtomicBool>,
    server: Option<thread::JoinHandle<std::io::Result<()>>>,
}

impl Drop for Fixture {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::Release);
        if let Some(h) = self.server.take() {
            h.join().unwrap().unwrap();
        }
    }
}

fn fixture(timeout: Duration) -> Fixture {
    let broker = Arc::new(Broker::new(BrokerConfig { keep_history: true, ..BrokerConfig::default() }));
    let (gateway, inbox) = command_channel(timeout);
    let hub = Hub { broker, gateway };
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let stop = Arc::new(AtomicBool::new(false));
    let (h, s) = (hub.clone(), stop.clone());
    let server = thread::spawn(move || {
        tokio::runtime::Builder::new_current_thread().enable_all().build().unwrap().block_on(http::run(listener, h, s))
    });
    Fixture { addr, hub, inbox: Some(inbox), stop, server: Some(server) }
}

fn frame(topic: &str, t: f64, v: f64) -> TelemetryFrame {
    TelemetryFrame::new(topic, t, "2021-06-01T00:00:00Z", FrameValue::Number(v), "C")
}

#[test]
fn state_and_history() {
    let f = fixture(Duration::from_millis(100));
    for t in 0..5 {
        f.hub.broker.publish(frame("gh/zone0/temp", t as f64, 20.0 + t as f64)).unwrap();
    }
    f.hub.broker.publish(frame("gh/zone1/temp", 4.0, 30.0)).unwrap();

    let (code, state) = get_json(f.addr, "/api/state");
    assert_eq!(code, 200);
    let state = state.as_array().unwrap();
    assert_eq!(state.len(), 2);
    assert!(state.iter().any(|fr| fr["topic"] == "gh/zone0/temp" && fr["v"] == 24));

    let (code, hist) = get_json(f.addr, "/api/history?topic=gh/zone0/temp&from=1&to=3");
    assert_eq!(code, 200);
    let ts: Vec<_> = hist.as_array().unwrap().iter().map(|fr| fr["ts"].as_f64().unwrap()).collect();
    assert_eq!(ts, [1.0, 2.0, 3.0]);

    assert_eq!(get_json(f.addr, "/api/history?topic=gh/zone0/temp&from=3&to=1").0, 400);
    assert_eq!(get_json(f.addr, "/api/history?topic=not/a/topic/at/all").0, 400);
    assert_eq!(get_json(f.addr, "/api/history").0, 400);
    assert_eq!(get_json(f.addr, "/api/nothing-here").0, 404);
    assert_eq!(get_json(f.addr, "/").0, 404);
}

#[test]
fn stream_carries_pub_records() {
    let f = fixture(Duration::from_millis(100));
    f.hub.broker.publish(frame("gh/zone0/temp", 0.0, 21.0)).unwrap();
    assert_eq!(open_stream(f.addr, "/api/stream?pattern=gh/*/nope/extra").0, 400);

    let (code, mut r) = open_stream(f.addr, "/api/stream?pattern=gh/*/temp");
    assert_eq!(code, 200);
    // retained snapshot first
    let first = WireRecord::parse_line(&next_event(&mut r)).unwrap();
    assert_eq!(first, WireRecord::Pub(frame("gh/zone0/temp", 0.0, 21.0)));
    f.hub.broker.publish(frame("gh/zone0/rh", 1.0, 50.0)).unwrap();
    f.hub.broker.publish(frame("gh/zone2/temp", 1.0, 22.5)).unwrap();
    let line = next_event(&mut r);
    assert_eq!(line, WireRecord::Pub(frame("gh/zone2/temp", 1.0, 22.5)).to_line());
}

fn answer(inbox: CommandInbox) -> thread::JoinHandle<()> {
    thread::spawn(move || {
        for _ in 0..200 {
            for env in inbox.drain() {
                let id = env.command.id.clone();
                env.reply(CommandAck::ok(&id));
            }
            thread::sleep(Duration::from_millis(5));
        }
    })
}

#[test]
fn command_status_codes() {
    let mut f = fixture(Duration::from_secs(5));
    let worker = answer(f.inbox.take().unwrap());
    let body = json!({"t":"cmd","kind":"recharge_tank","payload":{"tank":0,"volume":50},"id":"c-17"}).to_string();
    let (code, ack) = request(f.addr, "POST", "/api/command", Some(&body));
    assert_eq!(code, 200);
    assert_eq!(ack, r#"{"t":"ack","id":"c-17","ok":true}"#);

    // the record tag may be left off
    let body = json!({"kind":"ack_alert","payload":{"alert":"a-1"},"id":"c-18"}).to_string();
    assert_eq!(request(f.addr, "POST", "/api/command", Some(&body)).0, 200);

    let bad = [
        "not json",
        r#"{"t":"sub","pattern":"gh/*/*"}"#,
        r#"{"kind":"explode","payload":{},"id":"c-19"}"#,
        r#"{"kind":"recharge_tank","payload":{"tank":0,"volume":-5},"id":"c-20"}"#,
    ];
    for b in bad {
        let (code, text) = request(f.addr, "POST", "/api/command", Some(b));
        assert_eq!(code, 400, "{b} -> {text}");
    }
    let (code, ack) = get_json(f.addr, "/api/command/c-17");
    assert_eq!((code, ack["ok"].as_bool()), (200, Some(true)));
    assert_eq!(get_json(f.addr, "/api/command/c-404").0, 404);
    worker.join().unwrap();
}

#[test]
fn unanswered_command_is_pending() {
    let f = fixture(Duration::from_millis(200));
    let body = json!({"kind":"recharge_tank","payload":{"tank":0,"volume":50},"id":"c-9"}).to_string();
    let (code, ack) = request(f.addr, "POST", "/api/command", Some(&body));
    assert_eq!(code, 504);
    let ack: serde_json::Value = serde_json::from_str(&ack).unwrap();
    assert_eq!(ack["status"], "pending");
    assert_eq!(get_json(f.addr, "/api/command/c-9").1["status"], "pending");
    // a late answer replaces the pending status
    for env in f.inbox.as_ref().unwrap().drain() {
        env.reply(CommandAck::ok("c-9"));
    }
    assert_eq!(get_json(f.addr, "/api/command/c-9").1["ok"], true);
}
