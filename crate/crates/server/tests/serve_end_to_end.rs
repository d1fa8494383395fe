mod common;

use std::time::{Duration, Instant};

use aerogh_core::runtime::RunPlan;
use aerogh_core::telemetry::canonical_topics;
use aerogh_server::{start, ServeOptions};
use common::*;
use serde_json::{json, Value};

fn volume(frame: &Value) -> f64 {
    frame["v"].as_f64().unwrap()
}

#[test]
fn live_state_and_recharge() {
    let dir = tempfile::tempdir().unwrap();
    let mut plan = RunPlan::with_defaults(7, 4.0 * 3600.0, dir.path());
    plan.sim.initial_tank_fill = 0.5;
    plan.acceleration = 600.0;
    let opts = ServeOptions { listen_tcp: Some("127.0.0.1:0".into()), listen_http: Some("127.0.0.1:0".into()) };
    let handle = start(&plan, &opts).unwrap();
    let addr = handle.http_addr.unwrap();

    // every canonical topic shows up in the retained state
    let expected = canonical_topics(&plan.sim);
    let deadline = Instant::now() + Duration::from_secs(30);
    loop {
        let (code, state) = get_json(addr, "/api/state");
        assert_eq!(code, 200);
        let topics: Vec<&str> = state.as_array().unwrap().iter().map(|f| f["topic"].as_str().unwrap()).collect();
        let missing: Vec<&String> = expected.iter().filter(|t| !topics.contains(&t.as_str())).collect();
        if missing.is_empty() {
            break;
        }
        assert!(Instant::now() < deadline, "never published: {missing:?}");
        std::thread::sleep(Duration::from_millis(100));
    }

    let (_, mut stream) = open_stream(addr, "/api/stream?pattern=gh/tank0/volume");
    let before = volume(&serde_json::from_str(&next_event(&mut stream)).unwrap());
    let body = json!({"kind":"recharge_tank","payload":{"tank":0,"volume":50},"id":"c-1"}).to_string();
    let (code, ack) = request(addr, "POST", "/api/command", Some(&body));
    assert_eq!(code, 200, "{ack}");
    let rose = (0..20).any(|_| volume(&serde_json::from_str(&next_event(&mut stream)).unwrap()) > before + 40.0);
    assert!(rose, "tank 0 never showed the recharge");

    let summary = handle.stop().unwrap();
    assert!(summary.sim_time > 0.0);
    assert!(aerogh_core::datalog::log_files(dir.path()).unwrap().len() >= 1);
}
