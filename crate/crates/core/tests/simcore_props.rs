use aerogh_core::simcore::{device_power, step, ActuatorBank, GreenhouseState, SimEvent};
use aerogh_core::SimConfig;
use proptest::prelude::*;

fn bank(bits: u32, n_boxes: usize) -> ActuatorBank {
    let bit = |i: usize| bits >> i & 1 == 1;
    ActuatorBank {
        heater: bit(0),
        fan: bit(1),
        humidifier: bit(2),
        led: bit(3),
        uv: bit(4),
        supply_pump: (0..n_boxes).map(|b| bit(5 + b)).collect(),
        return_pump: (0..n_boxes).map(|b| bit(5 + n_boxes + b)).collect(),
    }
}

fn config(fill: f64, return_fraction: f64, ambient: f64, timestep: f64) -> SimConfig {
    SimConfig {
        initial_tank_fill: fill,
        return_fraction,
        ambient_temp_mean: ambient,
        timestep,
        // small tanks so random traces actually run them dry
        tank_height: 0.02,
        ..SimConfig::default()
    }
}

fn configs() -> impl Strategy<Value = SimConfig> {
    (0.0..=1.0f64, 0.0..=1.0f64, -10.0..40.0f64, prop::sample::select(vec![0.5, 1.0, 2.0, 10.0]))
        .prop_map(|(f, r, a, dt)| config(f, r, a, dt))
}

fn traces() -> impl Strategy<Value = Vec<u32>> {
    prop::collection::vec(any::<u32>(), 1..200)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn humidity_and_tanks_stay_in_range(cfg in configs(), trace in traces()) {
        let mut s = GreenhouseState::initial(&cfg);
        for bits in trace {
            s = step(&s, &bank(bits, cfg.n_boxes), &cfg).state;
            prop_assert!((0.0..=100.0).contains(&s.rel_humidity), "rh {}", s.rel_humidity);
            for v in &s.tank_volume {
                prop_assert!((0.0..=cfg.tank_capacity()).contains(v), "tank {v}");
            }
        }
    }

    #[test]
    fn water_is_conserved_each_step(cfg in configs(), trace in traces()) {
        let mut s = GreenhouseState::initial(&cfg);
        for bits in trace {
            let act = bank(bits, cfg.n_boxes);
            let out = step(&s, &act, &cfg);
            for tank in 0..cfg.n_tanks {
                let dry = out.events.iter().any(|e| matches!(e, SimEvent::DryRun { tank: t, .. } if *t == tank));
                let mut dispensed = 0.0;
                let mut returned = 0.0;
                for b in cfg.boxes_of_tank(tank) {
                    let d = out.state.box_dispensed[b] - s.box_dispensed[b];
                    dispensed += d;
                    if act.supply_pump[b] && act.return_pump[b] {
                        returned += cfg.return_fraction * d;
                    }
                }
                let expected = s.tank_volume[tank] - dispensed + returned;
                let err = (out.state.tank_volume[tank] - expected).abs() / cfg.tank_capacity();
                prop_assert!(err < 1e-9, "tank {tank} dry {dry}: {} vs {expected}", out.state.tank_volume[tank]);
            }
            s = out.state;
        }
    }

    #[test]
    fn energy_is_monotone_and_additive(cfg in configs(), trace in traces()) {
        let mut s = GreenhouseState::initial(&cfg);
        for bits in trace {
            let next = step(&s, &bank(bits, cfg.n_boxes), &cfg).state;
            prop_assert!(next.energy_total >= s.energy_total);
            let sum: f64 = next.energy_by_device.values().sum();
            prop_assert_eq!(sum, next.energy_total);
            let analytic: f64 = next
                .device_on_ms
                .iter()
                .map(|(d, ms)| device_power(&cfg, d).unwrap() * *ms as f64 / 3.6e6)
                .sum();
            prop_assert!((next.energy_total - analytic).abs() <= 1e-9 * analytic.max(1e-12));
            s = next;
        }
    }

    #[test]
    fn identical_traces_give_identical_trajectories(cfg in configs(), trace in traces()) {
        let run = || {
            let mut s = GreenhouseState::initial(&cfg);
            let mut states = Vec::new();
            for bits in &trace {
                s = step(&s, &bank(*bits, cfg.n_boxes), &cfg).state;
                states.push(serde_json::to_string(&s).unwrap());
            }
            states
        };
        prop_assert_eq!(run(), run());
    }
}

#[test]
fn ten_cycles_consume_two_percent_of_dispensed() {
    // one box on its own tank, pumps on 600 s of every 900 s, return pump mirrors supply
    let cfg = SimConfig { n_boxes: 1, n_tanks: 1, ..SimConfig::default() };
    let mut s = GreenhouseState::initial(&cfg);
    let start = s.tank_volume[0];
    for t in 0..10 * 900 {
        let on = t % 900 < 600;
        let act = ActuatorBank { supply_pump: vec![on], return_pump: vec![on], ..ActuatorBank::all_off(1) };
        s = step(&s, &act, &cfg).state;
    }
    let dispensed = s.box_dispensed[0];
    assert!((dispensed - 10.0 * 10.0 * 1.2).abs() < 1e-9 * dispensed, "{dispensed}");
    let consumed = start - s.tank_volume[0];
    assert!((consumed - dispensed * 0.02).abs() <= 1e-6 * dispensed * 0.02, "{consumed}");
}
