use aerogh_core::controller::{climate_decide, AlertKind, AlertManager, AlertRules, Setpoints};
use aerogh_core::simcore::ActuatorBank;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn to_f(c: f64) -> f64 {
    c * 1.8 + 32.0
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    /// Decisions depend only on band membership, so converting the readings
    /// and the temperature setpoint to Fahrenheit changes nothing.
    #[test]
    fn fahrenheit_gives_same_decisions(
        set in 15.0..30.0f64,
        band in 0.2..3.0f64,
        trace in prop::collection::vec((5.0..40.0f64, 30.0..95.0f64), 1..300),
    ) {
        let c = Setpoints { temp_set: set, temp_deadband: band, ..Setpoints::default() };
        let f = Setpoints { temp_set: to_f(set), temp_deadband: band * 1.8, ..c.clone() };
        let (mut a, mut b) = (ActuatorBank::all_off(1), ActuatorBank::all_off(1));
        for (temp, rh) in trace {
            a = climate_decide(temp, rh, &c, &a);
            b = climate_decide(to_f(temp), rh, &f, &b);
            prop_assert_eq!(&a, &b);
        }
    }
}

/// Drain below the threshold, wander around it (never reaching the re-arm
/// level), then recharge above re-arm: one alert per such excursion.
#[test]
fn one_alert_per_drain_recharge_excursion() {
    let capacity = 200.0;
    let rules = AlertRules::default();
    let (threshold, rearm) = (rules.threshold(capacity), rules.rearm_level(capacity));
    for trace in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(trace);
        let mut alerts = AlertManager::new();
        let mut raised = 0;
        let excursions = rng.random_range(1..6);
        let mut t = 0.0;
        let mut feed = |v: f64, alerts: &mut AlertManager| {
            t += 1.0;
            alerts.check_tanks(&[v], capacity, &rules, t).len()
        };
        for _ in 0..excursions {
            // full-ish tank draining down
            for _ in 0..rng.random_range(1..20) {
                raised += feed(rng.random_range(threshold..capacity), &mut alerts);
            }
            // oscillate across the threshold, staying below re-arm
            for _ in 0..rng.random_range(1..50) {
                raised += feed(rng.random_range(threshold - 15.0..rearm - 1e-9).max(0.0), &mut alerts);
            }
            raised += feed(rng.random_range(0.0..threshold), &mut alerts);
            // recharge
            raised += feed(rng.random_range(rearm..=capacity), &mut alerts);
        }
        assert_eq!(raised, excursions, "trace {trace}");
        assert!(alerts.all().all(|a| a.rule == AlertKind::TankLow && a.subject == "tank0"));
    }
}
