//! Median aggregation of the SHT75 trio and bang-bang climate decisions.

use serde::{Deserialize, Serialize};

use crate::error::ControlError;
use crate::sensors::{SensorKind, SensorReading};
use crate::simcore::ActuatorBank;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Setpoints {
    pub temp_set: f64,
    pub temp_deadband: f64,
    pub rh_set: f64,
    pub rh_deadband: f64,
    /// LED hours on, counted from midnight of each simulated day.
    pub photoperiod_on_hours: f64,
}

impl Default for Setpoints {
    fn default() -> Self {
        Self { temp_set: 24.0, temp_deadband: 1.0, rh_set: 70.0, rh_deadband: 5.0, photoperiod_on_hours: 16.0 }
    }
}

impl Setpoints {
    pub fn validate(&self) -> Result<(), ControlError> {
        let bad = |m: String| Err(ControlError::InvalidCommand(m));
        if ![self.temp_set, self.temp_deadband, self.rh_set, self.rh_deadband, self.photoperiod_on_hours]
            .iter()
            .all(|v| v.is_finite())
        {
            return bad("setpoints must be finite".into());
        }
        if self.temp_deadband <= 0.0 || self.rh_deadband <= 0.0 {
            return bad("deadbands must be > 0".into());
        }
        if !(self.rh_set > 0.0 && self.rh_set < 100.0) {
            return bad(format!("rh_set must be in (0, 100), got {}", self.rh_set));
        }
        if !(0.0..=24.0).contains(&self.photoperiod_on_hours) {
            return bad("photoperiod_on_hours must be in [0, 24]".into());
        }
        Ok(())
    }

    /// Compact text form used as the value of `gh/config/setpoints`.
    pub fn describe(&self) -> String {
        format!(
            "temp_set={} temp_deadband={} rh_set={} rh_deadband={} photoperiod_on_hours={}",
            self.temp_set, self.temp_deadband, self.rh_set, self.rh_deadband, self.photoperiod_on_hours
        )
    }
}

pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    Some(if n % 2 == 1 { values[n / 2] } else { 0.5 * (values[n / 2 - 1] + values[n / 2]) })
}

/// Median temperature and humidity over readings no older than `max_age` s.
pub fn aggregate_climate(readings: &[SensorReading], now: f64, max_age: f64) -> Result<(f64, f64), ControlError> {
    let fresh = |kind: SensorKind| -> Vec<f64> {
        readings
            .iter()
            .filter(|r| r.kind == kind && now - r.sim_time <= max_age && r.sim_time <= now)
            .filter_map(|r| r.value.scalar())
            .collect()
    };
    let temp = median(&mut fresh(SensorKind::Sht75Temp)).ok_or(ControlError::StaleData("temperature"))?;
    let rh = median(&mut fresh(SensorKind::Sht75Rh)).ok_or(ControlError::StaleData("humidity"))?;
    Ok((temp, rh))
}

/// Hysteresis decision for heater, fan and humidifier; other devices pass through.
pub fn climate_decide(temp: f64, rh: f64, sp: &Setpoints, prev: &ActuatorBank) -> ActuatorBank {
    let mut next = prev.clone();
    let t_low = sp.temp_set - sp.temp_deadband;
    let t_high = sp.temp_set + sp.temp_deadband;
    let rh_low = sp.rh_set - sp.rh_deadband;
    let rh_high = sp.rh_set + sp.rh_deadband;

    if temp < t_low {
        next.heater = true;
    } else if temp > t_high {
        next.heater = false;
    }

    if temp > t_high || rh > rh_high {
        next.fan = true;
    } else if temp < t_low && rh < rh_low {
        next.fan = false;
    }
    // Heater and fan only run together when humidity started the fan while
    // heating; a fan latched by high temperature yields to the heater.
    let humidity_vent = rh > rh_high || (prev.heater && prev.fan);
    if next.heater && !humidity_vent {
        next.fan = false;
    }

    if rh < rh_low {
        next.humidifier = true;
    } else if rh > rh_high {
        next.humidifier = false;
    }
    next
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sensors::ReadingValue;

    fn reading(kind: SensorKind, v: f64, t: f64) -> SensorReading {
        SensorReading {
            sensor_id: "x".into(),
            kind,
            value: ReadingValue::Scalar(v),
            unit: String::new(),
            sim_time: t,
            seq: 0,
        }
    }

    fn temps(values: &[f64]) -> Vec<SensorReading> {
        let mut r: Vec<_> = values.iter().map(|&v| reading(SensorKind::Sht75Temp, v, 10.0)).collect();
        r.push(reading(SensorKind::Sht75Rh, 70.0, 10.0));
        r
    }

    #[test]
    fn median_examples() {
        assert_eq!(aggregate_climate(&temps(&[24.0, 24.2, 23.8]), 10.0, 3.0).unwrap().0, 24.0);
        assert_eq!(aggregate_climate(&temps(&[24.0]), 10.0, 3.0).unwrap().0, 24.0);
        assert_eq!(aggregate_climate(&temps(&[24.0, 24.1, 40.0]), 10.0, 3.0).unwrap().0, 24.1);
        assert_eq!(median(&mut [1.0, 3.0]), Some(2.0));
    }

    #[test]
    fn stale_readings_are_rejected() {
        let r = temps(&[24.0]);
        assert_eq!(aggregate_climate(&r, 20.0, 3.0), Err(ControlError::StaleData("temperature")));
        let only_t = vec![reading(SensorKind::Sht75Temp, 24.0, 10.0)];
        assert_eq!(aggregate_climate(&only_t, 10.0, 3.0), Err(ControlError::StaleData("humidity")));
    }

    #[test]
    fn heater_band_examples() {
        let sp = Setpoints::default();
        let off = ActuatorBank::all_off(1);
        assert!(climate_decide(22.9, 70.0, &sp, &off).heater);

        let mut on = off.clone();
        on.heater = true;
        assert!(climate_decide(24.0, 70.0, &sp, &on).heater);

        let d = climate_decide(25.1, 70.0, &sp, &on);
        assert!(!d.heater);
        assert!(d.fan);
    }

    #[test]
    fn humidity_drives_fan_and_humidifier() {
        let sp = Setpoints::default();
        let off = ActuatorBank::all_off(1);
        let d = climate_decide(24.0, 76.0, &sp, &off);
        assert!(d.fan && !d.humidifier);
        let d = climate_decide(24.0, 64.0, &sp, &off);
        assert!(d.humidifier && !d.fan);
        let mut held = off.clone();
        held.humidifier = true;
        assert!(climate_decide(24.0, 70.0, &sp, &held).humidifier);
    }

    #[test]
    fn humid_cold_air_runs_heater_and_fan() {
        let sp = Setpoints::default();
        let d = climate_decide(22.0, 80.0, &sp, &ActuatorBank::all_off(1));
        assert!(d.heater && d.fan);
    }

    #[test]
    fn cold_air_stops_temperature_ventilation() {
        let sp = Setpoints::default();
        let mut prev = ActuatorBank::all_off(1);
        prev.fan = true;
        let d = climate_decide(22.5, 60.0, &sp, &prev);
        assert!(d.heater && !d.fan);
        // rh inside its band: the temperature latch alone must not keep the fan on
        let d = climate_decide(22.5, 70.0, &sp, &prev);
        assert!(d.heater && !d.fan);
    }

    #[test]
    fn humidity_vent_with_heater_holds_without_chatter() {
        let sp = Setpoints::default();
        let mut prev = ActuatorBank::all_off(1);
        prev.heater = true;
        prev.fan = true;
        let d = climate_decide(23.5, 74.0, &sp, &prev);
        assert!(d.heater && d.fan);
    }
}
