//! Edge-triggered operator alerts.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::ControlError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlertKind {
    TankLow,
    DryRun,
    SensorFault,
    Disease,
}

impl AlertKind {
    pub fn name(self) -> &'static str {
        match self {
            AlertKind::TankLow => "tank_low",
            AlertKind::DryRun => "dry_run",
            AlertKind::SensorFault => "sensor_fault",
            AlertKind::Disease => "disease",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Alert {
    pub id: String,
    pub rule: AlertKind,
    pub sim_time: f64,
    pub subject: String,
    pub acked: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlertRules {
    /// Tank level in L below which `tank_low` fires; defaults to 10 % of capacity.
    pub tank_low_threshold: Option<f64>,
    /// Fraction of tank capacity above the threshold needed to re-arm.
    pub rearm_margin: f64,
}

impl Default for AlertRules {
    fn default() -> Self {
        Self { tank_low_threshold: None, rearm_margin: 0.05 }
    }
}

impl AlertRules {
    pub fn threshold(&self, capacity: f64) -> f64 {
        self.tank_low_threshold.unwrap_or(0.1 * capacity)
    }

    pub fn rearm_level(&self, capacity: f64) -> f64 {
        self.threshold(capacity) + self.rearm_margin * capacity
    }
}

/// Alert book-keeping: issued alerts, their ack state, and per-subject arming.
#[derive(Debug, Clone, Default)]
pub struct AlertManager {
    alerts: BTreeMap<u64, Alert>,
    next_id: u64,
    /// Subjects whose condition is currently latched (no re-alert until cleared).
    latched: BTreeMap<(AlertKind, String), bool>,
}

impl AlertManager {
    pub fn new() -> Self {
        Self::default()
    }

    fn issue(&mut self, rule: AlertKind, subject: &str, sim_time: f64) -> Alert {
        let id = self.next_id;
        self.next_id += 1;
        let alert = Alert { id: format!("a-{id}"), rule, sim_time, subject: subject.to_string(), acked: false };
        self.alerts.insert(id, alert.clone());
        alert
    }

    fn is_latched(&self, rule: AlertKind, subject: &str) -> bool {
        self.latched.get(&(rule, subject.to_string())).copied().unwrap_or(false)
    }

    fn set_latch(&mut self, rule: AlertKind, subject: &str, on: bool) {
        self.latched.insert((rule, subject.to_string()), on);
    }

    /// Fire `rule` for `subject` unless it already fired and has not cleared.
    pub fn raise(&mut self, rule: AlertKind, subject: &str, sim_time: f64) -> Option<Alert> {
        if self.is_latched(rule, subject) {
            return None;
        }
        self.set_latch(rule, subject, true);
        Some(self.issue(rule, subject, sim_time))
    }

    /// Clear a latched condition so the next `raise` fires again.
    pub fn clear(&mut self, rule: AlertKind, subject: &str) {
        self.set_latch(rule, subject, false);
    }

    /// Always issue a fresh alert (one per classification result, for instance).
    pub fn raise_unlatched(&mut self, rule: AlertKind, subject: &str, sim_time: f64) -> Alert {
        self.issue(rule, subject, sim_time)
    }

    /// Level-based tank alerts: one alert per excursion below the threshold,
    /// re-armed only once the tank is back above threshold + margin.
    pub fn check_tanks(&mut self, volumes: &[f64], capacity: f64, rules: &AlertRules, sim_time: f64) -> Vec<Alert> {
        let threshold = rules.threshold(capacity);
        let rearm = rules.rearm_level(capacity);
        let mut out = Vec::new();
        for (k, &v) in volumes.iter().enumerate() {
            let subject = format!("tank{k}");
            if v < threshold {
                out.extend(self.raise(AlertKind::TankLow, &subject, sim_time));
            } else if v >= rearm {
                self.clear(AlertKind::TankLow, &subject);
            }
        }
        out
    }

    pub fn ack(&mut self, id: &str) -> Result<Alert, ControlError> {
        let alert = id
            .strip_prefix("a-")
            .and_then(|n| n.parse::<u64>().ok())
            .and_then(|n| self.alerts.get_mut(&n))
            .ok_or_else(|| ControlError::UnknownAlert(id.to_string()))?;
        alert.acked = true;
        Ok(alert.clone())
    }

    pub fn all(&self) -> impl Iterator<Item = &Alert> {
        self.alerts.values()
    }

    pub fn open(&self) -> impl Iterator<Item = &Alert> {
        self.alerts.values().filter(|a| !a.acked)
    }
}
