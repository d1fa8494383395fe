//! Time-driven actuators: irrigation duty cycle, UV lamps and LED photoperiod.

use serde::{Deserialize, Serialize};

use crate::error::ControlError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IrrigationSchedule {
    pub on_minutes: f64,
    pub off_minutes: f64,
    /// Per box; missing entries count as enabled.
    pub enabled: Vec<bool>,
    /// Per box, s; missing entries count as 0.
    pub phase_offset: Vec<f64>,
    /// Delay in s between a supply pump and its return pump.
    pub return_lag: f64,
}

impl Default for IrrigationSchedule {
    fn default() -> Self {
        Self { on_minutes: 10.0, off_minutes: 5.0, enabled: Vec::new(), phase_offset: Vec::new(), return_lag: 0.0 }
    }
}

impl IrrigationSchedule {
    pub fn validate(&self) -> Result<(), ControlError> {
        if !(self.on_minutes.is_finite() && self.on_minutes > 0.0) {
            return Err(ControlError::InvalidCommand("on_minutes must be > 0".into()));
        }
        if !(self.off_minutes.is_finite() && self.off_minutes >= 0.0) {
            return Err(ControlError::InvalidCommand("off_minutes must be >= 0".into()));
        }
        if !(self.return_lag.is_finite() && self.return_lag >= 0.0) {
            return Err(ControlError::InvalidCommand("return_lag must be >= 0".into()));
        }
        if self.phase_offset.iter().any(|p| !p.is_finite()) {
            return Err(ControlError::InvalidCommand("phase offsets must be finite".into()));
        }
        Ok(())
    }

    pub fn is_enabled(&self, b: usize) -> bool {
        self.enabled.get(b).copied().unwrap_or(true)
    }

    pub fn offset_ms(&self, b: usize) -> i64 {
        (self.phase_offset.get(b).copied().unwrap_or(0.0) * 1000.0).round() as i64
    }

    pub fn on_ms(&self) -> i64 {
        (self.on_minutes * 60_000.0).round() as i64
    }

    pub fn period_ms(&self) -> i64 {
        ((self.on_minutes + self.off_minutes) * 60_000.0).round() as i64
    }

    pub fn describe(&self) -> String {
        format!("on={} off={}", self.on_minutes, self.off_minutes)
    }
}

/// Whether a cycle of `on_ms` on / `period_ms` total anchored at `anchor_ms` is on.
pub fn cycle_on(sim_ms: i64, anchor_ms: i64, on_ms: i64, period_ms: i64) -> bool {
    (sim_ms - anchor_ms).rem_euclid(period_ms) < on_ms
}

/// Supply and return pump commands per box at `sim_time` s.
pub fn irrigation_tick(sim_time: f64, schedule: &IrrigationSchedule, n_boxes: usize) -> (Vec<bool>, Vec<bool>) {
    let t = (sim_time * 1000.0).round() as i64;
    let lag = (schedule.return_lag * 1000.0).round() as i64;
    let on_at = |b: usize, t: i64| {
        schedule.is_enabled(b) && cycle_on(t, schedule.offset_ms(b), schedule.on_ms(), schedule.period_ms())
    };
    let supply = (0..n_boxes).map(|b| on_at(b, t)).collect();
    let ret = (0..n_boxes).map(|b| t >= lag && on_at(b, t - lag)).collect();
    (supply, ret)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UvConfig {
    /// s
    pub period: f64,
    /// s
    pub duration: f64,
}

impl Default for UvConfig {
    fn default() -> Self {
        Self { period: 6.0 * 3600.0, duration: 30.0 * 60.0 }
    }
}

/// UV lamps run for the first `duration` of every `period`.
pub fn uv_tick(sim_time: f64, uv: &UvConfig) -> bool {
    let t = (sim_time * 1000.0).round() as i64;
    cycle_on(t, 0, (uv.duration * 1000.0).round() as i64, (uv.period * 1000.0).round() as i64)
}

/// LEDs run for the first `on_hours` of every simulated day.
pub fn photoperiod_tick(sim_time: f64, on_hours: f64) -> bool {
    let t = (sim_time * 1000.0).round() as i64;
    cycle_on(t, 0, (on_hours * 3_600_000.0).round() as i64, 86_400_000)
}

/// One box's running duty cycle. Schedule changes are staged and adopted at
/// the box's next cycle start so no interval is cut short.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxProgram {
    pub enabled: bool,
    pub anchor_ms: i64,
    pub on_ms: i64,
    pub period_ms: i64,
    pending: Option<(bool, i64, i64)>,
}

impl BoxProgram {
    pub fn from_schedule(schedule: &IrrigationSchedule, b: usize) -> Self {
        Self {
            enabled: schedule.is_enabled(b),
            anchor_ms: schedule.offset_ms(b),
            on_ms: schedule.on_ms(),
            period_ms: schedule.period_ms(),
            pending: None,
        }
    }

    pub fn stage(&mut self, schedule: &IrrigationSchedule, b: usize) {
        self.pending = Some((schedule.is_enabled(b), schedule.on_ms(), schedule.period_ms()));
    }

    pub fn has_pending(&self) -> bool {
        self.pending.is_some()
    }

    /// Adopt a staged schedule if `sim_ms` falls on a cycle start (or the box
    /// is idle), then report whether the supply pump should run.
    pub fn tick(&mut self, sim_ms: i64, dt_ms: i64) -> bool {
        if let Some((enabled, on_ms, period_ms)) = self.pending {
            let phase = (sim_ms - self.anchor_ms).rem_euclid(self.period_ms);
            if phase < dt_ms || !self.enabled {
                self.enabled = enabled;
                self.on_ms = on_ms;
                self.period_ms = period_ms;
                self.anchor_ms = sim_ms;
                self.pending = None;
            }
        }
        self.enabled && cycle_on(sim_ms, self.anchor_ms, self.on_ms, self.period_ms)
    }
}
