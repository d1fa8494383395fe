//! The central processing unit: climate hysteresis, irrigation duty cycle,
//! UV disinfection, LED photoperiod, alerting and operator commands.

mod alerts;
mod climate;
mod commands;
mod schedule;

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

pub use alerts::{Alert, AlertKind, AlertManager, AlertRules};
pub use climate::{aggregate_climate, climate_decide, median, Setpoints};
pub use commands::{
    AckPayload, AckStatus, Command, CommandAck, OperatorCommand, RechargePayload, SchedulePayload, SetpointsPayload,
    COMMAND_KINDS,
};
pub use schedule::{
    cycle_on, irrigation_tick, photoperiod_tick, uv_tick, BoxProgram, IrrigationSchedule, UvConfig,
};

use crate::config::SimConfig;
use crate::error::ControlError;
use crate::sensors::{SensorKind, SensorReading};
use crate::simcore::{recharge_tank, ActuatorBank, GreenhouseState, SimEvent};

/// Readings older than this many sample periods are ignored by aggregation.
pub const FRESHNESS_PERIODS: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerConfig {
    pub setpoints: Setpoints,
    pub irrigation: IrrigationSchedule,
    pub uv: UvConfig,
    pub alerts: AlertRules,
    /// s between climate decisions; 0 means every simulation step.
    pub control_period: f64,
}

impl ControllerConfig {
    pub fn validate(&self, sim: &SimConfig) -> Result<(), ControlError> {
        self.setpoints.validate()?;
        self.irrigation.validate()?;
        if self.irrigation.enabled.len() > sim.n_boxes || self.irrigation.phase_offset.len() > sim.n_boxes {
            return Err(ControlError::InvalidCommand("schedule lists more boxes than exist".into()));
        }
        if !(self.uv.period > 0.0 && self.uv.duration >= 0.0 && self.uv.duration <= self.uv.period) {
            return Err(ControlError::InvalidCommand("uv needs 0 <= duration <= period, period > 0".into()));
        }
        if !(self.control_period >= 0.0 && self.control_period.is_finite()) {
            return Err(ControlError::InvalidCommand("control_period must be >= 0".into()));
        }
        if !(self.alerts.rearm_margin >= 0.0) || self.alerts.tank_low_threshold.is_some_and(|t| !(t >= 0.0)) {
            return Err(ControlError::InvalidCommand("alert thresholds must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ControlOutput {
    pub actuators: ActuatorBank,
    pub alerts: Vec<Alert>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CommandEffect {
    SetpointsChanged(Setpoints),
    ScheduleChanged(IrrigationSchedule),
    Recharged(SimEvent),
    AlertAcked(Alert),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CommandOutcome {
    pub ack: CommandAck,
    pub effect: Option<CommandEffect>,
}

#[derive(Debug, Clone)]
pub struct Controller {
    cfg: ControllerConfig,
    programs: Vec<BoxProgram>,
    supply_history: VecDeque<(i64, Vec<bool>)>,
    climate: ActuatorBank,
    alerts: AlertManager,
    latest: BTreeMap<String, SensorReading>,
    max_age: f64,
    control_period_ms: u64,
    dt_ms: u64,
}

impl Controller {
    /// `sht_period` is the SHT75 sample period, which sets data freshness.
    pub fn new(cfg: ControllerConfig, sim: &SimConfig, sht_period: f64) -> Result<Self, ControlError> {
        cfg.validate(sim)?;
        let programs = (0..sim.n_boxes).map(|b| BoxProgram::from_schedule(&cfg.irrigation, b)).collect();
        let dt_ms = sim.timestep_ms();
        let control_period_ms = ((cfg.control_period * 1000.0).round() as u64).max(dt_ms);
        Ok(Self {
            programs,
            supply_history: VecDeque::new(),
            climate: ActuatorBank::all_off(sim.n_boxes),
            alerts: AlertManager::new(),
            latest: BTreeMap::new(),
            max_age: FRESHNESS_PERIODS * sht_period,
            control_period_ms,
            dt_ms,
            cfg,
        })
    }

    pub fn config(&self) -> &ControllerConfig {
        &self.cfg
    }

    pub fn alerts(&self) -> &AlertManager {
        &self.alerts
    }

    pub fn alerts_mut(&mut self) -> &mut AlertManager {
        &mut self.alerts
    }

    /// Remember the newest temperature/humidity reading of each sensor.
    pub fn observe(&mut self, reading: &SensorReading) {
        if matches!(reading.kind, SensorKind::Sht75Temp | SensorKind::Sht75Rh) {
            self.latest.insert(reading.sensor_id.clone(), reading.clone());
        }
    }

    /// One control tick at `state.sim_time()`: decide every actuator.
    pub fn tick(&mut self, state: &GreenhouseState, sim: &SimConfig) -> ControlOutput {
        let now = state.sim_time();
        let mut alerts = Vec::new();

        if state.sim_ms % self.control_period_ms == 0 {
            let readings: Vec<SensorReading> = self.latest.values().cloned().collect();
            match aggregate_climate(&readings, now, self.max_age) {
                Ok((temp, rh)) => {
                    self.alerts.clear(AlertKind::SensorFault, "climate");
                    self.climate = climate_decide(temp, rh, &self.cfg.setpoints, &self.climate);
                }
                Err(_) => alerts.extend(self.alerts.raise(AlertKind::SensorFault, "climate", now)),
            }
        }

        let t = state.sim_ms as i64;
        let dt = self.dt_ms as i64;
        let supply: Vec<bool> = self.programs.iter_mut().map(|p| p.tick(t, dt)).collect();
        let lag = (self.cfg.irrigation.return_lag * 1000.0).round() as i64;
        let ret = if lag == 0 {
            supply.clone()
        } else {
            self.supply_history.push_back((t, supply.clone()));
            while self.supply_history.front().is_some_and(|(ts, _)| *ts < t - lag) {
                self.supply_history.pop_front();
            }
            match self.supply_history.front() {
                Some((ts, s)) if *ts == t - lag => s.clone(),
                _ => vec![false; supply.len()],
            }
        };

        let actuators = ActuatorBank {
            heater: self.climate.heater,
            fan: self.climate.fan,
            humidifier: self.climate.humidifier,
            led: photoperiod_tick(now, self.cfg.setpoints.photoperiod_on_hours),
            uv: uv_tick(now, &self.cfg.uv),
            supply_pump: supply,
            return_pump: ret,
        };

        alerts.extend(self.alerts.check_tanks(&state.tank_volume, sim.tank_capacity(), &self.cfg.alerts, now));
        ControlOutput { actuators, alerts }
    }

    /// Turn simulator events into alerts; a tank's dry-run alert re-arms once
    /// it holds water again.
    pub fn on_sim_events(&mut self, events: &[SimEvent], state: &GreenhouseState) -> Vec<Alert> {
        let mut out = Vec::new();
        for ev in events {
            if let SimEvent::DryRun { tank, sim_time, .. } = ev {
                out.extend(self.alerts.raise(AlertKind::DryRun, &format!("tank{tank}"), *sim_time));
            }
        }
        for (k, v) in state.tank_volume.iter().enumerate() {
            let dry = events.iter().any(|e| matches!(e, SimEvent::DryRun { tank, .. } if *tank == k));
            if *v > 0.0 && !dry {
                self.alerts.clear(AlertKind::DryRun, &format!("tank{k}"));
            }
        }
        out
    }

    /// Raise a sensor fault (edge-triggered per subject).
    pub fn sensor_fault(&mut self, subject: &str, sim_time: f64) -> Option<Alert> {
        self.alerts.raise(AlertKind::SensorFault, subject, sim_time)
    }

    pub fn sensor_ok(&mut self, subject: &str) {
        self.alerts.clear(AlertKind::SensorFault, subject);
    }

    /// Apply one validated operator command. Rejections leave every piece of
    /// state untouched.
    pub fn apply_command(
        &mut self,
        cmd: &OperatorCommand,
        state: &mut GreenhouseState,
        sim: &SimConfig,
    ) -> CommandOutcome {
        let result = self.try_apply(cmd, state, sim);
        match result {
            Ok(effect) => CommandOutcome { ack: CommandAck::ok(&cmd.id), effect: Some(effect) },
            Err(e) => CommandOutcome { ack: CommandAck::error(&cmd.id, e.to_string()), effect: None },
        }
    }

    fn try_apply(
        &mut self,
        cmd: &OperatorCommand,
        state: &mut GreenhouseState,
        sim: &SimConfig,
    ) -> Result<CommandEffect, ControlError> {
        match &cmd.command {
            Command::SetSetpoints(p) => {
                let next = p.apply_to(&self.cfg.setpoints);
                next.validate()?;
                self.cfg.setpoints = next.clone();
                Ok(CommandEffect::SetpointsChanged(next))
            }
            Command::SetSchedule(p) => {
                let mut next = self.cfg.irrigation.clone();
                next.on_minutes = p.on;
                next.off_minutes = p.off;
                if let Some(enabled) = &p.enabled {
                    if enabled.len() > sim.n_boxes {
                        return Err(ControlError::InvalidCommand(format!(
                            "{} enable flags for {} boxes",
                            enabled.len(),
                            sim.n_boxes
                        )));
                    }
                    next.enabled = enabled.clone();
                }
                next.validate()?;
                for (b, prog) in self.programs.iter_mut().enumerate() {
                    prog.stage(&next, b);
                }
                self.cfg.irrigation = next.clone();
                Ok(CommandEffect::ScheduleChanged(next))
            }
            Command::RechargeTank(p) => {
                let (next, _, event) = recharge_tank(state, p.tank, p.volume, sim)?;
                *state = next;
                Ok(CommandEffect::Recharged(event))
            }
            Command::AckAlert(p) => Ok(CommandEffect::AlertAcked(self.alerts.ack(&p.alert)?)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn setup() -> (Controller, GreenhouseState, SimConfig) {
        let sim = SimConfig::default();
        let ctl = Controller::new(ControllerConfig::default(), &sim, 1.0).unwrap();
        (ctl, GreenhouseState::initial(&sim), sim)
    }

    #[test]
    fn stale_sensors_hold_and_alert_once() {
        let (mut ctl, state, sim) = setup();
        let out = ctl.tick(&state, &sim);
        assert_eq!(out.alerts.len(), 1);
        assert_eq!(out.alerts[0].rule, AlertKind::SensorFault);
        assert!(!out.actuators.heater);
        let mut s1 = state.clone();
        s1.sim_ms = 1000;
        assert!(ctl.tick(&s1, &sim).alerts.is_empty());
    }

    #[test]
    fn recharge_unknown_tank_changes_nothing() {
        let (mut ctl, mut state, sim) = setup();
        let before = state.clone();
        let cmd = OperatorCommand::parse("recharge_tank", &json!({"tank": 9, "volume": 5}), "c-1").unwrap();
        let out = ctl.apply_command(&cmd, &mut state, &sim);
        assert!(!out.ack.ok);
        assert!(out.ack.error.unwrap().contains("unknown tank"));
        assert_eq!(state, before);
    }

    #[test]
    fn recharge_raises_volume() {
        let (mut ctl, mut state, sim) = setup();
        state.tank_volume[1] = 100.0;
        let cmd = OperatorCommand::parse("recharge_tank", &json!({"tank": 1, "volume": 50}), "c-1").unwrap();
        let out = ctl.apply_command(&cmd, &mut state, &sim);
        assert_eq!(out.ack, CommandAck::ok("c-1"));
        assert_eq!(state.tank_volume[1], 150.0);
    }

    #[test]
    fn ack_alert_command() {
        let (mut ctl, mut state, sim) = setup();
        let alert = ctl.tick(&state, &sim).alerts.remove(0);
        let cmd = OperatorCommand::parse("ack_alert", &json!({"alert": alert.id}), "c-9").unwrap();
        let out = ctl.apply_command(&cmd, &mut state, &sim);
        assert!(out.ack.ok);
        assert!(ctl.alerts().all().all(|a| a.acked));
        let cmd = OperatorCommand::parse("ack_alert", &json!({"alert": "a-404"}), "c-10").unwrap();
        assert!(!ctl.apply_command(&cmd, &mut state, &sim).ack.ok);
    }

    #[test]
    fn schedule_change_applies_from_next_cycle() {
        let (mut ctl, mut state, sim) = setup();
        let mut on_log = Vec::new();
        for t in 0..3600u64 {
            state.sim_ms = t * 1000;
            if t == 300 {
                let cmd = OperatorCommand::parse("set_schedule", &json!({"on": 2, "off": 1}), "c-1").unwrap();
                assert!(ctl.apply_command(&cmd, &mut state, &sim).ack.ok);
            }
            on_log.push(ctl.tick(&state, &sim).actuators.supply_pump[0]);
        }
        // old 10/5 cycle runs to completion at 900 s, then 2/1 from there
        assert!(on_log[..600].iter().all(|&on| on));
        assert!(on_log[600..900].iter().all(|&on| !on));
        assert!(on_log[900..1020].iter().all(|&on| on));
        assert!(on_log[1020..1080].iter().all(|&on| !on));
        assert!(on_log[1080]);
    }

    #[test]
    fn return_lag_delays_return_pump() {
        let sim = SimConfig::default();
        let cfg = ControllerConfig {
            irrigation: IrrigationSchedule { return_lag: 5.0, ..Default::default() },
            ..Default::default()
        };
        let mut ctl = Controller::new(cfg, &sim, 1.0).unwrap();
        let mut state = GreenhouseState::initial(&sim);
        let mut ret = Vec::new();
        for t in 0..610u64 {
            state.sim_ms = t * 1000;
            ret.push(ctl.tick(&state, &sim).actuators.return_pump[0]);
        }
        assert!(!ret[4]);
        assert!(ret[5]);
        assert!(ret[604]);
        assert!(!ret[605]);
    }
}
