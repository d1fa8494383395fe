//! The closed loop: sensors feed the controller, the controller drives the
//! actuators, the simulator advances. Every reading, actuation, alert,
//! command and energy snapshot is published to the broker and logged.
//!
//! One tick at simulated time t:
//! 1. apply queued operator commands
//! 2. sample the sensors that are due and publish their frames
//! 3. run the controller, publish new alerts and changed actuators
//! 4. write an energy snapshot when t is a multiple of the snapshot period
//! 5. step the simulator to t + dt and log its events

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::config::SimConfig;
use crate::controller::{
    Alert, CommandAck, CommandEffect, Controller, ControllerConfig, OperatorCommand,
};
use crate::datalog::{CommandRecord, DataLog, EnergySnapshot, LogBody, LogKind, SharedLog};
use crate::error::{ConfigError, RuntimeError};
use crate::sensors::{
    default_sensor_specs, flow_from_pulses, quantize, volume_from_distance, ReadingValue, Sensor, SensorKind,
    SensorSpec, SensorTarget,
};
use crate::simcore::{self, ActuatorBank, GreenhouseState, SimEvent};
use crate::telemetry::{Broker, BrokerConfig, CommandInbox, FrameValue, TelemetryFrame, WallClock};

/// Per-kind replacement of the default sensor parameters.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensorOverride {
    pub noise_sigma: Option<f64>,
    pub quantization: Option<f64>,
    pub sample_period: Option<f64>,
}

/// A reproducible run, in the same TOML format as the greenhouse config.
///
/// ```toml
/// seed = 7
/// duration = 3600        # simulated s
/// acceleration = 60      # only used by `serve`
/// output = "run-7"       # relative to the manifest
/// config = "gh.toml"     # optional; or an inline [sim] table
///
/// [controller.setpoints]
/// temp_set = 24.0
///
/// [sensors.sht75_temp]
/// sample_period = 1
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    #[serde(default)]
    pub config: Option<PathBuf>,
    #[serde(default)]
    pub sim: Option<SimConfig>,
    pub seed: u64,
    pub duration: f64,
    #[serde(default = "default_acceleration")]
    pub acceleration: f64,
    pub output: PathBuf,
    #[serde(default)]
    pub controller: ControllerConfig,
    #[serde(default)]
    pub sensors: BTreeMap<SensorKind, SensorOverride>,
}

fn default_acceleration() -> f64 {
    1.0
}

/// A manifest with every reference resolved and every value validated.
#[derive(Debug, Clone)]
pub struct RunPlan {
    pub sim: SimConfig,
    pub controller: ControllerConfig,
    pub sensors: Vec<SensorSpec>,
    pub duration_ms: u64,
    pub acceleration: f64,
    pub output: PathBuf,
}

impl RunManifest {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    /// Parse `path` and resolve it against the manifest's directory.
    pub fn load(path: &Path) -> Result<RunPlan, RuntimeError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml_str(&text)?.resolve(base)
    }

    pub fn resolve(&self, base: &Path) -> Result<RunPlan, RuntimeError> {
        let invalid = |m: String| RuntimeError::Config(ConfigError::Invalid(m));
        let mut sim = match (&self.config, &self.sim) {
            (Some(_), Some(_)) => return Err(invalid("give either config or [sim], not both".into())),
            (Some(p), None) => SimConfig::load(&base.join(p))?,
            (None, Some(s)) => s.clone(),
            (None, None) => SimConfig::default(),
        };
        sim.seed = self.seed;
        sim.time_acceleration = self.acceleration;
        sim.validate()?;
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return Err(invalid(format!("duration must be > 0, got {}", self.duration)));
        }
        let duration_ms = (self.duration * 1000.0).round() as u64;
        if duration_ms % sim.timestep_ms() != 0 {
            return Err(invalid("duration must be a whole number of timesteps".into()));
        }
        if !(self.acceleration.is_finite() && self.acceleration >= 1.0) {
            return Err(invalid(format!("acceleration must be >= 1, got {}", self.acceleration)));
        }
        self.controller.validate(&sim)?;
        let mut sensors = default_sensor_specs(&sim);
        for spec in &mut sensors {
            if let Some(o) = self.sensors.get(&spec.kind) {
                spec.noise_sigma = o.noise_sigma.unwrap_or(spec.noise_sigma);
                spec.quantization = o.quantization.unwrap_or(spec.quantization);
                spec.sample_period = o.sample_period.unwrap_or(spec.sample_period);
            }
            spec.validate(&sim)?;
        }
        Ok(RunPlan {
            sim,
            controller: self.controller.clone(),
            sensors,
            duration_ms,
            acceleration: self.acceleration,
            output: base.join(&self.output),
        })
    }
}

impl RunPlan {
    /// Default config, default sensors, the given seed and duration.
    pub fn with_defaults(seed: u64, duration_s: f64, output: &Path) -> Self {
        let mut sim = SimConfig { seed, ..SimConfig::default() };
        sim.time_acceleration = 1.0;
        let sensors = default_sensor_specs(&sim);
        Self {
            sim,
            controller: ControllerConfig::default(),
            sensors,
            duration_ms: (duration_s * 1000.0).round() as u64,
            acceleration: 1.0,
            output: output.to_path_buf(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub sim_time: f64,
    pub energy_total: f64,
    pub energy_by_device: BTreeMap<String, f64>,
    /// L sprayed into the boxes.
    pub water_dispensed: f64,
    /// L that left the tanks for good (dispensed minus returned).
    pub water_consumed: f64,
    pub alerts: usize,
    pub log_records: u64,
}

impl fmt::Display for RunSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "simulated {} s", self.sim_time)?;
        writeln!(f, "energy total {:.6} kWh", self.energy_total)?;
        for (device, kwh) in &self.energy_by_device {
            if *kwh > 0.0 {
                writeln!(f, "  {device:<16} {kwh:.6} kWh")?;
            }
        }
        writeln!(f, "water dispensed {:.3} L, consumed {:.3} L", self.water_dispensed, self.water_consumed)?;
        writeln!(f, "alerts {}", self.alerts)?;
        write!(f, "log records {}", self.log_records)
    }
}

fn on_off(on: bool) -> FrameValue {
    FrameValue::Number(if on { 1.0 } else { 0.0 })
}

/// A running greenhouse.
pub struct Greenhouse {
    sim: SimConfig,
    state: GreenhouseState,
    controller: Controller,
    sensors: Vec<Sensor>,
    broker: Arc<Broker>,
    log: Option<SharedLog>,
    clock: WallClock,
    inbox: Option<CommandInbox>,
    published: Option<ActuatorBank>,
    initial_water: f64,
    recharged: f64,
    alerts_raised: usize,
}

impl fmt::Debug for Greenhouse {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Greenhouse").field("sim_time", &self.state.sim_time()).finish_non_exhaustive()
    }
}

impl Greenhouse {
    /// `log` receives the records that are not frames; frames reach it
    /// through the broker's sink.
    pub fn new(plan: &RunPlan, broker: Arc<Broker>, log: Option<SharedLog>) -> Result<Self, RuntimeError> {
        plan.sim.validate()?;
        let sht_period = plan
            .sensors
            .iter()
            .filter(|s| matches!(s.kind, SensorKind::Sht75Temp | SensorKind::Sht75Rh))
            .map(|s| s.sample_period)
            .fold(f64::INFINITY, f64::min);
        let sht_period = if sht_period.is_finite() { sht_period } else { plan.sim.timestep };
        let controller = Controller::new(plan.controller.clone(), &plan.sim, sht_period)?;
        let sensors = Sensor::build_all(plan.sensors.clone(), &plan.sim)?;
        let clock = WallClock::new(&plan.sim.wall_epoch).map_err(|e| ConfigError::Invalid(format!("wall_epoch: {e}")))?;
        let state = GreenhouseState::initial(&plan.sim);
        let initial_water = state.tank_volume.iter().sum();
        Ok(Self {
            sim: plan.sim.clone(),
            state,
            controller,
            sensors,
            broker,
            log,
            clock,
            inbox: None,
            published: None,
            initial_water,
            recharged: 0.0,
            alerts_raised: 0,
        })
    }

    pub fn attach_commands(&mut self, inbox: CommandInbox) {
        self.inbox = Some(inbox);
    }

    pub fn state(&self) -> &GreenhouseState {
        &self.state
    }

    pub fn controller(&self) -> &Controller {
        &self.controller
    }

    pub fn broker(&self) -> &Arc<Broker> {
        &self.broker
    }

    pub fn sim_config(&self) -> &SimConfig {
        &self.sim
    }

    fn publish(&self, topic: String, value: FrameValue, unit: &str) -> Result<(), RuntimeError> {
        let t = self.state.sim_time();
        self.broker.publish(TelemetryFrame::new(topic, t, self.clock.format(t), value, unit))?;
        Ok(())
    }

    fn append(&self, kind: LogKind, body: LogBody) -> Result<(), RuntimeError> {
        if let Some(log) = &self.log {
            log.append(self.state.sim_time(), kind, body)?;
        }
        Ok(())
    }

    fn publish_config(&self) -> Result<(), RuntimeError> {
        let cfg = self.controller.config();
        self.publish("gh/config/setpoints".into(), FrameValue::Text(cfg.setpoints.describe()), "")?;
        self.publish("gh/config/schedule".into(), FrameValue::Text(cfg.irrigation.describe()), "")
    }

    fn publish_alerts(&mut self, alerts: &[Alert]) -> Result<(), RuntimeError> {
        for a in alerts {
            self.alerts_raised += 1;
            self.publish(format!("gh/alert/{}", a.rule.name()), FrameValue::Text(format!("{}:{}", a.id, a.subject)), "")?;
        }
        Ok(())
    }

    fn log_event(&self, event: &SimEvent) -> Result<(), RuntimeError> {
        let body = serde_json::to_value(event).expect("events serialize");
        self.append(LogKind::Event, LogBody::Event(body))
    }

    /// Apply one command now, as the next control tick would.
    pub fn execute(&mut self, cmd: &OperatorCommand) -> Result<CommandAck, RuntimeError> {
        let outcome = self.controller.apply_command(cmd, &mut self.state, &self.sim);
        let record = CommandRecord {
            id: cmd.id.clone(),
            kind: cmd.kind().to_string(),
            payload: cmd.payload(),
            ok: outcome.ack.ok,
            error: outcome.ack.error.clone(),
        };
        self.append(LogKind::Command, LogBody::Command(record))?;
        match outcome.effect {
            Some(CommandEffect::SetpointsChanged(sp)) => {
                self.publish("gh/config/setpoints".into(), FrameValue::Text(sp.describe()), "")?;
            }
            Some(CommandEffect::ScheduleChanged(s)) => {
                self.publish("gh/config/schedule".into(), FrameValue::Text(s.describe()), "")?;
            }
            Some(CommandEffect::Recharged(event)) => {
                if let SimEvent::Recharge { added, .. } = event {
                    self.recharged += added;
                }
                self.log_event(&event)?;
            }
            Some(CommandEffect::AlertAcked(alert)) => {
                self.publish("gh/alert/acked".into(), FrameValue::Text(alert.id), "")?;
            }
            None => {}
        }
        Ok(outcome.ack)
    }

    fn handle_commands(&mut self) -> Result<(), RuntimeError> {
        let Some(inbox) = &self.inbox else { return Ok(()) };
        for envelope in inbox.drain() {
            let ack = self.execute(&envelope.command)?;
            envelope.reply(ack);
        }
        Ok(())
    }

    fn sample_sensors(&mut self) -> Result<(), RuntimeError> {
        let now = self.state.sim_ms;
        for i in 0..self.sensors.len() {
            if !self.sensors[i].due(now) {
                continue;
            }
            let reading = self.sensors[i].sample(&self.state, &self.sim);
            self.controller.observe(&reading);
            let spec = &self.sensors[i].spec;
            let (topic, kind, target, period) = (spec.topic(), spec.kind, spec.target, spec.sample_period);
            let value = match reading.value {
                ReadingValue::Scalar(v) => FrameValue::Number(v),
                ReadingValue::Rgb(rgb) => FrameValue::Rgb(rgb),
            };
            self.publish(topic, value, kind.unit())?;
            let scalar = reading.value.scalar().unwrap_or(0.0);
            match (kind, target) {
                (SensorKind::YfS201, SensorTarget::Box(b)) => {
                    let flow = quantize(flow_from_pulses(scalar as u64, period), 1e-6);
                    self.publish(format!("gh/box{b}/flow"), FrameValue::Number(flow), "L/min")?;
                }
                (SensorKind::Srf05, SensorTarget::Tank(t)) => {
                    let subject = format!("tank{t}");
                    match volume_from_distance(scalar, &self.sim) {
                        Ok(v) => {
                            self.controller.sensor_ok(&subject);
                            self.publish(format!("gh/{subject}/volume"), FrameValue::Number(quantize(v, 0.001)), "L")?;
                        }
                        Err(_) => {
                            let alert = self.controller.sensor_fault(&subject, self.state.sim_time());
                            self.publish_alerts(alert.as_slice())?;
                        }
                    }
                }
                _ => {}
            }
        }
        Ok(())
    }

    fn publish_actuators(&mut self, next: &ActuatorBank) -> Result<(), RuntimeError> {
        let prev = self.published.take();
        let changed = |old: Option<bool>, new: bool| old != Some(new);
        let p = prev.as_ref();
        for (name, on) in [
            ("heater", next.heater),
            ("fan", next.fan),
            ("humidifier", next.humidifier),
            ("led", next.led),
            ("uv", next.uv),
        ] {
            let old = p.map(|p| match name {
                "heater" => p.heater,
                "fan" => p.fan,
                "humidifier" => p.humidifier,
                "led" => p.led,
                _ => p.uv,
            });
            if changed(old, on) {
                self.publish(format!("gh/zone0/{name}"), on_off(on), "bool")?;
            }
        }
        for b in 0..next.supply_pump.len() {
            if changed(p.map(|p| p.supply_pump[b]), next.supply_pump[b]) {
                self.publish(format!("gh/box{b}/pumps"), on_off(next.supply_pump[b]), "bool")?;
            }
            if changed(p.map(|p| p.return_pump[b]), next.return_pump[b]) {
                self.publish(format!("gh/box{b}/return"), on_off(next.return_pump[b]), "bool")?;
            }
        }
        self.published = Some(next.clone());
        Ok(())
    }

    fn snapshot(&self) -> Result<(), RuntimeError> {
        let by_device = self.state.energy_by_device.clone();
        let total = by_device.values().sum();
        self.publish("gh/zone0/energy".into(), FrameValue::Number(total), "kWh")?;
        self.append(LogKind::Energy, LogBody::Energy(EnergySnapshot { total, by_device }))
    }

    /// Advance one timestep.
    pub fn tick(&mut self) -> Result<(), RuntimeError> {
        if self.published.is_none() {
            self.publish_config()?;
        }
        self.handle_commands()?;
        self.sample_sensors()?;
        let out = self.controller.tick(&self.state, &self.sim);
        self.publish_alerts(&out.alerts)?;
        self.publish_actuators(&out.actuators)?;
        let period_ms = (self.sim.energy_snapshot_period * 1000.0).round() as u64;
        if self.state.sim_ms % period_ms.max(1) == 0 {
            self.snapshot()?;
        }
        let outcome = simcore::step(&self.state, &out.actuators, &self.sim);
        self.state = outcome.state;
        for event in &outcome.events {
            self.log_event(event)?;
        }
        let alerts = self.controller.on_sim_events(&outcome.events, &self.state);
        self.publish_alerts(&alerts)
    }

    /// Tick as fast as possible until simulated time reaches `end_ms`.
    pub fn run_until(&mut self, end_ms: u64) -> Result<(), RuntimeError> {
        while self.state.sim_ms < end_ms {
            self.tick()?;
        }
        Ok(())
    }

    /// Tick in step with the wall clock, `acceleration` simulated seconds per
    /// real second, until `end_ms` (if any) or until `stop` is set. The log
    /// is flushed about once per wall second.
    pub fn run_paced(&mut self, end_ms: Option<u64>, acceleration: f64, stop: &AtomicBool) -> Result<(), RuntimeError> {
        let start_wall = Instant::now();
        let start_ms = self.state.sim_ms;
        let mut last_flush = Instant::now();
        while !stop.load(Ordering::Acquire) && end_ms.is_none_or(|e| self.state.sim_ms < e) {
            self.tick()?;
            let due = Duration::from_secs_f64((self.state.sim_ms - start_ms) as f64 / 1000.0 / acceleration);
            while !stop.load(Ordering::Acquire) {
                let elapsed = start_wall.elapsed();
                if elapsed >= due {
                    break;
                }
                std::thread::sleep((due - elapsed).min(Duration::from_millis(50)));
            }
            if last_flush.elapsed() >= Duration::from_secs(1) {
                if let Some(log) = &self.log {
                    log.flush()?;
                }
                last_flush = Instant::now();
            }
        }
        Ok(())
    }

    /// Final energy snapshot and log flush.
    pub fn finish(self) -> Result<RunSummary, RuntimeError> {
        self.snapshot()?;
        let log_records = match &self.log {
            Some(log) => {
                log.flush()?;
                log.0.lock().unwrap_or_else(|p| p.into_inner()).next_seq()
            }
            None => 0,
        };
        let final_water: f64 = self.state.tank_volume.iter().sum();
        Ok(RunSummary {
            sim_time: self.state.sim_time(),
            energy_total: self.state.energy_total,
            energy_by_device: self.state.energy_by_device.clone(),
            water_dispensed: self.state.box_dispensed.iter().sum(),
            water_consumed: self.initial_water + self.recharged - final_water,
            alerts: self.alerts_raised,
            log_records,
        })
    }
}

/// Broker plus data log wired the way `sim run` and `serve` use them.
pub fn logging_broker(output: &Path, keep_history: bool) -> Result<(Arc<Broker>, SharedLog), RuntimeError> {
    let log = SharedLog::new(DataLog::create(output)?);
    let cfg = BrokerConfig { keep_history, ..BrokerConfig::default() };
    Ok((Arc::new(Broker::with_sink(cfg, Box::new(log.clone()))), log))
}

/// Run a plan unpaced from t = 0 to its duration, logging to its output.
pub fn simulate(plan: &RunPlan) -> Result<RunSummary, RuntimeError> {
    let (broker, log) = logging_broker(&plan.output, false)?;
    let mut gh = Greenhouse::new(plan, broker, Some(log))?;
    gh.run_until(plan.duration_ms)?;
    gh.finish()
}
