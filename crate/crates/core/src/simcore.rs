//! Lumped single-zone greenhouse model stepped with forward Euler.
//!
//! Air temperature and vapour content are one well-mixed node each. Tanks are
//! rectangular, every tank feeds a contiguous block of boxes, and energy is
//! accounted as integer on-time per device so that totals are exact.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::config::SimConfig;
use crate::error::SimError;

/// Volumetric heat capacity of air, kJ/(m³·°C).
const AIR_HEAT_CAPACITY: f64 = 1.2;

/// Disease status of a plant; drives the synthetic imaging only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DiseaseClass {
    Healthy,
    Drought,
    Rust,
}

impl DiseaseClass {
    pub const ALL: [DiseaseClass; 3] = [DiseaseClass::Healthy, DiseaseClass::Drought, DiseaseClass::Rust];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            DiseaseClass::Healthy => "healthy",
            DiseaseClass::Drought => "drought",
            DiseaseClass::Rust => "rust",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == s)
    }
}

impl fmt::Display for DiseaseClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActuatorBank {
    pub heater: bool,
    pub fan: bool,
    pub humidifier: bool,
    pub led: bool,
    pub uv: bool,
    pub supply_pump: Vec<bool>,
    pub return_pump: Vec<bool>,
}

impl ActuatorBank {
    pub fn all_off(n_boxes: usize) -> Self {
        Self {
            heater: false,
            fan: false,
            humidifier: false,
            led: false,
            uv: false,
            supply_pump: vec![false; n_boxes],
            return_pump: vec![false; n_boxes],
        }
    }

    /// Every device with its on/off flag, in a fixed order.
    pub fn devices(&self) -> Vec<(String, bool)> {
        let mut out = vec![
            ("heater".to_string(), self.heater),
            ("fan".to_string(), self.fan),
            ("humidifier".to_string(), self.humidifier),
            ("led".to_string(), self.led),
            ("uv".to_string(), self.uv),
        ];
        for (b, on) in self.supply_pump.iter().enumerate() {
            out.push((format!("supply_pump{b}"), *on));
        }
        for (b, on) in self.return_pump.iter().enumerate() {
            out.push((format!("return_pump{b}"), *on));
        }
        out
    }
}

/// Rated power of a named device in kW.
pub fn device_power(cfg: &SimConfig, device: &str) -> Option<f64> {
    match device {
        "heater" => Some(cfg.heater_power),
        "fan" => Some(cfg.fan_power),
        "humidifier" => Some(cfg.humidifier_power),
        "led" => Some(cfg.led_power),
        "uv" => Some(cfg.uv_power),
        d if d.starts_with("supply_pump") || d.starts_with("return_pump") => Some(cfg.pump_power),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreenhouseState {
    /// Simulated milliseconds since epoch 0.
    pub sim_ms: u64,
    /// °C
    pub air_temp: f64,
    /// %
    pub rel_humidity: f64,
    pub lux: f64,
    /// L
    pub tank_volume: Vec<f64>,
    /// L/min currently dispensed per box.
    pub box_flow: Vec<f64>,
    /// L dispensed per box since epoch 0 (what a flow meter integrates).
    pub box_dispensed: Vec<f64>,
    pub actuators: ActuatorBank,
    /// kWh
    pub energy_total: f64,
    pub energy_by_device: BTreeMap<String, f64>,
    /// ms of on-time per device; the energy figures derive from these.
    pub device_on_ms: BTreeMap<String, u64>,
    pub plant_health: Vec<DiseaseClass>,
}

impl GreenhouseState {
    /// Air at ambient conditions for t = 0, tanks at the configured fill.
    pub fn initial(cfg: &SimConfig) -> Self {
        let (t_out, rh_out) = ambient_profile(0.0, cfg);
        let devices = ActuatorBank::all_off(cfg.n_boxes).devices();
        Self {
            sim_ms: 0,
            air_temp: t_out,
            rel_humidity: rh_out,
            lux: 0.0,
            tank_volume: vec![cfg.tank_capacity() * cfg.initial_tank_fill; cfg.n_tanks],
            box_flow: vec![0.0; cfg.n_boxes],
            box_dispensed: vec![0.0; cfg.n_boxes],
            actuators: ActuatorBank::all_off(cfg.n_boxes),
            energy_total: 0.0,
            energy_by_device: devices.iter().map(|(d, _)| (d.clone(), 0.0)).collect(),
            device_on_ms: devices.into_iter().map(|(d, _)| (d, 0)).collect(),
            plant_health: vec![DiseaseClass::Healthy; cfg.n_plants],
        }
    }

    pub fn sim_time(&self) -> f64 {
        self.sim_ms as f64 / 1000.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum SimEvent {
    /// A tank could not supply the full demand of its running pumps.
    DryRun { tank: usize, sim_time: f64, shortfall: f64 },
    Recharge { tank: usize, sim_time: f64, added: f64, overflow: f64 },
}

#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub state: GreenhouseState,
    pub events: Vec<SimEvent>,
}

/// Diurnal outdoor temperature and humidity.
pub fn ambient_profile(t: f64, cfg: &SimConfig) -> (f64, f64) {
    let phase = (2.0 * PI * t / 86_400.0).sin();
    let temp = cfg.ambient_temp_mean + cfg.ambient_temp_amplitude * phase;
    let rh = (cfg.ambient_rh_mean + cfg.ambient_rh_amplitude * phase).clamp(0.0, 100.0);
    (temp, rh)
}

/// Saturation vapour density in g/m³ (Magnus form).
pub fn saturation_density(temp: f64) -> f64 {
    let e_s = 6.112 * (17.62 * temp / (243.12 + temp)).exp();
    216.7 * e_s / (temp + 273.15)
}

/// Advance the state by one `cfg.timestep` with the given actuator command.
pub fn step(state: &GreenhouseState, actuators: &ActuatorBank, cfg: &SimConfig) -> StepOutcome {
    assert_eq!(actuators.supply_pump.len(), cfg.n_boxes, "actuator bank width");
    assert_eq!(actuators.return_pump.len(), cfg.n_boxes, "actuator bank width");
    let dt = cfg.timestep;
    let dt_ms = cfg.timestep_ms();
    let t = state.sim_time();
    let (t_out, rh_out) = ambient_profile(t, cfg);
    let mut next = state.clone();
    let mut events = Vec::new();

    // Thermal node.
    let vent_conductance = AIR_HEAT_CAPACITY * cfg.air_volume() * cfg.vent_exchange_rate / 3600.0;
    let heat_in = if actuators.heater { cfg.heater_power } else { 0.0 };
    let envelope_loss = cfg.envelope_ua * (state.air_temp - t_out);
    let vent_loss = if actuators.fan { vent_conductance * (state.air_temp - t_out) } else { 0.0 };
    let net_kw = heat_in - envelope_loss - vent_loss;
    if net_kw != 0.0 {
        next.air_temp = state.air_temp + net_kw * dt / cfg.thermal_capacitance;
    }

    // Water circuit.
    let per_box_demand = cfg.nozzle_flow / 60.0 * dt;
    let mut delivered = vec![0.0; cfg.n_boxes];
    for tank in 0..cfg.n_tanks {
        let boxes = cfg.boxes_of_tank(tank);
        let running = boxes.clone().filter(|&b| actuators.supply_pump[b]).count();
        if running == 0 {
            continue;
        }
        let demand = per_box_demand * running as f64;
        let available = state.tank_volume[tank];
        let share = if demand <= available {
            per_box_demand
        } else {
            events.push(SimEvent::DryRun { tank, sim_time: t, shortfall: demand - available });
            available / running as f64
        };
        let mut returned = 0.0;
        let mut dispensed = 0.0;
        for b in boxes {
            if actuators.supply_pump[b] {
                delivered[b] = share;
                dispensed += share;
                if actuators.return_pump[b] {
                    returned += cfg.return_fraction * share;
                }
            }
        }
        let volume = available - dispensed + returned;
        next.tank_volume[tank] = volume.clamp(0.0, cfg.tank_capacity());
    }
    let mut misting_boxes = 0usize;
    for b in 0..cfg.n_boxes {
        next.box_flow[b] = if delivered[b] == per_box_demand {
            cfg.nozzle_flow
        } else {
            delivered[b] / dt * 60.0
        };
        next.box_dispensed[b] = state.box_dispensed[b] + delivered[b];
        if delivered[b] > 0.0 {
            misting_boxes += 1;
        }
    }

    // Vapour mass balance, g/m³.
    let volume = cfg.air_volume();
    let rho_old = saturation_density(state.air_temp);
    let rho_new = saturation_density(next.air_temp);
    let mut source = misting_boxes as f64 * cfg.mist_rate;
    if actuators.humidifier {
        source += cfg.humidifier_rate;
    }
    let ach = cfg.infiltration_rate + if actuators.fan { cfg.vent_exchange_rate } else { 0.0 };
    let excess = (state.rel_humidity * rho_old - rh_out * saturation_density(t_out)) / 100.0;
    let dw = (source / volume - ach / 3600.0 * excess) * dt;
    let rh = if rho_new == rho_old {
        state.rel_humidity + 100.0 * dw / rho_new
    } else {
        state.rel_humidity * rho_old / rho_new + 100.0 * dw / rho_new
    };
    next.rel_humidity = rh.clamp(0.0, 100.0);

    next.lux = if actuators.led { cfg.led_lux } else { 0.0 };

    // Energy: integer on-time, then exact re-derivation of kWh.
    let mut total = 0.0;
    for (device, on) in actuators.devices() {
        let on_ms = next.device_on_ms.entry(device.clone()).or_insert(0);
        if on {
            *on_ms += dt_ms;
        }
        let kwh = device_energy_kwh(cfg, &device, *on_ms);
        next.energy_by_device.insert(device, kwh);
    }
    for kwh in next.energy_by_device.values() {
        total += kwh;
    }
    next.energy_total = total;

    next.actuators = actuators.clone();
    next.sim_ms = state.sim_ms + dt_ms;
    StepOutcome { state: next, events }
}

/// kWh consumed by `device` after `on_ms` milliseconds of operation.
pub fn device_energy_kwh(cfg: &SimConfig, device: &str, on_ms: u64) -> f64 {
    let power = device_power(cfg, device).unwrap_or(0.0);
    power * on_ms as f64 / 3_600_000.0
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RechargeOutcome {
    pub added: f64,
    pub overflow: f64,
}

/// Top up one tank, clamping at capacity and reporting any overflow.
pub fn recharge_tank(
    state: &GreenhouseState,
    tank: usize,
    volume: f64,
    cfg: &SimConfig,
) -> Result<(GreenhouseState, RechargeOutcome, SimEvent), SimError> {
    if tank >= state.tank_volume.len() {
        return Err(SimError::UnknownTank(tank));
    }
    if !(volume.is_finite() && volume > 0.0) {
        return Err(SimError::BadVolume(volume));
    }
    let mut next = state.clone();
    let old = state.tank_volume[tank];
    let capacity = cfg.tank_capacity();
    let new = (old + volume).min(capacity);
    next.tank_volume[tank] = new;
    let outcome = RechargeOutcome { added: new - old, overflow: (old + volume - capacity).max(0.0) };
    let event = SimEvent::Recharge {
        tank,
        sim_time: state.sim_time(),
        added: outcome.added,
        overflow: outcome.overflow,
    };
    Ok((next, outcome, event))
}
