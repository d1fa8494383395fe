//! Greenhouse configuration.
//!
//! The on-disk form is a TOML document whose keys are exactly the field names
//! of [`SimConfig`]; any key may be omitted to take its default.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;

/// Physical and numerical parameters of one simulated greenhouse.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    /// m²
    pub floor_area: f64,
    /// m
    pub height: f64,
    pub n_boxes: usize,
    /// Length, width, height of one cultivation box in m.
    pub box_dims: [f64; 3],
    pub n_tanks: usize,
    /// m²
    pub tank_cross_section: f64,
    /// m
    pub tank_height: f64,
    /// kW, per pump (supply and return pumps are the same model).
    pub pump_power: f64,
    pub heater_power: f64,
    pub fan_power: f64,
    pub humidifier_power: f64,
    pub led_power: f64,
    pub uv_power: f64,
    /// kJ/°C
    pub thermal_capacitance: f64,
    /// kW/°C
    #[serde(rename = "envelope_UA")]
    pub envelope_ua: f64,
    /// Air changes per hour while the fan runs.
    pub vent_exchange_rate: f64,
    /// Passive air changes per hour through the envelope (humidity only).
    pub infiltration_rate: f64,
    /// g of water per second.
    pub humidifier_rate: f64,
    /// g of water per second evaporated from the mist of one running box.
    pub mist_rate: f64,
    /// L/min per box.
    pub nozzle_flow: f64,
    pub return_fraction: f64,
    pub led_lux: f64,
    /// Relative LED output in the red, green and blue bands (0..1).
    pub led_spectrum: [f64; 3],
    /// s
    pub timestep: f64,
    pub seed: u64,
    pub time_acceleration: f64,
    /// Initial tank fill as a fraction of capacity.
    pub initial_tank_fill: f64,
    pub n_plants: usize,
    pub ambient_temp_mean: f64,
    pub ambient_temp_amplitude: f64,
    pub ambient_rh_mean: f64,
    pub ambient_rh_amplitude: f64,
    /// Wall-clock instant that simulated time 0 maps to (RFC 3339, UTC).
    pub wall_epoch: String,
    /// s between energy snapshots in the data log.
    pub energy_snapshot_period: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            floor_area: 9.0,
            height: 2.0,
            n_boxes: 9,
            box_dims: [0.53, 0.33, 0.28],
            n_tanks: 3,
            tank_cross_section: 0.25,
            tank_height: 0.8,
            pump_power: 0.25,
            heater_power: 2.0,
            fan_power: 0.1,
            humidifier_power: 0.05,
            led_power: 0.4,
            uv_power: 0.03,
            thermal_capacitance: 65.0,
            envelope_ua: 0.02,
            vent_exchange_rate: 20.0,
            infiltration_rate: 0.5,
            humidifier_rate: 0.2,
            mist_rate: 0.01,
            nozzle_flow: 1.2,
            return_fraction: 0.98,
            led_lux: 8000.0,
            led_spectrum: [0.9, 0.35, 0.6],
            timestep: 1.0,
            seed: 0,
            time_acceleration: 1.0,
            initial_tank_fill: 1.0,
            n_plants: 108,
            ambient_temp_mean: 15.0,
            ambient_temp_amplitude: 5.0,
            ambient_rh_mean: 60.0,
            ambient_rh_amplitude: -10.0,
            wall_epoch: "2021-06-01T00:00:00Z".to_string(),
            energy_snapshot_period: 60.0,
        }
    }
}

impl SimConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let cfg: SimConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    /// Canonical serialization: every field, in declaration order.
    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("SimConfig always serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = [
            ("floor_area", self.floor_area),
            ("height", self.height),
            ("box_dims[0]", self.box_dims[0]),
            ("box_dims[1]", self.box_dims[1]),
            ("box_dims[2]", self.box_dims[2]),
            ("tank_cross_section", self.tank_cross_section),
            ("tank_height", self.tank_height),
            ("pump_power", self.pump_power),
            ("heater_power", self.heater_power),
            ("fan_power", self.fan_power),
            ("humidifier_power", self.humidifier_power),
            ("led_power", self.led_power),
            ("uv_power", self.uv_power),
            ("thermal_capacitance", self.thermal_capacitance),
            ("envelope_UA", self.envelope_ua),
            ("vent_exchange_rate", self.vent_exchange_rate),
            ("humidifier_rate", self.humidifier_rate),
            ("nozzle_flow", self.nozzle_flow),
            ("led_lux", self.led_lux),
            ("timestep", self.timestep),
            ("energy_snapshot_period", self.energy_snapshot_period),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(ConfigError::Invalid(format!("{name} must be > 0, got {v}")));
            }
        }
        let non_negative = [
            ("infiltration_rate", self.infiltration_rate),
            ("mist_rate", self.mist_rate),
        ];
        for (name, v) in non_negative {
            if !(v.is_finite() && v >= 0.0) {
                return Err(ConfigError::Invalid(format!("{name} must be >= 0, got {v}")));
            }
        }
        if self.n_boxes == 0 || self.n_tanks == 0 {
            return Err(ConfigError::Invalid("n_boxes and n_tanks must be >= 1".into()));
        }
        if self.n_boxes % self.n_tanks != 0 {
            return Err(ConfigError::Invalid(format!(
                "{} boxes cannot be split evenly over {} tanks",
                self.n_boxes, self.n_tanks
            )));
        }
        if !(0.0..=1.0).contains(&self.return_fraction) {
            return Err(ConfigError::Invalid(format!(
                "return_fraction must be in [0, 1], got {}",
                self.return_fraction
            )));
        }
        if !(0.0..=1.0).contains(&self.initial_tank_fill) {
            return Err(ConfigError::Invalid("initial_tank_fill must be in [0, 1]".into()));
        }
        if !(self.time_acceleration.is_finite() && self.time_acceleration >= 1.0) {
            return Err(ConfigError::Invalid("time_acceleration must be >= 1".into()));
        }
        let dt_ms = self.timestep * 1000.0;
        if (dt_ms - dt_ms.round()).abs() > 1e-9 {
            return Err(ConfigError::Invalid("timestep must be a whole number of milliseconds".into()));
        }
        if self.led_spectrum.iter().any(|c| !(0.0..=1.0).contains(c)) {
            return Err(ConfigError::Invalid("led_spectrum components must be in [0, 1]".into()));
        }
        if !(0.0..=100.0).contains(&self.ambient_rh_mean) {
            return Err(ConfigError::Invalid("ambient_rh_mean must be in [0, 100]".into()));
        }
        chrono::DateTime::parse_from_rfc3339(&self.wall_epoch)
            .map_err(|e| ConfigError::Invalid(format!("wall_epoch: {e}")))?;
        Ok(())
    }

    pub fn timestep_ms(&self) -> u64 {
        (self.timestep * 1000.0).round() as u64
    }

    /// Litres held by one full tank.
    pub fn tank_capacity(&self) -> f64 {
        self.tank_cross_section * self.tank_height * 1000.0
    }

    pub fn boxes_per_tank(&self) -> usize {
        self.n_boxes / self.n_tanks
    }

    pub fn tank_of_box(&self, b: usize) -> usize {
        b / self.boxes_per_tank()
    }

    pub fn boxes_of_tank(&self, tank: usize) -> std::ops::Range<usize> {
        let per = self.boxes_per_tank();
        tank * per..(tank + 1) * per
    }

    /// m³
    pub fn air_volume(&self) -> f64 {
        self.floor_area * self.height
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        let cfg = SimConfig::default();
        cfg.validate().unwrap();
        assert!((cfg.tank_capacity() - 200.0).abs() < 1e-12);
        assert_eq!(cfg.boxes_per_tank(), 3);
        assert_eq!(cfg.tank_of_box(4), 1);
        assert_eq!(cfg.boxes_of_tank(2), 6..9);
    }

    #[test]
    fn toml_roundtrip_uses_field_names() {
        let cfg = SimConfig { seed: 42, ..Default::default() };
        let text = cfg.to_toml_string();
        assert!(text.contains("envelope_UA = 0.02"));
        assert!(text.contains("seed = 42"));
        assert_eq!(SimConfig::from_toml_str(&text).unwrap(), cfg);
    }

    #[test]
    fn partial_document_takes_defaults() {
        let cfg = SimConfig::from_toml_str("heater_power = 3.0\n").unwrap();
        assert_eq!(cfg.heater_power, 3.0);
        assert_eq!(cfg.n_boxes, 9);
    }

    #[test]
    fn rejects_bad_values() {
        assert!(SimConfig::from_toml_str("return_fraction = 1.5").is_err());
        assert!(SimConfig::from_toml_str("timestep = 0.0").is_err());
        assert!(SimConfig::from_toml_str("n_tanks = 4").is_err());
        assert!(SimConfig::from_toml_str("no_such_key = 1").is_err());
        assert!(SimConfig::from_toml_str("timestep = 0.0005").is_err());
    }
}
