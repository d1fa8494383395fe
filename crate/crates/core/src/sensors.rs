//! Emulated sensors: noisy, quantized, range-limited observers of the state.
//!
//! Every sensor owns its own ChaCha stream derived from the master seed and
//! its position in the sensor list, so adding readings to one sensor never
//! perturbs another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::config::SimConfig;
use crate::error::SensorError;
use crate::simcore::GreenhouseState;

/// Pulses per litre of a YF-S201 hall-effect flow meter.
pub const YF_S201_PULSES_PER_L: f64 = 450.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SensorKind {
    Sht75Temp,
    Sht75Rh,
    Srf05,
    YfS201,
    Gy302,
    Tcs3200,
}

impl SensorKind {
    pub fn unit(self) -> &'static str {
        match self {
            SensorKind::Sht75Temp => "°C",
            SensorKind::Sht75Rh => "%",
            SensorKind::Srf05 => "cm",
            SensorKind::YfS201 => "pulses",
            SensorKind::Gy302 => "lx",
            SensorKind::Tcs3200 => "rgb",
        }
    }

    /// Quantity segment of the telemetry topic this sensor publishes on.
    pub fn quantity(self) -> &'static str {
        match self {
            SensorKind::Sht75Temp => "temp",
            SensorKind::Sht75Rh => "rh",
            SensorKind::Srf05 => "level",
            SensorKind::YfS201 => "pulses",
            SensorKind::Gy302 => "lux",
            SensorKind::Tcs3200 => "spectrum",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SensorTarget {
    Zone(usize),
    Box(usize),
    Tank(usize),
}

impl SensorTarget {
    pub fn subject(self) -> String {
        match self {
            SensorTarget::Zone(k) => format!("zone{k}"),
            SensorTarget::Box(k) => format!("box{k}"),
            SensorTarget::Tank(k) => format!("tank{k}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorSpec {
    pub id: String,
    pub kind: SensorKind,
    pub target: SensorTarget,
    pub noise_sigma: f64,
    pub quantization: f64,
    pub range: [f64; 2],
    /// s
    pub sample_period: f64,
}

impl SensorSpec {
    pub fn topic(&self) -> String {
        format!("gh/{}/{}", self.target.subject(), self.kind.quantity())
    }

    pub fn sample_period_ms(&self) -> u64 {
        (self.sample_period * 1000.0).round() as u64
    }

    /// Reject specs whose parameters or bindings cannot work with `cfg`.
    pub fn validate(&self, cfg: &SimConfig) -> Result<(), SensorError> {
        let spec_err = |reason: &str| SensorError::Spec { id: self.id.clone(), reason: reason.to_string() };
        if !(self.sample_period > 0.0) {
            return Err(spec_err("sample_period must be > 0"));
        }
        if !(self.quantization >= 0.0) || !(self.noise_sigma >= 0.0) {
            return Err(spec_err("quantization and noise_sigma must be >= 0"));
        }
        if !(self.range[0] < self.range[1]) {
            return Err(spec_err("range min must be below max"));
        }
        if self.sample_period_ms() % cfg.timestep_ms() != 0 {
            return Err(spec_err("sample_period must be a multiple of the timestep"));
        }
        let binding_err = |reason: String| SensorError::Binding { id: self.id.clone(), reason };
        match (self.kind, self.target) {
            (SensorKind::Srf05, SensorTarget::Tank(k)) if k < cfg.n_tanks => Ok(()),
            (SensorKind::Srf05, t) => Err(binding_err(format!("srf05 needs an existing tank, got {t:?}"))),
            (SensorKind::YfS201, SensorTarget::Box(k)) if k < cfg.n_boxes => Ok(()),
            (SensorKind::YfS201, t) => Err(binding_err(format!("yf_s201 needs an existing box, got {t:?}"))),
            (_, SensorTarget::Zone(_)) => Ok(()),
            (kind, t) => Err(binding_err(format!("{kind:?} must observe a zone, got {t:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ReadingValue {
    Scalar(f64),
    Rgb([f64; 3]),
}

impl ReadingValue {
    pub fn scalar(&self) -> Option<f64> {
        match self {
            ReadingValue::Scalar(v) => Some(*v),
            ReadingValue::Rgb(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorReading {
    pub sensor_id: String,
    pub kind: SensorKind,
    pub value: ReadingValue,
    pub unit: String,
    pub sim_time: f64,
    pub seq: u64,
}

/// Per-kind noise/quantization defaults used by [`default_sensor_specs`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorDefaults {
    pub noise_sigma: f64,
    pub quantization: f64,
    pub sample_period: f64,
}

impl SensorDefaults {
    pub fn for_kind(kind: SensorKind) -> Self {
        let (noise_sigma, quantization, sample_period) = match kind {
            SensorKind::Sht75Temp => (0.01, 0.01, 1.0),
            SensorKind::Sht75Rh => (0.1, 0.03, 1.0),
            SensorKind::Srf05 => (0.1, 0.1, 30.0),
            SensorKind::YfS201 => (0.0, 1.0, 10.0),
            SensorKind::Gy302 => (5.0, 1.0, 10.0),
            SensorKind::Tcs3200 => (1.0, 1.0, 10.0),
        };
        Self { noise_sigma, quantization, sample_period }
    }
}

/// Three SHT75 pairs, one GY-302, one TCS3200, a flow meter per box and a
/// level sensor per tank.
pub fn default_sensor_specs(cfg: &SimConfig) -> Vec<SensorSpec> {
    let make = |id: String, kind: SensorKind, target: SensorTarget, range: [f64; 2]| {
        let d = SensorDefaults::for_kind(kind);
        SensorSpec {
            id,
            kind,
            target,
            noise_sigma: d.noise_sigma,
            quantization: d.quantization,
            range,
            sample_period: d.sample_period,
        }
    };
    let mut specs = Vec::new();
    for z in 0..3 {
        specs.push(make(format!("sht75-{z}-t"), SensorKind::Sht75Temp, SensorTarget::Zone(z), [-40.0, 123.8]));
        specs.push(make(format!("sht75-{z}-rh"), SensorKind::Sht75Rh, SensorTarget::Zone(z), [0.0, 100.0]));
    }
    specs.push(make("gy302-0".into(), SensorKind::Gy302, SensorTarget::Zone(0), [0.0, 65_535.0]));
    specs.push(make("tcs3200-0".into(), SensorKind::Tcs3200, SensorTarget::Zone(0), [0.0, 255.0]));
    for b in 0..cfg.n_boxes {
        specs.push(make(format!("yfs201-{b}"), SensorKind::YfS201, SensorTarget::Box(b), [0.0, 1.0e6]));
    }
    for t in 0..cfg.n_tanks {
        let depth = cfg.tank_height * 100.0;
        specs.push(make(format!("srf05-{t}"), SensorKind::Srf05, SensorTarget::Tank(t), [0.0, depth]));
    }
    specs
}

/// Round to the nearest multiple of `step`; `step == 0` disables quantization.
pub fn quantize(x: f64, step: f64) -> f64 {
    if step == 0.0 {
        return x;
    }
    let n = (x / step).round();
    let inv = 1.0 / step;
    if (inv - inv.round()).abs() < 1e-9 {
        n / inv.round()
    } else {
        n * step
    }
}

/// Distance in cm from a top-mounted SRF05 to the water surface.
pub fn srf05_distance(volume: f64, cfg: &SimConfig) -> f64 {
    (cfg.tank_height - volume / (1000.0 * cfg.tank_cross_section)) * 100.0
}

/// Inverse of [`srf05_distance`].
pub fn volume_from_distance(distance: f64, cfg: &SimConfig) -> Result<f64, SensorError> {
    let depth = cfg.tank_height * 100.0;
    if !(0.0..=depth).contains(&distance) {
        return Err(SensorError::OutOfRange(distance));
    }
    Ok((cfg.tank_height - distance / 100.0) * 1000.0 * cfg.tank_cross_section)
}

/// Pulses a YF-S201 emits for `flow` L/min sustained over `dt` seconds.
pub fn yfs201_pulses(flow: f64, dt: f64) -> u64 {
    pulses_for_litres(flow * dt / 60.0)
}

pub fn pulses_for_litres(litres: f64) -> u64 {
    (YF_S201_PULSES_PER_L * litres.max(0.0)).round() as u64
}

/// Mean flow in L/min that produced `count` pulses over a `dt` second window.
pub fn flow_from_pulses(count: u64, dt: f64) -> f64 {
    count as f64 / (YF_S201_PULSES_PER_L * dt / 60.0)
}

/// A sensor instance with its private noise stream and sequence counter.
#[derive(Debug, Clone)]
pub struct Sensor {
    pub spec: SensorSpec,
    rng: ChaCha8Rng,
    noise: Option<Normal<f64>>,
    next_seq: u64,
    /// Cumulative dispensed litres at the previous flow-meter sample.
    last_dispensed: f64,
}

impl Sensor {
    pub fn new(spec: SensorSpec, master_seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
        rng.set_stream(stream);
        let noise = (spec.noise_sigma > 0.0)
            .then(|| Normal::new(0.0, spec.noise_sigma).expect("validated sigma"));
        Self { spec, rng, noise, next_seq: 0, last_dispensed: 0.0 }
    }

    /// Build and validate the whole sensor set; binding errors surface here.
    pub fn build_all(specs: Vec<SensorSpec>, cfg: &SimConfig) -> Result<Vec<Sensor>, SensorError> {
        let mut seen = std::collections::HashSet::new();
        specs
            .into_iter()
            .enumerate()
            .map(|(i, spec)| {
                spec.validate(cfg)?;
                if !seen.insert(spec.id.clone()) {
                    return Err(SensorError::Spec { id: spec.id, reason: "duplicate id".into() });
                }
                Ok(Sensor::new(spec, cfg.seed, i as u64))
            })
            .collect()
    }

    pub fn due(&self, sim_ms: u64) -> bool {
        sim_ms % self.spec.sample_period_ms() == 0
    }

    pub fn sample(&mut self, state: &GreenhouseState, cfg: &SimConfig) -> SensorReading {
        let spec = &self.spec;
        let value = match spec.kind {
            SensorKind::Tcs3200 => {
                let scale = if state.actuators.led { 255.0 } else { 0.0 };
                let mut rgb = [0.0; 3];
                for (c, band) in rgb.iter_mut().zip(cfg.led_spectrum) {
                    *c = self.observe(band * scale);
                }
                ReadingValue::Rgb(rgb)
            }
            SensorKind::YfS201 => {
                let SensorTarget::Box(b) = spec.target else { unreachable!("validated binding") };
                let litres = state.box_dispensed[b] - self.last_dispensed;
                self.last_dispensed = state.box_dispensed[b];
                ReadingValue::Scalar(self.observe(pulses_for_litres(litres) as f64))
            }
            _ => {
                let truth = true_value(spec, state, cfg);
                ReadingValue::Scalar(self.observe(truth))
            }
        };
        let reading = SensorReading {
            sensor_id: self.spec.id.clone(),
            kind: self.spec.kind,
            value,
            unit: self.spec.kind.unit().to_string(),
            sim_time: state.sim_time(),
            seq: self.next_seq,
        };
        self.next_seq += 1;
        reading
    }

    fn observe(&mut self, truth: f64) -> f64 {
        let noisy = match &self.noise {
            Some(n) => truth + n.sample(&mut self.rng),
            None => truth,
        };
        quantize(noisy, self.spec.quantization).clamp(self.spec.range[0], self.spec.range[1])
    }
}

fn true_value(spec: &SensorSpec, state: &GreenhouseState, cfg: &SimConfig) -> f64 {
    match (spec.kind, spec.target) {
        (SensorKind::Sht75Temp, _) => state.air_temp,
        (SensorKind::Sht75Rh, _) => state.rel_humidity,
        (SensorKind::Gy302, _) => state.lux,
        (SensorKind::Srf05, SensorTarget::Tank(k)) => srf05_distance(state.tank_volume[k], cfg),
        _ => unreachable!("handled by the caller or rejected at validation"),
    }
}
