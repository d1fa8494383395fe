//! Aeroponic greenhouse digital twin: plant simulator, virtual sensors,
//! closed-loop controller, topic broker and append-only data log.

pub mod config;
pub mod controller;
pub mod datalog;
pub mod error;
pub mod runtime;
pub mod sensors;
pub mod simcore;
pub mod telemetry;

pub use config::SimConfig;
pub use error::{ConfigError, ControlError, LogError, RuntimeError, SensorError, SimError, TelemetryError};
