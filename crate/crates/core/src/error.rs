use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("config io: {0}")]
    Io(String),
    #[error("config parse: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("unknown tank {0}")]
    UnknownTank(usize),
    #[error("recharge volume must be > 0, got {0}")]
    BadVolume(f64),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SensorError {
    #[error("sensor {id}: {reason}")]
    Binding { id: String, reason: String },
    #[error("sensor {id}: invalid spec: {reason}")]
    Spec { id: String, reason: String },
    #[error("level reading {0} cm is outside the tank")]
    OutOfRange(f64),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ControlError {
    #[error("no fresh {0} readings")]
    StaleData(&'static str),
    #[error("invalid command: {0}")]
    InvalidCommand(String),
    #[error("unknown alert {0}")]
    UnknownAlert(String),
    #[error(transparent)]
    Sim(#[from] SimError),
}

#[derive(Debug, Error)]
pub enum TelemetryError {
    #[error("malformed topic {0:?}")]
    BadTopic(String),
    #[error("malformed pattern {0:?}")]
    BadPattern(String),
    #[error("malformed record: {0}")]
    BadRecord(String),
    #[error("data log: {0}")]
    Log(#[from] LogError),
}

#[derive(Debug, Error)]
pub enum LogError {
    #[error("log io: {0}")]
    Io(#[from] std::io::Error),
    #[error("corrupt log record at line {line} of {file} (last good seq {last_good:?}): {reason}")]
    Corrupt {
        file: String,
        line: usize,
        last_good: Option<u64>,
        reason: String,
    },
    #[error("sequence gap: expected {expected}, found {found}")]
    Gap { expected: u64, found: u64 },
}

/// Anything that stops a closed-loop run. Setup problems are validation
/// errors; the rest are faults during the run.
#[derive(Debug, Error)]
pub enum RuntimeError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Control(#[from] ControlError),
    #[error(transparent)]
    Sensor(#[from] SensorError),
    #[error(transparent)]
    Telemetry(#[from] TelemetryError),
    #[error(transparent)]
    Log(#[from] LogError),
}

impl RuntimeError {
    pub fn is_validation(&self) -> bool {
        matches!(self, RuntimeError::Config(_) | RuntimeError::Control(_) | RuntimeError::Sensor(_))
    }
}
