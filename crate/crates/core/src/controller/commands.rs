//! Operator commands and their acknowledgments.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::ControlError;

use super::climate::Setpoints;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SetpointsPayload {
    pub temp_set: f64,
    pub temp_deadband: f64,
    pub rh_set: f64,
    pub rh_deadband: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub photoperiod_on_hours: Option<f64>,
}

impl SetpointsPayload {
    pub fn apply_to(&self, current: &Setpoints) -> Setpoints {
        Setpoints {
            temp_set: self.temp_set,
            temp_deadband: self.temp_deadband,
            rh_set: self.rh_set,
            rh_deadband: self.rh_deadband,
            photoperiod_on_hours: self.photoperiod_on_hours.unwrap_or(current.photoperiod_on_hours),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchedulePayload {
    /// minutes
    pub on: f64,
    /// minutes
    pub off: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub enabled: Option<Vec<bool>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RechargePayload {
    pub tank: usize,
    /// L
    pub volume: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AckPayload {
    pub alert: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Command {
    SetSetpoints(SetpointsPayload),
    SetSchedule(SchedulePayload),
    RechargeTank(RechargePayload),
    AckAlert(AckPayload),
}

#[derive(Debug, Clone, PartialEq)]
pub struct OperatorCommand {
    pub id: String,
    pub command: Command,
}

pub const COMMAND_KINDS: [&str; 4] = ["set_setpoints", "set_schedule", "recharge_tank", "ack_alert"];

impl OperatorCommand {
    /// Validate a `(kind, payload, id)` triple against the schema of `kind`.
    pub fn parse(kind: &str, payload: &Value, id: &str) -> Result<Self, ControlError> {
        if id.is_empty() {
            return Err(ControlError::InvalidCommand("command id must not be empty".into()));
        }
        fn typed<T: serde::de::DeserializeOwned>(kind: &str, payload: &Value) -> Result<T, ControlError> {
            serde_json::from_value(payload.clone())
                .map_err(|e| ControlError::InvalidCommand(format!("{kind} payload: {e}")))
        }
        let command = match kind {
            "set_setpoints" => {
                let p: SetpointsPayload = typed(kind, payload)?;
                p.apply_to(&Setpoints::default()).validate()?;
                Command::SetSetpoints(p)
            }
            "set_schedule" => {
                let p: SchedulePayload = typed(kind, payload)?;
                if !(p.on.is_finite() && p.on > 0.0) || !(p.off.is_finite() && p.off >= 0.0) {
                    return Err(ControlError::InvalidCommand("schedule needs on > 0 and off >= 0".into()));
                }
                Command::SetSchedule(p)
            }
            "recharge_tank" => {
                let p: RechargePayload = typed(kind, payload)?;
                if !(p.volume.is_finite() && p.volume > 0.0) {
                    return Err(ControlError::InvalidCommand("recharge volume must be > 0".into()));
                }
                Command::RechargeTank(p)
            }
            "ack_alert" => Command::AckAlert(typed(kind, payload)?),
            other => return Err(ControlError::InvalidCommand(format!("unknown command kind {other:?}"))),
        };
        Ok(Self { id: id.to_string(), command })
    }

    pub fn kind(&self) -> &'static str {
        match self.command {
            Command::SetSetpoints(_) => "set_setpoints",
            Command::SetSchedule(_) => "set_schedule",
            Command::RechargeTank(_) => "recharge_tank",
            Command::AckAlert(_) => "ack_alert",
        }
    }

    pub fn payload(&self) -> Value {
        let v = match &self.command {
            Command::SetSetpoints(p) => serde_json::to_value(p),
            Command::SetSchedule(p) => serde_json::to_value(p),
            Command::RechargeTank(p) => serde_json::to_value(p),
            Command::AckAlert(p) => serde_json::to_value(p),
        };
        v.expect("payloads serialize")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AckStatus {
    Pending,
}

/// Answer to one command: `ok`, an error reason, or `pending` on timeout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommandAck {
    pub id: String,
    pub ok: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub status: Option<AckStatus>,
}

impl CommandAck {
    pub fn ok(id: &str) -> Self {
        Self { id: id.to_string(), ok: true, error: None, status: None }
    }

    pub fn error(id: &str, reason: impl Into<String>) -> Self {
        Self { id: id.to_string(), ok: false, error: Some(reason.into()), status: None }
    }

    pub fn pending(id: &str) -> Self {
        Self { id: id.to_string(), ok: false, error: None, status: Some(AckStatus::Pending) }
    }

    pub fn is_pending(&self) -> bool {
        self.status == Some(AckStatus::Pending)
    }
}
