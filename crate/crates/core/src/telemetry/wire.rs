//! Telemetry frames and the newline-delimited record syntax shared by the TCP
//! protocol, the HTTP facade and the data log.
//!
//! Serialization is canonical: fixed key order and integral numbers written
//! without a fractional part, so identical inputs give identical bytes.

use serde::de::{self, Deserializer};
use serde::ser::{SerializeSeq, Serializer};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::controller::CommandAck;
use crate::error::TelemetryError;

use super::topic::validate_topic;

/// Write `x` as an integer when it is one, otherwise as the shortest float.
pub fn serialize_number<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
    if x.is_finite() && x.fract() == 0.0 && x.abs() < 9.0e15 {
        s.serialize_i64(*x as i64)
    } else {
        s.serialize_f64(*x)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FrameValue {
    Number(f64),
    Text(String),
    Rgb([f64; 3]),
}

impl FrameValue {
    pub fn as_number(&self) -> Option<f64> {
        match self {
            FrameValue::Number(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            FrameValue::Text(s) => Some(s),
            _ => None,
        }
    }
}

impl Serialize for FrameValue {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        struct Num(f64);
        impl Serialize for Num {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                serialize_number(&self.0, s)
            }
        }
        match self {
            FrameValue::Number(v) => serialize_number(v, s),
            FrameValue::Text(t) => s.serialize_str(t),
            FrameValue::Rgb(rgb) => {
                let mut seq = s.serialize_seq(Some(3))?;
                for c in rgb {
                    seq.serialize_element(&Num(*c))?;
                }
                seq.end()
            }
        }
    }
}

impl<'de> Deserialize<'de> for FrameValue {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        match Value::deserialize(d)? {
            Value::Number(n) => n.as_f64().map(FrameValue::Number).ok_or_else(|| de::Error::custom("bad number")),
            Value::String(s) => Ok(FrameValue::Text(s)),
            Value::Array(items) if items.len() == 3 => {
                let mut rgb = [0.0; 3];
                for (slot, item) in rgb.iter_mut().zip(&items) {
                    *slot = item.as_f64().ok_or_else(|| de::Error::custom("rgb components must be numbers"))?;
                }
                Ok(FrameValue::Rgb(rgb))
            }
            other => Err(de::Error::custom(format!("unsupported frame value {other}"))),
        }
    }
}

/// One published telemetry value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TelemetryFrame {
    pub topic: String,
    #[serde(rename = "ts", serialize_with = "serialize_number")]
    pub sim_time: f64,
    #[serde(rename = "wall")]
    pub wall_time: String,
    #[serde(rename = "v")]
    pub value: FrameValue,
    #[serde(rename = "u")]
    pub unit: String,
}

impl TelemetryFrame {
    pub fn new(topic: impl Into<String>, sim_time: f64, wall_time: impl Into<String>, value: FrameValue, unit: &str) -> Self {
        Self { topic: topic.into(), sim_time, wall_time: wall_time.into(), value, unit: unit.to_string() }
    }

    pub fn validate(&self) -> Result<(), TelemetryError> {
        validate_topic(&self.topic)?;
        if !self.sim_time.is_finite() || self.sim_time < 0.0 {
            return Err(TelemetryError::BadRecord(format!("bad sim_time {}", self.sim_time)));
        }
        Ok(())
    }
}

/// Every record that travels over a connection, one JSON object per line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "t", rename_all = "lowercase")]
pub enum WireRecord {
    Pub(TelemetryFrame),
    Sub { pattern: String },
    Cmd { kind: String, payload: Value, id: String },
    Ack(CommandAck),
    Overflow { pattern: String },
    Err { reason: String },
}

impl WireRecord {
    pub fn parse_line(line: &str) -> Result<Self, TelemetryError> {
        serde_json::from_str(line.trim_end_matches(['\r', '\n'])).map_err(|e| TelemetryError::BadRecord(e.to_string()))
    }

    /// Canonical single-line encoding, without the trailing newline.
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("wire records always serialize")
    }
}

/// Simulated seconds mapped onto the configured wall-clock epoch.
#[derive(Debug, Clone)]
pub struct WallClock {
    epoch: chrono::DateTime<chrono::Utc>,
}

impl WallClock {
    pub fn new(epoch_rfc3339: &str) -> Result<Self, chrono::ParseError> {
        let epoch = chrono::DateTime::parse_from_rfc3339(epoch_rfc3339)?.with_timezone(&chrono::Utc);
        Ok(Self { epoch })
    }

    pub fn format(&self, sim_time: f64) -> String {
        let ms = (sim_time * 1000.0).round() as i64;
        let at = self.epoch + chrono::Duration::milliseconds(ms);
        if ms % 1000 == 0 {
            at.format("%Y-%m-%dT%H:%M:%SZ").to_string()
        } else {
            at.format("%Y-%m-%dT%H:%M:%S%.3fZ").to_string()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_are_canonical() {
        let f = TelemetryFrame::new("gh/tank0/volume", 3600.0, "w", FrameValue::Number(187.5), "L");
        assert_eq!(
            WireRecord::Pub(f).to_line(),
            r#"{"t":"pub","topic":"gh/tank0/volume","ts":3600,"wall":"w","v":187.5,"u":"L"}"#
        );
        let f = TelemetryFrame::new("gh/zone0/spectrum", 1.5, "w", FrameValue::Rgb([229.0, 89.0, 153.0]), "rgb");
        assert_eq!(
            WireRecord::Pub(f).to_line(),
            r#"{"t":"pub","topic":"gh/zone0/spectrum","ts":1.5,"wall":"w","v":[229,89,153],"u":"rgb"}"#
        );
    }

    #[test]
    fn parses_all_record_types() {
        let lines = [
            r#"{"t":"sub","pattern":"gh/*/temp"}"#,
            r#"{"t":"cmd","kind":"recharge_tank","payload":{"tank":0,"volume":50},"id":"c-17"}"#,
            r#"{"t":"ack","id":"c-17","ok":true}"#,
            r#"{"t":"overflow","pattern":"gh/*/*"}"#,
            r#"{"t":"err","reason":"nope"}"#,
        ];
        for line in lines {
            assert_eq!(WireRecord::parse_line(line).unwrap().to_line(), line);
        }
        assert!(WireRecord::parse_line(r#"{"t":"bogus"}"#).is_err());
        assert!(WireRecord::parse_line("not json").is_err());
    }

    #[test]
    fn wall_clock_formats_utc() {
        let clock = WallClock::new("2021-06-01T00:00:00Z").unwrap();
        assert_eq!(clock.format(0.0), "2021-06-01T00:00:00Z");
        assert_eq!(clock.format(3600.0), "2021-06-01T01:00:00Z");
        assert_eq!(clock.format(86_400.5), "2021-06-02T00:00:00.500Z");
    }
}
