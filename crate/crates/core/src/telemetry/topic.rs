//! Topic grammar: `gh/<subject>/<quantity>`.
//!
//! `subject` is one of `zone<k>`, `box<k>`, `tank<k>`, `plant<k>`, `config`
//! or `alert`; `quantity` is a lowercase identifier. Patterns may replace any
//! segment with `*`, which matches exactly one segment.

use crate::error::TelemetryError;

fn valid_index(digits: &str) -> bool {
    !digits.is_empty()
        && digits.bytes().all(|b| b.is_ascii_digit())
        && (digits == "0" || !digits.starts_with('0'))
        && digits.len() <= 6
}

pub fn valid_subject(s: &str) -> bool {
    if s == "config" || s == "alert" {
        return true;
    }
    ["zone", "box", "tank", "plant"]
        .iter()
        .any(|prefix| s.strip_prefix(prefix).is_some_and(valid_index))
}

pub fn valid_quantity(s: &str) -> bool {
    let mut bytes = s.bytes();
    matches!(bytes.next(), Some(b'a'..=b'z'))
        && bytes.all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'_')
        && s.len() <= 32
}

pub fn validate_topic(topic: &str) -> Result<(), TelemetryError> {
    let mut parts = topic.split('/');
    let ok = parts.next() == Some("gh")
        && parts.next().is_some_and(valid_subject)
        && parts.next().is_some_and(valid_quantity)
        && parts.next().is_none();
    if ok {
        Ok(())
    } else {
        Err(TelemetryError::BadTopic(topic.to_string()))
    }
}

/// A validated subscription pattern.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TopicPattern {
    text: String,
    segments: [Option<String>; 3],
}

impl TopicPattern {
    pub fn parse(pattern: &str) -> Result<Self, TelemetryError> {
        let bad = || TelemetryError::BadPattern(pattern.to_string());
        let parts: Vec<&str> = pattern.split('/').collect();
        if parts.len() != 3 {
            return Err(bad());
        }
        let checks: [fn(&str) -> bool; 3] = [|s| s == "gh", valid_subject, valid_quantity];
        let mut segments: [Option<String>; 3] = Default::default();
        for (i, part) in parts.iter().enumerate() {
            if *part == "*" {
                continue;
            }
            if !checks[i](part) {
                return Err(bad());
            }
            segments[i] = Some(part.to_string());
        }
        Ok(Self { text: pattern.to_string(), segments })
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }

    /// Whether a (valid) topic matches.
    pub fn matches(&self, topic: &str) -> bool {
        let mut parts = topic.split('/');
        for seg in &self.segments {
            match (seg, parts.next()) {
                (_, None) => return false,
                (None, Some(_)) => {}
                (Some(lit), Some(p)) if lit == p => {}
                _ => return false,
            }
        }
        parts.next().is_none()
    }
}
