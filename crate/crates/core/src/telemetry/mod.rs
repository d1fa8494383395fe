//! Self-hosted telemetry: topic broker, wire records and the command channel.

mod broker;
mod gateway;
mod topic;
mod wire;

pub use broker::{Broker, BrokerConfig, Delivery, FrameSink, Subscription, DEFAULT_SUBSCRIBER_BUFFER};
pub use gateway::{command_channel, CommandEnvelope, CommandGateway, CommandInbox};
pub use topic::{valid_quantity, valid_subject, validate_topic, TopicPattern};
pub use wire::{serialize_number, FrameValue, TelemetryFrame, WallClock, WireRecord};

use crate::config::SimConfig;

/// Every topic a running greenhouse publishes at least once.
pub fn canonical_topics(cfg: &SimConfig) -> Vec<String> {
    let mut topics = Vec::new();
    for z in 0..3 {
        topics.push(format!("gh/zone{z}/temp"));
        topics.push(format!("gh/zone{z}/rh"));
    }
    for q in ["lux", "spectrum", "energy", "heater", "fan", "humidifier", "led", "uv"] {
        topics.push(format!("gh/zone0/{q}"));
    }
    for b in 0..cfg.n_boxes {
        for q in ["flow", "pulses", "pumps", "return"] {
            topics.push(format!("gh/box{b}/{q}"));
        }
    }
    for t in 0..cfg.n_tanks {
        topics.push(format!("gh/tank{t}/volume"));
        topics.push(format!("gh/tank{t}/level"));
    }
    topics.push("gh/config/setpoints".into());
    topics.push("gh/config/schedule".into());
    topics
}
