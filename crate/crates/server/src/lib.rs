//! Network faces of the greenhouse: a newline-delimited JSON protocol over
//! TCP for machine clients, and an HTTP API with a server-sent event stream
//! for the dashboard. Both sit on the same broker and command gateway.

pub mod http;
pub mod serve;
pub mod tcp;

use std::sync::Arc;

use aerogh_core::telemetry::{Broker, CommandGateway};

pub use serve::{serve, start, ServeError, ServeHandle, ServeOptions};

/// What every connection handler needs.
#[derive(Clone)]
pub struct Hub {
    pub broker: Arc<Broker>,
    pub gateway: CommandGateway,
}
