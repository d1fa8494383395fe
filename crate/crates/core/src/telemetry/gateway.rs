//! Operator command path: many submitters, one consumer (the control tick).

use std::collections::HashMap;
use std::sync::mpsc::{self, Receiver, Sender};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde_json::Value;

use crate::controller::{CommandAck, OperatorCommand};

#[derive(Debug)]
pub struct CommandEnvelope {
    pub command: OperatorCommand,
    reply: Sender<CommandAck>,
    results: Arc<Mutex<HashMap<String, CommandAck>>>,
}

impl CommandEnvelope {
    /// Deliver the controller's answer to the waiting submitter (if still
    /// waiting) and to the status table.
    pub fn reply(self, ack: CommandAck) {
        self.results.lock().unwrap_or_else(|p| p.into_inner()).insert(ack.id.clone(), ack.clone());
        let _ = self.reply.send(ack);
    }
}

#[derive(Debug, Clone)]
pub struct CommandGateway {
    tx: Sender<CommandEnvelope>,
    timeout: Duration,
    results: Arc<Mutex<HashMap<String, CommandAck>>>,
}

#[derive(Debug)]
pub struct CommandInbox {
    rx: Receiver<CommandEnvelope>,
}

/// `timeout` bounds how long `submit` waits for the controller.
pub fn command_channel(timeout: Duration) -> (CommandGateway, CommandInbox) {
    let (tx, rx) = mpsc::channel();
    let results = Arc::new(Mutex::new(HashMap::new()));
    (CommandGateway { tx, timeout, results }, CommandInbox { rx })
}

impl CommandGateway {
    /// Validate and enqueue; waits for the controller's acknowledgment.
    /// Validation failures never reach the controller.
    pub fn submit(&self, kind: &str, payload: &Value, id: &str) -> CommandAck {
        match OperatorCommand::parse(kind, payload, id) {
            Ok(cmd) => self.submit_command(cmd),
            Err(e) => CommandAck::error(id, e.to_string()),
        }
    }

    pub fn submit_command(&self, command: OperatorCommand) -> CommandAck {
        let id = command.id.clone();
        let (reply_tx, reply_rx) = mpsc::channel();
        self.results.lock().unwrap_or_else(|p| p.into_inner()).insert(id.clone(), CommandAck::pending(&id));
        let envelope = CommandEnvelope { command, reply: reply_tx, results: self.results.clone() };
        if self.tx.send(envelope).is_err() {
            let ack = CommandAck::error(&id, "controller is not running");
            self.results.lock().unwrap_or_else(|p| p.into_inner()).insert(id, ack.clone());
            return ack;
        }
        reply_rx.recv_timeout(self.timeout).unwrap_or_else(|_| CommandAck::pending(&id))
    }

    /// Latest known answer for a command id.
    pub fn status(&self, id: &str) -> Option<CommandAck> {
        self.results.lock().unwrap_or_else(|p| p.into_inner()).get(id).cloned()
    }
}

impl CommandInbox {
    /// Everything queued so far, in arrival order.
    pub fn drain(&self) -> Vec<CommandEnvelope> {
        std::iter::from_fn(|| self.rx.try_recv().ok()).collect()
    }
}
