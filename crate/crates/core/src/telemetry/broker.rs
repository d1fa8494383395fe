//! Topic broker with retained last values, live fan-out and per-topic history.
//!
//! All publishes and subscribes pass through one mutex, which is the single
//! ordering point: a subscriber's retained snapshot and its live stream are
//! cut at the same instant, so nothing is missed or delivered twice.

use std::collections::{BTreeMap, HashMap};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, SyncSender, TryRecvError, TrySendError};
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::Duration;

use crate::error::{LogError, TelemetryError};

use super::topic::TopicPattern;
use super::wire::TelemetryFrame;

pub const DEFAULT_SUBSCRIBER_BUFFER: usize = 1024;

/// Where published frames are persisted, in publish order.
pub trait FrameSink: Send {
    fn record(&mut self, frame: &TelemetryFrame) -> Result<(), LogError>;
}

#[derive(Debug, Clone, Copy)]
pub struct BrokerConfig {
    pub subscriber_buffer: usize,
    /// Keep every frame in memory for `history` queries.
    pub keep_history: bool,
}

impl Default for BrokerConfig {
    fn default() -> Self {
        Self { subscriber_buffer: DEFAULT_SUBSCRIBER_BUFFER, keep_history: true }
    }
}

struct Subscriber {
    pattern: TopicPattern,
    tx: SyncSender<TelemetryFrame>,
    overflowed: Arc<AtomicBool>,
}

#[derive(Default)]
struct Inner {
    retained: BTreeMap<String, TelemetryFrame>,
    history: HashMap<String, Vec<TelemetryFrame>>,
    subscribers: Vec<Subscriber>,
    sink: Option<Box<dyn FrameSink>>,
}

pub struct Broker {
    cfg: BrokerConfig,
    inner: Mutex<Inner>,
    rejected: AtomicU64,
    published: AtomicU64,
}

impl std::fmt::Debug for Broker {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Broker")
            .field("published", &self.published_frames())
            .field("rejected", &self.rejected_frames())
            .finish()
    }
}

impl Default for Broker {
    fn default() -> Self {
        Self::new(BrokerConfig::default())
    }
}

impl Broker {
    pub fn new(cfg: BrokerConfig) -> Self {
        Self { cfg, inner: Mutex::new(Inner::default()), rejected: AtomicU64::new(0), published: AtomicU64::new(0) }
    }

    pub fn with_sink(cfg: BrokerConfig, sink: Box<dyn FrameSink>) -> Self {
        let broker = Self::new(cfg);
        broker.lock().sink = Some(sink);
        broker
    }

    fn lock(&self) -> MutexGuard<'_, Inner> {
        self.inner.lock().unwrap_or_else(|poisoned| poisoned.into_inner())
    }

    /// Replace the persistence sink, returning the previous one.
    pub fn set_sink(&self, sink: Option<Box<dyn FrameSink>>) -> Option<Box<dyn FrameSink>> {
        std::mem::replace(&mut self.lock().sink, sink)
    }

    /// Run `f` with the broker's ordering lock held, so records written by
    /// `f` cannot interleave with a concurrent publish.
    pub fn with_sink_locked<R>(&self, f: impl FnOnce(Option<&mut Box<dyn FrameSink>>) -> R) -> R {
        let mut inner = self.lock();
        f(inner.sink.as_mut())
    }

    pub fn publish(&self, frame: TelemetryFrame) -> Result<(), TelemetryError> {
        if let Err(e) = frame.validate() {
            self.rejected.fetch_add(1, Ordering::Relaxed);
            return Err(e);
        }
        let mut inner = self.lock();
        if let Some(sink) = inner.sink.as_mut() {
            sink.record(&frame)?;
        }
        match inner.retained.get(&frame.topic) {
            Some(old) if old.sim_time > frame.sim_time => {}
            _ => {
                inner.retained.insert(frame.topic.clone(), frame.clone());
            }
        }
        if self.cfg.keep_history {
            inner.history.entry(frame.topic.clone()).or_default().push(frame.clone());
        }
        inner.subscribers.retain(|sub| {
            if !sub.pattern.matches(&frame.topic) {
                return true;
            }
            match sub.tx.try_send(frame.clone()) {
                Ok(()) => true,
                Err(TrySendError::Full(_)) => {
                    sub.overflowed.store(true, Ordering::Release);
                    false
                }
                Err(TrySendError::Disconnected(_)) => false,
            }
        });
        self.published.fetch_add(1, Ordering::Relaxed);
        Ok(())
    }

    /// Subscribe to `pattern`: matching retained frames first, then live ones.
    pub fn subscribe(&self, pattern: &str) -> Result<Subscription, TelemetryError> {
        let pattern = TopicPattern::parse(pattern)?;
        let mut inner = self.lock();
        let snapshot: Vec<TelemetryFrame> =
            inner.retained.values().filter(|f| pattern.matches(&f.topic)).cloned().collect();
        let (tx, rx) = mpsc::sync_channel(self.cfg.subscriber_buffer.max(snapshot.len()).max(1));
        for frame in snapshot {
            tx.try_send(frame).expect("channel sized for the snapshot");
        }
        let overflowed = Arc::new(AtomicBool::new(false));
        inner.subscribers.push(Subscriber { pattern: pattern.clone(), tx, overflowed: overflowed.clone() });
        Ok(Subscription { pattern, rx, overflowed })
    }

    pub fn retained(&self) -> Vec<TelemetryFrame> {
        self.lock().retained.values().cloned().collect()
    }

    pub fn retained_value(&self, topic: &str) -> Option<TelemetryFrame> {
        self.lock().retained.get(topic).cloned()
    }

    /// Frames of `topic` with `from <= sim_time <= to`, ascending by sim_time.
    pub fn history(&self, topic: &str, from: f64, to: f64) -> Vec<TelemetryFrame> {
        let inner = self.lock();
        let mut frames: Vec<TelemetryFrame> = inner
            .history
            .get(topic)
            .map(|h| h.iter().filter(|f| f.sim_time >= from && f.sim_time <= to).cloned().collect())
            .unwrap_or_default();
        frames.sort_by(|a, b| a.sim_time.total_cmp(&b.sim_time));
        frames
    }

    pub fn subscriber_count(&self) -> usize {
        self.lock().subscribers.len()
    }

    pub fn rejected_frames(&self) -> u64 {
        self.rejected.load(Ordering::Relaxed)
    }

    pub fn published_frames(&self) -> u64 {
        self.published.load(Ordering::Relaxed)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Delivery {
    Frame(TelemetryFrame),
    /// The subscriber fell more than the buffer behind and was dropped.
    Overflow,
    /// The broker went away.
    Closed,
    /// Nothing arrived within the timeout.
    Idle,
}

/// A live frame stream. Dropping it unsubscribes.
#[derive(Debug)]
pub struct Subscription {
    pattern: TopicPattern,
    rx: Receiver<TelemetryFrame>,
    overflowed: Arc<AtomicBool>,
}

impl Subscription {
    pub fn pattern(&self) -> &str {
        self.pattern.as_str()
    }

    fn end(&self) -> Delivery {
        if self.overflowed.load(Ordering::Acquire) {
            Delivery::Overflow
        } else {
            Delivery::Closed
        }
    }

    pub fn recv(&self) -> Delivery {
        match self.rx.recv() {
            Ok(f) => Delivery::Frame(f),
            Err(_) => self.end(),
        }
    }

    pub fn recv_timeout(&self, timeout: Duration) -> Delivery {
        match self.rx.recv_timeout(timeout) {
            Ok(f) => Delivery::Frame(f),
            Err(RecvTimeoutError::Timeout) => Delivery::Idle,
            Err(RecvTimeoutError::Disconnected) => self.end(),
        }
    }

    pub fn try_recv(&self) -> Delivery {
        match self.rx.try_recv() {
            Ok(f) => Delivery::Frame(f),
            Err(TryRecvError::Empty) => Delivery::Idle,
            Err(TryRecvError::Disconnected) => self.end(),
        }
    }

    /// Everything currently buffered.
    pub fn drain(&self) -> Vec<TelemetryFrame> {
        std::iter::from_fn(|| self.rx.try_recv().ok()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::telemetry::wire::FrameValue;

    fn frame(topic: &str, t: f64, v: f64) -> TelemetryFrame {
        TelemetryFrame::new(topic, t, "w", FrameValue::Number(v), "x")
    }

    #[test]
    fn retained_last_value() {
        let b = Broker::default();
        b.publish(frame("gh/zone0/temp", 1.0, 24.0)).unwrap();
        assert_eq!(b.retained_value("gh/zone0/temp").unwrap().value, FrameValue::Number(24.0));
        b.publish(frame("gh/zone0/temp", 2.0, 25.0)).unwrap();
        b.publish(frame("gh/zone0/temp", 1.5, 99.0)).unwrap();
        assert_eq!(b.retained_value("gh/zone0/temp").unwrap().value, FrameValue::Number(25.0));
    }

    #[test]
    fn malformed_topic_counted() {
        let b = Broker::default();
        assert!(b.publish(frame("gh/zone0/Temp", 1.0, 1.0)).is_err());
        assert!(b.publish(frame("nope", 1.0, 1.0)).is_err());
        assert_eq!(b.rejected_frames(), 2);
        assert!(b.retained().is_empty());
    }

    #[test]
    fn wildcard_fan_out() {
        let b = Broker::default();
        let sub = b.subscribe("gh/*/temp").unwrap();
        b.publish(frame("gh/zone0/temp", 1.0, 24.0)).unwrap();
        b.publish(frame("gh/tank0/volume", 1.0, 100.0)).unwrap();
        let got = sub.drain();
        assert_eq!(got.len(), 1);
        assert_eq!(got[0].topic, "gh/zone0/temp");
        assert!(b.subscribe("gh/**").is_err());
    }

    #[test]
    fn snapshot_then_live() {
        let b = Broker::default();
        b.publish(frame("gh/zone0/temp", 1.0, 24.0)).unwrap();
        b.publish(frame("gh/zone1/temp", 1.0, 23.0)).unwrap();
        let sub = b.subscribe("gh/*/temp").unwrap();
        b.publish(frame("gh/zone0/temp", 2.0, 24.5)).unwrap();
        let got: Vec<f64> = sub.drain().iter().map(|f| f.value.as_number().unwrap()).collect();
        assert_eq!(got, vec![24.0, 23.0, 24.5]);
    }

    #[test]
    fn slow_subscriber_is_dropped() {
        let b = Broker::new(BrokerConfig { subscriber_buffer: 4, keep_history: false });
        let slow = b.subscribe("gh/*/*").unwrap();
        let fast = b.subscribe("gh/*/*").unwrap();
        for i in 0..10 {
            b.publish(frame("gh/zone0/temp", i as f64, 0.0)).unwrap();
            assert!(matches!(fast.try_recv(), Delivery::Frame(_)));
        }
        assert_eq!(slow.drain().len(), 4);
        assert_eq!(slow.try_recv(), Delivery::Overflow);
        assert_eq!(b.subscriber_count(), 1);
    }

    #[test]
    fn dropped_subscription_is_pruned() {
        let b = Broker::default();
        let sub = b.subscribe("gh/*/*").unwrap();
        drop(sub);
        b.publish(frame("gh/zone0/temp", 0.0, 0.0)).unwrap();
        assert_eq!(b.subscriber_count(), 0);
    }

    #[test]
    fn history_ranges() {
        let b = Broker::default();
        for t in 0..10 {
            b.publish(frame("gh/zone0/temp", t as f64 * 10.0, t as f64)).unwrap();
        }
        assert!(b.history("gh/zone0/temp", 5.0, 5.0).is_empty());
        assert_eq!(b.history("gh/zone0/temp", 0.0, 90.0).len(), 10);
        let mid: Vec<f64> = b.history("gh/zone0/temp", 15.0, 45.0).iter().map(|f| f.sim_time).collect();
        assert_eq!(mid, vec![20.0, 30.0, 40.0]);
        assert!(b.history("gh/zone9/temp", 0.0, 1e9).is_empty());
    }
}
