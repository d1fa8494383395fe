//! Append-only run log: one canonical JSON record per line, one file per
//! simulated day (`ghlog-<day>.ndjson`), a single global sequence number.
//!
//! ```text
//! {"t":"log","seq":0,"ts":0,"kind":"reading","body":{"topic":"gh/zone0/temp",...}}
//! ```

use std::collections::{BTreeMap, VecDeque};
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::LogError;
use crate::telemetry::{serialize_number, Broker, FrameSink, TelemetryFrame};

pub const SECONDS_PER_DAY: f64 = 86_400.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LogKind {
    Reading,
    Actuation,
    Alert,
    Command,
    Energy,
    Event,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergySnapshot {
    #[serde(serialize_with = "serialize_number")]
    pub total: f64,
    #[serde(serialize_with = "serialize_number_map")]
    pub by_device: BTreeMap<String, f64>,
}

fn serialize_number_map<S: serde::Serializer>(map: &BTreeMap<String, f64>, s: S) -> Result<S::Ok, S::Error> {
    use serde::ser::SerializeMap;
    struct Num(f64);
    impl Serialize for Num {
        fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
            serialize_number(&self.0, s)
        }
    }
    let mut m = s.serialize_map(Some(map.len()))?;
    for (k, v) in map {
        m.serialize_entry(k, &Num(*v))?;
    }
    m.end()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommandRecord {
    pub id: String,
    pub kind: String,
    pub payload: Value,
    pub ok: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum LogBody {
    Frame(TelemetryFrame),
    Energy(EnergySnapshot),
    Command(CommandRecord),
    Event(Value),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogRecord {
    pub seq: u64,
    pub sim_time: f64,
    pub kind: LogKind,
    pub body: LogBody,
}

#[derive(Serialize)]
struct LineOut<'a> {
    t: &'static str,
    seq: u64,
    #[serde(serialize_with = "serialize_number")]
    ts: f64,
    kind: LogKind,
    body: &'a LogBody,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LineIn {
    t: String,
    seq: u64,
    ts: f64,
    kind: LogKind,
    body: Value,
}

impl LogRecord {
    pub fn to_line(&self) -> String {
        let line = LineOut { t: "log", seq: self.seq, ts: self.sim_time, kind: self.kind, body: &self.body };
        serde_json::to_string(&line).expect("log records always serialize")
    }

    pub fn parse_line(line: &str) -> Result<Self, String> {
        let raw: LineIn = serde_json::from_str(line).map_err(|e| e.to_string())?;
        if raw.t != "log" {
            return Err(format!("expected a log record, got t={:?}", raw.t));
        }
        let body = if raw.body.get("topic").is_some() {
            LogBody::Frame(serde_json::from_value(raw.body).map_err(|e| e.to_string())?)
        } else {
            match raw.kind {
                LogKind::Energy => LogBody::Energy(serde_json::from_value(raw.body).map_err(|e| e.to_string())?),
                LogKind::Command => LogBody::Command(serde_json::from_value(raw.body).map_err(|e| e.to_string())?),
                _ => LogBody::Event(raw.body),
            }
        };
        Ok(Self { seq: raw.seq, sim_time: raw.ts, kind: raw.kind, body })
    }

    pub fn frame(&self) -> Option<&TelemetryFrame> {
        match &self.body {
            LogBody::Frame(f) => Some(f),
            _ => None,
        }
    }
}

/// Log kind for a published frame, by topic.
pub fn kind_for_topic(topic: &str) -> LogKind {
    let mut parts = topic.split('/').skip(1);
    let subject = parts.next().unwrap_or_default();
    let quantity = parts.next().unwrap_or_default();
    match (subject, quantity) {
        ("alert", _) => LogKind::Alert,
        ("config", _) => LogKind::Event,
        (_, "pumps" | "return" | "heater" | "fan" | "humidifier" | "led" | "uv") => LogKind::Actuation,
        (_, "energy") => LogKind::Energy,
        _ => LogKind::Reading,
    }
}

pub fn day_file_name(day: u64) -> String {
    format!("ghlog-{day}.ndjson")
}

fn day_of(sim_time: f64) -> u64 {
    (sim_time / SECONDS_PER_DAY).floor().max(0.0) as u64
}

/// The single writer of a run's log directory.
#[derive(Debug)]
pub struct DataLog {
    dir: PathBuf,
    next_seq: u64,
    day: Option<u64>,
    writer: Option<BufWriter<File>>,
}

impl DataLog {
    /// Start a fresh log in `dir`, removing day files left by an earlier run.
    pub fn create(dir: &Path) -> Result<Self, LogError> {
        fs::create_dir_all(dir)?;
        for path in log_files(dir)? {
            fs::remove_file(path)?;
        }
        Ok(Self { dir: dir.to_path_buf(), next_seq: 0, day: None, writer: None })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn next_seq(&self) -> u64 {
        self.next_seq
    }

    pub fn append(&mut self, sim_time: f64, kind: LogKind, body: LogBody) -> Result<u64, LogError> {
        let day = day_of(sim_time);
        if self.day != Some(day) {
            if let Some(mut w) = self.writer.take() {
                w.flush()?;
            }
            let file = fs::OpenOptions::new().create(true).append(true).open(self.dir.join(day_file_name(day)))?;
            self.writer = Some(BufWriter::with_capacity(1 << 16, file));
            self.day = Some(day);
        }
        let seq = self.next_seq;
        let record = LogRecord { seq, sim_time, kind, body };
        let w = self.writer.as_mut().expect("writer opened above");
        let mut line = record.to_line();
        line.push('\n');
        w.write_all(line.as_bytes())?;
        self.next_seq += 1;
        Ok(seq)
    }

    pub fn flush(&mut self) -> Result<(), LogError> {
        if let Some(w) = self.writer.as_mut() {
            w.flush()?;
            w.get_ref().sync_data()?;
        }
        Ok(())
    }

    pub fn close(mut self) -> Result<(), LogError> {
        self.flush()
    }
}

impl Drop for DataLog {
    fn drop(&mut self) {
        if let Some(w) = self.writer.as_mut() {
            let _ = w.flush();
        }
    }
}

/// A [`DataLog`] shared between the broker (frames) and the run loop (the rest).
#[derive(Debug, Clone)]
pub struct SharedLog(pub Arc<Mutex<DataLog>>);

impl SharedLog {
    pub fn new(log: DataLog) -> Self {
        Self(Arc::new(Mutex::new(log)))
    }

    pub fn append(&self, sim_time: f64, kind: LogKind, body: LogBody) -> Result<u64, LogError> {
        self.0.lock().unwrap_or_else(|p| p.into_inner()).append(sim_time, kind, body)
    }

    pub fn flush(&self) -> Result<(), LogError> {
        self.0.lock().unwrap_or_else(|p| p.into_inner()).flush()
    }
}

impl FrameSink for SharedLog {
    fn record(&mut self, frame: &TelemetryFrame) -> Result<(), LogError> {
        self.append(frame.sim_time, kind_for_topic(&frame.topic), LogBody::Frame(frame.clone())).map(|_| ())
    }
}

/// Day files in `dir`, ordered by day number.
pub fn log_files(dir: &Path) -> Result<Vec<PathBuf>, LogError> {
    let mut days = Vec::new();
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        let day = path
            .file_name()
            .and_then(|n| n.to_str())
            .and_then(|n| n.strip_prefix("ghlog-"))
            .and_then(|n| n.strip_suffix(".ndjson"))
            .and_then(|n| n.parse::<u64>().ok());
        if let Some(day) = day {
            days.push((day, path));
        }
    }
    days.sort();
    Ok(days.into_iter().map(|(_, p)| p).collect())
}

/// Streaming reader over a log file or a directory of day files.
#[derive(Debug)]
pub struct LogReader {
    pending: VecDeque<PathBuf>,
    current: Option<(String, BufReader<File>, usize)>,
    last_seq: Option<u64>,
    /// Set when a trailing partial record was dropped.
    pub truncated_tail: bool,
    failed: bool,
}

/// Open a log for replay. `path` may be a day file or a log directory.
pub fn replay(path: &Path) -> Result<LogReader, LogError> {
    let files = if path.is_dir() { log_files(path)? } else { vec![path.to_path_buf()] };
    Ok(LogReader { pending: files.into(), current: None, last_seq: None, truncated_tail: false, failed: false })
}

/// Replay a whole log into memory.
pub fn read_all(path: &Path) -> Result<Vec<LogRecord>, LogError> {
    replay(path)?.collect()
}

impl LogReader {
    fn corrupt(&mut self, file: &str, line: usize, reason: String) -> LogError {
        self.failed = true;
        LogError::Corrupt { file: file.to_string(), line, last_good: self.last_seq, reason }
    }
}

impl Iterator for LogReader {
    type Item = Result<LogRecord, LogError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        loop {
            if self.current.is_none() {
                let path = self.pending.pop_front()?;
                match File::open(&path) {
                    Ok(f) => self.current = Some((path.display().to_string(), BufReader::new(f), 0)),
                    Err(e) => {
                        self.failed = true;
                        return Some(Err(e.into()));
                    }
                }
            }
            let (name, reader, line_no) = self.current.as_mut().expect("opened above");
            let mut buf = String::new();
            match reader.read_line(&mut buf) {
                Ok(0) => {
                    self.current = None;
                    continue;
                }
                Ok(_) => {}
                Err(e) => {
                    self.failed = true;
                    return Some(Err(e.into()));
                }
            }
            *line_no += 1;
            let (name, line_no) = (name.clone(), *line_no);
            let complete = buf.ends_with('\n');
            let text = buf.trim_end_matches(['\n', '\r']);
            if text.is_empty() && complete {
                continue;
            }
            let record = match LogRecord::parse_line(text) {
                Ok(r) => r,
                Err(_) if !complete => {
                    log::warn!("{name}: dropping partial final record at line {line_no}");
                    self.truncated_tail = true;
                    self.current = None;
                    continue;
                }
                Err(reason) => return Some(Err(self.corrupt(&name, line_no, reason))),
            };
            let expected = self.last_seq.map_or(0, |s| s + 1);
            if record.seq != expected {
                self.failed = true;
                return Some(Err(LogError::Gap { expected, found: record.seq }));
            }
            self.last_seq = Some(record.seq);
            return Some(Ok(record));
        }
    }
}

/// Re-publish every logged frame, in log order.
pub fn replay_into_broker<I>(records: I, broker: &Broker) -> Result<usize, crate::error::TelemetryError>
where
    I: IntoIterator<Item = LogRecord>,
{
    let mut n = 0;
    for record in records {
        if let LogBody::Frame(frame) = record.body {
            broker.publish(frame)?;
            n += 1;
        }
    }
    Ok(n)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyReport {
    pub from: f64,
    pub to: f64,
    /// kWh per device over `[from, to]`.
    pub by_device: BTreeMap<String, f64>,
    /// Sum of `by_device`.
    pub total: f64,
    /// The requested range reached outside the logged snapshots.
    pub clamped: bool,
}

/// Energy per device between two instants, interpolating linearly between
/// the bracketing snapshots.
pub fn energy_report<'a, I>(records: I, from: f64, to: f64) -> Option<EnergyReport>
where
    I: IntoIterator<Item = &'a LogRecord>,
{
    assert!(from <= to, "energy_report needs from <= to");
    let snaps: Vec<(f64, &EnergySnapshot)> = records
        .into_iter()
        .filter_map(|r| match &r.body {
            LogBody::Energy(s) => Some((r.sim_time, s)),
            _ => None,
        })
        .collect();
    let (first, last) = (snaps.first()?.0, snaps.last()?.0);
    let lo = from.clamp(first, last);
    let hi = to.clamp(first, last);
    let clamped = lo != from || hi != to;
    if clamped {
        log::info!("energy range [{from}, {to}] clamped to log extent [{first}, {last}]");
    }
    let devices: Vec<&String> = snaps.last()?.1.by_device.keys().collect();
    let mut by_device = BTreeMap::new();
    for device in devices {
        let value = |x: f64| interpolate(&snaps, device, x);
        by_device.insert(device.clone(), value(hi) - value(lo));
    }
    let total = by_device.values().sum();
    Some(EnergyReport { from: lo, to: hi, by_device, total, clamped })
}

fn interpolate(snaps: &[(f64, &EnergySnapshot)], device: &str, x: f64) -> f64 {
    let at = |i: usize| snaps[i].1.by_device.get(device).copied().unwrap_or(0.0);
    // first snapshot with time >= x
    let i = snaps.partition_point(|(t, _)| *t < x);
    if i == 0 {
        return at(0);
    }
    if i == snaps.len() {
        return at(snaps.len() - 1);
    }
    let (t0, t1) = (snaps[i - 1].0, snaps[i].0);
    if snaps[i].0 == x || t1 == t0 {
        return at(i);
    }
    let (v0, v1) = (at(i - 1), at(i));
    v0 + (v1 - v0) * (x - t0) / (t1 - t0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::telemetry::FrameValue;

    fn frame(t: f64) -> LogBody {
        LogBody::Frame(TelemetryFrame::new("gh/zone0/temp", t, "w", FrameValue::Number(t), "°C"))
    }

    #[test]
    fn sequence_numbers_start_at_zero() {
        let dir = tempfile::tempdir().unwrap();
        let mut log = DataLog::create(dir.path()).unwrap();
        let seqs: Vec<u64> = (0..5).map(|i| log.append(i as f64, LogKind::Reading, frame(i as f64)).unwrap()).collect();
        assert_eq!(seqs, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn reopen_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let mut log = DataLog::create(dir.path()).unwrap();
        log.append(1.0, LogKind::Reading, frame(1.0)).unwrap();
        log.append(2.0, LogKind::Event, LogBody::Event(serde_json::json!({"event": "x", "n": 1}))).unwrap();
        log.close().unwrap();
        let text = fs::read_to_string(dir.path().join("ghlog-0.ndjson")).unwrap();
        let records = read_all(dir.path()).unwrap();
        let again: String = records.iter().map(|r| r.to_line() + "\n").collect();
        assert_eq!(again, text);
        assert_eq!(records[1].body, LogBody::Event(serde_json::json!({"event": "x", "n": 1})));
    }

    #[test]
    fn rotates_per_simulated_day() {
        let dir = tempfile::tempdir().unwrap();
        let mut log = DataLog::create(dir.path()).unwrap();
        for t in [0.0, 86_399.0, 86_400.0, 200_000.0] {
            log.append(t, LogKind::Reading, frame(t)).unwrap();
        }
        log.close().unwrap();
        let names: Vec<String> =
            log_files(dir.path()).unwrap().iter().map(|p| p.file_name().unwrap().to_string_lossy().into()).collect();
        assert_eq!(names, vec!["ghlog-0.ndjson", "ghlog-1.ndjson", "ghlog-2.ndjson"]);
        let seqs: Vec<u64> = read_all(dir.path()).unwrap().iter().map(|r| r.seq).collect();
        assert_eq!(seqs, vec![0, 1, 2, 3]);
    }

    #[test]
    fn empty_log_replays_nothing() {
        let dir = tempfile::tempdir().unwrap();
        assert!(read_all(dir.path()).unwrap().is_empty());
        let file = dir.path().join("ghlog-0.ndjson");
        fs::write(&file, "").unwrap();
        assert!(read_all(&file).unwrap().is_empty());
    }

    #[test]
    fn truncated_tail_is_dropped() {
        let dir = tempfile::tempdir().unwrap();
        let mut log = DataLog::create(dir.path()).unwrap();
        for i in 0..4 {
            log.append(i as f64, LogKind::Reading, frame(i as f64)).unwrap();
        }
        log.close().unwrap();
        let file = dir.path().join("ghlog-0.ndjson");
        let bytes = fs::read(&file).unwrap();
        fs::write(&file, &bytes[..bytes.len() - 20]).unwrap();
        let mut reader = replay(dir.path()).unwrap();
        let got: Vec<LogRecord> = reader.by_ref().collect::<Result<_, _>>().unwrap();
        assert_eq!(got.len(), 3);
        assert!(reader.truncated_tail);
    }

    #[test]
    fn corruption_reports_last_good_seq() {
        let dir = tempfile::tempdir().unwrap();
        let mut log = DataLog::create(dir.path()).unwrap();
        for i in 0..3 {
            log.append(i as f64, LogKind::Reading, frame(i as f64)).unwrap();
        }
        log.close().unwrap();
        let file = dir.path().join("ghlog-0.ndjson");
        let text = fs::read_to_string(&file).unwrap();
        let mut lines: Vec<&str> = text.lines().collect();
        lines[1] = "{garbage";
        fs::write(&file, lines.join("\n") + "\n").unwrap();
        match read_all(dir.path()) {
            Err(LogError::Corrupt { line: 2, last_good: Some(0), .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    fn snapshot(t: f64, pump: f64, heater: f64) -> LogRecord {
        let by_device: BTreeMap<String, f64> = [("heater".to_string(), heater), ("pump".to_string(), pump)].into();
        LogRecord {
            seq: 0,
            sim_time: t,
            kind: LogKind::Energy,
            body: LogBody::Energy(EnergySnapshot { total: pump + heater, by_device }),
        }
    }

    #[test]
    fn energy_report_interpolates() {
        let recs = vec![snapshot(0.0, 0.0, 0.0), snapshot(3600.0, 0.25, 1.0), snapshot(7200.0, 0.5, 1.0)];
        let r = energy_report(&recs, 0.0, 7200.0).unwrap();
        assert_eq!(r.by_device["pump"], 0.5);
        assert_eq!(r.total, 1.5);
        let r = energy_report(&recs, 1800.0, 1800.0).unwrap();
        assert!(r.by_device.values().all(|v| *v == 0.0));
        let r = energy_report(&recs, 1800.0, 5400.0).unwrap();
        assert!((r.by_device["pump"] - 0.25).abs() < 1e-15);
        assert!((r.by_device["heater"] - 0.5).abs() < 1e-15);
        let r = energy_report(&recs, -100.0, 1e9).unwrap();
        assert!(r.clamped);
        assert_eq!((r.from, r.to), (0.0, 7200.0));
    }

    #[test]
    fn kinds_by_topic() {
        assert_eq!(kind_for_topic("gh/zone0/temp"), LogKind::Reading);
        assert_eq!(kind_for_topic("gh/box3/pumps"), LogKind::Actuation);
        assert_eq!(kind_for_topic("gh/alert/tank_low"), LogKind::Alert);
        assert_eq!(kind_for_topic("gh/config/schedule"), LogKind::Event);
        assert_eq!(kind_for_topic("gh/zone0/energy"), LogKind::Energy);
    }
}
