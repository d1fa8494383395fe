//! NDJSON over TCP. Clients send `pub`, `sub` and `cmd` records; the server
//! answers with `pub` frames for subscriptions, `ack` for commands and `err`
//! for anything it cannot use. One reader thread per connection, one
//! forwarding thread per subscription, all writing through a shared locked
//! writer so lines never interleave.

use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::Duration;

use aerogh_core::telemetry::{Delivery, Subscription, WireRecord};

use crate::Hub;

type Writer = Arc<Mutex<BufWriter<TcpStream>>>;

fn send(out: &Writer, rec: &WireRecord) -> io::Result<()> {
    let mut w = out.lock().unwrap_or_else(|p| p.into_inner());
    w.write_all(rec.to_line().as_bytes())?;
    w.write_all(b"\n")?;
    w.flush()
}

pub struct TcpServer {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    accept: Option<JoinHandle<()>>,
}

impl TcpServer {
    pub fn bind(addr: &str, hub: Hub) -> io::Result<Self> {
        let listener = TcpListener::bind(addr)?;
        let addr = listener.local_addr()?;
        let stop = Arc::new(AtomicBool::new(false));
        let flag = stop.clone();
        let accept = thread::Builder::new().name("tcp-accept".into()).spawn(move || {
            for conn in listener.incoming() {
                if flag.load(Ordering::Acquire) {
                    break;
                }
                match conn {
                    Ok(stream) => {
                        let hub = hub.clone();
                        let flag = flag.clone();
                        let _ = thread::Builder::new().name("tcp-conn".into()).spawn(move || {
                            let peer = stream.peer_addr().ok();
                            if let Err(e) = handle(stream, hub, flag) {
                                log::debug!("tcp client {peer:?}: {e}");
                            }
                        });
                    }
                    Err(e) => log::warn!("tcp accept: {e}"),
                }
            }
        })?;
        log::info!("tcp listening on {addr}");
        Ok(Self { addr, stop, accept: Some(accept) })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    /// Stop accepting. Open connections end when their clients hang up or
    /// their next read times out.
    pub fn shutdown(mut self) {
        self.stop.store(true, Ordering::Release);
        // wake the blocking accept
        let _ = TcpStream::connect(self.addr);
        if let Some(h) = self.accept.take() {
            let _ = h.join();
        }
    }
}

fn forward(sub: Subscription, out: Writer, stop: Arc<AtomicBool>) {
    loop {
        if stop.load(Ordering::Acquire) {
            return;
        }
        match sub.recv_timeout(Duration::from_millis(250)) {
            Delivery::Frame(f) => {
                if send(&out, &WireRecord::Pub(f)).is_err() {
                    return;
                }
            }
            Delivery::Idle => {}
            Delivery::Overflow => {
                let _ = send(&out, &WireRecord::Overflow { pattern: sub.pattern().to_string() });
                return;
            }
            Delivery::Closed => return,
        }
    }
}

fn handle(stream: TcpStream, hub: Hub, server_stop: Arc<AtomicBool>) -> io::Result<()> {
    stream.set_read_timeout(Some(Duration::from_millis(500)))?;
    let out: Writer = Arc::new(Mutex::new(BufWriter::new(stream.try_clone()?)));
    // forwarding threads stop with the connection
    let conn_stop = Arc::new(AtomicBool::new(false));
    let mut reader = BufReader::new(stream);
    let mut line = String::new();
    let result = loop {
        if server_stop.load(Ordering::Acquire) {
            break Ok(());
        }
        match reader.read_line(&mut line) {
            Ok(0) => break Ok(()),
            Ok(_) => {}
            Err(e) if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) => continue,
            Err(e) => break Err(e),
        }
        let text = std::mem::take(&mut line);
        if text.trim().is_empty() {
            continue;
        }
        let reply = match WireRecord::parse_line(&text) {
            Err(e) => Some(WireRecord::Err { reason: e.to_string() }),
            Ok(WireRecord::Pub(frame)) => hub.broker.publish(frame).err().map(|e| WireRecord::Err { reason: e.to_string() }),
            Ok(WireRecord::Sub { pattern }) => match hub.broker.subscribe(&pattern) {
                Ok(sub) => {
                    let (out, stop) = (out.clone(), conn_stop.clone());
                    thread::Builder::new().name("tcp-sub".into()).spawn(move || forward(sub, out, stop))?;
                    None
                }
                Err(e) => Some(WireRecord::Err { reason: e.to_string() }),
            },
            Ok(WireRecord::Cmd { kind, payload, id }) => Some(WireRecord::Ack(hub.gateway.submit(&kind, &payload, &id))),
            Ok(other) => Some(WireRecord::Err { reason: format!("clients may not send {:?} records", record_type(&other)) }),
        };
        if let Some(rec) = reply {
            if let Err(e) = send(&out, &rec) {
                break Err(e);
            }
        }
    };
    conn_stop.store(true, Ordering::Release);
    result
}

fn record_type(rec: &WireRecord) -> &'static str {
    match rec {
        WireRecord::Pub(_) => "pub",
        WireRecord::Sub { .. } => "sub",
        WireRecord::Cmd { .. } => "cmd",
        WireRecord::Ack(_) => "ack",
        WireRecord::Overflow { .. } => "overflow",
        WireRecord::Err { .. } => "err",
    }
}
