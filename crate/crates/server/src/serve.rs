//! Run a greenhouse in real time with its network faces attached.

use std::net::{SocketAddr, TcpListener};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::Duration;

use aerogh_core::runtime::{logging_broker, Greenhouse, RunPlan, RunSummary};
use aerogh_core::telemetry::command_channel;
use aerogh_core::RuntimeError;

use crate::tcp::TcpServer;
use crate::{http, Hub};

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error(transparent)]
    Runtime(#[from] RuntimeError),
    #[error("cannot listen on {addr}: {source}")]
    Listen { addr: String, source: std::io::Error },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("simulation thread panicked")]
    Panicked,
}

impl ServeError {
    pub fn is_validation(&self) -> bool {
        matches!(self, ServeError::Runtime(e) if e.is_validation())
    }
}

#[derive(Debug, Clone, Default)]
pub struct ServeOptions {
    pub listen_tcp: Option<String>,
    pub listen_http: Option<String>,
}

/// A running server. The simulation advances until the plan's duration and
/// then holds its final state; the network faces stay up until `stop`.
pub struct ServeHandle {
    pub tcp_addr: Option<SocketAddr>,
    pub http_addr: Option<SocketAddr>,
    pub hub: Hub,
    stop: Arc<AtomicBool>,
    sim: Option<JoinHandle<Result<RunSummary, RuntimeError>>>,
    http: Option<JoinHandle<std::io::Result<()>>>,
    tcp: Option<TcpServer>,
}

pub fn start(plan: &RunPlan, opts: &ServeOptions) -> Result<ServeHandle, ServeError> {
    let (broker, log) = logging_broker(&plan.output, true)?;
    // one paced step plus slack; a command older than that is genuinely stuck
    let timeout = Duration::from_secs_f64(plan.sim.timestep / plan.acceleration) + Duration::from_secs(1);
    let (gateway, inbox) = command_channel(timeout);
    let mut gh = Greenhouse::new(plan, broker.clone(), Some(log))?;
    gh.attach_commands(inbox);
    let hub = Hub { broker, gateway };
    let stop = Arc::new(AtomicBool::new(false));

    let bind = |addr: &String| TcpListener::bind(addr).map_err(|source| ServeError::Listen { addr: addr.clone(), source });
    let http_listener = opts.listen_http.as_ref().map(bind).transpose()?;
    let http_addr = http_listener.as_ref().map(|l| l.local_addr()).transpose()?;
    let tcp = match &opts.listen_tcp {
        Some(addr) => {
            Some(TcpServer::bind(addr, hub.clone()).map_err(|source| ServeError::Listen { addr: addr.clone(), source })?)
        }
        None => None,
    };
    let tcp_addr = tcp.as_ref().map(TcpServer::local_addr);

    let http = match http_listener {
        Some(listener) => {
            let (hub, stop) = (hub.clone(), stop.clone());
            let rt = tokio::runtime::Builder::new_multi_thread().worker_threads(2).enable_all().build()?;
            Some(thread::Builder::new().name("http".into()).spawn(move || rt.block_on(http::run(listener, hub, stop)))?)
        }
        None => None,
    };

    let (end, acceleration, flag) = (plan.duration_ms, plan.acceleration, stop.clone());
    let sim = thread::Builder::new().name("greenhouse".into()).spawn(move || {
        gh.run_paced(Some(end), acceleration, &flag)?;
        gh.finish()
    })?;
    Ok(ServeHandle { tcp_addr, http_addr, hub, stop, sim: Some(sim), http, tcp })
}

impl ServeHandle {
    pub fn stop_flag(&self) -> Arc<AtomicBool> {
        self.stop.clone()
    }

    /// Stop everything and return what the simulation got through.
    pub fn stop(mut self) -> Result<RunSummary, ServeError> {
        self.stop.store(true, Ordering::Release);
        if let Some(tcp) = self.tcp.take() {
            tcp.shutdown();
        }
        if let Some(h) = self.http.take() {
            match h.join() {
                Ok(r) => r?,
                Err(_) => return Err(ServeError::Panicked),
            }
        }
        let summary = self.sim.take().expect("joined once").join().map_err(|_| ServeError::Panicked)??;
        Ok(summary)
    }

    /// Block until the stop flag is set by someone else (a signal handler),
    /// then shut down.
    pub fn wait(self) -> Result<RunSummary, ServeError> {
        while !self.stop.load(Ordering::Acquire) {
            thread::sleep(Duration::from_millis(100));
        }
        self.stop()
    }
}

/// Start, run until `stop` is set, shut down.
pub fn serve(plan: &RunPlan, opts: &ServeOptions, stop: Arc<AtomicBool>) -> Result<RunSummary, ServeError> {
    let handle = start(plan, opts)?;
    let own = handle.stop_flag();
    while !stop.load(Ordering::Acquire) {
        thread::sleep(Duration::from_millis(100));
    }
    own.store(true, Ordering::Release);
    handle.stop()
}
