use std::path::Path;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use aerogh_core::runtime::{simulate, RunManifest};
use aerogh_server::ServeOptions;

use crate::fail::{CliResult, Failure};

pub fn run(manifest: &Path) -> CliResult {
    let plan = RunManifest::load(manifest)?;
    let summary = simulate(&plan)?;
    println!("{summary}");
    println!("log {}", plan.output.display());
    Ok(())
}

pub fn serve(manifest: &Path, opts: ServeOptions) -> CliResult {
    if opts.listen_tcp.is_none() && opts.listen_http.is_none() {
        return Err(Failure::validation(anyhow::anyhow!("give --listen-tcp, --listen-http or both")));
    }
    let plan = RunManifest::load(manifest)?;
    let stop = Arc::new(AtomicBool::new(false));
    let handle = aerogh_server::start(&plan, &opts)?;
    if let Some(a) = handle.tcp_addr {
        println!("tcp  {a}");
    }
    if let Some(a) = handle.http_addr {
        println!("http http://{a}/api/state");
    }
    watch_signals(stop.clone()).map_err(Failure::runtime)?;
    while !stop.load(Ordering::Acquire) {
        std::thread::sleep(std::time::Duration::from_millis(100));
    }
    log::info!("shutting down");
    let summary = handle.stop()?;
    println!("{summary}");
    Ok(())
}

/// Set `stop` on Ctrl-C or SIGTERM.
fn watch_signals(stop: Arc<AtomicBool>) -> std::io::Result<()> {
    let rt = tokio::runtime::Builder::new_current_thread().enable_all().build()?;
    std::thread::Builder::new().name("signals".into()).spawn(move || {
        rt.block_on(async {
            #[cfg(unix)]
            {
                use tokio::signal::unix::{signal, SignalKind};
                match signal(SignalKind::terminate()) {
                    Ok(mut term) => {
                        tokio::select! {
                            _ = tokio::signal::ctrl_c() => {}
                            _ = term.recv() => {}
                        }
                    }
                    Err(_) => {
                        let _ = tokio::signal::ctrl_c().await;
                    }
                }
            }
            #[cfg(not(unix))]
            {
                let _ = tokio::signal::ctrl_c().await;
            }
        });
        stop.store(true, Ordering::Release);
    })?;
    Ok(())
}
