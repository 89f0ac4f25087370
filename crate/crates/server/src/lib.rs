//! HTTP services: the curation API and a question-answering front for the
//! model extractor (used with the scripted mock in tests and demos).
//!
//! Both run on a small tokio runtime owned by a background thread, so the
//! rest of the workspace stays synchronous.

pub mod api;
pub mod qa;

use std::future::Future;
use std::net::SocketAddr;
use std::thread::JoinHandle;

use axum::Router;
use tokio::sync::oneshot;

pub use api::{router as curation_router, ApiState};
pub use qa::{qa_router, QaScript};

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error("cannot listen on {addr}: {source}")]
    Bind { addr: String, source: std::io::Error },
    #[error("server failed: {0}")]
    Io(#[from] std::io::Error),
}

fn bind(addr: &str) -> Result<std::net::TcpListener, ServeError> {
    let listener = std::net::TcpListener::bind(addr).map_err(|source| ServeError::Bind {
        addr: addr.to_string(),
        source,
    })?;
    listener.set_nonblocking(true)?;
    Ok(listener)
}

fn run(
    listener: std::net::TcpListener,
    app: Router,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> Result<(), ServeError> {
    let rt = tokio::runtime::Builder::new_current_thread()
        .enable_all()
        .build()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::from_std(listener)?;
        axum::serve(listener, app)
            .with_graceful_shutdown(shutdown)
            .await
    })?;
    Ok(())
}

/// A server running on a background thread. Dropping the handle without
/// calling [`ServerHandle::shutdown`] leaves it running until process exit.
pub struct ServerHandle {
    addr: SocketAddr,
    stop: Option<oneshot::Sender<()>>,
    thread: Option<JoinHandle<Result<(), ServeError>>>,
}

impl ServerHandle {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    /// Stops accepting connections, lets in-flight requests finish, and
    /// waits for the server thread.
    pub fn shutdown(mut self) -> Result<(), ServeError> {
        if let Some(stop) = self.stop.take() {
            let _ = stop.send(());
        }
        match self.thread.take().map(JoinHandle::join) {
            Some(Ok(result)) => result,
            Some(Err(_)) => Err(ServeError::Io(std::io::Error::other("server thread panicked"))),
            None => Ok(()),
        }
    }
}

/// Binds `addr` (port 0 picks a free one) and serves `app` in the
/// background. A busy port is reported here, before anything runs.
pub fn spawn(addr: &str, app: Router) -> Result<ServerHandle, ServeError> {
    let listener = bind(addr)?;
    let local = listener.local_addr()?;
    let (tx, rx) = oneshot::channel::<()>();
    let thread = std::thread::Builder::new()
        .name(format!("odke-http-{local}"))
        .spawn(move || {
            run(listener, app, async {
                let _ = rx.await;
            })
        })?;
    Ok(ServerHandle {
        addr: local,
        stop: Some(tx),
        thread: Some(thread),
    })
}

/// Serves on the calling thread until Ctrl-C, then drains in-flight
/// requests. `on_ready` receives the bound address.
pub fn serve_until_interrupted(
    addr: &str,
    app: Router,
    on_ready: impl FnOnce(SocketAddr),
) -> Result<(), ServeError> {
    let listener = bind(addr)?;
    on_ready(listener.local_addr()?);
    run(listener, app, async {
        if let Err(e) = tokio::signal::ctrl_c().await {
            tracing::error!("cannot listen for ctrl-c: {e}");
            std::future::pending::<()>().await;
        }
        tracing::info!("shutting down");
    })
}
