//! HTTP front end for the stream store.
//!
//! * `POST /v1/telemetry`: body is one JSON batch. 200 `{"accepted":N,"duplicate":bool}`,
//!   400 on malformed or invalid payloads, 409 when the batch would break ordering.
//! * `GET /v1/health`: 200.

use std::net::SocketAddr;
use std::sync::Arc;
use std::thread::JoinHandle;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde_json::json;
use tokio::sync::oneshot;

use super::{parse_telemetry_batch, IngestError, StreamStore};

pub fn router(store: Arc<StreamStore>) -> Router {
    Router::new()
        .route("/v1/telemetry", post(post_telemetry))
        .route("/v1/health", get(|| async { StatusCode::OK }))
        .with_state(store)
}

async fn post_telemetry(State(store): State<Arc<StreamStore>>, body: Bytes) -> Response {
    let result = tokio::task::spawn_blocking(move || {
        let batch = parse_telemetry_batch(&body)?;
        store.append(&batch)
    })
    .await;

    match result {
        Ok(Ok(ack)) => (StatusCode::OK, Json(ack)).into_response(),
        Ok(Err(e)) => {
            let status = match e {
                IngestError::Parse(_) | IngestError::Validation { .. } => StatusCode::BAD_REQUEST,
                IngestError::Ordering { .. } => StatusCode::CONFLICT,
                _ => StatusCode::INTERNAL_SERVER_ERROR,
            };
            log::debug!("rejected batch: {e}");
            (status, Json(json!({ "error": e.to_string() }))).into_response()
        }
        Err(join) => (
            StatusCode::INTERNAL_SERVER_ERROR,
            Json(json!({ "error": join.to_string() })),
        )
            .into_response(),
    }
}

/// Serves until the process is terminated.
pub async fn serve(store: Arc<StreamStore>, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(store)).await
}

/// A server running on a background thread with its own runtime.
pub struct ServerHandle {
    pub addr: SocketAddr,
    shutdown: Option<oneshot::Sender<()>>,
    thread: Option<JoinHandle<()>>,
}

impl ServerHandle {
    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn shutdown(mut self) {
        self.stop();
    }

    fn stop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        self.stop();
    }
}

/// Binds `addr` (port 0 picks a free port) and serves on a background thread.
pub fn spawn_server(store: Arc<StreamStore>, addr: SocketAddr) -> std::io::Result<ServerHandle> {
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .worker_threads(4)
        .enable_all()
        .build()?;
    let listener = runtime.block_on(tokio::net::TcpListener::bind(addr))?;
    let bound = listener.local_addr()?;
    let (tx, rx) = oneshot::channel::<()>();
    let thread = std::thread::spawn(move || {
        runtime.block_on(async move {
            let shutdown = async {
                let _ = rx.await;
            };
            if let Err(e) = axum::serve(listener, router(store))
                .with_graceful_shutdown(shutdown)
                .await
            {
                log::error!("server error: {e}");
            }
        });
    });
    Ok(ServerHandle {
        addr: bound,
        shutdown: Some(tx),
        thread: Some(thread),
    })
}
