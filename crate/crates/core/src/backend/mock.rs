use std::net::SocketAddr;
use std::thread::JoinHandle;

use axum::body::Bytes;
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use tokio::sync::oneshot;

use super::protocol::{encode_b64_png, InsertRequest, InsertResponse, Rejection};
use super::{BackendError, InsertBackend};

/// Deterministic stand-in for a diffusion backend.
///
/// Every masked pixel is replaced by the pixel of the left-most panel at the
/// horizontally mirrored panel-local position: `(x mod w, y)` reads
/// `(w - 1 - x mod w, y)` from panel 0. Everything else is copied.
pub fn mock_insert(req: &InsertRequest) -> Result<InsertResponse, Rejection> {
    let (canvas, mask) = req.validate()?;
    let panel_w = canvas.width() / req.panel_count as usize;
    let mut out = canvas.clone();
    for y in 0..canvas.height() {
        for x in 0..canvas.width() {
            if mask.get(x, y) {
                let local = x % panel_w;
                out.set_pixel(x, y, canvas.pixel(panel_w - 1 - local, y));
            }
        }
    }
    let png = out.encode_png().map_err(|e| Rejection::Invalid(e.to_string()))?;
    Ok(InsertResponse { result_png: encode_b64_png(&png), backend_id: format!("mock-seed-{}", req.seed), elapsed_ms: 0 })
}

/// In-process mock; rejections surface as [`BackendError::Protocol`] with the
/// status the HTTP server would send.
#[derive(Clone, Copy, Debug, Default)]
pub struct MockBackend;

impl InsertBackend for MockBackend {
    fn insert(&self, req: &InsertRequest) -> Result<InsertResponse, BackendError> {
        mock_insert(req).map_err(|r| BackendError::Protocol { status: r.status(), body: r.to_string() })
    }
}

async fn healthz() -> &'static str {
    "ok"
}

async fn insert(body: Bytes) -> Response {
    let req: InsertRequest = match serde_json::from_slice(&body) {
        Ok(r) => r,
        Err(e) => return (StatusCode::BAD_REQUEST, format!("malformed request: {e}")).into_response(),
    };
    let result = tokio::task::spawn_blocking(move || mock_insert(&req)).await;
    match result {
        Ok(Ok(resp)) => {
            let json = serde_json::to_vec(&resp).expect("response serializes");
            ([(header::CONTENT_TYPE, "application/json")], json).into_response()
        }
        Ok(Err(rej)) => {
            let status = StatusCode::from_u16(rej.status()).expect("valid status");
            (status, rej.to_string()).into_response()
        }
        Err(e) => (StatusCode::INTERNAL_SERVER_ERROR, e.to_string()).into_response(),
    }
}

pub fn router() -> Router {
    Router::new().route("/healthz", get(healthz)).route("/v1/insert", post(insert))
}

/// Mock HTTP server running on its own thread and Tokio runtime.
pub struct MockServer {
    addr: SocketAddr,
    shutdown: Option<oneshot::Sender<()>>,
    thread: Option<JoinHandle<()>>,
}

impl MockServer {
    /// Binds `addr` (use port 0 for an ephemeral port) and starts serving.
    pub fn start(addr: SocketAddr) -> std::io::Result<MockServer> {
        let listener = std::net::TcpListener::bind(addr)?;
        listener.set_nonblocking(true)?;
        let addr = listener.local_addr()?;
        let runtime = tokio::runtime::Builder::new_multi_thread().worker_threads(2).enable_all().build()?;
        let (tx, rx) = oneshot::channel::<()>();
        let thread = std::thread::spawn(move || {
            runtime.block_on(async move {
                let listener = tokio::net::TcpListener::from_std(listener).expect("tokio listener");
                axum::serve(listener, router())
                    .with_graceful_shutdown(async {
                        let _ = rx.await;
                    })
                    .await
                    .expect("mock server");
            });
        });
        Ok(MockServer { addr, shutdown: Some(tx), thread: Some(thread) })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    /// Blocks until the server thread exits (i.e. forever unless shut down elsewhere).
    pub fn wait(mut self) {
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

impl Drop for MockServer {
    fn drop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}
