//! Insertion backend protocol (`insert/v1`): JSON over HTTP with base64 PNG
//! payloads at `POST /v1/insert`, plus `GET /healthz`.
//!
//! Status codes: 400 for undecodable bodies, 422 for requests that decode but
//! violate the contract, 503 when a server is busy.

mod client;
mod mock;
mod pipeline;
mod protocol;

pub use client::HttpBackend;
pub use mock::{mock_insert, MockBackend, MockServer};
pub use pipeline::{run_pipeline, Guidance, PipelineConfig, PipelineError, PipelineInputs, Stage};
pub use protocol::{
    InsertMode, InsertRequest, InsertResponse, Rejection, DEFAULT_RESOLUTION, DEFAULT_STEPS, PROTOCOL_VERSION,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("transport: {0}")]
    Transport(String),
    #[error("backend returned {status}: {body}")]
    Protocol { status: u16, body: String },
    #[error("malformed response: {0}")]
    Malformed(String),
}

/// Anything that can answer an insertion request.
pub trait InsertBackend: Send + Sync {
    fn insert(&self, req: &InsertRequest) -> Result<InsertResponse, BackendError>;
}
