use std::time::Duration;

use super::protocol::{decode_b64, InsertRequest, InsertResponse};
use super::{BackendError, InsertBackend};
use crate::imagecore::Image;

/// Blocking HTTP client for `POST {endpoint}/v1/insert`. No retries.
#[derive(Clone, Debug)]
pub struct HttpBackend {
    endpoint: String,
    client: reqwest::blocking::Client,
}

impl HttpBackend {
    pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(120);

    pub fn new(endpoint: &str, timeout: Duration) -> Result<Self, BackendError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .connect_timeout(timeout)
            .build()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        Ok(Self { endpoint: endpoint.trim_end_matches('/').to_owned(), client })
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    pub fn healthz(&self) -> Result<String, BackendError> {
        let resp = self
            .client
            .get(format!("{}/healthz", self.endpoint))
            .send()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        let status = resp.status().as_u16();
        let body = resp.text().map_err(|e| BackendError::Transport(e.to_string()))?;
        if !(200..300).contains(&status) {
            return Err(BackendError::Protocol { status, body });
        }
        Ok(body)
    }

    /// Raw exchange: returns the status and body bytes for any response.
    pub fn post_raw(&self, body: Vec<u8>) -> Result<(u16, Vec<u8>), BackendError> {
        let resp = self
            .client
            .post(format!("{}/v1/insert", self.endpoint))
            .header(reqwest::header::CONTENT_TYPE, "application/json")
            .body(body)
            .send()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        let status = resp.status().as_u16();
        let bytes = resp.bytes().map_err(|e| BackendError::Transport(e.to_string()))?;
        Ok((status, bytes.to_vec()))
    }

    pub fn send_insert(&self, req: &InsertRequest) -> Result<InsertResponse, BackendError> {
        let body = serde_json::to_vec(req).map_err(|e| BackendError::Malformed(e.to_string()))?;
        let (status, bytes) = self.post_raw(body)?;
        if !(200..300).contains(&status) {
            return Err(BackendError::Protocol { status, body: String::from_utf8_lossy(&bytes).into_owned() });
        }
        let resp: InsertResponse = serde_json::from_slice(&bytes).map_err(|e| BackendError::Malformed(e.to_string()))?;
        let result = resp.decode_result().map_err(BackendError::Malformed)?;
        let sent = decode_b64("polyptych_png", &req.polyptych_png)
            .ok()
            .and_then(|b| Image::decode_png(&b).ok())
            .map(|i| i.dims());
        if let Some(dims) = sent {
            if result.dims() != dims {
                return Err(BackendError::Malformed(format!(
                    "result {}x{} does not match request {}x{}",
                    result.width(),
                    result.height(),
                    dims.0,
                    dims.1
                )));
            }
        }
        Ok(resp)
    }
}

impl InsertBackend for HttpBackend {
    fn insert(&self, req: &InsertRequest) -> Result<InsertResponse, BackendError> {
        self.send_insert(req)
    }
}
