use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;
use serde::{Deserialize, Serialize};

use crate::canvas::Polyptych;
use crate::imagecore::{Image, Mask};

pub const PROTOCOL_VERSION: &str = "insert/v1";
pub const DEFAULT_STEPS: u32 = 50;
pub const DEFAULT_RESOLUTION: u32 = 768;

fn default_steps() -> u32 {
    DEFAULT_STEPS
}

fn default_resolution() -> u32 {
    DEFAULT_RESOLUTION
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InsertMode {
    Mask,
    Text,
}

impl InsertMode {
    pub fn panel_count(self) -> u8 {
        match self {
            InsertMode::Mask => 2,
            InsertMode::Text => 3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InsertRequest {
    pub mode: InsertMode,
    pub polyptych_png: String,
    pub mask_png: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt_text: Option<String>,
    #[serde(default = "default_steps")]
    pub steps: u32,
    pub seed: u64,
    pub panel_count: u8,
    #[serde(default = "default_resolution")]
    pub target_resolution: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InsertResponse {
    pub result_png: String,
    pub backend_id: String,
    pub elapsed_ms: u64,
}

/// Why a server refuses a request; maps onto an HTTP status.
#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum Rejection {
    #[error("malformed request: {0}")]
    Malformed(String),
    #[error("invalid request: {0}")]
    Invalid(String),
}

impl Rejection {
    pub fn status(&self) -> u16 {
        match self {
            Rejection::Malformed(_) => 400,
            Rejection::Invalid(_) => 422,
        }
    }
}

pub(crate) fn encode_b64_png(png: &[u8]) -> String {
    BASE64.encode(png)
}

pub(crate) fn decode_b64(field: &str, data: &str) -> Result<Vec<u8>, Rejection> {
    BASE64.decode(data).map_err(|e| Rejection::Malformed(format!("{field}: {e}")))
}

impl InsertRequest {
    pub fn new(
        mode: InsertMode,
        canvas: &Polyptych,
        prompt_text: Option<String>,
        steps: u32,
        seed: u64,
        target_resolution: u32,
    ) -> Result<Self, crate::imagecore::ImageError> {
        Ok(Self {
            mode,
            polyptych_png: encode_b64_png(&canvas.image.encode_png()?),
            mask_png: encode_b64_png(&canvas.mask.encode_png()?),
            prompt_text,
            steps,
            seed,
            panel_count: canvas.panel_count as u8,
            target_resolution,
        })
    }

    /// Decodes the payloads and checks every request invariant.
    pub fn validate(&self) -> Result<(Image, Mask), Rejection> {
        let canvas = Image::decode_png(&decode_b64("polyptych_png", &self.polyptych_png)?)
            .map_err(|e| Rejection::Malformed(format!("polyptych_png: {e}")))?;
        let mask = Mask::decode_png(&decode_b64("mask_png", &self.mask_png)?)
            .map_err(|e| Rejection::Malformed(format!("mask_png: {e}")))?;
        if canvas.dims() != mask.dims() {
            return Err(Rejection::Invalid(format!(
                "mask {}x{} does not match polyptych {}x{}",
                mask.width(),
                mask.height(),
                canvas.width(),
                canvas.height()
            )));
        }
        if self.panel_count != self.mode.panel_count() {
            return Err(Rejection::Invalid(format!(
                "{:?} mode needs {} panels, got {}",
                self.mode,
                self.mode.panel_count(),
                self.panel_count
            )));
        }
        if canvas.width() % self.panel_count as usize != 0 {
            return Err(Rejection::Invalid(format!(
                "width {} not divisible by {} panels",
                canvas.width(),
                self.panel_count
            )));
        }
        if self.mode == InsertMode::Text && self.prompt_text.as_deref().is_none_or(|t| t.trim().is_empty()) {
            return Err(Rejection::Invalid("text mode requires prompt_text".into()));
        }
        if self.steps == 0 {
            return Err(Rejection::Invalid("steps must be positive".into()));
        }
        if self.target_resolution == 0 {
            return Err(Rejection::Invalid("target_resolution must be positive".into()));
        }
        Ok((canvas, mask))
    }
}

impl InsertResponse {
    pub fn decode_result(&self) -> Result<Image, String> {
        let bytes = decode_b64("result_png", &self.result_png).map_err(|e| e.to_string())?;
        Image::decode_png(&bytes).map_err(|e| e.to_string())
    }
}
