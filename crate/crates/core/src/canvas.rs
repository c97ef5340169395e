//! Diptych and triptych in-context canvases.
//!
//! A diptych places the background-removed reference on the left and the
//! masked source on the right; its mask is zero on the reference panel and
//! carries the insertion mask on the right. A triptych appends a fully masked
//! generation panel after the reference and the untouched source.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::imagecore::{self, Image, ImageError, Mask};

/// Value written into masked source pixels and the empty generation panel.
pub const MASKED_FILL: u8 = 0;
/// Background value for reference pixels outside the reference mask.
pub const BACKGROUND_FILL: u8 = 255;

#[derive(Debug, Error)]
pub enum CanvasError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("width {width} not divisible into {panels} panels")]
    IndivisibleWidth { width: usize, panels: usize },
    #[error("panel count must be 2 or 3, got {0}")]
    PanelCount(usize),
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error("sidecar: {0}")]
    Sidecar(String),
}

/// Side-by-side multi-panel canvas with its companion mask.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Polyptych {
    pub image: Image,
    pub mask: Mask,
    pub panel_count: usize,
    pub panel_w: usize,
    pub panel_h: usize,
}

/// JSON sidecar written next to the image and mask PNGs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolyptychMeta {
    pub panel_count: usize,
    pub panel_w: usize,
    pub panel_h: usize,
}

impl Polyptych {
    pub fn meta(&self) -> PolyptychMeta {
        PolyptychMeta { panel_count: self.panel_count, panel_w: self.panel_w, panel_h: self.panel_h }
    }

    /// Final (right-most) panel: the insertion or generation region.
    pub fn last_panel(&self) -> Result<Image, CanvasError> {
        Ok(split_panels(&self.image, self.panel_count)?.pop().expect("at least two panels"))
    }

    pub fn save(&self, image_path: &Path, mask_path: &Path, sidecar_path: &Path) -> Result<(), CanvasError> {
        self.image.save_png(image_path)?;
        self.mask.save_png(mask_path)?;
        let json = serde_json::to_string(&self.meta()).map_err(|e| CanvasError::Sidecar(e.to_string()))?;
        std::fs::write(sidecar_path, json).map_err(|e| CanvasError::Sidecar(e.to_string()))
    }

    pub fn load(image_path: &Path, mask_path: &Path, sidecar_path: &Path) -> Result<Polyptych, CanvasError> {
        let raw = std::fs::read_to_string(sidecar_path).map_err(|e| CanvasError::Sidecar(e.to_string()))?;
        let meta: PolyptychMeta = serde_json::from_str(&raw).map_err(|e| CanvasError::Sidecar(e.to_string()))?;
        let image = Image::load_png(image_path)?;
        let mask = Mask::load_png(mask_path)?;
        if image.dims() != mask.dims()
            || image.width() != meta.panel_count * meta.panel_w
            || image.height() != meta.panel_h
        {
            return Err(CanvasError::DimensionMismatch("sidecar disagrees with rasters".into()));
        }
        Ok(Polyptych { image, mask, panel_count: meta.panel_count, panel_w: meta.panel_w, panel_h: meta.panel_h })
    }
}

fn require_same_dims(what: &str, a: (usize, usize), b: (usize, usize)) -> Result<(), CanvasError> {
    if a == b {
        Ok(())
    } else {
        Err(CanvasError::DimensionMismatch(format!("{what}: {}x{} vs {}x{}", a.0, a.1, b.0, b.1)))
    }
}

/// Keeps reference pixels under `ref_mask` and paints everything else white.
pub fn apply_reference_mask(reference: &Image, ref_mask: &Mask) -> Result<Image, CanvasError> {
    require_same_dims("reference vs reference mask", reference.dims(), ref_mask.dims())?;
    let mut out = reference.clone();
    let fill = vec![BACKGROUND_FILL; reference.channels()];
    for y in 0..reference.height() {
        for x in 0..reference.width() {
            if !ref_mask.get(x, y) {
                out.set_pixel(x, y, &fill);
            }
        }
    }
    Ok(out)
}

fn hconcat_images(panels: &[&Image]) -> Result<Image, CanvasError> {
    let first = panels[0];
    let c = first.channels();
    for p in panels {
        if p.channels() != c {
            return Err(CanvasError::Image(ImageError::ChannelMismatch { left: c, right: p.channels() }));
        }
    }
    let (w, h) = first.dims();
    let mut data = Vec::with_capacity(w * h * c * panels.len());
    for y in 0..h {
        for p in panels {
            data.extend_from_slice(&p.data()[y * w * c..(y + 1) * w * c]);
        }
    }
    Ok(Image::new(w * panels.len(), h, c, data)?)
}

fn hconcat_masks(panels: &[&Mask]) -> Result<Mask, CanvasError> {
    let (w, h) = panels[0].dims();
    let mut bits = Vec::with_capacity(w * h * panels.len());
    for y in 0..h {
        for p in panels {
            bits.extend_from_slice(&p.bits()[y * w..(y + 1) * w]);
        }
    }
    Ok(Mask::new(w * panels.len(), h, bits)?)
}

/// Mask-prompt canvas `[ref_clean | src with M zeroed]`, mask `[0 | M]`.
pub fn assemble_diptych(ref_clean: &Image, src: &Image, m: &Mask) -> Result<Polyptych, CanvasError> {
    require_same_dims("reference vs source", ref_clean.dims(), src.dims())?;
    require_same_dims("source vs mask", src.dims(), m.dims())?;
    let mut masked_src = src.clone();
    let fill = vec![MASKED_FILL; src.channels()];
    for y in 0..src.height() {
        for x in 0..src.width() {
            if m.get(x, y) {
                masked_src.set_pixel(x, y, &fill);
            }
        }
    }
    let (w, h) = src.dims();
    let image = hconcat_images(&[ref_clean, &masked_src])?;
    let mask = hconcat_masks(&[&Mask::filled(w, h, false)?, m])?;
    Ok(Polyptych { image, mask, panel_count: 2, panel_w: w, panel_h: h })
}

/// Text-prompt canvas `[ref_clean | src | empty]`, mask `[0 | 0 | 1]`.
pub fn assemble_triptych(ref_clean: &Image, src: &Image) -> Result<Polyptych, CanvasError> {
    require_same_dims("reference vs source", ref_clean.dims(), src.dims())?;
    let (w, h) = src.dims();
    let empty = Image::filled(w, h, src.channels(), MASKED_FILL)?;
    let image = hconcat_images(&[ref_clean, src, &empty])?;
    let zeros = Mask::filled(w, h, false)?;
    let ones = Mask::filled(w, h, true)?;
    let mask = hconcat_masks(&[&zeros, &zeros, &ones])?;
    Ok(Polyptych { image, mask, panel_count: 3, panel_w: w, panel_h: h })
}

/// Fits `img` inside a `w`x`h` panel, preserving aspect ratio, centred on a
/// white background. An image already at the panel size is returned as is.
pub fn letterbox(img: &Image, w: usize, h: usize) -> Result<Image, CanvasError> {
    if img.dims() == (w, h) {
        return Ok(img.clone());
    }
    let scale = (w as f64 / img.width() as f64).min(h as f64 / img.height() as f64);
    let nw = ((img.width() as f64 * scale).round() as usize).clamp(1, w);
    let nh = ((img.height() as f64 * scale).round() as usize).clamp(1, h);
    let resized = imagecore::resize_bilinear(img, nw, nh)?;
    let bg = Image::filled(w, h, img.channels(), BACKGROUND_FILL)?;
    Ok(imagecore::paste(&bg, &resized, (w - nw) / 2, (h - nh) / 2)?)
}

/// Splits a canvas into `panel_count` equal-width panels, left to right.
pub fn split_panels(img: &Image, panel_count: usize) -> Result<Vec<Image>, CanvasError> {
    if panel_count == 0 {
        return Err(CanvasError::PanelCount(0));
    }
    if !img.width().is_multiple_of(panel_count) {
        return Err(CanvasError::IndivisibleWidth { width: img.width(), panels: panel_count });
    }
    let pw = img.width() / panel_count;
    let c = img.channels();
    let mut bufs = vec![Vec::with_capacity(pw * img.height() * c); panel_count];
    for row in img.data().chunks_exact(img.width() * c) {
        for (i, buf) in bufs.iter_mut().enumerate() {
            buf.extend_from_slice(&row[i * pw * c..(i + 1) * pw * c]);
        }
    }
    bufs.into_iter().map(|d| Ok(Image::new(pw, img.height(), c, d)?)).collect()
}
