//! Adaptive crop-and-zoom around small editing regions, and the inverse
//! paste-back that restitches an edited crop into the original source.
//!
//! The crop keeps an area fraction
//!
//! ```text
//! f(r) = beta + (1 - beta) / t * r   if r < t
//!        1                           otherwise
//! ```
//!
//! of the source, where `r` is the mask's area ratio.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::imagecore::{self, Image, ImageError, Mask, Rect};
use crate::maskgen::{self, MaskError};

pub const DEFAULT_BETA: f64 = 0.6;
pub const DEFAULT_T: f64 = 0.1;

#[derive(Debug, Error)]
pub enum CropError {
    #[error("parameter {name}={value} out of range")]
    ParamOutOfRange { name: &'static str, value: f64 },
    #[error("mask has no true bits")]
    EmptyMask,
    #[error("plan mismatch: {0}")]
    PlanMismatch(String),
    #[error(transparent)]
    Image(#[from] ImageError),
}

impl From<MaskError> for CropError {
    fn from(e: MaskError) -> Self {
        match e {
            MaskError::EmptyMask => CropError::EmptyMask,
            MaskError::Image(e) => CropError::Image(e),
            other => CropError::PlanMismatch(other.to_string()),
        }
    }
}

/// Crop window and processing resolution for one source image.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CropPlan {
    pub factor: f64,
    pub rect: Rect,
    pub target_w: usize,
    pub target_h: usize,
    pub source_w: usize,
    pub source_h: usize,
}

impl CropPlan {
    fn check_source(&self, dims: (usize, usize), what: &str) -> Result<(), CropError> {
        if dims != (self.source_w, self.source_h) {
            return Err(CropError::PlanMismatch(format!(
                "{what} is {}x{}, plan expects {}x{}",
                dims.0, dims.1, self.source_w, self.source_h
            )));
        }
        if !self.rect.fits_in(self.source_w, self.source_h) {
            return Err(CropError::PlanMismatch(format!("rect {:?} outside source", self.rect)));
        }
        if self.target_w == 0 || self.target_h == 0 {
            return Err(CropError::PlanMismatch("zero target size".into()));
        }
        Ok(())
    }
}

pub fn crop_factor(r: f64, beta: f64, t: f64) -> Result<f64, CropError> {
    if !(0.0..=1.0).contains(&r) {
        return Err(CropError::ParamOutOfRange { name: "r", value: r });
    }
    if !(beta > 0.0 && beta < 1.0) {
        return Err(CropError::ParamOutOfRange { name: "beta", value: beta });
    }
    if !(t > 0.0 && t < 1.0) {
        return Err(CropError::ParamOutOfRange { name: "t", value: t });
    }
    Ok(if r < t { beta + (1.0 - beta) / t * r } else { 1.0 })
}

/// Places a crop window of area `factor * W * H` (source aspect, rounded to
/// whole pixels) centred on the mask's bounding box, shifted to stay in
/// bounds and enlarged when the box would not otherwise fit.
pub fn plan_crop(
    src: &Image,
    m: &Mask,
    beta: f64,
    t: f64,
    target_w: usize,
    target_h: usize,
) -> Result<CropPlan, CropError> {
    if src.dims() != m.dims() {
        return Err(CropError::PlanMismatch(format!("source {:?} vs mask {:?}", src.dims(), m.dims())));
    }
    if target_w == 0 || target_h == 0 {
        return Err(CropError::PlanMismatch("zero target size".into()));
    }
    let bbox = maskgen::bbox_of(m)?;
    let factor = crop_factor(maskgen::area_ratio(m), beta, t)?;
    let (sw, sh) = src.dims();

    let (mut rw, mut rh) = if factor >= 1.0 {
        (sw, sh)
    } else {
        let area = factor * (sw * sh) as f64;
        let rw = ((sw as f64) * factor.sqrt()).round().clamp(1.0, sw as f64);
        // Height follows from the target area so rounding error stays under one row.
        let rh = (area / rw).round().clamp(1.0, sh as f64);
        (rw as usize, rh as usize)
    };

    if rw < bbox.w || rh < bbox.h {
        let grow = (bbox.w as f64 / rw as f64).max(bbox.h as f64 / rh as f64);
        rw = ((rw as f64 * grow).ceil() as usize).max(bbox.w).min(sw);
        rh = ((rh as f64 * grow).ceil() as usize).max(bbox.h).min(sh);
    }

    let place = |extent: usize, start: usize, len: usize, size: usize| -> usize {
        let centre = start as f64 + len as f64 / 2.0;
        let ideal = (centre - size as f64 / 2.0).round().max(0.0) as usize;
        let lo = (start + len).saturating_sub(size);
        let hi = start.min(extent - size);
        ideal.clamp(lo, hi)
    };
    let x = place(sw, bbox.x, bbox.w, rw);
    let y = place(sh, bbox.y, bbox.h, rh);

    Ok(CropPlan { factor, rect: Rect::new(x, y, rw, rh), target_w, target_h, source_w: sw, source_h: sh })
}

/// Crops source and mask to the plan and zooms both to the target size
/// (bilinear for the image, nearest-neighbour for the mask).
pub fn apply_crop(src: &Image, m: &Mask, plan: &CropPlan) -> Result<(Image, Mask), CropError> {
    plan.check_source(src.dims(), "source")?;
    plan.check_source(m.dims(), "mask")?;
    let img = imagecore::crop(src, plan.rect)?;
    let img = imagecore::resize_bilinear(&img, plan.target_w, plan.target_h)?;
    let mask = m.crop(plan.rect)?.resize_nearest(plan.target_w, plan.target_h)?;
    Ok((img, mask))
}

/// Resizes `edited` back to the crop window, writes it into a copy of the
/// original, then restores every pixel outside `m` from the original.
pub fn paste_back(original_src: &Image, m: &Mask, edited: &Image, plan: &CropPlan) -> Result<Image, CropError> {
    plan.check_source(original_src.dims(), "source")?;
    plan.check_source(m.dims(), "mask")?;
    if edited.dims() != (plan.target_w, plan.target_h) {
        return Err(CropError::PlanMismatch(format!(
            "edited is {}x{}, plan target is {}x{}",
            edited.width(),
            edited.height(),
            plan.target_w,
            plan.target_h
        )));
    }
    if edited.channels() != original_src.channels() {
        return Err(CropError::Image(ImageError::ChannelMismatch {
            left: original_src.channels(),
            right: edited.channels(),
        }));
    }
    let patch = imagecore::resize_bilinear(edited, plan.rect.w, plan.rect.h)?;
    let mut out = imagecore::paste(original_src, &patch, plan.rect.x, plan.rect.y)?;
    for y in plan.rect.y..plan.rect.bottom() {
        for x in plan.rect.x..plan.rect.right() {
            if !m.get(x, y) {
                out.set_pixel(x, y, original_src.pixel(x, y));
            }
        }
    }
    Ok(out)
}
