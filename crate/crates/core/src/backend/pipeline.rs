use std::fmt;

use thiserror::Error;

use super::protocol::{InsertMode, InsertRequest};
use super::InsertBackend;
use crate::adaptivecrop::{self, CropPlan, DEFAULT_BETA, DEFAULT_T};
use crate::canvas;
use crate::imagecore::{Image, Mask};
use crate::promptkit::PromptTemplate;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    Precondition,
    ReferenceMask,
    Crop,
    Normalize,
    Assemble,
    Request,
    Backend,
    Decode,
    Split,
    PasteBack,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Precondition => "precondition",
            Stage::ReferenceMask => "reference-mask",
            Stage::Crop => "crop",
            Stage::Normalize => "normalize",
            Stage::Assemble => "assemble",
            Stage::Request => "request",
            Stage::Backend => "backend",
            Stage::Decode => "decode",
            Stage::Split => "split",
            Stage::PasteBack => "paste-back",
        })
    }
}

#[derive(Debug, Error)]
#[error("{stage}: {source}")]
pub struct PipelineError {
    pub stage: Stage,
    #[source]
    pub source: Box<dyn std::error::Error + Send + Sync>,
}

trait AtStage<T> {
    fn at(self, stage: Stage) -> Result<T, PipelineError>;
}

impl<T, E: Into<Box<dyn std::error::Error + Send + Sync>>> AtStage<T> for Result<T, E> {
    fn at(self, stage: Stage) -> Result<T, PipelineError> {
        self.map_err(|e| PipelineError { stage, source: e.into() })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineConfig {
    pub beta: f64,
    pub t: f64,
    /// Processing resolution for every panel.
    pub target_w: usize,
    pub target_h: usize,
    pub steps: u32,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            beta: DEFAULT_BETA,
            t: DEFAULT_T,
            target_w: super::DEFAULT_RESOLUTION as usize,
            target_h: super::DEFAULT_RESOLUTION as usize,
            steps: super::DEFAULT_STEPS,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub enum Guidance {
    /// Insert into the region marked by the mask (source resolution).
    Mask(Mask),
    /// Rewrite the whole source following a rendered triptych instruction.
    Text { label: String, instruction: String },
}

#[derive(Clone, Debug)]
pub struct PipelineInputs<'a> {
    pub reference: &'a Image,
    pub reference_mask: &'a Mask,
    pub source: &'a Image,
    pub guidance: Guidance,
}

fn full_frame_plan(src: &Image, cfg: &PipelineConfig) -> CropPlan {
    CropPlan {
        factor: 1.0,
        rect: src.full_rect(),
        target_w: cfg.target_w,
        target_h: cfg.target_h,
        source_w: src.width(),
        source_h: src.height(),
    }
}

/// Runs one insertion end to end.
///
/// Mask mode: background-remove the reference, crop-and-zoom the source
/// around the mask, letterbox the reference to the panel size, assemble the
/// diptych, call the backend, take the right panel and paste it back into
/// the original source. Text mode swaps in the triptych canvas and the
/// rendered prompt, and treats the whole source as the editable region.
pub fn run_pipeline(
    inputs: &PipelineInputs<'_>,
    cfg: &PipelineConfig,
    backend: &dyn InsertBackend,
) -> Result<Image, PipelineError> {
    let source = inputs.source.to_rgb();
    let reference = inputs.reference.to_rgb();
    if cfg.target_w == 0 || cfg.target_h == 0 {
        return Err("target resolution must be positive").at(Stage::Precondition);
    }

    let (mode, edit_mask, prompt) = match &inputs.guidance {
        Guidance::Mask(m) => {
            if m.dims() != source.dims() {
                return Err(format!("mask {:?} does not match source {:?}", m.dims(), source.dims()))
                    .at(Stage::Precondition);
            }
            (InsertMode::Mask, m.clone(), None)
        }
        Guidance::Text { label, instruction } => {
            let t = PromptTemplate::TriptychEdit { label: label.clone(), instruction: instruction.clone() };
            let text = t.render().at(Stage::Precondition)?;
            (InsertMode::Text, Mask::filled(source.width(), source.height(), true).at(Stage::Precondition)?, Some(text))
        }
    };

    let ref_clean = canvas::apply_reference_mask(&reference, inputs.reference_mask).at(Stage::ReferenceMask)?;

    let plan = if mode == InsertMode::Mask && !edit_mask.is_empty() {
        adaptivecrop::plan_crop(&source, &edit_mask, cfg.beta, cfg.t, cfg.target_w, cfg.target_h).at(Stage::Crop)?
    } else {
        full_frame_plan(&source, cfg)
    };
    let (panel_src, panel_mask) = adaptivecrop::apply_crop(&source, &edit_mask, &plan).at(Stage::Crop)?;

    let panel_ref = canvas::letterbox(&ref_clean, cfg.target_w, cfg.target_h).at(Stage::Normalize)?;

    let poly = match mode {
        InsertMode::Mask => canvas::assemble_diptych(&panel_ref, &panel_src, &panel_mask),
        InsertMode::Text => canvas::assemble_triptych(&panel_ref, &panel_src),
    }
    .at(Stage::Assemble)?;

    let resolution = cfg.target_w.max(cfg.target_h) as u32;
    let req = InsertRequest::new(mode, &poly, prompt, cfg.steps, cfg.seed, resolution).at(Stage::Request)?;
    let resp = backend.insert(&req).at(Stage::Backend)?;
    let result = resp.decode_result().at(Stage::Decode)?;
    if result.dims() != poly.image.dims() {
        return Err(format!("result {:?} vs canvas {:?}", result.dims(), poly.image.dims())).at(Stage::Decode);
    }

    let panels = canvas::split_panels(&result.to_rgb(), poly.panel_count).at(Stage::Split)?;
    let edited = panels.last().expect("panel_count >= 2");
    adaptivecrop::paste_back(&source, &edit_mask, edited, &plan).at(Stage::PasteBack)
}
