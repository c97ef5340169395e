//! Dataset-construction procedures: blur scoring and keyframe pairing for
//! video sources, interval sampling for multi-view sources, shape-change
//! mask combination, and JSONL manifest validation.

use std::collections::BTreeMap;
use std::io::BufRead;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::imagecore::{self, Image, Mask, LAPLACIAN_KERNEL};
use crate::maskgen::{self, Category, MaskError};

/// Number of leading frames whose sharpness sets the blur threshold.
pub const BLUR_REFERENCE_FRAMES: usize = 10;
pub const DEFAULT_MAX_ANGLE: f64 = 15.0;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("no input values")]
    EmptyInput,
    #[error("no frame reaches the blur threshold {0}")]
    NoClearFrame(f64),
    #[error("no frame after the start keyframe stays within the pose bound")]
    NoValidPair,
    #[error("frame indices must be strictly increasing (position {0})")]
    UnorderedFrames(usize),
    #[error("{n_views} views cannot hold a pair at stride {stride}")]
    TooFewViews { n_views: usize, stride: usize },
    #[error("stride must be at least 1")]
    ZeroStride,
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Mask(#[from] MaskError),
}

/// Population variance of the replicate-padded 4-neighbour Laplacian response.
pub fn laplacian_variance(img: &Image) -> f64 {
    let gray = imagecore::to_grayscale(img);
    let response = imagecore::convolve3x3(&gray, &LAPLACIAN_KERNEL).expect("grayscale input");
    let n = response.values.len() as f64;
    let mean = response.values.iter().sum::<f64>() / n;
    response.values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n
}

/// Maximum variance among the first [`BLUR_REFERENCE_FRAMES`] values; later
/// entries are ignored.
pub fn blur_threshold(variances: &[f64]) -> Result<f64, DatasetError> {
    variances
        .iter()
        .take(BLUR_REFERENCE_FRAMES)
        .copied()
        .reduce(f64::max)
        .ok_or(DatasetError::EmptyInput)
}

/// Per-frame sharpness and (externally estimated) head pose in degrees.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameScore {
    pub index: usize,
    pub laplacian_variance: f64,
    pub yaw: f64,
    pub pitch: f64,
    pub roll: f64,
}

impl FrameScore {
    pub fn pose_distance(&self, other: &FrameScore) -> f64 {
        (self.yaw - other.yaw).abs().max((self.pitch - other.pitch).abs()).max((self.roll - other.roll).abs())
    }

    pub fn is_clear(&self, threshold: f64) -> bool {
        self.laplacian_variance >= threshold
    }
}

/// Picks the first clear frame as the start keyframe and the latest clear
/// frame whose head pose stays within `max_angle` of it as the end keyframe.
/// Returns the two frames' `index` values.
pub fn select_keyframe_pair(
    scores: &[FrameScore],
    threshold: f64,
    max_angle: f64,
) -> Result<(usize, usize), DatasetError> {
    if let Some(pos) = scores.windows(2).position(|w| w[1].index <= w[0].index) {
        return Err(DatasetError::UnorderedFrames(pos + 1));
    }
    let start_pos = scores.iter().position(|f| f.is_clear(threshold)).ok_or(DatasetError::NoClearFrame(threshold))?;
    let start = &scores[start_pos];
    scores[start_pos + 1..]
        .iter()
        .rev()
        .find(|f| f.is_clear(threshold) && start.pose_distance(f) <= max_angle)
        .map(|end| (start.index, end.index))
        .ok_or(DatasetError::NoValidPair)
}

/// Disjoint `(i, i + stride)` pairs for `i = 0, 2·stride, 4·stride, …`.
pub fn interval_sample(n_views: usize, stride: usize) -> Result<Vec<(usize, usize)>, DatasetError> {
    if stride == 0 {
        return Err(DatasetError::ZeroStride);
    }
    if n_views < stride + 1 {
        return Err(DatasetError::TooFewViews { n_views, stride });
    }
    Ok((0..)
        .step_by(2 * stride)
        .take_while(|i| i + stride < n_views)
        .map(|i| (i, i + stride))
        .collect())
}

/// Union of the before/after garment masks for shape-changing swaps.
pub fn combine_shapechange_masks(src_mask: &Mask, tgt_mask: &Mask) -> Result<Mask, DatasetError> {
    Ok(maskgen::union(src_mask, tgt_mask)?)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PromptType {
    Mask,
    Text,
}

impl PromptType {
    pub fn as_str(self) -> &'static str {
        match self {
            PromptType::Mask => "mask",
            PromptType::Text => "text",
        }
    }

    pub fn permits(self, category: Category) -> bool {
        match self {
            PromptType::Mask => true,
            PromptType::Text => category != Category::Person,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaskPromptSample {
    pub reference_image: PathBuf,
    pub reference_mask: PathBuf,
    pub target_image: PathBuf,
    pub target_mask: PathBuf,
    pub category: Category,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TextPromptSample {
    pub reference_image: PathBuf,
    pub reference_mask: PathBuf,
    pub target_image: PathBuf,
    pub source_image: PathBuf,
    pub text: String,
    pub category: Category,
}

/// One manifest line as written on disk.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "prompt_type", rename_all = "lowercase")]
pub enum ManifestEntry {
    Mask(MaskPromptSample),
    Text(TextPromptSample),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub line: usize,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpectationFailure {
    pub key: String,
    pub expected: usize,
    pub actual: usize,
}

/// Expected counts keyed by `total`, a prompt type (`mask`) or
/// `<prompt_type>.<category>` (`mask.person`).
pub type ExpectedCounts = BTreeMap<String, usize>;

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestReport {
    pub total: usize,
    pub by_prompt_type: BTreeMap<String, usize>,
    pub by_category: BTreeMap<String, usize>,
    pub violations: Vec<Violation>,
    pub expectation_failures: Vec<ExpectationFailure>,
}

impl ManifestReport {
    pub fn count(&self, key: &str) -> usize {
        if key == "total" {
            return self.total;
        }
        self.by_prompt_type.get(key).or_else(|| self.by_category.get(key)).copied().unwrap_or(0)
    }

    pub fn is_clean(&self) -> bool {
        self.violations.is_empty() && self.expectation_failures.is_empty()
    }
}

struct ParsedLine {
    line: usize,
    kind: Option<(PromptType, Category)>,
    problems: Vec<String>,
    paths: Vec<(&'static str, String)>,
}

fn classify(line: usize, value: &Value) -> ParsedLine {
    let mut out = ParsedLine { line, kind: None, problems: Vec::new(), paths: Vec::new() };
    let prompt_type = match value.get("prompt_type").and_then(Value::as_str) {
        Some("mask") => PromptType::Mask,
        Some("text") => PromptType::Text,
        Some(other) => {
            out.problems.push(format!("unknown prompt_type `{other}`"));
            return out;
        }
        None => {
            out.problems.push("missing prompt_type".into());
            return out;
        }
    };
    let category = match value.get("category").cloned().map(serde_json::from_value::<Category>) {
        Some(Ok(c)) => c,
        Some(Err(_)) => {
            out.problems.push(format!("unknown category {}", value["category"]));
            return out;
        }
        None => {
            out.problems.push("missing category".into());
            return out;
        }
    };
    if !prompt_type.permits(category) {
        out.problems.push(format!("category {} not allowed for {} prompts", category.as_str(), prompt_type.as_str()));
        return out;
    }
    out.kind = Some((prompt_type, category));
    let fields: &[&'static str] = match prompt_type {
        PromptType::Mask => &["reference_image", "reference_mask", "target_image", "target_mask"],
        PromptType::Text => &["reference_image", "reference_mask", "target_image", "source_image"],
    };
    for &f in fields {
        match value.get(f).and_then(Value::as_str) {
            Some(p) if !p.is_empty() => out.paths.push((f, p.to_owned())),
            _ => out.problems.push(format!("missing {f}")),
        }
    }
    if prompt_type == PromptType::Text {
        match value.get("text").and_then(Value::as_str) {
            Some(t) if !t.trim().is_empty() => {}
            _ => out.problems.push("missing or empty text".into()),
        }
    }
    out
}

fn check_files(parsed: &mut ParsedLine, base: &Path) {
    let mut dims: BTreeMap<&'static str, (u32, u32)> = BTreeMap::new();
    for (field, rel) in &parsed.paths {
        let path = base.join(rel);
        match image::image_dimensions(&path) {
            Ok(d) => {
                dims.insert(field, d);
            }
            Err(_) if !path.exists() => parsed.problems.push(format!("{field} not found: {}", path.display())),
            Err(e) => parsed.problems.push(format!("{field} unreadable: {e}")),
        }
    }
    let pairs: &[(&str, &str)] = match parsed.kind {
        Some((PromptType::Mask, _)) => &[("reference_image", "reference_mask"), ("target_image", "target_mask")],
        Some((PromptType::Text, _)) => &[("reference_image", "reference_mask"), ("source_image", "target_image")],
        None => &[],
    };
    for (a, b) in pairs {
        if let (Some(da), Some(db)) = (dims.get(a), dims.get(b)) {
            if da != db {
                parsed.problems.push(format!("{a} {}x{} vs {b} {}x{}", da.0, da.1, db.0, db.1));
            }
        }
    }
}

/// Validates a JSONL manifest. Paths resolve relative to the manifest's
/// directory. Malformed JSON aborts with the offending line number; every
/// other defect is reported as a [`Violation`].
pub fn validate_manifest(path: &Path, expected: Option<&ExpectedCounts>) -> Result<ManifestReport, DatasetError> {
    let file = std::fs::File::open(path)?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    validate_manifest_reader(std::io::BufReader::new(file), &base, expected)
}

pub fn validate_manifest_reader(
    reader: impl BufRead,
    base: &Path,
    expected: Option<&ExpectedCounts>,
) -> Result<ManifestReport, DatasetError> {
    let mut parsed = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let value: Value = serde_json::from_str(&line)
            .map_err(|e| DatasetError::Parse { line: line_no, message: e.to_string() })?;
        if !value.is_object() {
            return Err(DatasetError::Parse { line: line_no, message: "expected a JSON object".into() });
        }
        parsed.push(classify(line_no, &value));
    }

    parsed.par_iter_mut().for_each(|p| check_files(p, base));

    let mut report = ManifestReport::default();
    for p in &parsed {
        if let Some((pt, cat)) = p.kind {
            report.total += 1;
            *report.by_prompt_type.entry(pt.as_str().to_owned()).or_default() += 1;
            *report.by_category.entry(format!("{}.{}", pt.as_str(), cat.as_str())).or_default() += 1;
        }
        report
            .violations
            .extend(p.problems.iter().map(|m| Violation { line: p.line, message: m.clone() }));
    }
    if let Some(expected) = expected {
        for (key, &want) in expected {
            let actual = report.count(key);
            if actual != want {
                report.expectation_failures.push(ExpectationFailure { key: key.clone(), expected: want, actual });
            }
        }
    }
    Ok(report)
}
