//! Image quality metrics: PSNR, SSIM and the Fréchet distance between
//! Gaussian fits of two feature sets (FID when the features come from an
//! Inception network).

use std::io::BufRead;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize, Serializer};
use thiserror::Error;

use crate::imagecore::{self, Image, ImageError, Mask, Rect};
use crate::maskgen;

/// PSNR used in place of +∞ when averaging.
pub const PSNR_CAP_DB: f64 = 100.0;
pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;
/// Diagonal loading added to both covariances before the matrix square root.
pub const FID_EPSILON: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("image {width}x{height} smaller than the {SSIM_WINDOW}px SSIM window")]
    TooSmall { width: usize, height: usize },
    #[error("feature dimension mismatch: {0} vs {1}")]
    DimMismatch(usize, usize),
    #[error("feature statistics are not finite")]
    DegenerateFeatures,
    #[error("feature set needs at least 2 finite samples: {0}")]
    InvalidFeatures(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("empty mask")]
    EmptyMask,
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

fn check_same(a: &Image, b: &Image) -> Result<(), MetricError> {
    if !a.same_shape(b) {
        return Err(MetricError::DimensionMismatch(format!(
            "{}x{}x{} vs {}x{}x{}",
            a.width(),
            a.height(),
            a.channels(),
            b.width(),
            b.height(),
            b.channels()
        )));
    }
    Ok(())
}

fn psnr_from_mse(mse: f64) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (255.0 * 255.0 / mse).log10()
    }
}

/// Peak signal-to-noise ratio in dB; identical images give `f64::INFINITY`.
pub fn psnr(a: &Image, b: &Image) -> Result<f64, MetricError> {
    check_same(a, b)?;
    let sse: f64 = a.data().iter().zip(b.data()).map(|(&x, &y)| (x as f64 - y as f64).powi(2)).sum();
    Ok(psnr_from_mse(sse / a.data().len() as f64))
}

/// PSNR over the pixels where `m` is true.
pub fn psnr_masked(a: &Image, b: &Image, m: &Mask) -> Result<f64, MetricError> {
    check_same(a, b)?;
    if m.dims() != a.dims() {
        return Err(MetricError::DimensionMismatch("mask vs image".into()));
    }
    let c = a.channels();
    let (mut sse, mut n) = (0.0, 0usize);
    for (i, &on) in m.bits().iter().enumerate() {
        if on {
            for k in 0..c {
                let d = a.data()[i * c + k] as f64 - b.data()[i * c + k] as f64;
                sse += d * d;
            }
            n += c;
        }
    }
    if n == 0 {
        return Err(MetricError::EmptyMask);
    }
    Ok(psnr_from_mse(sse / n as f64))
}

fn gaussian_taps() -> [f64; SSIM_WINDOW] {
    let mut taps = [0.0; SSIM_WINDOW];
    let half = (SSIM_WINDOW / 2) as f64;
    for (i, t) in taps.iter_mut().enumerate() {
        let d = i as f64 - half;
        *t = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let sum: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= sum);
    taps
}

/// 'Valid' separable Gaussian filtering: output is `(w-10) x (h-10)`.
fn filter_valid(plane: &[f64], w: usize, h: usize, taps: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let ow = w - SSIM_WINDOW + 1;
    let oh = h - SSIM_WINDOW + 1;
    let mut rows = vec![0.0; ow * h];
    for y in 0..h {
        let src = &plane[y * w..(y + 1) * w];
        for x in 0..ow {
            rows[y * ow + x] = taps.iter().zip(&src[x..x + SSIM_WINDOW]).map(|(t, v)| t * v).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = taps.iter().enumerate().map(|(k, t)| t * rows[(y + k) * ow + x]).sum();
        }
    }
    out
}

fn ssim_channel(a: &[f64], b: &[f64], w: usize, h: usize, taps: &[f64; SSIM_WINDOW]) -> f64 {
    let c1 = (SSIM_K1 * 255.0).powi(2);
    let c2 = (SSIM_K2 * 255.0).powi(2);
    let aa: Vec<f64> = a.iter().map(|x| x * x).collect();
    let bb: Vec<f64> = b.iter().map(|x| x * x).collect();
    let ab: Vec<f64> = a.iter().zip(b).map(|(x, y)| x * y).collect();
    let mu_a = filter_valid(a, w, h, taps);
    let mu_b = filter_valid(b, w, h, taps);
    let e_aa = filter_valid(&aa, w, h, taps);
    let e_bb = filter_valid(&bb, w, h, taps);
    let e_ab = filter_valid(&ab, w, h, taps);
    let n = mu_a.len();
    let mut total = 0.0;
    for i in 0..n {
        let (ma, mb) = (mu_a[i], mu_b[i]);
        let va = e_aa[i] - ma * ma;
        let vb = e_bb[i] - mb * mb;
        let cov = e_ab[i] - ma * mb;
        total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
    }
    total / n as f64
}

/// Mean SSIM over all 11×11 Gaussian windows (σ = 1.5) fully inside the
/// image, averaged across channels.
pub fn ssim(a: &Image, b: &Image) -> Result<f64, MetricError> {
    check_same(a, b)?;
    let (w, h) = a.dims();
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(MetricError::TooSmall { width: w, height: h });
    }
    let taps = gaussian_taps();
    let c = a.channels();
    let mut sum = 0.0;
    for ch in 0..c {
        let pa: Vec<f64> = a.data().iter().skip(ch).step_by(c).map(|&v| v as f64).collect();
        let pb: Vec<f64> = b.data().iter().skip(ch).step_by(c).map(|&v| v as f64).collect();
        sum += ssim_channel(&pa, &pb, w, h, &taps);
    }
    Ok(sum / c as f64)
}

/// Bounding box of `m` grown (and shifted in bounds) to at least the SSIM window.
pub fn mask_local_rect(m: &Mask) -> Result<Rect, MetricError> {
    let bbox = maskgen::bbox_of(m).map_err(|_| MetricError::EmptyMask)?;
    let (w, h) = m.dims();
    let grow = |start: usize, len: usize, extent: usize| -> (usize, usize) {
        let size = len.max(SSIM_WINDOW).min(extent);
        let extra = size - len;
        let s = start.saturating_sub(extra / 2).min(extent - size);
        (s, size)
    };
    let (x, rw) = grow(bbox.x, bbox.w, w);
    let (y, rh) = grow(bbox.y, bbox.h, h);
    Ok(Rect::new(x, y, rw, rh))
}

/// SSIM restricted to the window returned by [`mask_local_rect`].
pub fn ssim_masked(a: &Image, b: &Image, m: &Mask) -> Result<f64, MetricError> {
    check_same(a, b)?;
    let r = mask_local_rect(m)?;
    ssim(&imagecore::crop(a, r)?, &imagecore::crop(b, r)?)
}

/// `n` feature vectors of dimension `dim`, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureSet {
    n: usize,
    dim: usize,
    vectors: Vec<f64>,
}

impl FeatureSet {
    pub fn new(n: usize, dim: usize, vectors: Vec<f64>) -> Result<Self, MetricError> {
        if n < 2 {
            return Err(MetricError::InvalidFeatures(format!("{n} samples")));
        }
        if dim == 0 || vectors.len() != n * dim {
            return Err(MetricError::InvalidFeatures(format!("{} values for {n}x{dim}", vectors.len())));
        }
        if vectors.iter().any(|v| !v.is_finite()) {
            return Err(MetricError::InvalidFeatures("non-finite entry".into()));
        }
        Ok(Self { n, dim, vectors })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, MetricError> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(MetricError::InvalidFeatures("ragged rows".into()));
        }
        Self::new(rows.len(), dim, rows.concat())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.vectors[i * self.dim..(i + 1) * self.dim]
    }

    /// Sample mean and unbiased (`n - 1`) covariance, accumulated in row order.
    pub fn statistics(&self) -> (DVector<f64>, DMatrix<f64>) {
        let mut mean = DVector::zeros(self.dim);
        for i in 0..self.n {
            mean += DVector::from_column_slice(self.row(i));
        }
        mean /= self.n as f64;
        let mut cov = DMatrix::zeros(self.dim, self.dim);
        for i in 0..self.n {
            let d = DVector::from_column_slice(self.row(i)) - &mean;
            cov += &d * d.transpose();
        }
        cov /= (self.n - 1) as f64;
        (mean, cov)
    }

    /// Parses the feature-vector text format: a `dim=<D>` header, then one
    /// comma-separated vector per line. Blank lines are skipped.
    pub fn parse(reader: impl BufRead) -> Result<Self, MetricError> {
        let mut lines = reader.lines().enumerate();
        let dim = match lines.next() {
            Some((_, line)) => {
                let line = line?;
                line.trim()
                    .strip_prefix("dim=")
                    .and_then(|d| d.parse::<usize>().ok())
                    .ok_or(MetricError::Parse { line: 1, message: format!("expected `dim=<D>`, got `{line}`") })?
            }
            None => return Err(MetricError::Parse { line: 1, message: "missing header".into() }),
        };
        let mut values = Vec::new();
        let mut n = 0;
        for (i, line) in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let row: Result<Vec<f64>, _> = line.split(',').map(|v| v.trim().parse::<f64>()).collect();
            let row = row.map_err(|e| MetricError::Parse { line: i + 1, message: e.to_string() })?;
            if row.len() != dim {
                return Err(MetricError::Parse { line: i + 1, message: format!("{} values, expected {dim}", row.len()) });
            }
            values.extend(row);
            n += 1;
        }
        Self::new(n, dim, values)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, MetricError> {
        Self::parse(std::io::BufReader::new(std::fs::File::open(path)?))
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("dim={}\n", self.dim);
        for i in 0..self.n {
            let row: Vec<String> = self.row(i).iter().map(f64::to_string).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

/// Square root of a symmetric PSD matrix via eigendecomposition; negative
/// eigenvalues from round-off are clamped to zero.
fn sqrt_psd(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(m.clone());
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.transpose()
}

/// `‖μp − μq‖² + Tr(Σp + Σq − 2 (Σp^½ Σq Σp^½)^½)` with `ε I` added to both
/// covariances.
pub fn frechet_distance(p: &FeatureSet, q: &FeatureSet) -> Result<f64, MetricError> {
    if p.dim != q.dim {
        return Err(MetricError::DimMismatch(p.dim, q.dim));
    }
    let (mu_p, mut cov_p) = p.statistics();
    let (mu_q, mut cov_q) = q.statistics();
    let eps = DMatrix::identity(p.dim, p.dim) * FID_EPSILON;
    cov_p += &eps;
    cov_q += &eps;
    let root_p = sqrt_psd(&cov_p);
    let inner = &root_p * &cov_q * &root_p;
    let inner = (&inner + inner.transpose()) * 0.5;
    let trace_cross: f64 = SymmetricEigen::new(inner).eigenvalues.iter().map(|l| l.max(0.0).sqrt()).sum();
    let diff = mu_p - mu_q;
    let fd = diff.dot(&diff) + cov_p.trace() + cov_q.trace() - 2.0 * trace_cross;
    if !fd.is_finite() {
        return Err(MetricError::DegenerateFeatures);
    }
    Ok(fd)
}

fn serialize_db<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    if v.is_infinite() {
        s.serialize_str(if *v > 0.0 { "inf" } else { "-inf" })
    } else {
        s.serialize_f64(*v)
    }
}

/// One line of an evaluation manifest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalEntry {
    pub generated: PathBuf,
    pub ground_truth: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lpips: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricRow {
    pub line: usize,
    pub generated: PathBuf,
    pub ground_truth: PathBuf,
    #[serde(serialize_with = "serialize_db")]
    pub psnr_db: f64,
    pub ssim: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lpips: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LineError {
    pub line: usize,
    pub message: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct MetricReport {
    pub rows: Vec<MetricRow>,
    pub errors: Vec<LineError>,
    pub mean_psnr_db: Option<f64>,
    pub mean_ssim: Option<f64>,
    pub mean_lpips: Option<f64>,
    pub fid: Option<f64>,
}

#[derive(Clone, Debug, Default)]
pub struct EvalOptions {
    /// Score only the masked region (needs a `mask` column).
    pub mask_local: bool,
    /// Feature sets for the generated and reference images.
    pub features: Option<(FeatureSet, FeatureSet)>,
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

fn evaluate_entry(entry: &EvalEntry, base: &Path, mask_local: bool) -> Result<(f64, f64), String> {
    let generated = Image::load_png(base.join(&entry.generated)).map_err(|e| format!("generated: {e}"))?;
    let truth = Image::load_png(base.join(&entry.ground_truth)).map_err(|e| format!("ground_truth: {e}"))?;
    let (generated, truth) = if generated.channels() == truth.channels() {
        (generated, truth)
    } else {
        (generated.to_rgb(), truth.to_rgb())
    };
    if mask_local {
        let mpath = entry.mask.as_ref().ok_or("mask-local scoring needs a mask column")?;
        let m = Mask::load_png(base.join(mpath)).map_err(|e| format!("mask: {e}"))?;
        let p = psnr_masked(&generated, &truth, &m).map_err(|e| e.to_string())?;
        let s = ssim_masked(&generated, &truth, &m).map_err(|e| e.to_string())?;
        Ok((p, s))
    } else {
        let p = psnr(&generated, &truth).map_err(|e| e.to_string())?;
        let s = ssim(&generated, &truth).map_err(|e| e.to_string())?;
        Ok((p, s))
    }
}

/// Scores every manifest line. Per-line failures are recorded in
/// [`MetricReport::errors`] rather than aborting; rows keep manifest order.
pub fn evaluate_manifest_reader(
    reader: impl BufRead,
    base: &Path,
    opts: &EvalOptions,
) -> Result<MetricReport, MetricError> {
    let mut entries = Vec::new();
    let mut errors = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<EvalEntry>(&line) {
            Ok(e) => entries.push((i + 1, e)),
            Err(e) => errors.push(LineError { line: i + 1, message: e.to_string() }),
        }
    }
    let scored: Vec<_> = entries
        .par_iter()
        .map(|(line, e)| (*line, e, evaluate_entry(e, base, opts.mask_local)))
        .collect();
    let mut rows = Vec::new();
    for (line, e, result) in scored {
        match result {
            Ok((psnr_db, ssim)) => rows.push(MetricRow {
                line,
                generated: e.generated.clone(),
                ground_truth: e.ground_truth.clone(),
                psnr_db,
                ssim,
                lpips: e.lpips,
            }),
            Err(message) => errors.push(LineError { line, message }),
        }
    }
    errors.sort_by_key(|e| e.line);
    let fid = match &opts.features {
        Some((a, b)) => Some(frechet_distance(a, b)?),
        None => None,
    };
    Ok(MetricReport {
        mean_psnr_db: mean(rows.iter().map(|r| r.psnr_db.min(PSNR_CAP_DB))),
        mean_ssim: mean(rows.iter().map(|r| r.ssim)),
        mean_lpips: mean(rows.iter().filter_map(|r| r.lpips)),
        rows,
        errors,
        fid,
    })
}

pub fn evaluate_manifest(path: &Path, opts: &EvalOptions) -> Result<MetricReport, MetricError> {
    let file = std::fs::File::open(path)?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    evaluate_manifest_reader(std::io::BufReader::new(file), &base, opts)
}
