//! Hybrid mask generation: box masks, Bezier-augmented box masks, dilated
//! segmentation masks, and the small amount of mask algebra the dataset
//! procedures need.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::imagecore::{ImageError, Mask, Rect};
use crate::rng::SplitMix64;

/// Dilation radius at the reference working resolution.
pub const DEFAULT_DILATION_RADIUS: usize = 15;
/// Working resolution at which [`DEFAULT_DILATION_RADIUS`] applies.
pub const DILATION_REFERENCE_RESOLUTION: usize = 768;
/// Smallest side accepted by [`bezier_augment`].
pub const MIN_AUGMENT_SIDE: usize = 8;

#[derive(Debug, Error)]
pub enum MaskError {
    #[error("mask has no true bits")]
    EmptyMask,
    #[error("rect {rect:?} outside {width}x{height}")]
    OutOfBounds { rect: Rect, width: usize, height: usize },
    #[error("rect {0:?} smaller than {MIN_AUGMENT_SIDE}x{MIN_AUGMENT_SIDE}")]
    RectTooSmall(Rect),
    #[error("dimension mismatch: {0:?} vs {1:?}")]
    DimensionMismatch((usize, usize), (usize, usize)),
    #[error("{kind:?} masks are not permitted for the {category:?} category")]
    KindNotPermitted { category: Category, kind: MaskKind },
    #[error(transparent)]
    Image(#[from] ImageError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Object,
    Garment,
    Person,
}

impl Category {
    pub fn as_str(self) -> &'static str {
        match self {
            Category::Object => "object",
            Category::Garment => "garment",
            Category::Person => "person",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskKind {
    Box,
    BoxAugmented,
    SegmentationDilated,
}

/// Mask kinds allowed for a category: objects and garments get box-style
/// masks only, people additionally get dilated segmentation silhouettes.
pub fn permitted_kinds(category: Category) -> &'static [MaskKind] {
    match category {
        Category::Object | Category::Garment => &[MaskKind::Box, MaskKind::BoxAugmented],
        Category::Person => &[MaskKind::Box, MaskKind::BoxAugmented, MaskKind::SegmentationDilated],
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MaskStrategy {
    pub category: Category,
    pub kind: MaskKind,
    pub rng_seed: u64,
}

impl MaskStrategy {
    pub fn new(category: Category, kind: MaskKind, rng_seed: u64) -> Result<Self, MaskError> {
        if !permitted_kinds(category).contains(&kind) {
            return Err(MaskError::KindNotPermitted { category, kind });
        }
        Ok(Self { category, kind, rng_seed })
    }

    /// Chooses a kind uniformly among those permitted for `category`.
    pub fn sample(category: Category, rng_seed: u64) -> Self {
        let kinds = permitted_kinds(category);
        let mut rng = SplitMix64::new(rng_seed);
        let kind = kinds[rng.range_inclusive(0, kinds.len() as u64 - 1) as usize];
        // Decorrelate the augmentation stream from the kind draw.
        let rng_seed = rng.next_u64();
        Self { category, kind, rng_seed }
    }

    /// Turns a segmentation (or any region) mask into a training/inference mask.
    pub fn generate(&self, region: &Mask, dilation_radius: usize) -> Result<Mask, MaskError> {
        let (w, h) = region.dims();
        match self.kind {
            MaskKind::Box => box_mask(bbox_of(region)?, w, h),
            MaskKind::BoxAugmented => bezier_augment(bbox_of(region)?, w, h, self.rng_seed),
            MaskKind::SegmentationDilated => {
                if region.is_empty() {
                    return Err(MaskError::EmptyMask);
                }
                Ok(dilate(region, dilation_radius))
            }
        }
    }
}

/// Default dilation radius scaled to a working resolution.
pub fn scaled_dilation_radius(resolution: usize) -> usize {
    ((DEFAULT_DILATION_RADIUS * resolution) as f64 / DILATION_REFERENCE_RESOLUTION as f64).round() as usize
}

pub fn bbox_of(m: &Mask) -> Result<Rect, MaskError> {
    let (w, h) = m.dims();
    let (mut x0, mut y0, mut x1, mut y1) = (usize::MAX, usize::MAX, 0, 0);
    for y in 0..h {
        for x in 0..w {
            if m.get(x, y) {
                x0 = x0.min(x);
                y0 = y0.min(y);
                x1 = x1.max(x);
                y1 = y1.max(y);
            }
        }
    }
    if x0 == usize::MAX {
        return Err(MaskError::EmptyMask);
    }
    Ok(Rect::new(x0, y0, x1 - x0 + 1, y1 - y0 + 1))
}

pub fn box_mask(r: Rect, width: usize, height: usize) -> Result<Mask, MaskError> {
    if !r.fits_in(width, height) {
        return Err(MaskError::OutOfBounds { rect: r, width, height });
    }
    Ok(Mask::from_fn(width, height, |x, y| x >= r.x && x < r.right() && y >= r.y && y < r.bottom())?)
}

/// Tunables for [`bezier_augment_with`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BezierConfig {
    pub min_anchors: u64,
    pub max_anchors: u64,
    /// Jitter amplitude as a fraction of the rect's shorter side.
    pub jitter_fraction: f64,
    pub samples_per_segment: usize,
}

impl Default for BezierConfig {
    fn default() -> Self {
        Self { min_anchors: 5, max_anchors: 12, jitter_fraction: 0.15, samples_per_segment: 64 }
    }
}

impl BezierConfig {
    /// Jitter amplitude in whole pixels for `r`.
    pub fn amplitude(&self, r: &Rect) -> usize {
        (self.jitter_fraction * r.w.min(r.h) as f64).round() as usize
    }
}

#[derive(Clone, Copy, Debug)]
struct Point {
    x: f64,
    y: f64,
}

impl Point {
    fn lerp(self, o: Point, t: f64) -> Point {
        Point { x: self.x + (o.x - self.x) * t, y: self.y + (o.y - self.y) * t }
    }
}

fn cubic(p0: Point, p1: Point, p2: Point, p3: Point, t: f64) -> Point {
    let u = 1.0 - t;
    let (a, b, c, d) = (u * u * u, 3.0 * u * u * t, 3.0 * u * t * t, t * t * t);
    Point { x: a * p0.x + b * p1.x + c * p2.x + d * p3.x, y: a * p0.y + b * p1.y + c * p2.y + d * p3.y }
}

/// Box mask with a jittered Bezier outline, using [`BezierConfig::default`].
pub fn bezier_augment(r: Rect, width: usize, height: usize, seed: u64) -> Result<Mask, MaskError> {
    bezier_augment_with(r, width, height, seed, &BezierConfig::default())
}

/// Replaces the straight sides of `r` with a closed loop of cubic Bezier
/// segments and fills it.
///
/// The four corners plus `k - 4` uniformly drawn perimeter positions form the
/// anchors (`k` in `[min_anchors, max_anchors]`), so every segment lies on
/// one side of the rectangle. Both inner control points of a segment sit at
/// its thirds and are pushed along that side's outward normal by a uniform
/// offset in `[-a, a]`. The loop is flattened at `samples_per_segment`
/// points per segment and filled by an even-odd scanline pass over pixel
/// centres.
///
/// The outline runs along pixel edges (`x - 0.5`), so with zero jitter the
/// fill is exactly the box, and every control point stays within `a` of it:
/// the result is always inside the box dilated by `a`.
pub fn bezier_augment_with(
    r: Rect,
    width: usize,
    height: usize,
    seed: u64,
    cfg: &BezierConfig,
) -> Result<Mask, MaskError> {
    if !r.fits_in(width, height) {
        return Err(MaskError::OutOfBounds { rect: r, width, height });
    }
    if r.w < MIN_AUGMENT_SIDE || r.h < MIN_AUGMENT_SIDE {
        return Err(MaskError::RectTooSmall(r));
    }
    let mut rng = SplitMix64::new(seed);
    let amp = cfg.amplitude(&r) as f64;
    let k = rng.range_inclusive(cfg.min_anchors, cfg.max_anchors.max(cfg.min_anchors));

    let left = r.x as f64 - 0.5;
    let top = r.y as f64 - 0.5;
    let (bw, bh) = (r.w as f64, r.h as f64);
    let perimeter = 2.0 * (bw + bh);
    let corners = [0.0, bw, bw + bh, 2.0 * bw + bh];

    let mut stops: Vec<f64> = corners.to_vec();
    for _ in 0..k.saturating_sub(4) {
        stops.push(rng.next_f64() * perimeter);
    }
    stops.sort_by(f64::total_cmp);
    stops.dedup();

    // Perimeter position -> (point, outward normal of the side it lies on).
    let locate = |s: f64| -> (Point, Point) {
        if s <= bw {
            (Point { x: left + s, y: top }, Point { x: 0.0, y: -1.0 })
        } else if s <= bw + bh {
            (Point { x: left + bw, y: top + (s - bw) }, Point { x: 1.0, y: 0.0 })
        } else if s <= 2.0 * bw + bh {
            (Point { x: left + bw - (s - bw - bh), y: top + bh }, Point { x: 0.0, y: 1.0 })
        } else {
            (Point { x: left, y: top + bh - (s - 2.0 * bw - bh) }, Point { x: -1.0, y: 0.0 })
        }
    };

    let samples = cfg.samples_per_segment.max(1);
    let mut outline = Vec::with_capacity(stops.len() * samples);
    for (i, &s0) in stops.iter().enumerate() {
        let s1 = if i + 1 < stops.len() { stops[i + 1] } else { perimeter };
        let (a, _) = locate(s0);
        let (b, _) = if s1 >= perimeter { locate(0.0) } else { locate(s1) };
        let (_, normal) = locate(0.5 * (s0 + s1));
        let j1 = rng.symmetric(amp);
        let j2 = rng.symmetric(amp);
        let c1 = a.lerp(b, 1.0 / 3.0);
        let c2 = a.lerp(b, 2.0 / 3.0);
        let c1 = Point { x: c1.x + normal.x * j1, y: c1.y + normal.y * j1 };
        let c2 = Point { x: c2.x + normal.x * j2, y: c2.y + normal.y * j2 };
        for step in 0..samples {
            outline.push(cubic(a, c1, c2, b, step as f64 / samples as f64));
        }
    }

    Ok(scanline_fill(&outline, width, height)?)
}

/// Even-odd fill of a closed polygon, sampling at integer pixel centres.
fn scanline_fill(poly: &[Point], width: usize, height: usize) -> Result<Mask, ImageError> {
    let mut mask = Mask::filled(width, height, false)?;
    let (min_y, max_y) = poly
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.y), hi.max(p.y)));
    let y_start = min_y.ceil().max(0.0) as usize;
    let y_end = (max_y.floor().min(height as f64 - 1.0)).max(-1.0);
    if y_end < 0.0 {
        return Ok(mask);
    }
    let mut xs = Vec::new();
    for y in y_start..=y_end as usize {
        let yc = y as f64;
        xs.clear();
        for (i, &p) in poly.iter().enumerate() {
            let q = poly[(i + 1) % poly.len()];
            if (p.y <= yc && yc < q.y) || (q.y <= yc && yc < p.y) {
                xs.push(p.x + (yc - p.y) * (q.x - p.x) / (q.y - p.y));
            }
        }
        xs.sort_by(f64::total_cmp);
        for pair in xs.chunks_exact(2) {
            let x0 = pair[0].ceil().max(0.0);
            let x1 = pair[1].floor().min(width as f64 - 1.0);
            if x1 < x0 {
                continue;
            }
            for x in x0 as usize..=x1 as usize {
                mask.set(x, y, true);
            }
        }
    }
    Ok(mask)
}

/// Morphological dilation by a `(2r+1)`-square structuring element, applied
/// as separable row and column passes over prefix counts.
pub fn dilate(m: &Mask, radius: usize) -> Mask {
    if radius == 0 {
        return m.clone();
    }
    let (w, h) = m.dims();
    let pass = |len: usize, get: &dyn Fn(usize) -> bool| -> Vec<bool> {
        let mut prefix = vec![0usize; len + 1];
        for i in 0..len {
            prefix[i + 1] = prefix[i] + get(i) as usize;
        }
        (0..len)
            .map(|i| {
                let lo = i.saturating_sub(radius);
                let hi = (i + radius + 1).min(len);
                prefix[hi] > prefix[lo]
            })
            .collect()
    };
    let mut rows = vec![false; w * h];
    for y in 0..h {
        let out = pass(w, &|x| m.get(x, y));
        rows[y * w..(y + 1) * w].copy_from_slice(&out);
    }
    let mut bits = vec![false; w * h];
    for x in 0..w {
        let out = pass(h, &|y| rows[y * w + x]);
        for (y, v) in out.into_iter().enumerate() {
            bits[y * w + x] = v;
        }
    }
    Mask::new(w, h, bits).expect("dimensions preserved")
}

fn zip_bits(a: &Mask, b: &Mask, op: impl Fn(bool, bool) -> bool) -> Result<Mask, MaskError> {
    if a.dims() != b.dims() {
        return Err(MaskError::DimensionMismatch(a.dims(), b.dims()));
    }
    let bits = a.bits().iter().zip(b.bits()).map(|(&x, &y)| op(x, y)).collect();
    Ok(Mask::new(a.width(), a.height(), bits)?)
}

pub fn union(a: &Mask, b: &Mask) -> Result<Mask, MaskError> {
    zip_bits(a, b, |x, y| x || y)
}

pub fn intersection(a: &Mask, b: &Mask) -> Result<Mask, MaskError> {
    zip_bits(a, b, |x, y| x && y)
}

/// Intersection over union; two empty masks have IoU 1.
pub fn iou(a: &Mask, b: &Mask) -> Result<f64, MaskError> {
    let inter = intersection(a, b)?.count();
    let uni = union(a, b)?.count();
    Ok(if uni == 0 { 1.0 } else { inter as f64 / uni as f64 })
}

pub fn area_ratio(m: &Mask) -> f64 {
    m.count() as f64 / (m.width() * m.height()) as f64
}
