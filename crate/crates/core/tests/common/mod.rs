//! Independent reference implementations and fixture builders shared by the
//! integration tests and the acceptance gate.
#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};

use polyinsert_core::datasetforge::{ExpectedCounts, FrameScore};
use polyinsert_core::imagecore::{Image, Mask};
use polyinsert_core::rng::SplitMix64;

/// Compensated (Neumaier) summation.
pub fn neumaier(xs: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut c = 0.0f64;
    for x in xs {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            c += (sum - t) + x;
        } else {
            c += (x - t) + sum;
        }
        sum = t;
    }
    if sum.is_finite() {
        sum + c
    } else {
        sum
    }
}

/// Softmax without max-subtraction: each weight is `1 / Σ_l exp(s_l − s_j)`,
/// so no exponent is ever taken of a raw logit.
pub fn softmax_oracle(logits: &[f64]) -> Vec<f64> {
    logits
        .iter()
        .map(|&sj| 1.0 / neumaier(logits.iter().map(|&sl| (sl - sj).exp())))
        .collect()
}

pub fn logits_oracle(q: &[Vec<f64>], k: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let d = q[0].len() as f64;
    q.iter()
        .map(|qi| k.iter().map(|kj| neumaier(qi.iter().zip(kj).map(|(a, b)| a * b)) / d.sqrt()).collect())
        .collect()
}

pub fn mma_oracle(q: &[Vec<f64>], k: &[Vec<f64>], v: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let dv = v[0].len();
    logits_oracle(q, k)
        .iter()
        .map(|s| {
            let w = softmax_oracle(s);
            (0..dv).map(|c| neumaier(w.iter().zip(v).map(|(wj, vj)| wj * vj[c]))).collect()
        })
        .collect()
}

pub fn random_rows(rng: &mut SplitMix64, rows: usize, dim: usize, amp: f64) -> Vec<Vec<f64>> {
    (0..rows).map(|_| (0..dim).map(|_| rng.symmetric(amp)).collect()).collect()
}

/// Dilation by direct neighbourhood scan.
pub fn dilate_oracle(m: &Mask, radius: usize) -> Mask {
    let (w, h) = m.dims();
    let r = radius as isize;
    Mask::from_fn(w, h, |x, y| {
        for dy in -r..=r {
            for dx in -r..=r {
                let nx = x as isize + dx;
                let ny = y as isize + dy;
                if nx >= 0 && ny >= 0 && (nx as usize) < w && (ny as usize) < h && m.get(nx as usize, ny as usize) {
                    return true;
                }
            }
        }
        false
    })
    .unwrap()
}

pub fn random_mask(rng: &mut SplitMix64, w: usize, h: usize, density: f64) -> Mask {
    Mask::from_fn(w, h, |_, _| rng.next_f64() < density).unwrap()
}

pub fn random_image(rng: &mut SplitMix64, w: usize, h: usize, channels: usize) -> Image {
    Image::from_fn(w, h, channels, |_, _| (0..channels).map(|_| rng.next_u64() as u8).collect()).unwrap()
}

/// Exhaustive scan over every ordered frame pair.
pub fn keyframe_oracle(scores: &[FrameScore], threshold: f64, max_angle: f64) -> Option<(usize, usize)> {
    let clear = |f: &FrameScore| f.laplacian_variance >= threshold;
    let mut best: Option<(usize, usize)> = None;
    for i in 0..scores.len() {
        let is_first_clear = clear(&scores[i]) && scores[..i].iter().all(|f| !clear(f));
        for j in i + 1..scores.len() {
            let a = &scores[i];
            let b = &scores[j];
            let dist = [(a.yaw - b.yaw).abs(), (a.pitch - b.pitch).abs(), (a.roll - b.roll).abs()]
                .into_iter()
                .fold(0.0, f64::max);
            if is_first_clear && clear(b) && dist <= max_angle && best.is_none_or(|(_, e)| b.index > e) {
                best = Some((a.index, b.index));
            }
        }
    }
    best
}

pub fn random_frames(rng: &mut SplitMix64, n: usize) -> Vec<FrameScore> {
    let mut index = 0;
    let mut yaw = 0.0;
    (0..n)
        .map(|_| {
            index += 1 + rng.range_inclusive(0, 3) as usize;
            yaw += rng.symmetric(6.0);
            FrameScore {
                index,
                laplacian_variance: rng.next_f64() * 100.0,
                yaw,
                pitch: rng.symmetric(10.0),
                roll: rng.symmetric(10.0),
            }
        })
        .collect()
}

/// Population-variance Laplacian response computed pixel by pixel.
pub fn laplacian_variance_oracle(gray: &Image) -> f64 {
    let (w, h) = gray.dims();
    let at = |x: isize, y: isize| {
        let cx = x.clamp(0, w as isize - 1) as usize;
        let cy = y.clamp(0, h as isize - 1) as usize;
        gray.pixel(cx, cy)[0] as f64
    };
    let mut resp = Vec::with_capacity(w * h);
    for y in 0..h as isize {
        for x in 0..w as isize {
            resp.push(at(x - 1, y) + at(x + 1, y) + at(x, y - 1) + at(x, y + 1) - 4.0 * at(x, y));
        }
    }
    let mean = neumaier(resp.iter().copied()) / resp.len() as f64;
    neumaier(resp.iter().map(|r| (r - mean) * (r - mean))) / resp.len() as f64
}

/// The masked-insertion result the mock backend should produce when no
/// resampling happens: inside `m` the background-removed reference mirrored
/// left-right, elsewhere the source.
pub fn mirrored_fill_oracle(reference: &Image, ref_mask: &Mask, source: &Image, m: &Mask) -> Image {
    let (w, h) = source.dims();
    Image::from_fn(w, h, 3, |x, y| {
        if m.get(x, y) {
            let rx = w - 1 - x;
            if ref_mask.get(rx, y) {
                reference.pixel(rx, y).to_vec()
            } else {
                vec![255, 255, 255]
            }
        } else {
            source.pixel(x, y).to_vec()
        }
    })
    .unwrap()
}

pub fn pipeline_fixture() -> (Image, Mask, Image, Mask) {
    let reference = Image::from_fn(16, 16, 3, |x, y| vec![(x * 15) as u8, (y * 15) as u8, ((x + y) * 7) as u8]).unwrap();
    let ref_mask = Mask::from_fn(16, 16, |x, y| (x as i32 - 8).pow(2) + (y as i32 - 8).pow(2) <= 36).unwrap();
    let source = Image::from_fn(16, 16, 3, |x, y| vec![30 + (x * 3) as u8, 200 - (y * 5) as u8, 90]).unwrap();
    // 6×6 block: area ratio 0.14 is above the zoom threshold, so no resampling.
    let m = Mask::from_fn(16, 16, |x, y| (4..10).contains(&x) && (5..11).contains(&y)).unwrap();
    (reference, ref_mask, source, m)
}

/// Category composition of the held-out evaluation split.
pub fn target_split() -> [(&'static str, &'static str, usize); 5] {
    [
        ("mask", "object", 40),
        ("mask", "garment", 30),
        ("mask", "person", 60),
        ("text", "object", 16),
        ("text", "garment", 22),
    ]
}

pub fn target_split_expectations() -> ExpectedCounts {
    let mut e = ExpectedCounts::new();
    e.insert("total".into(), 158);
    e.insert("mask".into(), 120);
    e.insert("text".into(), 38);
    for (pt, cat, n) in target_split() {
        e.insert(format!("{pt}.{cat}"), n);
    }
    e
}

/// Writes a manifest with the split's composition plus the small PNGs it
/// points at; returns the manifest path.
pub fn write_split_manifest(dir: &Path) -> PathBuf {
    let img = Image::filled(4, 4, 3, 128).unwrap();
    let mask = Mask::from_fn(4, 4, |x, y| x == y).unwrap();
    img.save_png(dir.join("img.png")).unwrap();
    mask.save_png(dir.join("mask.png")).unwrap();
    let mut lines = Vec::new();
    for (pt, cat, n) in target_split() {
        for i in 0..n {
            let line = if pt == "mask" {
                serde_json::json!({
                    "prompt_type": "mask", "category": cat,
                    "reference_image": "img.png", "reference_mask": "mask.png",
                    "target_image": "img.png", "target_mask": "mask.png",
                })
            } else {
                serde_json::json!({
                    "prompt_type": "text", "category": cat,
                    "reference_image": "img.png", "reference_mask": "mask.png",
                    "target_image": "img.png", "source_image": "img.png",
                    "text": format!("add a {cat} #{i}"),
                })
            };
            lines.push(line.to_string());
        }
    }
    let path = dir.join("split.jsonl");
    fs::write(&path, lines.join("\n") + "\n").unwrap();
    path
}

/// Feature rows whose sample mean is exactly `mean` and whose unbiased sample
/// covariance is exactly the identity: a random cloud is centred and whitened
/// through a Cholesky factor of its own covariance.
pub fn whitened_features(rng: &mut SplitMix64, n: usize, mean: &[f64]) -> Vec<Vec<f64>> {
    let d = mean.len();
    let raw = random_rows(rng, n, d, 1.0);
    let mu: Vec<f64> = (0..d).map(|c| neumaier(raw.iter().map(|r| r[c])) / n as f64).collect();
    let centred: Vec<Vec<f64>> = raw.iter().map(|r| r.iter().zip(&mu).map(|(a, m)| a - m).collect()).collect();
    let mut cov = vec![vec![0.0; d]; d];
    for (a, row) in cov.iter_mut().enumerate() {
        for (b, cell) in row.iter_mut().enumerate() {
            *cell = neumaier(centred.iter().map(|r| r[a] * r[b])) / (n - 1) as f64;
        }
    }
    // Cholesky: cov = L Lᵀ.
    let mut l = vec![vec![0.0; d]; d];
    for i in 0..d {
        for j in 0..=i {
            let s = neumaier((0..j).map(|k| l[i][k] * l[j][k]));
            if i == j {
                l[i][j] = (cov[i][i] - s).sqrt();
            } else {
                l[i][j] = (cov[i][j] - s) / l[j][j];
            }
        }
    }
    // Solve L z = x for each centred row, then shift.
    centred
        .iter()
        .map(|x| {
            let mut z = vec![0.0; d];
            for i in 0..d {
                let s = neumaier((0..i).map(|k| l[i][k] * z[k]));
                z[i] = (x[i] - s) / l[i][i];
            }
            z.iter().zip(mean).map(|(a, m)| a + m).collect()
        })
        .collect()
}

/// Closed-form Fréchet distance between 1-D Gaussian fits (unbiased
/// variance, each regularized by `eps`).
pub fn frechet_1d_oracle(p: &[f64], q: &[f64], eps: f64) -> f64 {
    let stats = |v: &[f64]| {
        let m = neumaier(v.iter().copied()) / v.len() as f64;
        let var = neumaier(v.iter().map(|x| (x - m) * (x - m))) / (v.len() - 1) as f64 + eps;
        (m, var)
    };
    let (mp, vp) = stats(p);
    let (mq, vq) = stats(q);
    (mp - mq).powi(2) + (vp.sqrt() - vq.sqrt()).powi(2)
}
