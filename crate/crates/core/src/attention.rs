//! Reference multimodal attention over concatenated text and image tokens.
//!
//! Queries, keys and values are formed by stacking the text-branch rows
//! above the image-branch rows, and attention is the plain
//! `softmax(Q Kᵀ / √d) V` with `d` the query feature dimension. This is a
//! verification kernel: dense, single-head, unmasked, double precision.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum AttentionError {
    #[error("dimension mismatch: {0}")]
    DimMismatch(String),
    #[error("attention needs at least one key")]
    EmptyKeys,
    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("buffer length {actual} does not match {rows}x{dim}")]
    BufferLength { rows: usize, dim: usize, actual: usize },
}

/// Dense row-major matrix of per-token feature rows.
#[derive(Clone, Debug, PartialEq)]
pub struct TokenMatrix {
    rows: usize,
    dim: usize,
    values: Vec<f64>,
}

impl TokenMatrix {
    pub fn new(rows: usize, dim: usize, values: Vec<f64>) -> Result<Self, AttentionError> {
        if values.len() != rows * dim {
            return Err(AttentionError::BufferLength { rows, dim, actual: values.len() });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(AttentionError::NonFinite { row: i / dim.max(1), col: i % dim.max(1) });
        }
        Ok(Self { rows, dim, values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, AttentionError> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(AttentionError::DimMismatch("ragged rows".into()));
        }
        Self::new(rows.len(), dim, rows.concat())
    }

    pub fn zeros(rows: usize, dim: usize) -> Self {
        Self { rows, dim, values: vec![0.0; rows * dim] }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.dim + j]
    }

    /// Splits into the first `at` rows and the rest.
    pub fn split_rows(&self, at: usize) -> (TokenMatrix, TokenMatrix) {
        let at = at.min(self.rows);
        let (head, tail) = self.values.split_at(at * self.dim);
        (
            TokenMatrix { rows: at, dim: self.dim, values: head.to_vec() },
            TokenMatrix { rows: self.rows - at, dim: self.dim, values: tail.to_vec() },
        )
    }
}

/// Stacks text rows above image rows.
pub fn concat_tokens(text: &TokenMatrix, image: &TokenMatrix) -> Result<TokenMatrix, AttentionError> {
    if text.rows == 0 {
        return Ok(image.clone());
    }
    if image.rows == 0 {
        return Ok(text.clone());
    }
    if text.dim != image.dim {
        return Err(AttentionError::DimMismatch(format!("text dim {} vs image dim {}", text.dim, image.dim)));
    }
    let mut values = Vec::with_capacity(text.values.len() + image.values.len());
    values.extend_from_slice(&text.values);
    values.extend_from_slice(&image.values);
    Ok(TokenMatrix { rows: text.rows + image.rows, dim: text.dim, values })
}

fn check_qk(q: &TokenMatrix, k: &TokenMatrix) -> Result<(), AttentionError> {
    if k.rows == 0 {
        return Err(AttentionError::EmptyKeys);
    }
    if q.dim != k.dim {
        return Err(AttentionError::DimMismatch(format!("query dim {} vs key dim {}", q.dim, k.dim)));
    }
    Ok(())
}

/// Row-stochastic `softmax(Q Kᵀ / √d)`, shape `q.rows × k.rows`.
pub fn attention_weights(q: &TokenMatrix, k: &TokenMatrix) -> Result<TokenMatrix, AttentionError> {
    check_qk(q, k)?;
    let scale = if q.dim == 0 { 1.0 } else { 1.0 / (q.dim as f64).sqrt() };
    let mut out = Vec::with_capacity(q.rows * k.rows);
    let mut logits = vec![0.0; k.rows];
    for i in 0..q.rows {
        let qi = q.row(i);
        for (j, logit) in logits.iter_mut().enumerate() {
            *logit = qi.iter().zip(k.row(j)).map(|(a, b)| a * b).sum::<f64>() * scale;
        }
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let start = out.len();
        let mut total = 0.0;
        for &l in &logits {
            let e = (l - max).exp();
            total += e;
            out.push(e);
        }
        for w in &mut out[start..] {
            *w /= total;
        }
    }
    Ok(TokenMatrix { rows: q.rows, dim: k.rows, values: out })
}

/// `softmax(Q Kᵀ / √d) V`.
pub fn mma(q: &TokenMatrix, k: &TokenMatrix, v: &TokenMatrix) -> Result<TokenMatrix, AttentionError> {
    check_qk(q, k)?;
    if k.rows != v.rows {
        return Err(AttentionError::DimMismatch(format!("{} keys vs {} values", k.rows, v.rows)));
    }
    let weights = attention_weights(q, k)?;
    let mut out = vec![0.0; q.rows * v.dim];
    for i in 0..q.rows {
        let dst = &mut out[i * v.dim..(i + 1) * v.dim];
        for (j, &w) in weights.row(i).iter().enumerate() {
            for (o, &x) in dst.iter_mut().zip(v.row(j)) {
                *o += w * x;
            }
        }
    }
    Ok(TokenMatrix { rows: q.rows, dim: v.dim, values: out })
}
