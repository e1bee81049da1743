//! Vector arithmetic and similarity primitives shared by every other module.
//!
//! All arithmetic is `f64`. Reductions run in fixed index order so that
//! repeated evaluation is bit-identical; nothing here reassociates sums.

use crate::error::{Error, Result};

/// Tolerance for the "unit vector" flag: `|‖v‖ − 1| ≤ UNIT_TOLERANCE`.
pub const UNIT_TOLERANCE: f64 = 1e-9;

/// A real vector in the shared multimodal embedding space.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector {
    values: Vec<f64>,
}

impl EmbeddingVector {
    /// Builds a vector, rejecting empty or non-finite input.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyInput("embedding vector"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("embedding vector".into()));
        }
        Ok(Self { values })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn l2_norm(&self) -> f64 {
        dot(&self.values, &self.values).sqrt()
    }

    /// Whether this vector qualifies for the "unit" flag.
    pub fn is_unit(&self) -> bool {
        (self.l2_norm() - 1.0).abs() <= UNIT_TOLERANCE
    }
}

/// Dot product accumulated in index order. Callers guarantee equal lengths.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0;
    for i in 0..a.len() {
        acc += a[i] * b[i];
    }
    acc
}

fn check_dims(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::DimMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    Ok(())
}

/// Scales `v` to unit L2 norm, preserving direction.
pub fn l2_normalize(v: &EmbeddingVector) -> Result<EmbeddingVector> {
    let norm = v.l2_norm();
    if norm == 0.0 {
        return Err(Error::ZeroNorm);
    }
    let values = v.values().iter().map(|x| x / norm).collect();
    EmbeddingVector::new(values)
}

/// Cosine similarity over raw slices; the kernel every similarity in the
/// engine goes through.
pub fn cosine_slices(a: &[f64], b: &[f64]) -> Result<f64> {
    check_dims(a, b)?;
    let na = dot(a, a).sqrt();
    let nb = dot(b, b).sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroNorm);
    }
    Ok(dot(a, b) / (na * nb))
}

/// Cosine similarity `aᵀb / (‖a‖‖b‖)`, in `[-1, 1]`.
pub fn cosine_similarity(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64> {
    cosine_slices(a.values(), b.values())
}

/// Cosine similarity together with its gradient in both arguments:
/// `∂cos/∂a = b/(‖a‖‖b‖) − cos·a/‖a‖²` and symmetrically for `b`.
pub fn cosine_with_grad(a: &[f64], b: &[f64]) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    check_dims(a, b)?;
    let na = dot(a, a).sqrt();
    let nb = dot(b, b).sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroNorm);
    }
    let inv = 1.0 / (na * nb);
    // Same rounding as `cosine_slices` for the value itself.
    let cos = dot(a, b) / (na * nb);
    let mut da = vec![0.0; a.len()];
    let mut db = vec![0.0; b.len()];
    let ca = cos / (na * na);
    let cb = cos / (nb * nb);
    for i in 0..a.len() {
        da[i] = b[i] * inv - ca * a[i];
        db[i] = a[i] * inv - cb * b[i];
    }
    Ok((cos, da, db))
}

/// Square matrix of text-to-image cosine similarities; rows index texts,
/// columns index images.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    entries: Vec<f64>,
    n: usize,
}

impl SimilarityMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.entries[row * self.n + col]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }
}

/// Entry `(i, j)` is `cosine_similarity(texts[i], images[j])`, computed
/// through the same kernel as the scalar call.
pub fn similarity_matrix(
    texts: &[EmbeddingVector],
    images: &[EmbeddingVector],
) -> Result<SimilarityMatrix> {
    if texts.is_empty() || images.is_empty() {
        return Err(Error::EmptyInput("similarity matrix"));
    }
    if texts.len() != images.len() {
        return Err(Error::DimMismatch {
            left: texts.len(),
            right: images.len(),
        });
    }
    let n = texts.len();
    let mut entries = Vec::with_capacity(n * n);
    for text in texts {
        for image in images {
            entries.push(cosine_similarity(text, image)?);
        }
    }
    Ok(SimilarityMatrix { entries, n })
}
