//! Visual perturbation by semantic shift: the text-side deviation between an
//! original caption and a hard-negative caption is added to the raw image
//! embedding to synthesize a slot-aligned visual hard negative.
//!
//! No renormalization happens here; cosine similarity normalizes downstream.

use crate::embedding::EmbeddingVector;
use crate::error::{Error, Result};

/// One synthesized visual negative. `embedding` is exactly
/// `image + delta` and `delta` is exactly `text_neg − text_orig`, both kept
/// so the construction can be re-verified bit-for-bit.
#[derive(Debug, Clone)]
pub struct VisualNegative {
    pub embedding: EmbeddingVector,
    pub delta: EmbeddingVector,
    pub slot: usize,
}

/// Visual negatives for one image, slot-bijective with the textual set that
/// induced them.
#[derive(Debug, Clone)]
pub struct VisualNegativeSet {
    pub source_image_id: String,
    pub negatives: Vec<VisualNegative>,
}

impl VisualNegativeSet {
    pub fn len(&self) -> usize {
        self.negatives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.negatives.is_empty()
    }
}

fn check_dims(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::DimMismatch {
            left: a.dim(),
            right: b.dim(),
        });
    }
    Ok(())
}

/// Componentwise `text_neg − text_orig`: the semantic shift vector.
pub fn deviation_embedding(
    text_orig: &EmbeddingVector,
    text_neg: &EmbeddingVector,
) -> Result<EmbeddingVector> {
    check_dims(text_orig, text_neg)?;
    let values = text_neg
        .values()
        .iter()
        .zip(text_orig.values())
        .map(|(n, o)| n - o)
        .collect();
    EmbeddingVector::new(values)
}

/// Raw addition `image + delta`, deliberately unnormalized.
pub fn perturb_image_embedding(
    image: &EmbeddingVector,
    delta: &EmbeddingVector,
) -> Result<EmbeddingVector> {
    check_dims(image, delta)?;
    let values = image
        .values()
        .iter()
        .zip(delta.values())
        .map(|(i, d)| i + d)
        .collect();
    EmbeddingVector::new(values)
}

/// One visual negative per textual negative embedding, slot-aligned:
/// `image + (text_neg[n] − text_orig)`.
pub fn build_visual_negatives(
    source_image_id: &str,
    image: &EmbeddingVector,
    text_orig: &EmbeddingVector,
    text_negatives: &[EmbeddingVector],
) -> Result<VisualNegativeSet> {
    check_dims(image, text_orig)?;
    let mut negatives = Vec::with_capacity(text_negatives.len());
    for (slot, text_neg) in text_negatives.iter().enumerate() {
        let delta = deviation_embedding(text_orig, text_neg)?;
        let embedding = perturb_image_embedding(image, &delta)?;
        negatives.push(VisualNegative {
            embedding,
            delta,
            slot,
        });
    }
    Ok(VisualNegativeSet {
        source_image_id: source_image_id.to_string(),
        negatives,
    })
}
