use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::encoder::{seeded_uniform, EncoderModel};
use crate::error::{Error, Result};
use crate::ndnum::ImageTensor;
use crate::sbmetrics::PathLogits;
use crate::spectral::InterpolationPath;
use crate::tensor::Tensor;

/// `K` class-anchor embeddings of dimension `D`, standing in for the text-encoder output.
#[derive(Debug, Clone, PartialEq)]
pub struct TextAnchors {
    classes: usize,
    dim: usize,
    rows: Vec<f64>,
}

impl TextAnchors {
    pub fn new(classes: usize, dim: usize, rows: Vec<f64>) -> Result<Self> {
        if classes < 2 {
            return Err(Error::Model(format!("need at least 2 anchors, got {classes}")));
        }
        if dim == 0 || rows.len() != classes * dim {
            return Err(Error::shape(format!("{classes}×{dim} anchors"), rows.len()));
        }
        if rows.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("anchor rows must be finite".into()));
        }
        Ok(Self { classes, dim, rows })
    }

    pub fn from_tensor(t: Tensor) -> Result<Self> {
        match t.shape[..] {
            [k, d] => Self::new(k, d, t.data),
            _ => Err(Error::shape("rank-2 K×D anchors", format!("{:?}", t.shape))),
        }
    }

    /// Uniform `[-1/√D, 1/√D]` anchors from `ChaCha8Rng::seed_from_u64(seed)`.
    pub fn seeded(seed: u64, classes: usize, dim: usize) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = seeded_uniform(&mut rng, vec![classes, dim], dim);
        Self::new(classes, dim, t.data)
    }

    pub fn one_hot(classes: usize, dim: usize) -> Result<Self> {
        let mut rows = vec![0.0; classes * dim];
        for k in 0..classes.min(dim) {
            rows[k * dim + k] = 1.0;
        }
        Self::new(classes, dim, rows)
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.rows[k * self.dim..(k + 1) * self.dim]
    }

    pub fn to_tensor(&self) -> Tensor {
        Tensor {
            shape: vec![self.classes, self.dim],
            data: self.rows.clone(),
        }
    }

    /// `embedding · anchorsᵀ`.
    pub fn logits(&self, embedding: &[f64]) -> Result<Vec<f64>> {
        if embedding.len() != self.dim {
            return Err(Error::shape(
                format!("embedding of dimension {}", self.dim),
                embedding.len(),
            ));
        }
        Ok(self
            .rows
            .chunks_exact(self.dim)
            .map(|a| a.iter().zip(embedding).map(|(p, q)| p * q).sum())
            .collect())
    }
}

/// Raw logits (no softmax) for a single image.
pub fn image_logits(encoder: &EncoderModel, anchors: &TextAnchors, x: &ImageTensor) -> Result<Vec<f64>> {
    check_dims(encoder, anchors)?;
    anchors.logits(&encoder.embed(x)?)
}

fn check_dims(encoder: &EncoderModel, anchors: &TextAnchors) -> Result<()> {
    if encoder.embed_dim != anchors.dim() {
        return Err(Error::shape(
            format!("anchor dimension {}", encoder.embed_dim),
            anchors.dim(),
        ));
    }
    Ok(())
}

/// Logits `f^I(step_q)·anchorsᵀ` for every step of `path`, rows ordered by `λ`.
pub fn clip_logits(
    encoder: &EncoderModel,
    path: &InterpolationPath,
    anchors: &TextAnchors,
    target_class: usize,
) -> Result<PathLogits> {
    check_dims(encoder, anchors)?;
    let logits = path
        .steps
        .iter()
        .map(|s| anchors.logits(&encoder.embed(&s.image)?))
        .collect::<Result<Vec<_>>>()?;
    PathLogits::new(
        path.lambdas(),
        logits,
        target_class,
        path.pair.clone(),
        path.band
            .clone()
            .unwrap_or_else(|| crate::sbmetrics::FULL_PATH.to_owned()),
        path.norm_distance,
    )
}
