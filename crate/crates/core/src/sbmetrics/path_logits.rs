use crate::error::{Error, Result};
use crate::spectral::PairId;

/// Band label used for the full-image (baseline) path.
pub const FULL_PATH: &str = "full";

/// Logits along one interpolation path: `n` rows of `K` class logits.
#[derive(Debug, Clone, PartialEq)]
pub struct PathLogits {
    pub lambdas: Vec<f64>,
    pub logits: Vec<Vec<f64>>,
    pub target_class: usize,
    pub pair: PairId,
    /// Band name, or [`FULL_PATH`].
    pub band: String,
    /// `‖x1 − x2‖` for the full path, `‖x1^k − x2^k‖` for a band path.
    pub norm_distance: f64,
}

impl PathLogits {
    pub fn new(
        lambdas: Vec<f64>,
        logits: Vec<Vec<f64>>,
        target_class: usize,
        pair: PairId,
        band: impl Into<String>,
        norm_distance: f64,
    ) -> Result<Self> {
        let p = Self {
            lambdas,
            logits,
            target_class,
            pair,
            band: band.into(),
            norm_distance,
        };
        p.validate()
            .map_err(|msg| Error::Domain(format!("invalid path logits: {msg}")))?;
        Ok(p)
    }

    /// Checks the record invariants, returning a human-readable reason on failure.
    pub fn validate(&self) -> std::result::Result<(), String> {
        let n = self.lambdas.len();
        if n < 2 {
            return Err(format!("path needs at least 2 steps, got {n}"));
        }
        if self.logits.len() != n {
            return Err(format!("{} logit rows for {n} lambdas", self.logits.len()));
        }
        if self.lambdas.iter().any(|l| !l.is_finite()) || self.lambdas.windows(2).any(|w| w[0] >= w[1]) {
            return Err("lambda grid is not strictly increasing".into());
        }
        let k = self.logits[0].len();
        if k == 0 || self.logits.iter().any(|r| r.len() != k) {
            return Err("logit rows have inconsistent or zero width".into());
        }
        if self.target_class >= k {
            return Err(format!("target class {} out of range for K={k}", self.target_class));
        }
        if self.logits.iter().flatten().any(|v| !v.is_finite()) {
            return Err("logits contain NaN or infinite values".into());
        }
        if !(self.norm_distance >= 0.0 && self.norm_distance.is_finite()) {
            return Err(format!(
                "norm distance {} is not a finite non-negative value",
                self.norm_distance
            ));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        self.lambdas.len()
    }

    pub fn classes(&self) -> usize {
        self.logits[0].len()
    }

    pub fn is_full_path(&self) -> bool {
        self.band == FULL_PATH
    }

    /// The logit sequence of `class` along the path.
    pub fn class_logits(&self, class: usize) -> impl Iterator<Item = f64> + '_ {
        self.logits.iter().map(move |row| row[class])
    }
}
