//! Frequency-wise accuracy contributions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::LabeledDataset;
use crate::models::{image_logits, EncoderModel, TextAnchors};
use crate::spectral::{decompose, BandSpec};

/// Index of the largest logit; ties resolve to the lowest index.
pub fn argmax(logits: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in logits.iter().enumerate().skip(1) {
        if v > logits[best] {
            best = i;
        }
    }
    best
}

/// Accuracy gained by each band when bands are added cumulatively, lowest first.
///
/// Counts are kept as integers so the contributions sum exactly to the
/// full-input accuracy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyContributions {
    pub bands: Vec<String>,
    /// Correct predictions on each cumulative prefix; the last entry is the full input.
    pub prefix_correct: Vec<usize>,
    pub total: usize,
}

impl AccuracyContributions {
    /// Correct-count gain of band `i`.
    pub fn gain_count(&self, i: usize) -> i64 {
        let prev = if i == 0 { 0 } else { self.prefix_correct[i - 1] as i64 };
        self.prefix_correct[i] as i64 - prev
    }

    /// Accuracy contribution of band `name` as a fraction.
    pub fn contribution(&self, name: &str) -> Result<f64> {
        let i = self
            .bands
            .iter()
            .position(|b| b == name)
            .ok_or_else(|| Error::InvalidBand(format!("no contribution recorded for band '{name}'")))?;
        Ok(self.gain_count(i) as f64 / self.total as f64)
    }

    pub fn contributions(&self) -> Vec<f64> {
        (0..self.bands.len())
            .map(|i| self.gain_count(i) as f64 / self.total as f64)
            .collect()
    }

    pub fn full_accuracy(&self) -> f64 {
        *self.prefix_correct.last().expect("at least one band") as f64 / self.total as f64
    }
}

/// Per-band contributions: band 1 is the accuracy on `x^{l}`, band j>1 the
/// accuracy on the prefix through j minus the prefix through j−1. The last
/// prefix is evaluated on `x` itself.
pub fn acc_contribution(
    encoder: &EncoderModel,
    anchors: &TextAnchors,
    dataset: &LabeledDataset,
    spec: &BandSpec,
) -> Result<AccuracyContributions> {
    if dataset.is_empty() {
        return Err(Error::Dataset("accuracy contribution needs a non-empty dataset".into()));
    }
    let nb = spec.len();
    let mut prefix_correct = vec![0usize; nb];
    for item in dataset.items() {
        let parts = decompose(&item.image, spec)?;
        let mut acc = parts[0].clone();
        for (j, slot) in prefix_correct.iter_mut().enumerate() {
            let input = if j + 1 == nb {
                item.image.clone()
            } else {
                if j > 0 {
                    acc = acc.add(&parts[j])?;
                }
                acc.clone()
            };
            if argmax(&image_logits(encoder, anchors, &input)?) == item.label {
                *slot += 1;
            }
        }
    }
    Ok(AccuracyContributions {
        bands: spec.names().map(str::to_owned).collect(),
        prefix_correct,
        total: dataset.len(),
    })
}

/// Contributions from a sequence of cumulative-prefix accuracies (any unit).
pub fn contributions_from_prefix(prefix_accuracy: &[f64]) -> Vec<f64> {
    let mut prev = 0.0;
    prefix_accuracy
        .iter()
        .map(|&a| {
            let c = a - prev;
            prev = a;
            c
        })
        .collect()
}

/// `ΔAcc(band)`: contribution of the modulated model minus that of the reference.
pub fn delta_acc(modulated: &AccuracyContributions, reference: &AccuracyContributions, band: &str) -> Result<f64> {
    if modulated.bands != reference.bands {
        return Err(Error::InvalidBand(format!(
            "band sets differ: {:?} vs {:?}",
            modulated.bands, reference.bands
        )));
    }
    Ok(modulated.contribution(band)? - reference.contribution(band)?)
}
