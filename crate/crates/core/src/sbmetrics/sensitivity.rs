use serde::{Deserialize, Serialize};

use super::path_logits::PathLogits;
use crate::error::{Error, Result};

/// Pairs whose normalization distance is below this are skipped.
pub const DISTANCE_TOLERANCE: f64 = 1e-6;
/// Ratio denominators at or below this are treated as zero.
pub const RATIO_TOLERANCE: f64 = 1e-8;

/// Mean sensitivity over the retained pairs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensitivityEstimate {
    pub value: f64,
    pub retained: usize,
    pub skipped: usize,
}

/// `Σ_q |z_{q+1} − z_q|` for one class along the path.
pub fn total_variation(path: &PathLogits, class: usize) -> f64 {
    let mut it = path.class_logits(class);
    let Some(mut prev) = it.next() else { return 0.0 };
    let mut tv = 0.0;
    for z in it {
        tv += (z - prev).abs();
        prev = z;
    }
    tv
}

/// Normalized total variation of `class`, or `None` when the endpoints are too close.
pub fn pair_sensitivity_for(path: &PathLogits, class: usize) -> Option<f64> {
    (path.norm_distance >= DISTANCE_TOLERANCE).then(|| total_variation(path, class) / path.norm_distance)
}

/// Normalized total variation of the path's target logit.
pub fn pair_sensitivity(path: &PathLogits) -> Option<f64> {
    pair_sensitivity_for(path, path.target_class)
}

/// Arithmetic mean of the retained per-pair values, summed in the order given.
pub fn mean_over_pairs(values: impl IntoIterator<Item = Option<f64>>) -> Result<SensitivityEstimate> {
    let (mut sum, mut retained, mut skipped) = (0.0, 0usize, 0usize);
    for v in values {
        match v {
            Some(v) => {
                sum += v;
                retained += 1;
            }
            None => skipped += 1,
        }
    }
    if retained == 0 {
        return Err(Error::NoValidPairs { skipped });
    }
    Ok(SensitivityEstimate {
        value: sum / retained as f64,
        retained,
        skipped,
    })
}

/// Expected normalized total variation of the target logit over a set of paths.
pub fn tv_sensitivity(paths: &[PathLogits]) -> Result<SensitivityEstimate> {
    mean_over_pairs(paths.iter().map(pair_sensitivity))
}

/// [`tv_sensitivity`] restricted to paths that all interpolate the same band.
pub fn band_sensitivity(paths: &[PathLogits]) -> Result<SensitivityEstimate> {
    if let Some(first) = paths.first() {
        if let Some(other) = paths.iter().find(|p| p.band != first.band) {
            return Err(Error::InvalidBand(format!(
                "band sensitivity mixes paths for '{}' and '{}'",
                first.band, other.band
            )));
        }
    }
    tv_sensitivity(paths)
}

fn guarded_ratio(numerator: f64, denominator: f64) -> Result<f64> {
    if denominator > RATIO_TOLERANCE {
        Ok(numerator / denominator)
    } else {
        Err(Error::UndefinedRatio { numerator, denominator })
    }
}

/// Low-band over high-band sensitivity; larger means a stronger preference for low frequencies.
pub fn sb_ratio(s_low: f64, s_high: f64) -> Result<f64> {
    guarded_ratio(s_low, s_high)
}

/// A sensitivity at some modulation setting relative to the unmodulated reference.
pub fn decay_ratio(s_setting: f64, s_reference: f64) -> Result<f64> {
    guarded_ratio(s_setting, s_reference)
}
