use serde::{Deserialize, Serialize};

/// Value attached to one band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandSensitivity {
    pub band: String,
    #[serde(rename = "S")]
    pub value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub skipped_pairs: Option<usize>,
}

/// Baseline and per-band sensitivities plus the low/high ratio.
///
/// `S_l` is the first band, `S_h` the last, `S_m` the middle band of a
/// three-band spec; `bands` always carries every band in spec order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivitySummary {
    #[serde(rename = "S")]
    pub baseline: Option<f64>,
    #[serde(rename = "S_l")]
    pub low: Option<f64>,
    #[serde(rename = "S_m")]
    pub mid: Option<f64>,
    #[serde(rename = "S_h")]
    pub high: Option<f64>,
    pub ratio: Option<f64>,
    pub bands: Vec<BandSensitivity>,
}

impl SensitivitySummary {
    pub fn from_bands(baseline: Option<f64>, bands: Vec<BandSensitivity>, ratio: Option<f64>) -> Self {
        let low = bands.first().and_then(|b| b.value);
        let high = if bands.len() > 1 {
            bands.last().and_then(|b| b.value)
        } else {
            None
        };
        let mid = if bands.len() == 3 { bands[1].value } else { None };
        Self {
            baseline,
            low,
            mid,
            high,
            ratio,
            bands,
        }
    }

    pub fn band(&self, name: &str) -> Option<f64> {
        self.bands.iter().find(|b| b.band == name).and_then(|b| b.value)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub run: usize,
    pub seed: u64,
    pub pairs: usize,
    pub sampled_with_replacement: bool,
    /// Full-path pairs skipped for a too-small `‖x1 − x2‖`.
    pub skipped_pairs: usize,
    #[serde(flatten)]
    pub values: SensitivitySummary,
}

/// Sensitivities at a modulation setting divided by those at the reference.
pub type DecayRatios = SensitivitySummary;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Modulation {
    pub parameter: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityReport {
    pub config: serde_json::Value,
    pub modulation: Option<Modulation>,
    pub per_run: Vec<RunSummary>,
    pub mean: SensitivitySummary,
    pub decay: Option<DecayRatios>,
    pub warnings: Vec<String>,
}
