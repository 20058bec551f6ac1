//! Experiment configuration, read from JSON and overridden by CLI flags.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::container::{load_model, read_tensor};
use super::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::models::{
    check_beta, check_gamma_s, fixture_encoder, seeded_matrix, Activation, EncoderModel, FixtureKind, TextAnchors,
};
use crate::spectral::{BandSpec, PathForm};

/// Environment variable consulted when neither the flags nor the config set a seed.
pub const SEED_ENV: &str = "SBMETER_SEED";

/// Which logit of a pair is tracked along the path.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetPolicy {
    /// The class of `x1`, where the path starts.
    #[default]
    X1,
    X2,
    /// Mean of the two per-class sensitivities.
    MeanOfBoth,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    Beta,
    GammaS,
    Cutoff,
}

impl SweepParameter {
    /// Unmodulated value that decay ratios are measured against.
    pub fn reference(self) -> f64 {
        1.0
    }

    pub fn name(self) -> &'static str {
        match self {
            SweepParameter::Beta => "beta",
            SweepParameter::GammaS => "gamma_s",
            SweepParameter::Cutoff => "cutoff",
        }
    }

    pub fn check(self, value: f64) -> Result<()> {
        match self {
            SweepParameter::Beta => check_beta(value),
            SweepParameter::GammaS => check_gamma_s(value),
            SweepParameter::Cutoff if value > 0.0 && value.is_finite() => Ok(()),
            SweepParameter::Cutoff => Err(Error::Domain(format!("cutoff must be positive, got {value}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
}

/// In-memory noise corpus, used when no dataset directory is given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    #[serde(default)]
    pub seed: u64,
    pub classes: usize,
    pub per_class: usize,
    pub shape: [usize; 3],
}

fn default_embed_dim() -> usize {
    8
}

fn default_patch() -> usize {
    4
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    Linear {
        #[serde(default)]
        seed: u64,
        #[serde(default = "default_embed_dim")]
        embed_dim: usize,
    },
    Smoothing {
        #[serde(default = "one")]
        cutoff: f64,
        #[serde(default)]
        seed: u64,
        #[serde(default = "default_embed_dim")]
        embed_dim: usize,
    },
    TinyCnn {
        #[serde(default)]
        seed: u64,
        #[serde(default = "default_embed_dim")]
        embed_dim: usize,
        #[serde(default)]
        activation: Option<Activation>,
    },
    TinyPrenormBlock {
        #[serde(default)]
        seed: u64,
        #[serde(default = "default_embed_dim")]
        embed_dim: usize,
        #[serde(default = "one")]
        gamma_s: f64,
        #[serde(default = "default_patch")]
        patch: usize,
    },
    /// An SBM1 model file.
    File { path: PathBuf },
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec::TinyCnn {
            seed: 0,
            embed_dim: default_embed_dim(),
            activation: None,
        }
    }
}

impl ModelSpec {
    pub fn build(&self, input_shape: [usize; 3]) -> Result<EncoderModel> {
        let flat = input_shape.iter().product();
        let kind = match *self {
            ModelSpec::Linear { seed, embed_dim } => FixtureKind::Linear {
                weight: seeded_matrix(seed, embed_dim, flat),
            },
            ModelSpec::Smoothing {
                cutoff,
                seed,
                embed_dim,
            } => FixtureKind::Smoothing {
                cutoff,
                weight: seeded_matrix(seed, embed_dim, flat),
            },
            ModelSpec::TinyCnn {
                seed,
                embed_dim,
                activation,
            } => FixtureKind::TinyCnn {
                seed,
                embed_dim,
                activation: activation.unwrap_or(Activation::Relu),
            },
            ModelSpec::TinyPrenormBlock {
                seed,
                embed_dim,
                gamma_s,
                patch,
            } => FixtureKind::TinyPrenormBlock {
                seed,
                gamma_s,
                embed_dim,
                patch,
            },
            ModelSpec::File { ref path } => {
                let model = load_model(path)?;
                if model.input_shape != input_shape {
                    return Err(Error::Model(format!(
                        "{} expects input {:?}, dataset images are {:?}",
                        path.display(),
                        model.input_shape,
                        input_shape
                    )));
                }
                return Ok(model);
            }
        };
        fixture_encoder(kind, input_shape)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AnchorSpec {
    /// Seeded uniform `K×D` rows.
    Seeded {
        #[serde(default)]
        seed: u64,
    },
    /// `K×D` SBT1 tensor.
    File { path: PathBuf },
    /// Row `k` selects embedding coordinate `k`.
    OneHot,
}

impl Default for AnchorSpec {
    fn default() -> Self {
        AnchorSpec::Seeded { seed: 0 }
    }
}

impl AnchorSpec {
    pub fn build(&self, classes: usize, dim: usize) -> Result<TextAnchors> {
        let anchors = match self {
            AnchorSpec::Seeded { seed } => TextAnchors::seeded(*seed, classes, dim)?,
            AnchorSpec::File { path } => TextAnchors::from_tensor(read_tensor(path)?)?,
            AnchorSpec::OneHot => TextAnchors::one_hot(classes, dim)?,
        };
        if anchors.classes() != classes || anchors.dim() != dim {
            return Err(Error::shape(
                format!("{classes}×{dim} anchors"),
                format!("{}×{}", anchors.classes(), anchors.dim()),
            ));
        }
        Ok(anchors)
    }
}

fn default_thresholds() -> Vec<f64> {
    BandSpec::default().thresholds()
}

fn default_steps() -> usize {
    16
}

fn default_pairs() -> usize {
    2000
}

fn default_runs() -> usize {
    3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Directory holding `labels.csv` and the images.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<SyntheticSpec>,
    /// Interior radial thresholds; `[0.25, 0.8]` gives low/mid/high.
    #[serde(default = "default_thresholds")]
    pub band_thresholds: Vec<f64>,
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default = "default_pairs")]
    pub pairs: usize,
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
    #[serde(default)]
    pub target: TargetPolicy,
    #[serde(default)]
    pub path_form: PathForm,
    #[serde(default)]
    pub model: ModelSpec,
    #[serde(default)]
    pub anchors: AnchorSpec,
    /// BetaReLU swapped into every activation site before measuring.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    /// Extra LayerNorm scale applied before measuring.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub export_logits: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields have defaults")
    }
}

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub pairs: Option<usize>,
    pub steps: Option<usize>,
    pub runs: Option<usize>,
    pub band_thresholds: Option<Vec<f64>>,
    pub beta: Option<f64>,
    pub gamma_s: Option<f64>,
    pub output: Option<PathBuf>,
    pub export_logits: Option<PathBuf>,
    pub workers: Option<usize>,
    pub dataset: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn apply(&mut self, o: Overrides) {
        macro_rules! take {
            ($($field:ident),*) => {$(
                if let Some(v) = o.$field {
                    self.$field = v.into();
                }
            )*};
        }
        take!(pairs, steps, runs, band_thresholds);
        if o.seed.is_some() {
            self.seed = o.seed;
        }
        if o.beta.is_some() {
            self.beta = o.beta;
        }
        if o.gamma_s.is_some() {
            self.gamma_s = o.gamma_s;
        }
        if o.output.is_some() {
            self.output = o.output;
        }
        if o.export_logits.is_some() {
            self.export_logits = o.export_logits;
        }
        if o.workers.is_some() {
            self.workers = o.workers;
        }
        if o.dataset.is_some() {
            self.dataset = o.dataset;
            self.synthetic = None;
        }
    }

    /// Config seed, then `SBMETER_SEED`, then 0.
    pub fn resolve_seed(&self) -> Result<u64> {
        if let Some(s) = self.seed {
            return Ok(s);
        }
        match std::env::var(SEED_ENV) {
            Ok(v) => v
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("{SEED_ENV}='{v}' is not an unsigned integer"))),
            Err(_) => Ok(0),
        }
    }

    pub fn band_spec(&self) -> Result<BandSpec> {
        BandSpec::from_thresholds(&self.band_thresholds)
    }

    pub fn validate(&self) -> Result<()> {
        if self.pairs == 0 {
            return Err(Error::Config("pairs must be at least 1".into()));
        }
        if self.runs == 0 {
            return Err(Error::Config("runs must be at least 1".into()));
        }
        if self.steps < 2 {
            return Err(Error::Config(format!("steps must be at least 2, got {}", self.steps)));
        }
        if self.workers == Some(0) {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        self.band_spec()?;
        if let Some(b) = self.beta {
            check_beta(b)?;
        }
        if let Some(g) = self.gamma_s {
            check_gamma_s(g)?;
        }
        if let Some(sweep) = &self.sweep {
            if sweep.values.is_empty() {
                return Err(Error::Config("sweep needs at least one value".into()));
            }
            for &v in &sweep.values {
                sweep.parameter.check(v)?;
            }
        }
        match (&self.dataset, &self.synthetic) {
            (Some(_), Some(_)) => Err(Error::Config("set either 'dataset' or 'synthetic', not both".into())),
            (None, None) => Err(Error::Config("no dataset: set 'dataset' or 'synthetic'".into())),
            _ => Ok(()),
        }
    }

    pub fn load_dataset(&self) -> Result<LabeledDataset> {
        match (&self.dataset, &self.synthetic) {
            (Some(dir), _) => LabeledDataset::load_dir(dir),
            (None, Some(s)) => LabeledDataset::synthetic(s.seed, s.classes, s.per_class, s.shape),
            (None, None) => Err(Error::Config("no dataset: set 'dataset' or 'synthetic'".into())),
        }
    }

    /// The config as recorded in reports: seed resolved, and without output
    /// paths or worker count, so reports do not depend on where they are
    /// written or how many threads computed them.
    pub fn echo(&self, seed: u64) -> Result<serde_json::Value> {
        let mut c = self.clone();
        c.seed = Some(seed);
        c.output = None;
        c.export_logits = None;
        c.workers = None;
        Ok(serde_json::to_value(c)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = ExperimentConfig::default();
        assert_eq!(c.steps, 16);
        assert_eq!(c.pairs, 2000);
        assert_eq!(c.runs, 3);
        assert_eq!(c.band_thresholds, vec![0.25, 0.8]);
        assert_eq!(c.target, TargetPolicy::X1);
        assert_eq!(c.path_form, PathForm::Anchored);
    }

    #[test]
    fn parses_and_overrides() {
        let mut c = ExperimentConfig::from_json(
            r#"{"synthetic": {"classes": 2, "per_class": 3, "shape": [3, 8, 8]},
                "seed": 5, "pairs": 10, "target": "mean_of_both",
                "model": {"kind": "smoothing", "cutoff": 0.5},
                "sweep": {"parameter": "cutoff", "values": [0.9, 0.3]}}"#,
        )
        .unwrap();
        assert_eq!(c.pairs, 10);
        assert_eq!(c.target, TargetPolicy::MeanOfBoth);
        c.apply(Overrides {
            seed: Some(9),
            steps: Some(4),
            band_thresholds: Some(vec![0.5]),
            workers: Some(3),
            ..Default::default()
        });
        assert_eq!(c.seed, Some(9));
        assert_eq!(c.steps, 4);
        assert_eq!(c.band_spec().unwrap().len(), 2);
        c.validate().unwrap();
        let echo = c.echo(9).unwrap();
        assert!(echo.get("workers").is_none());
        assert_eq!(echo["seed"], 9);
    }

    #[test]
    fn rejects_bad_values() {
        let base = r#""synthetic": {"classes": 2, "per_class": 1, "shape": [1, 4, 4]}"#;
        for extra in [
            r#""pairs": 0"#,
            r#""runs": 0"#,
            r#""steps": 1"#,
            r#""beta": 0.0"#,
            r#""gamma_s": -1.0"#,
            r#""band_thresholds": [0.8, 0.25]"#,
            r#""sweep": {"parameter": "beta", "values": [1.5]}"#,
        ] {
            let c = ExperimentConfig::from_json(&format!("{{{base}, {extra}}}")).unwrap();
            assert!(c.validate().is_err(), "{extra}");
        }
        assert!(ExperimentConfig::from_json(r#"{"bogus": 1}"#).is_err());
        assert!(ExperimentConfig::default().validate().is_err());
    }

    #[test]
    fn explicit_seed_wins() {
        let c = ExperimentConfig {
            seed: Some(17),
            ..Default::default()
        };
        assert_eq!(c.resolve_seed().unwrap(), 17);
    }
}
