//! Measurement runs and modulation sweeps.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, SweepParameter, TargetPolicy};
use super::container::ingest_path_logits;
use super::dataset::LabeledDataset;
use super::sampling::sample_pairs;
use crate::error::{Error, Result};
use crate::models::{clip_logits, EncoderModel, TextAnchors};
use crate::sbmetrics::{
    decay_ratio, mean_over_pairs, pair_sensitivity, pair_sensitivity_for, sb_ratio, BandSensitivity, DecayRatios,
    Modulation, PathLogits, RunSummary, SensitivityReport, SensitivitySummary,
};
use crate::spectral::{band_path_from_components, decompose, linear_path, BandSpec, InterpolationPath, PairId};

/// Report plus, when requested, every path's logits in pair order.
#[derive(Debug, Clone)]
pub struct Measurement {
    pub report: SensitivityReport,
    pub path_logits: Vec<PathLogits>,
}

/// One report per sweep value, reference first when it had to be inserted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub parameter: String,
    pub reference: f64,
    pub reports: Vec<SensitivityReport>,
}

/// Sensitivities recomputed from stored path logits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestSummary {
    pub records: usize,
    /// Full-path records below the distance tolerance.
    pub skipped_pairs: usize,
    #[serde(flatten)]
    pub values: SensitivitySummary,
    pub warnings: Vec<String>,
}

struct PairOutcome {
    full: Option<f64>,
    bands: Vec<Option<f64>>,
    logits: Vec<PathLogits>,
}

/// A configured experiment: data, encoder and anchors resolved, surgery applied.
#[derive(Debug, Clone)]
pub struct Experiment {
    config: ExperimentConfig,
    seed: u64,
    spec: BandSpec,
    dataset: LabeledDataset,
    model: EncoderModel,
    anchors: TextAnchors,
    warnings: Vec<String>,
}

impl Experiment {
    /// Loads the dataset and builds the model and anchors named in `config`.
    pub fn from_config(config: ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let dataset = config.load_dataset()?;
        let model = config.model.build(dataset.image_shape())?;
        let anchors = config.anchors.build(dataset.num_classes(), model.embed_dim)?;
        Self::new(config, dataset, model, anchors)
    }

    /// Uses the given parts; dataset and model fields of `config` are only echoed.
    pub fn new(
        config: ExperimentConfig,
        dataset: LabeledDataset,
        model: EncoderModel,
        anchors: TextAnchors,
    ) -> Result<Self> {
        for (what, bad) in [
            ("pairs", config.pairs == 0),
            ("runs", config.runs == 0),
            ("workers", config.workers == Some(0)),
        ] {
            if bad {
                return Err(Error::Config(format!("{what} must be at least 1")));
            }
        }
        if config.steps < 2 {
            return Err(Error::Config(format!("steps must be at least 2, got {}", config.steps)));
        }
        let spec = config.band_spec()?;
        let seed = config.resolve_seed()?;
        let [c, h, w] = dataset.image_shape();
        if model.input_shape != [c, h, w] {
            return Err(Error::Model(format!(
                "model expects input {:?}, dataset images are {:?}",
                model.input_shape,
                [c, h, w]
            )));
        }
        if anchors.classes() != dataset.num_classes() {
            return Err(Error::shape(
                format!("{} anchor rows (one per class)", dataset.num_classes()),
                anchors.classes(),
            ));
        }
        if anchors.dim() != model.embed_dim {
            return Err(Error::shape(
                format!("anchor dimension {}", model.embed_dim),
                anchors.dim(),
            ));
        }
        let mut warnings = Vec::new();
        let mut model = model;
        if let Some(beta) = config.beta {
            let s = model.swap_activations(beta)?;
            warnings.extend(s.warning("activation"));
            model = s.model;
        }
        if let Some(gamma_s) = config.gamma_s {
            let s = model.scale_layernorms(gamma_s)?;
            warnings.extend(s.warning("LayerNorm"));
            model = s.model;
        }
        Ok(Self {
            config,
            seed,
            spec,
            dataset,
            model,
            anchors,
            warnings,
        })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn model(&self) -> &EncoderModel {
        &self.model
    }

    pub fn dataset(&self) -> &LabeledDataset {
        &self.dataset
    }

    pub fn band_spec(&self) -> &BandSpec {
        &self.spec
    }

    /// Runs `runs` measurements with seeds `seed, seed+1, ...` and averages them.
    pub fn measure(&self) -> Result<Measurement> {
        self.measure_model(&self.model, None, self.config.export_logits.is_some())
    }

    /// Like [`Experiment::measure`], always keeping the path logits.
    pub fn measure_with_logits(&self) -> Result<Measurement> {
        self.measure_model(&self.model, None, true)
    }

    /// One measurement per sweep value, with decay ratios against the reference.
    pub fn sweep(&self) -> Result<SweepReport> {
        let sweep = self
            .config
            .sweep
            .as_ref()
            .ok_or_else(|| Error::Config("no sweep configured".into()))?;
        let parameter = sweep.parameter;
        let reference = parameter.reference();
        let mut values = sweep.values.clone();
        for &v in &values {
            parameter.check(v)?;
        }
        if !values.contains(&reference) {
            values.insert(0, reference);
        }
        self.check_applicable(parameter)?;

        let mut reports = Vec::with_capacity(values.len());
        for &value in &values {
            let model = self.modulate(parameter, value)?;
            let modulation = Modulation {
                parameter: parameter.name().to_owned(),
                value,
            };
            reports.push(self.measure_model(&model, Some(modulation), false)?.report);
        }
        let ref_mean = reports[values.iter().position(|&v| v == reference).expect("reference present")]
            .mean
            .clone();
        for report in &mut reports {
            let decay = decay_summary(&report.mean, &ref_mean, &mut report.warnings);
            report.decay = Some(decay);
        }
        Ok(SweepReport {
            parameter: parameter.name().to_owned(),
            reference,
            reports,
        })
    }

    fn check_applicable(&self, parameter: SweepParameter) -> Result<()> {
        let m = &self.model;
        let sites = match parameter {
            SweepParameter::Beta => m.activation_sites(),
            SweepParameter::GammaS => m.layernorm_sites(),
            SweepParameter::Cutoff => m.lowpass_sites(),
        };
        if sites.is_empty() {
            return Err(Error::Config(format!(
                "sweep parameter '{}' does not apply to model '{}'; available sites: activation {:?}, layernorm {:?}, lowpass {:?}",
                parameter.name(),
                m.name,
                m.activation_sites(),
                m.layernorm_sites(),
                m.lowpass_sites()
            )));
        }
        Ok(())
    }

    fn modulate(&self, parameter: SweepParameter, value: f64) -> Result<EncoderModel> {
        let s = match parameter {
            SweepParameter::Beta => self.model.swap_activations(value)?,
            SweepParameter::GammaS => self.model.scale_layernorms(value)?,
            SweepParameter::Cutoff => self.model.set_lowpass_cutoff(value)?,
        };
        Ok(s.model)
    }

    fn pool(&self) -> Result<rayon::ThreadPool> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.config.workers.unwrap_or(0))
            .build()
            .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))
    }

    fn measure_model(
        &self,
        model: &EncoderModel,
        modulation: Option<Modulation>,
        keep_logits: bool,
    ) -> Result<Measurement> {
        let pool = self.pool()?;
        let mut warnings = self.warnings.clone();
        let mut per_run = Vec::with_capacity(self.config.runs);
        let mut path_logits = Vec::new();
        for run in 0..self.config.runs {
            let seed = self.seed.wrapping_add(run as u64);
            let sample = sample_pairs(&self.dataset, self.config.pairs, seed)?;
            if sample.with_replacement {
                warnings.push(format!(
                    "run {run}: {} pairs requested but only fewer distinct cross-class pairs exist; sampled with replacement",
                    self.config.pairs
                ));
            }
            let results: Vec<Result<PairOutcome>> = pool.install(|| {
                sample
                    .pairs
                    .par_iter()
                    .map(|&(i, j)| self.measure_pair(model, i, j, keep_logits))
                    .collect()
            });
            let mut outcomes = Vec::with_capacity(results.len());
            for r in results {
                outcomes.push(r?);
            }

            let full: Vec<Option<f64>> = outcomes.iter().map(|o| o.full).collect();
            let bands: Vec<(String, Vec<Option<f64>>)> = self
                .spec
                .names()
                .enumerate()
                .map(|(k, name)| (name.to_owned(), outcomes.iter().map(|o| o.bands[k]).collect()))
                .collect();
            let mut run_warnings = Vec::new();
            let (values, skipped_pairs) = summarize(&full, &bands, &mut run_warnings);
            warnings.extend(run_warnings.into_iter().map(|w| format!("run {run}: {w}")));
            per_run.push(RunSummary {
                run,
                seed,
                pairs: sample.pairs.len(),
                sampled_with_replacement: sample.with_replacement,
                skipped_pairs,
                values,
            });
            if keep_logits {
                path_logits.extend(outcomes.into_iter().flat_map(|o| o.logits));
            }
        }
        let mean = mean_over_runs(&per_run);
        if per_run.iter().all(|r| r.values.ratio.is_none()) {
            warnings.push("ratio undefined in every run".into());
        }
        Ok(Measurement {
            report: SensitivityReport {
                config: self.echo(model)?,
                modulation,
                per_run,
                mean,
                decay: None,
                warnings,
            },
            path_logits,
        })
    }

    // The config echo names the encoder actually measured, which matters when
    // it was passed in directly rather than built from `config.model`.
    fn echo(&self, model: &EncoderModel) -> Result<serde_json::Value> {
        let mut v = self.config.echo(self.seed)?;
        if let Some(obj) = v.as_object_mut() {
            obj.insert("encoder".into(), serde_json::Value::String(model.name.clone()));
        }
        Ok(v)
    }

    fn measure_pair(&self, model: &EncoderModel, i: usize, j: usize, keep: bool) -> Result<PairOutcome> {
        let a = self.dataset.get(i);
        let b = self.dataset.get(j);
        let pair = PairId::new(a.id.clone(), b.id.clone());
        self.pair_paths(model, a, b, &pair, keep).map_err(|e| Error::Pair {
            first: pair.first.clone(),
            second: pair.second.clone(),
            source: Box::new(e),
        })
    }

    fn pair_paths(
        &self,
        model: &EncoderModel,
        a: &super::dataset::LabeledImage,
        b: &super::dataset::LabeledImage,
        pair: &PairId,
        keep: bool,
    ) -> Result<PairOutcome> {
        let n = self.config.steps;
        let policy = self.config.target;
        let target = match policy {
            TargetPolicy::X2 => b.label,
            TargetPolicy::X1 | TargetPolicy::MeanOfBoth => a.label,
        };
        let mut logits = Vec::new();
        let mut eval = |path: InterpolationPath| -> Result<Option<f64>> {
            let pl = clip_logits(model, &path.with_pair(pair.clone()), &self.anchors, target)?;
            let v = match policy {
                TargetPolicy::MeanOfBoth => pair_sensitivity_for(&pl, a.label)
                    .zip(pair_sensitivity_for(&pl, b.label))
                    .map(|(s1, s2)| 0.5 * (s1 + s2)),
                _ => pair_sensitivity(&pl),
            };
            if keep {
                logits.push(pl);
            }
            Ok(v)
        };
        let full = eval(linear_path(&a.image, &b.image, n)?)?;
        let c1 = decompose(&a.image, &self.spec)?;
        let c2 = decompose(&b.image, &self.spec)?;
        let mut bands = Vec::with_capacity(self.spec.len());
        for (k, band) in self.spec.bands().iter().enumerate() {
            let path = band_path_from_components(&a.image, &c1[k], &c2[k], &band.name, n, self.config.path_form)?;
            bands.push(eval(path)?);
        }
        Ok(PairOutcome { full, bands, logits })
    }
}

fn estimate(values: &[Option<f64>], what: &str, warnings: &mut Vec<String>) -> (Option<f64>, usize) {
    match mean_over_pairs(values.iter().copied()) {
        Ok(e) => (Some(e.value), e.skipped),
        Err(e) => {
            warnings.push(format!("{what} sensitivity undefined: {e}"));
            (None, values.len())
        }
    }
}

/// Sensitivity summary from per-pair values in pair order. Returns the
/// summary and the number of skipped full-path pairs. An empty `full` leaves
/// the baseline unset.
pub fn summarize(
    full: &[Option<f64>],
    bands: &[(String, Vec<Option<f64>>)],
    warnings: &mut Vec<String>,
) -> (SensitivitySummary, usize) {
    let (baseline, skipped) = if full.is_empty() {
        (None, 0)
    } else {
        estimate(full, "baseline", warnings)
    };
    let bands: Vec<BandSensitivity> = bands
        .iter()
        .map(|(name, values)| {
            let (value, skipped) = estimate(values, name, warnings);
            BandSensitivity {
                band: name.clone(),
                value,
                skipped_pairs: Some(skipped),
            }
        })
        .collect();
    let ratio = match (bands.first(), bands.last()) {
        (Some(lo), Some(hi)) if bands.len() >= 2 => match (lo.value, hi.value) {
            (Some(l), Some(h)) => match sb_ratio(l, h) {
                Ok(r) => Some(r),
                Err(e) => {
                    warnings.push(format!("{}/{} {e}", lo.band, hi.band));
                    None
                }
            },
            _ => None,
        },
        _ => None,
    };
    (SensitivitySummary::from_bands(baseline, bands, ratio), skipped)
}

fn mean_opt(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let (mut sum, mut count) = (0.0, 0usize);
    for v in values.flatten() {
        sum += v;
        count += 1;
    }
    (count > 0).then(|| sum / count as f64)
}

/// Field-wise arithmetic mean over runs, ignoring runs where a field is undefined.
pub fn mean_over_runs(runs: &[RunSummary]) -> SensitivitySummary {
    let Some(first) = runs.first() else {
        return SensitivitySummary::from_bands(None, Vec::new(), None);
    };
    let bands = first
        .values
        .bands
        .iter()
        .enumerate()
        .map(|(k, b)| BandSensitivity {
            band: b.band.clone(),
            value: mean_opt(runs.iter().map(|r| r.values.bands[k].value)),
            skipped_pairs: None,
        })
        .collect();
    let baseline = mean_opt(runs.iter().map(|r| r.values.baseline));
    let ratio = mean_opt(runs.iter().map(|r| r.values.ratio));
    SensitivitySummary::from_bands(baseline, bands, ratio)
}

fn decay_summary(
    setting: &SensitivitySummary,
    reference: &SensitivitySummary,
    warnings: &mut Vec<String>,
) -> DecayRatios {
    let mut ratio = |what: &str, s: Option<f64>, r: Option<f64>| match (s, r) {
        (Some(s), Some(r)) => match decay_ratio(s, r) {
            Ok(d) => Some(d),
            Err(e) => {
                warnings.push(format!("{what} decay {e}"));
                None
            }
        },
        _ => None,
    };
    let baseline = ratio("baseline", setting.baseline, reference.baseline);
    let bands = setting
        .bands
        .iter()
        .zip(&reference.bands)
        .map(|(s, r)| BandSensitivity {
            band: s.band.clone(),
            value: ratio(&s.band, s.value, r.value),
            skipped_pairs: None,
        })
        .collect();
    // The SB ratio is already relative, so it is not decayed.
    SensitivitySummary::from_bands(baseline, bands, None)
}

/// Recomputes sensitivities from path-logit records, grouping by band in
/// order of first appearance. Records for the full path give the baseline.
pub fn summarize_path_logits(records: &[PathLogits]) -> IngestSummary {
    let mut full = Vec::new();
    let mut bands: Vec<(String, Vec<Option<f64>>)> = Vec::new();
    for r in records {
        let v = pair_sensitivity(r);
        if r.is_full_path() {
            full.push(v);
        } else if let Some((_, vals)) = bands.iter_mut().find(|(b, _)| *b == r.band) {
            vals.push(v);
        } else {
            bands.push((r.band.clone(), vec![v]));
        }
    }
    let mut warnings = Vec::new();
    let (values, skipped_pairs) = summarize(&full, &bands, &mut warnings);
    IngestSummary {
        records: records.len(),
        skipped_pairs,
        values,
        warnings,
    }
}

/// Reads an SBP1 file and recomputes its sensitivities.
pub fn ingest_file(path: impl AsRef<Path>) -> Result<IngestSummary> {
    Ok(summarize_path_logits(&ingest_path_logits(path)?))
}

/// Measures `model` on `dataset` as configured.
pub fn run_measurement(
    config: &ExperimentConfig,
    model: &EncoderModel,
    dataset: &LabeledDataset,
    anchors: &TextAnchors,
) -> Result<SensitivityReport> {
    let exp = Experiment::new(config.clone(), dataset.clone(), model.clone(), anchors.clone())?;
    Ok(exp.measure()?.report)
}

/// Sweeps the configured parameter over `model`.
pub fn run_sweep(
    config: &ExperimentConfig,
    model: &EncoderModel,
    dataset: &LabeledDataset,
    anchors: &TextAnchors,
) -> Result<SweepReport> {
    Experiment::new(config.clone(), dataset.clone(), model.clone(), anchors.clone())?.sweep()
}
