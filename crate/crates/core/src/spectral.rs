//! Frequency bands, band components and interpolation paths.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ndnum::{dft2, idft2, radial_distance, ImageTensor, SpectrumGrid};

/// A radial interval `[r_min, r_max)` in normalized frequency. An interval
/// reaching `r_max = 1` is closed on the right so the corner bins belong to it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandRange {
    pub r_min: f64,
    pub r_max: f64,
}

impl BandRange {
    pub fn new(r_min: f64, r_max: f64) -> Result<Self> {
        if !(r_min.is_finite() && r_max.is_finite()) || r_min < 0.0 || r_max > 1.0 {
            return Err(Error::InvalidBand(format!("[{r_min}, {r_max}) is not inside [0, 1]")));
        }
        if r_min >= r_max {
            return Err(Error::InvalidBand(format!("r_min {r_min} must be below r_max {r_max}")));
        }
        Ok(Self { r_min, r_max })
    }

    pub fn full() -> Self {
        Self { r_min: 0.0, r_max: 1.0 }
    }

    pub fn contains(&self, rho: f64) -> bool {
        rho >= self.r_min && (rho < self.r_max || self.r_max >= 1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub name: String,
    #[serde(flatten)]
    pub range: BandRange,
}

/// Contiguous partition of `[0, 1]` into named bands, lowest first.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BandSpec {
    bands: Vec<Band>,
}

impl BandSpec {
    pub fn new(bands: Vec<Band>) -> Result<Self> {
        let Some(first) = bands.first() else {
            return Err(Error::InvalidBand("band spec is empty".into()));
        };
        if first.range.r_min != 0.0 {
            return Err(Error::InvalidBand(format!(
                "first band must start at 0, got {}",
                first.range.r_min
            )));
        }
        if bands.last().map(|b| b.range.r_max) != Some(1.0) {
            return Err(Error::InvalidBand("last band must end at 1".into()));
        }
        for b in &bands {
            BandRange::new(b.range.r_min, b.range.r_max)?;
        }
        for pair in bands.windows(2) {
            if pair[0].range.r_max != pair[1].range.r_min {
                return Err(Error::InvalidBand(format!(
                    "bands '{}' and '{}' are not contiguous",
                    pair[0].name, pair[1].name
                )));
            }
        }
        for (i, b) in bands.iter().enumerate() {
            if b.name.is_empty() || bands[..i].iter().any(|o| o.name == b.name) {
                return Err(Error::InvalidBand(format!(
                    "band name '{}' is empty or repeated",
                    b.name
                )));
            }
        }
        Ok(Self { bands })
    }

    /// Bands split at the given interior thresholds. Three bands are named
    /// `low`/`mid`/`high`, two `low`/`high`, anything else `band0..`.
    pub fn from_thresholds(thresholds: &[f64]) -> Result<Self> {
        let mut edges = Vec::with_capacity(thresholds.len() + 2);
        edges.push(0.0);
        edges.extend_from_slice(thresholds);
        edges.push(1.0);
        let names: Vec<String> = match edges.len() - 1 {
            2 => vec!["low".into(), "high".into()],
            3 => vec!["low".into(), "mid".into(), "high".into()],
            n => (0..n).map(|i| format!("band{i}")).collect(),
        };
        let bands = edges
            .windows(2)
            .zip(names)
            .map(|(w, name)| BandRange::new(w[0], w[1]).map(|range| Band { name, range }))
            .collect::<Result<Vec<_>>>()?;
        Self::new(bands)
    }

    pub fn bands(&self) -> &[Band] {
        &self.bands
    }

    pub fn len(&self) -> usize {
        self.bands.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bands.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.bands.iter().map(|b| b.name.as_str())
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.bands
            .iter()
            .position(|b| b.name == name)
            .ok_or_else(|| Error::InvalidBand(format!("unknown band '{name}'")))
    }

    pub fn get(&self, name: &str) -> Result<&Band> {
        self.index_of(name).map(|i| &self.bands[i])
    }

    /// Interior thresholds, e.g. `[0.25, 0.8]` for the default spec.
    pub fn thresholds(&self) -> Vec<f64> {
        self.bands[1..].iter().map(|b| b.range.r_min).collect()
    }
}

impl Default for BandSpec {
    fn default() -> Self {
        Self::from_thresholds(&[0.25, 0.8]).expect("default thresholds are valid")
    }
}

impl<'de> Deserialize<'de> for BandSpec {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let bands = Vec::<Band>::deserialize(de)?;
        BandSpec::new(bands).map_err(serde::de::Error::custom)
    }
}

/// Zeroes every coefficient whose radial distance falls outside `band`.
pub fn band_mask(spectrum: &SpectrumGrid, band: BandRange) -> Result<SpectrumGrid> {
    let band = BandRange::new(band.r_min, band.r_max)?;
    let (h, w) = (spectrum.height(), spectrum.width());
    let mut out = spectrum.clone();
    let zero = Complex64::new(0.0, 0.0);
    for i in 0..h {
        for j in 0..w {
            if !band.contains(radial_distance(i, j, h, w)) {
                out.set(i, j, zero);
            }
        }
    }
    Ok(out)
}

fn channel_spectra(x: &ImageTensor) -> Result<Vec<SpectrumGrid>> {
    (0..x.channels())
        .map(|c| dft2(x.height(), x.width(), x.channel(c)))
        .collect()
}

fn component_from_spectra(x: &ImageTensor, spectra: &[SpectrumGrid], band: BandRange) -> Result<ImageTensor> {
    let planes = spectra
        .iter()
        .map(|s| band_mask(s, band).map(|m| idft2(&m)))
        .collect::<Result<Vec<_>>>()?;
    ImageTensor::from_planes(x.height(), x.width(), planes)
}

/// `x^k`: the image rebuilt from the coefficients inside `band`, per channel.
pub fn band_component(x: &ImageTensor, band: BandRange) -> Result<ImageTensor> {
    let band = BandRange::new(band.r_min, band.r_max)?;
    component_from_spectra(x, &channel_spectra(x)?, band)
}

/// All band components of `x`, in spec order. Transforms each channel once.
pub fn decompose(x: &ImageTensor, spec: &BandSpec) -> Result<Vec<ImageTensor>> {
    let spectra = channel_spectra(x)?;
    spec.bands()
        .iter()
        .map(|b| component_from_spectra(x, &spectra, b.range))
        .collect()
}

/// Sum of the components for a leading run of bands (`{low}`, `{low, mid}`, ...).
pub fn cumulative_composition(x: &ImageTensor, spec: &BandSpec, prefix: &[&str]) -> Result<ImageTensor> {
    if prefix.len() > spec.len() || prefix.iter().zip(spec.names()).any(|(a, b)| *a != b) {
        return Err(Error::InvalidBand(format!(
            "{prefix:?} is not a prefix of {:?}",
            spec.names().collect::<Vec<_>>()
        )));
    }
    let spectra = channel_spectra(x)?;
    let mut acc = ImageTensor::zeros(x.channels(), x.height(), x.width());
    for band in &spec.bands()[..prefix.len()] {
        acc = acc.add(&component_from_spectra(x, &spectra, band.range)?)?;
    }
    Ok(acc)
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PairId {
    pub first: String,
    pub second: String,
}

impl PairId {
    pub fn new(first: impl Into<String>, second: impl Into<String>) -> Self {
        Self {
            first: first.into(),
            second: second.into(),
        }
    }
}

impl Default for PairId {
    fn default() -> Self {
        Self::new("x1", "x2")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathStep {
    pub lambda: f64,
    pub image: ImageTensor,
}

/// Images along a path from `x1` toward `x2`, with the endpoint distance
/// used to normalize sensitivities (`‖x1 − x2‖` or `‖x1^k − x2^k‖`).
#[derive(Debug, Clone, PartialEq)]
pub struct InterpolationPath {
    pub pair: PairId,
    pub band: Option<String>,
    pub norm_distance: f64,
    pub steps: Vec<PathStep>,
}

impl InterpolationPath {
    pub fn with_pair(mut self, pair: PairId) -> Self {
        self.pair = pair;
        self
    }

    pub fn lambdas(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.lambda).collect()
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

/// `λ_q = q/(n−1)` for `q = 0..n`.
pub fn lambda_grid(n: usize) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(Error::Domain(format!("a path needs at least 2 steps, got {n}")));
    }
    let last = (n - 1) as f64;
    Ok((0..n).map(|q| if q == n - 1 { 1.0 } else { q as f64 / last }).collect())
}

// x0 + λ·direction for each λ.
fn ray(x0: &ImageTensor, direction: &ImageTensor, n: usize) -> Result<Vec<PathStep>> {
    lambda_grid(n)?
        .into_iter()
        .map(|lambda| {
            Ok(PathStep {
                lambda,
                image: x0.axpby(1.0, direction, lambda)?,
            })
        })
        .collect()
}

/// Pixel-space path `(1−λ)·x1 + λ·x2`.
pub fn linear_path(x1: &ImageTensor, x2: &ImageTensor, n: usize) -> Result<InterpolationPath> {
    x1.ensure_same_shape(x2)?;
    let steps = lambda_grid(n)?
        .into_iter()
        .map(|lambda| {
            Ok(PathStep {
                lambda,
                image: x1.axpby(1.0 - lambda, x2, lambda)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(InterpolationPath {
        pair: PairId::default(),
        band: None,
        norm_distance: x1.l2_distance(x2)?,
        steps,
    })
}

/// How the untouched bands of `x1` enter a band path.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathForm {
    /// `(x1 − x1^k) + [(1−λ)·x1^k + λ·x2^k]`: only band `k` moves.
    #[default]
    Anchored,
    /// `x1 + [(1−λ)·x1^k + λ·x2^k]`, which counts `x1^k` twice at `λ = 0`.
    Literal,
}

/// Band path from precomputed components `x1^k`, `x2^k`.
pub fn band_path_from_components(
    x1: &ImageTensor,
    x1_band: &ImageTensor,
    x2_band: &ImageTensor,
    band_name: &str,
    n: usize,
    form: PathForm,
) -> Result<InterpolationPath> {
    x1.ensure_same_shape(x1_band)?;
    x1.ensure_same_shape(x2_band)?;
    let direction = x2_band.sub(x1_band)?;
    let start = match form {
        // (x1 − x1^k) + (1−λ)x1^k + λx2^k == x1 + λ(x2^k − x1^k)
        PathForm::Anchored => x1.clone(),
        PathForm::Literal => x1.add(x1_band)?,
    };
    Ok(InterpolationPath {
        pair: PairId::default(),
        band: Some(band_name.to_owned()),
        norm_distance: direction.l2_norm(),
        steps: ray(&start, &direction, n)?,
    })
}

/// Path that interpolates only band `band_name` of `spec` from `x1` to `x2`.
pub fn band_path(
    x1: &ImageTensor,
    x2: &ImageTensor,
    spec: &BandSpec,
    band_name: &str,
    n: usize,
    form: PathForm,
) -> Result<InterpolationPath> {
    x1.ensure_same_shape(x2)?;
    let band = spec.get(band_name)?;
    let x1k = band_component(x1, band.range)?;
    let x2k = band_component(x2, band.range)?;
    band_path_from_components(x1, &x1k, &x2k, band_name, n, form)
}
