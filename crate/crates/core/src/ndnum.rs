//! Numeric kernels: images, centered 2-D DFT and frequency-plane geometry.
//!
//! Spectra are stored fft-shifted: the DC coefficient of an `H×W` grid sits at
//! index `(H/2, W/2)` (integer division), for both even and odd sizes. The
//! forward transform is unnormalized and the inverse carries the `1/(H·W)`
//! factor, so a constant grid of value `c` puts `c·H·W` in the DC bin.

use std::cell::RefCell;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// A `C×H×W` real image, channel-major then row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageTensor {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl ImageTensor {
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if channels == 0 || height == 0 || width == 0 {
            return Err(Error::shape("non-empty C×H×W", format!("{channels}×{height}×{width}")));
        }
        if data.len() != channels * height * width {
            return Err(Error::shape(
                format!("{} values for {channels}×{height}×{width}", channels * height * width),
                data.len(),
            ));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite pixel value at flat index {pos}")));
        }
        Ok(Self {
            channels,
            height,
            width,
            data,
        })
    }

    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Self {
            channels,
            height,
            width,
            data: vec![0.0; channels * height * width],
        }
    }

    pub fn from_fn(
        channels: usize,
        height: usize,
        width: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(channels * height * width);
        for c in 0..channels {
            for i in 0..height {
                for j in 0..width {
                    data.push(f(c, i, j));
                }
            }
        }
        Self::new(channels, height, width, data)
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn plane_len(&self) -> usize {
        self.height * self.width
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        let n = self.plane_len();
        &self.data[c * n..(c + 1) * n]
    }

    pub fn get(&self, c: usize, i: usize, j: usize) -> f64 {
        self.data[(c * self.height + i) * self.width + j]
    }

    pub(crate) fn ensure_same_shape(&self, other: &ImageTensor) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::shape(
                format!("{:?}", self.shape()),
                format!("{:?}", other.shape()),
            ));
        }
        Ok(())
    }

    /// Elementwise `a·self + b·other`.
    pub fn axpby(&self, a: f64, other: &ImageTensor, b: f64) -> Result<ImageTensor> {
        self.ensure_same_shape(other)?;
        let data = self.data.iter().zip(&other.data).map(|(x, y)| a * x + b * y).collect();
        Ok(self.with_data(data))
    }

    pub fn add(&self, other: &ImageTensor) -> Result<ImageTensor> {
        self.ensure_same_shape(other)?;
        let data = self.data.iter().zip(&other.data).map(|(x, y)| x + y).collect();
        Ok(self.with_data(data))
    }

    pub fn sub(&self, other: &ImageTensor) -> Result<ImageTensor> {
        self.ensure_same_shape(other)?;
        let data = self.data.iter().zip(&other.data).map(|(x, y)| x - y).collect();
        Ok(self.with_data(data))
    }

    pub fn scale(&self, s: f64) -> ImageTensor {
        self.with_data(self.data.iter().map(|x| s * x).collect())
    }

    pub fn dot(&self, other: &ImageTensor) -> Result<f64> {
        self.ensure_same_shape(other)?;
        Ok(self.data.iter().zip(&other.data).map(|(x, y)| x * y).sum())
    }

    pub fn l2_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Euclidean distance `‖self − other‖₂`.
    pub fn l2_distance(&self, other: &ImageTensor) -> Result<f64> {
        self.ensure_same_shape(other)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt())
    }

    pub fn max_abs_diff(&self, other: &ImageTensor) -> Result<f64> {
        self.ensure_same_shape(other)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max))
    }

    /// Rebuilds an image from per-channel planes.
    pub fn from_planes(height: usize, width: usize, planes: Vec<Vec<f64>>) -> Result<Self> {
        let channels = planes.len();
        let data: Vec<f64> = planes.into_iter().flatten().collect();
        Self::new(channels, height, width, data)
    }

    fn with_data(&self, data: Vec<f64>) -> ImageTensor {
        debug_assert_eq!(data.len(), self.data.len());
        ImageTensor {
            channels: self.channels,
            height: self.height,
            width: self.width,
            data,
        }
    }
}

/// Complex DFT coefficients of one `H×W` plane, DC at `(H/2, W/2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumGrid {
    height: usize,
    width: usize,
    coeffs: Vec<Complex64>,
}

impl SpectrumGrid {
    pub fn new(height: usize, width: usize, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != height * width {
            return Err(Error::shape(format!("{} coefficients", height * width), coeffs.len()));
        }
        Ok(Self { height, width, coeffs })
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            coeffs: vec![Complex64::new(0.0, 0.0); height * width],
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.coeffs[i * self.width + j]
    }

    pub fn set(&mut self, i: usize, j: usize, value: Complex64) {
        self.coeffs[i * self.width + j] = value;
    }

    /// Index of the DC bin.
    pub fn center(&self) -> (usize, usize) {
        (self.height / 2, self.width / 2)
    }

    /// `Σ|X|²`; equals `H·W·Σ|x|²` for the spectrum of a real plane.
    pub fn energy(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum()
    }
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(len: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(len)
        } else {
            p.plan_fft_forward(len)
        }
    })
}

// In-place 2-D transform of a row-major buffer: rows first, then columns.
fn fft2_in_place(height: usize, width: usize, buf: &mut [Complex64], inverse: bool) {
    let row_fft = plan(width, inverse);
    for row in buf.chunks_exact_mut(width) {
        row_fft.process(row);
    }
    let col_fft = plan(height, inverse);
    let mut col = vec![Complex64::new(0.0, 0.0); height];
    for j in 0..width {
        for i in 0..height {
            col[i] = buf[i * width + j];
        }
        col_fft.process(&mut col);
        for i in 0..height {
            buf[i * width + j] = col[i];
        }
    }
}

/// Moves the zero frequency from `(0, 0)` to `(H/2, W/2)`.
fn fftshift(height: usize, width: usize, src: &[Complex64]) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); src.len()];
    for i in 0..height {
        let si = (i + height / 2) % height;
        for j in 0..width {
            let sj = (j + width / 2) % width;
            out[si * width + sj] = src[i * width + j];
        }
    }
    out
}

fn ifftshift(height: usize, width: usize, src: &[Complex64]) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); src.len()];
    for i in 0..height {
        let si = (i + height / 2) % height;
        for j in 0..width {
            let sj = (j + width / 2) % width;
            out[i * width + j] = src[si * width + sj];
        }
    }
    out
}

/// Centered forward DFT of one real `H×W` plane (row-major).
pub fn dft2(height: usize, width: usize, plane: &[f64]) -> Result<SpectrumGrid> {
    if height < 2 || width < 2 {
        return Err(Error::shape("H ≥ 2 and W ≥ 2", format!("{height}×{width}")));
    }
    if plane.len() != height * width {
        return Err(Error::shape(format!("{} values", height * width), plane.len()));
    }
    if let Some(pos) = plane.iter().position(|v| !v.is_finite()) {
        return Err(Error::Domain(format!("non-finite value at flat index {pos}")));
    }
    let mut buf: Vec<Complex64> = plane.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft2_in_place(height, width, &mut buf, false);
    Ok(SpectrumGrid {
        height,
        width,
        coeffs: fftshift(height, width, &buf),
    })
}

/// Inverse of [`dft2`] returning the full complex plane, before the imaginary part is dropped.
pub fn idft2_complex(spectrum: &SpectrumGrid) -> Vec<Complex64> {
    let (h, w) = (spectrum.height, spectrum.width);
    let mut buf = ifftshift(h, w, &spectrum.coeffs);
    fft2_in_place(h, w, &mut buf, true);
    let norm = 1.0 / (h * w) as f64;
    for v in &mut buf {
        *v *= norm;
    }
    buf
}

/// Real part of the inverse transform.
pub fn idft2(spectrum: &SpectrumGrid) -> Vec<f64> {
    idft2_complex(spectrum).into_iter().map(|c| c.re).collect()
}

/// Distance from bin `(i, j)` to the DC bin, divided by the largest such
/// distance on the grid (the `(0, 0)` corner), so the result spans `[0, 1]`.
pub fn radial_distance(i: usize, j: usize, height: usize, width: usize) -> f64 {
    let (ci, cj) = ((height / 2) as f64, (width / 2) as f64);
    let max = (ci * ci + cj * cj).sqrt();
    if max == 0.0 {
        return 0.0;
    }
    let (di, dj) = (i as f64 - ci, j as f64 - cj);
    (di * di + dj * dj).sqrt() / max
}
