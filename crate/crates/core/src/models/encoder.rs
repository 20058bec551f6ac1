//! Forward-only image encoders built from a small layer vocabulary.
//!
//! Encoders are plain values: surgery (`swap_activations`, `scale_layernorms`,
//! `set_lowpass_cutoff`) returns a modified copy. Fixture parameters come from
//! `ChaCha8Rng::seed_from_u64(seed)`, drawn layer by layer (weight, then bias)
//! as `f32` uniforms in `[-1/√fan_in, 1/√fan_in]`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::activation::{check_beta, Activation};
use super::layernorm::{check_gamma_s, normalize_into, DEFAULT_EPS};
use crate::error::{Error, Result};
use crate::ndnum::{dft2, idft2, radial_distance, ImageTensor};
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Layer {
    /// Per-channel Gaussian low-pass `H(ρ) = exp(−(ρ/cutoff)²)` in the centered spectrum.
    LowPass {
        site: String,
        cutoff: f64,
    },
    Flatten,
    /// `y = W·x + b` along the last axis; `weight` is `out×in`.
    Linear {
        weight: Tensor,
        bias: Option<Tensor>,
    },
    /// Stride-1 convolution with zero padding; `weight` is `out×in×k×k`.
    Conv2d {
        weight: Tensor,
        bias: Tensor,
        padding: usize,
    },
    Activation {
        site: String,
        activation: Activation,
    },
    LayerNorm {
        site: String,
        gamma: Tensor,
        shift: Tensor,
        gamma_s: f64,
        eps: f64,
    },
    GlobalAvgPool,
    /// `C×H×W` to `(H/p·W/p)×(C·p·p)` non-overlapping patches.
    Patchify {
        patch: usize,
    },
    MeanTokens,
    Residual {
        body: Vec<Layer>,
    },
}

/// Intermediate value flowing between layers.
#[derive(Debug, Clone)]
struct Value {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Layer {
    fn forward(&self, x: Value) -> Result<Value> {
        match self {
            Layer::LowPass { cutoff, .. } => low_pass(x, *cutoff),
            Layer::Flatten => Ok(Value {
                shape: vec![x.data.len()],
                data: x.data,
            }),
            Layer::Linear { weight, bias } => linear(x, weight, bias.as_ref()),
            Layer::Conv2d { weight, bias, padding } => conv2d(x, weight, bias, *padding),
            Layer::Activation { activation, .. } => {
                let mut x = x;
                for v in &mut x.data {
                    *v = activation.apply(*v);
                }
                Ok(x)
            }
            Layer::LayerNorm {
                gamma,
                shift,
                gamma_s,
                eps,
                ..
            } => {
                let d = gamma.len();
                if x.shape.last() != Some(&d) {
                    return Err(Error::shape(format!("last axis {d}"), format!("{:?}", x.shape)));
                }
                let mut out = vec![0.0; x.data.len()];
                for (src, dst) in x.data.chunks_exact(d).zip(out.chunks_exact_mut(d)) {
                    normalize_into(src, &gamma.data, &shift.data, *gamma_s, *eps, dst);
                }
                Ok(Value {
                    shape: x.shape,
                    data: out,
                })
            }
            Layer::GlobalAvgPool => {
                let [c, h, w] = expect_rank3(&x)?;
                let data = x
                    .data
                    .chunks_exact(h * w)
                    .map(|p| p.iter().sum::<f64>() / (h * w) as f64)
                    .collect();
                Ok(Value { shape: vec![c], data })
            }
            Layer::Patchify { patch } => patchify(x, *patch),
            Layer::MeanTokens => {
                let [n, d] = expect_rank2(&x)?;
                let mut data = vec![0.0; d];
                for row in x.data.chunks_exact(d) {
                    for (a, v) in data.iter_mut().zip(row) {
                        *a += v;
                    }
                }
                for a in &mut data {
                    *a /= n as f64;
                }
                Ok(Value { shape: vec![d], data })
            }
            Layer::Residual { body } => {
                let mut y = x.clone();
                for layer in body {
                    y = layer.forward(y)?;
                }
                if y.shape != x.shape {
                    return Err(Error::shape(format!("{:?}", x.shape), format!("{:?}", y.shape)));
                }
                for (a, b) in y.data.iter_mut().zip(&x.data) {
                    *a += b;
                }
                Ok(y)
            }
        }
    }

    fn visit(&self, f: &mut impl FnMut(&Layer)) {
        f(self);
        if let Layer::Residual { body } = self {
            for l in body {
                l.visit(f);
            }
        }
    }

    fn visit_mut(&mut self, f: &mut impl FnMut(&mut Layer)) {
        f(self);
        if let Layer::Residual { body } = self {
            for l in body {
                l.visit_mut(f);
            }
        }
    }

    fn params_mut(&mut self) -> Vec<(&'static str, &mut Tensor)> {
        match self {
            Layer::Linear { weight, bias } => {
                let mut v = vec![("weight", weight)];
                if let Some(b) = bias {
                    v.push(("bias", b));
                }
                v
            }
            Layer::Conv2d { weight, bias, .. } => vec![("weight", weight), ("bias", bias)],
            Layer::LayerNorm { gamma, shift, .. } => vec![("gamma", gamma), ("shift", shift)],
            _ => Vec::new(),
        }
    }
}

fn expect_rank3(x: &Value) -> Result<[usize; 3]> {
    match x.shape[..] {
        [c, h, w] => Ok([c, h, w]),
        _ => Err(Error::shape("rank-3 value", format!("{:?}", x.shape))),
    }
}

fn expect_rank2(x: &Value) -> Result<[usize; 2]> {
    match x.shape[..] {
        [n, d] => Ok([n, d]),
        _ => Err(Error::shape("rank-2 value", format!("{:?}", x.shape))),
    }
}

pub(crate) fn gaussian_response(rho: f64, cutoff: f64) -> f64 {
    let r = rho / cutoff;
    (-r * r).exp()
}

fn low_pass(x: Value, cutoff: f64) -> Result<Value> {
    let [c, h, w] = expect_rank3(&x)?;
    let mut out = Vec::with_capacity(x.data.len());
    for plane in x.data.chunks_exact(h * w).take(c) {
        let mut s = dft2(h, w, plane)?;
        for i in 0..h {
            for j in 0..w {
                let g = gaussian_response(radial_distance(i, j, h, w), cutoff);
                s.set(i, j, s.get(i, j) * g);
            }
        }
        out.extend(idft2(&s));
    }
    Ok(Value {
        shape: x.shape,
        data: out,
    })
}

fn linear(x: Value, weight: &Tensor, bias: Option<&Tensor>) -> Result<Value> {
    let [out_dim, in_dim] = match weight.shape[..] {
        [o, i] => [o, i],
        _ => return Err(Error::shape("rank-2 weight", format!("{:?}", weight.shape))),
    };
    if x.shape.last() != Some(&in_dim) {
        return Err(Error::shape(format!("last axis {in_dim}"), format!("{:?}", x.shape)));
    }
    let rows = x.data.len() / in_dim;
    let mut data = Vec::with_capacity(rows * out_dim);
    for row in x.data.chunks_exact(in_dim) {
        for o in 0..out_dim {
            let w = &weight.data[o * in_dim..(o + 1) * in_dim];
            let mut acc: f64 = w.iter().zip(row).map(|(a, b)| a * b).sum();
            if let Some(b) = bias {
                acc += b.data[o];
            }
            data.push(acc);
        }
    }
    let mut shape = x.shape;
    *shape.last_mut().expect("non-empty shape") = out_dim;
    Ok(Value { shape, data })
}

fn conv2d(x: Value, weight: &Tensor, bias: &Tensor, padding: usize) -> Result<Value> {
    let [c, h, w] = expect_rank3(&x)?;
    let [out_c, in_c, kh, kw] = match weight.shape[..] {
        [a, b, c, d] => [a, b, c, d],
        _ => return Err(Error::shape("rank-4 weight", format!("{:?}", weight.shape))),
    };
    if in_c != c {
        return Err(Error::shape(format!("{in_c} input channels"), c));
    }
    let oh = (h + 2 * padding + 1)
        .checked_sub(kh)
        .ok_or_else(|| Error::shape("kernel ≤ padded height", h))?;
    let ow = (w + 2 * padding + 1)
        .checked_sub(kw)
        .ok_or_else(|| Error::shape("kernel ≤ padded width", w))?;
    let mut data = vec![0.0; out_c * oh * ow];
    for o in 0..out_c {
        for y in 0..oh {
            for xx in 0..ow {
                let mut acc = bias.data[o];
                for ci in 0..in_c {
                    for ky in 0..kh {
                        let sy = (y + ky) as isize - padding as isize;
                        if sy < 0 || sy >= h as isize {
                            continue;
                        }
                        for kx in 0..kw {
                            let sx = (xx + kx) as isize - padding as isize;
                            if sx < 0 || sx >= w as isize {
                                continue;
                            }
                            acc += weight.data[((o * in_c + ci) * kh + ky) * kw + kx]
                                * x.data[(ci * h + sy as usize) * w + sx as usize];
                        }
                    }
                }
                data[(o * oh + y) * ow + xx] = acc;
            }
        }
    }
    Ok(Value {
        shape: vec![out_c, oh, ow],
        data,
    })
}

fn patchify(x: Value, p: usize) -> Result<Value> {
    let [c, h, w] = expect_rank3(&x)?;
    if p == 0 || h % p != 0 || w % p != 0 {
        return Err(Error::shape(
            format!("H and W divisible by patch {p}"),
            format!("{h}×{w}"),
        ));
    }
    let (ph, pw) = (h / p, w / p);
    let dim = c * p * p;
    let mut data = Vec::with_capacity(ph * pw * dim);
    for ty in 0..ph {
        for tx in 0..pw {
            for ci in 0..c {
                for dy in 0..p {
                    for dx in 0..p {
                        data.push(x.data[(ci * h + ty * p + dy) * w + tx * p + dx]);
                    }
                }
            }
        }
    }
    Ok(Value {
        shape: vec![ph * pw, dim],
        data,
    })
}

/// Deterministic image encoder `f^I`: `C×H×W` image to a `D`-dimensional embedding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderModel {
    pub name: String,
    pub input_shape: [usize; 3],
    pub embed_dim: usize,
    pub layers: Vec<Layer>,
}

/// Result of a surgery pass: the new model and how many sites were touched.
#[derive(Debug, Clone)]
pub struct Surgery {
    pub model: EncoderModel,
    pub sites_changed: usize,
}

impl Surgery {
    /// A no-op warning when the model had no matching sites.
    pub fn warning(&self, what: &str) -> Option<String> {
        (self.sites_changed == 0)
            .then(|| format!("model '{}' has no {what} sites; surgery was a no-op", self.model.name))
    }
}

impl EncoderModel {
    pub fn new(name: impl Into<String>, input_shape: [usize; 3], layers: Vec<Layer>) -> Result<Self> {
        let mut model = Self {
            name: name.into(),
            input_shape,
            embed_dim: 0,
            layers,
        };
        model.validate_sites()?;
        let [c, h, w] = input_shape;
        let probe = ImageTensor::zeros(c, h, w);
        let out = model.run(&probe)?;
        if out.shape.len() != 1 {
            return Err(Error::Model(format!(
                "encoder output must be a vector, got shape {:?}",
                out.shape
            )));
        }
        model.embed_dim = out.shape[0];
        Ok(model)
    }

    fn validate_sites(&self) -> Result<()> {
        let mut err = None;
        let mut names: Vec<String> = Vec::new();
        for layer in &self.layers {
            layer.visit(&mut |l| {
                let site = match l {
                    Layer::Activation { site, activation } => {
                        if let Err(e) = activation.validate() {
                            err.get_or_insert(e);
                        }
                        Some(site)
                    }
                    Layer::LayerNorm {
                        site,
                        gamma,
                        shift,
                        gamma_s,
                        eps,
                    } => {
                        if gamma.shape != shift.shape || gamma.rank() != 1 || gamma.len() != gamma.numel() {
                            err.get_or_insert(Error::Model(format!("layernorm '{site}' has inconsistent parameters")));
                        }
                        if let Err(e) = check_gamma_s(*gamma_s) {
                            err.get_or_insert(e);
                        }
                        if eps.is_nan() || *eps <= 0.0 {
                            err.get_or_insert(Error::Model(format!("layernorm '{site}' needs eps > 0")));
                        }
                        Some(site)
                    }
                    Layer::LowPass { site, cutoff } => {
                        if !(*cutoff > 0.0 && cutoff.is_finite()) {
                            err.get_or_insert(Error::Model(format!("low-pass '{site}' needs a positive cutoff")));
                        }
                        Some(site)
                    }
                    _ => None,
                };
                if let Some(s) = site {
                    names.push(s.clone());
                }
            });
        }
        if let Some(e) = err {
            return Err(e);
        }
        for (i, n) in names.iter().enumerate() {
            if names[..i].contains(n) {
                return Err(Error::Model(format!("duplicate site name '{n}'")));
            }
        }
        Ok(())
    }

    fn run(&self, x: &ImageTensor) -> Result<Value> {
        let (c, h, w) = x.shape();
        if [c, h, w] != self.input_shape {
            return Err(Error::shape(
                format!("input {:?}", self.input_shape),
                format!("{:?}", [c, h, w]),
            ));
        }
        let mut v = Value {
            shape: vec![c, h, w],
            data: x.data().to_vec(),
        };
        for layer in &self.layers {
            v = layer.forward(v)?;
        }
        Ok(v)
    }

    pub fn embed(&self, x: &ImageTensor) -> Result<Vec<f64>> {
        Ok(self.run(x)?.data)
    }

    pub fn embed_batch(&self, xs: &[ImageTensor]) -> Result<Vec<Vec<f64>>> {
        xs.iter().map(|x| self.embed(x)).collect()
    }

    fn sites(&self, pick: impl Fn(&Layer) -> Option<&String>) -> Vec<String> {
        let mut out = Vec::new();
        for layer in &self.layers {
            layer.visit(&mut |l| {
                if let Some(s) = pick(l) {
                    out.push(s.clone());
                }
            });
        }
        out
    }

    pub fn activation_sites(&self) -> Vec<String> {
        self.sites(|l| match l {
            Layer::Activation { site, .. } => Some(site),
            _ => None,
        })
    }

    pub fn layernorm_sites(&self) -> Vec<String> {
        self.sites(|l| match l {
            Layer::LayerNorm { site, .. } => Some(site),
            _ => None,
        })
    }

    pub fn lowpass_sites(&self) -> Vec<String> {
        self.sites(|l| match l {
            Layer::LowPass { site, .. } => Some(site),
            _ => None,
        })
    }

    pub fn parameter_count(&self) -> usize {
        let mut copy = self.clone();
        copy.params_mut().iter().map(|(_, t)| t.len()).sum()
    }

    /// Every trainable tensor in a stable order, named `<layer index path>.<role>`.
    pub fn params_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        fn walk<'a>(prefix: &str, layers: &'a mut [Layer], out: &mut Vec<(String, &'a mut Tensor)>) {
            for (i, layer) in layers.iter_mut().enumerate() {
                let path = if prefix.is_empty() {
                    i.to_string()
                } else {
                    format!("{prefix}.{i}")
                };
                if let Layer::Residual { body } = layer {
                    walk(&path, body, out);
                } else {
                    for (role, t) in layer.params_mut() {
                        out.push((format!("{path}.{role}"), t));
                    }
                }
            }
        }
        let mut out = Vec::new();
        walk("", &mut self.layers, &mut out);
        out
    }

    fn map_layers(&self, mut f: impl FnMut(&mut Layer) -> bool) -> Surgery {
        let mut model = self.clone();
        let mut changed = 0;
        for layer in &mut model.layers {
            layer.visit_mut(&mut |l| {
                if f(l) {
                    changed += 1;
                }
            });
        }
        Surgery {
            model,
            sites_changed: changed,
        }
    }

    /// Replaces every activation site with BetaReLU(β). `β = 1` leaves outputs bit-identical.
    pub fn swap_activations(&self, beta: f64) -> Result<Surgery> {
        check_beta(beta)?;
        Ok(self.map_layers(|l| match l {
            Layer::Activation { activation, .. } => {
                *activation = Activation::BetaRelu { beta };
                true
            }
            _ => false,
        }))
    }

    /// Multiplies the extra LayerNorm scalar of every site by `gamma_s`.
    pub fn scale_layernorms(&self, gamma_s: f64) -> Result<Surgery> {
        check_gamma_s(gamma_s)?;
        Ok(self.map_layers(|l| match l {
            Layer::LayerNorm { gamma_s: g, .. } => {
                *g *= gamma_s;
                true
            }
            _ => false,
        }))
    }

    pub fn set_lowpass_cutoff(&self, cutoff: f64) -> Result<Surgery> {
        if !(cutoff > 0.0 && cutoff.is_finite()) {
            return Err(Error::Domain(format!("cutoff must be positive, got {cutoff}")));
        }
        Ok(self.map_layers(|l| match l {
            Layer::LowPass { cutoff: c, .. } => {
                *c = cutoff;
                true
            }
            _ => false,
        }))
    }
}

/// Desk-scale stand-in encoders with known structure.
#[derive(Debug, Clone, PartialEq)]
pub enum FixtureKind {
    /// `W·vec(x)`; `weight` is `D×(C·H·W)`.
    Linear { weight: Tensor },
    /// Gaussian low-pass at `cutoff`, then `W·vec(·)`.
    Smoothing { cutoff: f64, weight: Tensor },
    TinyCnn {
        seed: u64,
        activation: Activation,
        embed_dim: usize,
    },
    TinyPrenormBlock {
        seed: u64,
        gamma_s: f64,
        embed_dim: usize,
        patch: usize,
    },
}

/// Uniform `[-1/√fan_in, 1/√fan_in]` values, drawn as `f32`.
pub fn seeded_uniform(rng: &mut ChaCha8Rng, shape: Vec<usize>, fan_in: usize) -> Tensor {
    let bound = 1.0 / (fan_in.max(1) as f32).sqrt();
    let n = shape.iter().product();
    let data = (0..n).map(|_| f64::from(rng.gen_range(-bound..=bound))).collect();
    Tensor { shape, data }
}

/// `rows×cols` matrix from a fresh generator seeded with `seed`.
pub fn seeded_matrix(seed: u64, rows: usize, cols: usize) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    seeded_uniform(&mut rng, vec![rows, cols], cols)
}

pub fn fixture_encoder(kind: FixtureKind, input_shape: [usize; 3]) -> Result<EncoderModel> {
    let [c, h, w] = input_shape;
    if c == 0 || h < 2 || w < 2 {
        return Err(Error::Model(format!(
            "fixture input shape {input_shape:?} is too small"
        )));
    }
    let flat = c * h * w;
    let check_readout = |weight: &Tensor| -> Result<()> {
        match weight.shape[..] {
            [d, n] if d > 0 && n == flat && weight.data.len() == d * n => Ok(()),
            _ => Err(Error::shape(format!("D×{flat} readout"), format!("{:?}", weight.shape))),
        }
    };
    match kind {
        FixtureKind::Linear { weight } => {
            check_readout(&weight)?;
            EncoderModel::new(
                "linear",
                input_shape,
                vec![Layer::Flatten, Layer::Linear { weight, bias: None }],
            )
        }
        FixtureKind::Smoothing { cutoff, weight } => {
            check_readout(&weight)?;
            EncoderModel::new(
                "smoothing",
                input_shape,
                vec![
                    Layer::LowPass {
                        site: "lowpass0".into(),
                        cutoff,
                    },
                    Layer::Flatten,
                    Layer::Linear { weight, bias: None },
                ],
            )
        }
        FixtureKind::TinyCnn {
            seed,
            activation,
            embed_dim,
        } => {
            if embed_dim == 0 {
                return Err(Error::Model("embed_dim must be positive".into()));
            }
            activation.validate()?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (c1, c2, k) = (4, 8, 3);
            let mut layers = Vec::new();
            for (i, (cin, cout)) in [(c, c1), (c1, c2)].into_iter().enumerate() {
                let fan_in = cin * k * k;
                layers.push(Layer::Conv2d {
                    weight: seeded_uniform(&mut rng, vec![cout, cin, k, k], fan_in),
                    bias: seeded_uniform(&mut rng, vec![cout], fan_in),
                    padding: 1,
                });
                layers.push(Layer::Activation {
                    site: format!("act{i}"),
                    activation,
                });
            }
            layers.push(Layer::GlobalAvgPool);
            layers.push(Layer::Linear {
                weight: seeded_uniform(&mut rng, vec![embed_dim, c2], c2),
                bias: Some(seeded_uniform(&mut rng, vec![embed_dim], c2)),
            });
            EncoderModel::new(format!("tiny_cnn(seed={seed})"), input_shape, layers)
        }
        FixtureKind::TinyPrenormBlock {
            seed,
            gamma_s,
            embed_dim,
            patch,
        } => {
            check_gamma_s(gamma_s)?;
            if embed_dim == 0 {
                return Err(Error::Model("embed_dim must be positive".into()));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (d_model, d_hidden) = (16, 32);
            let token = c * patch * patch;
            let ln = |site: &str| Layer::LayerNorm {
                site: site.into(),
                gamma: Tensor::filled(vec![d_model], 1.0),
                shift: Tensor::zeros(vec![d_model]),
                gamma_s,
                eps: DEFAULT_EPS,
            };
            let mut dense = |out: usize, inp: usize| Layer::Linear {
                weight: seeded_uniform(&mut rng, vec![out, inp], inp),
                bias: Some(seeded_uniform(&mut rng, vec![out], inp)),
            };
            let embed = dense(d_model, token);
            let up = dense(d_hidden, d_model);
            let down = dense(d_model, d_hidden);
            let head = dense(embed_dim, d_model);
            let layers = vec![
                Layer::Patchify { patch },
                embed,
                Layer::Residual {
                    body: vec![
                        ln("ln0"),
                        up,
                        Layer::Activation {
                            site: "act0".into(),
                            activation: Activation::Relu,
                        },
                        down,
                    ],
                },
                ln("ln1"),
                Layer::MeanTokens,
                head,
            ];
            EncoderModel::new(format!("tiny_prenorm_block(seed={seed})"), input_shape, layers)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn probe(seed: u64, shape: [usize; 3]) -> ImageTensor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ImageTensor::from_fn(shape[0], shape[1], shape[2], |_, _, _| rng.gen_range(0.0..1.0)).unwrap()
    }

    #[test]
    fn linear_fixture_is_matrix_vector_product() {
        let w = seeded_matrix(5, 3, 2 * 4 * 4);
        let m = fixture_encoder(FixtureKind::Linear { weight: w.clone() }, [2, 4, 4]).unwrap();
        assert_eq!(m.embed_dim, 3);
        let x = probe(1, [2, 4, 4]);
        let e = m.embed(&x).unwrap();
        for (d, &got) in e.iter().enumerate() {
            let expected: f64 = w.data[d * 32..(d + 1) * 32]
                .iter()
                .zip(x.data())
                .map(|(a, b)| a * b)
                .sum();
            assert!((got - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn smoothing_fixture_kills_high_frequencies() {
        let shape = [1, 32, 32];
        let w = seeded_matrix(9, 4, 32 * 32);
        let m = fixture_encoder(FixtureKind::Smoothing { cutoff: 0.3, weight: w }, shape).unwrap();
        // ρ = 0.875 sinusoid; H(0.875) = exp(−(0.875/0.3)²) ≈ 2e-4.
        let x = ImageTensor::from_fn(1, 32, 32, |_, y, xx| {
            (2.0 * PI * (14 * y + 14 * xx) as f64 / 32.0).cos()
        })
        .unwrap();
        let zero = m.embed(&ImageTensor::zeros(1, 32, 32)).unwrap();
        let e = m.embed(&x).unwrap();
        for (a, b) in e.iter().zip(&zero) {
            assert!((a - b).abs() < 1e-3, "{a} vs {b}");
        }
    }

    #[test]
    fn tiny_cnn_is_deterministic_per_seed() {
        let kind = |seed| FixtureKind::TinyCnn {
            seed,
            activation: Activation::Relu,
            embed_dim: 6,
        };
        let a = fixture_encoder(kind(7), [3, 8, 8]).unwrap();
        let b = fixture_encoder(kind(7), [3, 8, 8]).unwrap();
        let c = fixture_encoder(kind(8), [3, 8, 8]).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.activation_sites(), vec!["act0", "act1"]);
    }

    #[test]
    fn swap_beta_one_is_bit_identical() {
        let m = fixture_encoder(
            FixtureKind::TinyCnn {
                seed: 3,
                activation: Activation::Relu,
                embed_dim: 4,
            },
            [3, 8, 8],
        )
        .unwrap();
        let swapped = m.swap_activations(1.0).unwrap();
        assert_eq!(swapped.sites_changed, 2);
        assert_eq!(swapped.model.parameter_count(), m.parameter_count());
        for s in 0..5 {
            let x = probe(s, [3, 8, 8]);
            let a = m.embed(&x).unwrap();
            let b = swapped.model.embed(&x).unwrap();
            assert!(a.iter().zip(&b).all(|(p, q)| p.to_bits() == q.to_bits()));
        }
    }

    #[test]
    fn swap_smooth_beta_changes_outputs_and_is_idempotent() {
        let m = fixture_encoder(
            FixtureKind::TinyCnn {
                seed: 7,
                activation: Activation::Relu,
                embed_dim: 4,
            },
            [3, 8, 8],
        )
        .unwrap();
        let once = m.swap_activations(0.7).unwrap().model;
        let twice = once.swap_activations(0.7).unwrap().model;
        assert_eq!(once, twice);
        let differs = (0..4).any(|s| {
            let x = probe(s, [3, 8, 8]);
            m.embed(&x).unwrap() != once.embed(&x).unwrap()
        });
        assert!(differs);
        assert!(m.swap_activations(0.0).is_err());
    }

    #[test]
    fn surgery_without_sites_warns() {
        let m = fixture_encoder(
            FixtureKind::Linear {
                weight: seeded_matrix(1, 2, 16),
            },
            [1, 4, 4],
        )
        .unwrap();
        let s = m.swap_activations(0.5).unwrap();
        assert_eq!(s.sites_changed, 0);
        assert!(s.warning("activation").is_some());
        assert_eq!(s.model, m);
        assert!(m.scale_layernorms(2.0).unwrap().warning("layernorm").is_some());
    }

    fn single_ln_model() -> EncoderModel {
        EncoderModel::new(
            "single_ln",
            [1, 2, 4],
            vec![
                Layer::Flatten,
                Layer::LayerNorm {
                    site: "ln".into(),
                    gamma: Tensor::new(vec![8], vec![1.0, 0.5, 2.0, 1.0, -1.0, 1.0, 0.25, 1.0]).unwrap(),
                    shift: Tensor::zeros(vec![8]),
                    gamma_s: 1.0,
                    eps: DEFAULT_EPS,
                },
            ],
        )
        .unwrap()
    }

    #[test]
    fn layernorm_scaling_doubles_output() {
        let m = single_ln_model();
        let x = probe(4, [1, 2, 4]);
        let base = m.embed(&x).unwrap();
        let doubled = m.scale_layernorms(2.0).unwrap().model.embed(&x).unwrap();
        for (a, b) in base.iter().zip(&doubled) {
            assert!((2.0 * a - b).abs() < 1e-12);
        }
        let same = m.scale_layernorms(1.0).unwrap().model.embed(&x).unwrap();
        assert!(base.iter().zip(&same).all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn layernorm_scaling_composes() {
        let m = single_ln_model();
        let ab = m
            .scale_layernorms(1.5)
            .unwrap()
            .model
            .scale_layernorms(0.8)
            .unwrap()
            .model;
        let direct = m.scale_layernorms(1.5 * 0.8).unwrap().model;
        assert_eq!(ab, direct);
        assert!(m.scale_layernorms(-1.0).is_err());
    }

    #[test]
    fn prenorm_block_exposes_sites() {
        let m = fixture_encoder(
            FixtureKind::TinyPrenormBlock {
                seed: 1,
                gamma_s: 1.0,
                embed_dim: 5,
                patch: 4,
            },
            [3, 8, 8],
        )
        .unwrap();
        assert_eq!(m.layernorm_sites(), vec!["ln0", "ln1"]);
        assert_eq!(m.activation_sites(), vec!["act0"]);
        assert_eq!(m.embed_dim, 5);
        let x = probe(2, [3, 8, 8]);
        let a = m.embed(&x).unwrap();
        let b = m.scale_layernorms(1.3).unwrap().model.embed(&x).unwrap();
        assert_ne!(a, b);
        assert!(fixture_encoder(
            FixtureKind::TinyPrenormBlock {
                seed: 1,
                gamma_s: 1.0,
                embed_dim: 5,
                patch: 3,
            },
            [3, 8, 8],
        )
        .is_err());
    }

    #[test]
    fn conv_matches_direct_sum() {
        // 1×1 kernel convolution is a per-pixel channel mix.
        let w = Tensor::new(vec![2, 2, 1, 1], vec![1.0, 2.0, -1.0, 0.5]).unwrap();
        let b = Tensor::new(vec![2], vec![0.1, -0.2]).unwrap();
        let m = EncoderModel::new(
            "mix",
            [2, 2, 2],
            vec![
                Layer::Conv2d {
                    weight: w,
                    bias: b,
                    padding: 0,
                },
                Layer::Flatten,
            ],
        )
        .unwrap();
        let x = ImageTensor::new(2, 2, 2, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]).unwrap();
        let e = m.embed(&x).unwrap();
        for p in 0..4 {
            let (a, bb) = (x.data()[p], x.data()[4 + p]);
            assert!((e[p] - (a + 2.0 * bb + 0.1)).abs() < 1e-12);
            assert!((e[4 + p] - (-a + 0.5 * bb - 0.2)).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_wrong_input_shape() {
        let m = fixture_encoder(
            FixtureKind::Linear {
                weight: seeded_matrix(1, 2, 16),
            },
            [1, 4, 4],
        )
        .unwrap();
        assert!(m.embed(&ImageTensor::zeros(1, 4, 5)).is_err());
        assert!(fixture_encoder(
            FixtureKind::Linear {
                weight: seeded_matrix(1, 2, 15),
            },
            [1, 4, 4]
        )
        .is_err());
    }
}
