use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_EPS: f64 = 1e-5;

/// LayerNorm parameters with an extra scalar `gamma_s` multiplying the learned scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerNormConfig {
    pub gamma: Vec<f64>,
    pub shift: Vec<f64>,
    pub gamma_s: f64,
    pub eps: f64,
}

impl LayerNormConfig {
    /// `γ = 1`, shift `0`, `γ_s = 1`.
    pub fn identity(dim: usize) -> Self {
        Self {
            gamma: vec![1.0; dim],
            shift: vec![0.0; dim],
            gamma_s: 1.0,
            eps: DEFAULT_EPS,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.gamma.len() != self.shift.len() {
            return Err(Error::shape(
                format!("shift of length {}", self.gamma.len()),
                self.shift.len(),
            ));
        }
        check_gamma_s(self.gamma_s)?;
        if self.eps.is_nan() || self.eps <= 0.0 {
            return Err(Error::Domain(format!("eps must be positive, got {}", self.eps)));
        }
        Ok(())
    }
}

pub fn check_gamma_s(gamma_s: f64) -> Result<()> {
    if gamma_s > 0.0 && gamma_s.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("gamma_s must be positive, got {gamma_s}")))
    }
}

/// `((x − μ)/√(σ² + ε))·(γ·γ_s) + shift` with population variance.
pub fn layernorm_scaled(x: &[f64], cfg: &LayerNormConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    if x.is_empty() || x.len() != cfg.gamma.len() {
        return Err(Error::shape(format!("vector of length {}", cfg.gamma.len()), x.len()));
    }
    let mut out = vec![0.0; x.len()];
    normalize_into(x, &cfg.gamma, &cfg.shift, cfg.gamma_s, cfg.eps, &mut out);
    Ok(out)
}

pub(crate) fn normalize_into(x: &[f64], gamma: &[f64], shift: &[f64], gamma_s: f64, eps: f64, out: &mut [f64]) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let inv = 1.0 / (var + eps).sqrt();
    for (((o, &v), &g), &b) in out.iter_mut().zip(x).zip(gamma).zip(shift) {
        *o = (v - mean) * inv * (g * gamma_s) + b;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_scale_matches_plain_layernorm() {
        let x = [0.3, -1.2, 2.5, 0.0, 4.1];
        let mut cfg = LayerNormConfig::identity(5);
        cfg.gamma = vec![0.5, 1.5, -1.0, 2.0, 1.0];
        cfg.shift = vec![0.1, 0.2, 0.3, 0.4, 0.5];
        let got = layernorm_scaled(&x, &cfg).unwrap();

        let mean = x.iter().sum::<f64>() / 5.0;
        let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 5.0;
        for i in 0..5 {
            let plain = (x[i] - mean) / (var + DEFAULT_EPS).sqrt() * cfg.gamma[i] + cfg.shift[i];
            assert!((got[i] - plain).abs() <= 1e-12, "{} vs {plain}", got[i]);
        }
    }

    #[test]
    fn constant_input_returns_shift() {
        let mut cfg = LayerNormConfig::identity(3);
        cfg.shift = vec![1.0, -2.0, 0.5];
        cfg.gamma_s = 1.3;
        let got = layernorm_scaled(&[7.0, 7.0, 7.0], &cfg).unwrap();
        assert_eq!(got, cfg.shift);
    }

    #[test]
    fn two_point_hand_computation() {
        let mut cfg = LayerNormConfig::identity(2);
        cfg.gamma_s = 1.5;
        cfg.eps = 1e-15;
        let got = layernorm_scaled(&[0.0, 2.0], &cfg).unwrap();
        assert!((got[0] + 1.5).abs() < 1e-12);
        assert!((got[1] - 1.5).abs() < 1e-12);
    }

    #[test]
    fn output_moments_follow_gamma_s() {
        let x: Vec<f64> = (0..64).map(|i| ((i * 37) % 11) as f64 - 3.0).collect();
        for gamma_s in [0.5, 1.0, 2.0] {
            let mut cfg = LayerNormConfig::identity(64);
            cfg.gamma_s = gamma_s;
            let y = layernorm_scaled(&x, &cfg).unwrap();
            let mean = y.iter().sum::<f64>() / 64.0;
            let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 64.0;
            let xm = x.iter().sum::<f64>() / 64.0;
            let xv = x.iter().map(|v| (v - xm).powi(2)).sum::<f64>() / 64.0;
            assert!(mean.abs() < 1e-12);
            assert!((var - gamma_s * gamma_s * xv / (xv + DEFAULT_EPS)).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_config() {
        let mut cfg = LayerNormConfig::identity(2);
        cfg.gamma_s = 0.0;
        assert!(layernorm_scaled(&[1.0, 2.0], &cfg).is_err());
        let cfg = LayerNormConfig::identity(3);
        assert!(layernorm_scaled(&[1.0, 2.0], &cfg).is_err());
        assert!(layernorm_scaled(&[], &LayerNormConfig::identity(0)).is_err());
    }
}
