use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Activation applied at a named site of an encoder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Activation {
    Relu,
    #[serde(rename = "betarelu", alias = "beta_relu")]
    BetaRelu {
        beta: f64,
    },
}

impl Activation {
    pub fn beta_relu(beta: f64) -> Result<Self> {
        check_beta(beta)?;
        Ok(Activation::BetaRelu { beta })
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Activation::Relu => Ok(()),
            Activation::BetaRelu { beta } => check_beta(beta),
        }
    }

    #[inline]
    pub fn apply(&self, x: f64) -> f64 {
        match *self {
            Activation::Relu => x.max(0.0),
            Activation::BetaRelu { beta } => beta_relu_unchecked(x, beta),
        }
    }
}

pub fn check_beta(beta: f64) -> Result<()> {
    if beta > 0.0 && beta <= 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("beta must lie in (0, 1], got {beta}")))
    }
}

#[inline]
fn sigmoid(a: f64) -> f64 {
    if a >= 0.0 {
        1.0 / (1.0 + (-a).exp())
    } else {
        let e = a.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^t)` without overflow.
#[inline]
pub fn softplus(t: f64) -> f64 {
    t.max(0.0) + (-t.abs()).exp().ln_1p()
}

/// Smooth ReLU family
/// `0.5·σ(βx/(1−β))·x + 0.5·ln(1 + e^{x/(1−β)})·(1−β)`.
///
/// `β = 1` is the exact ReLU; smaller `β` gives a smoother curve.
pub fn beta_relu(x: f64, beta: f64) -> Result<f64> {
    check_beta(beta)?;
    Ok(beta_relu_unchecked(x, beta))
}

#[inline]
fn beta_relu_unchecked(x: f64, beta: f64) -> f64 {
    if beta == 1.0 {
        return x.max(0.0);
    }
    let temp = 1.0 - beta;
    let t = x / temp;
    0.5 * sigmoid(beta * t) * x + 0.5 * softplus(t) * temp
}
