//! Logit contract, activation and LayerNorm modulation, and fixture encoders.

mod activation;
mod clip;
mod encoder;
mod layernorm;

pub use activation::{beta_relu, check_beta, softplus, Activation};
pub use clip::{clip_logits, image_logits, TextAnchors};
pub use encoder::{fixture_encoder, seeded_matrix, seeded_uniform, EncoderModel, FixtureKind, Layer, Surgery};
pub use layernorm::{check_gamma_s, layernorm_scaled, LayerNormConfig, DEFAULT_EPS};
