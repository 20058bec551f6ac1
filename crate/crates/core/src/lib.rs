//! Frequency-band sensitivity measurement for image encoders.
//!
//! Images are split into radial bands of their centered 2-D spectrum, encoders
//! are probed along paths that move one band at a time, and the normalized
//! total variation of a target logit gives a per-band sensitivity.

pub mod error;
pub mod harness;
pub mod models;
pub mod ndnum;
pub mod sbmetrics;
pub mod spectral;
pub mod tensor;

pub use error::{Error, Result};
pub use harness::{Experiment, ExperimentConfig, LabeledDataset, LabeledImage, SweepReport};
pub use models::{Activation, EncoderModel, FixtureKind, TextAnchors};
pub use ndnum::{ImageTensor, SpectrumGrid};
pub use sbmetrics::{PathLogits, SensitivityReport, SensitivitySummary};
pub use spectral::{Band, BandRange, BandSpec, InterpolationPath, PairId, PathForm};
pub use tensor::Tensor;
