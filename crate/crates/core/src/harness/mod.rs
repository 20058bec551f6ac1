//! Configuration, datasets, pair sampling, experiment orchestration and file formats.

mod config;
mod container;
mod dataset;
mod experiment;
mod report_io;
mod sampling;

pub use config::{
    AnchorSpec, ExperimentConfig, ModelSpec, Overrides, SweepParameter, SweepSpec, SyntheticSpec, TargetPolicy,
    SEED_ENV,
};
pub use container::{
    decode_model, decode_path_logits, decode_tensor, encode_model, encode_path_logits, encode_tensor,
    ingest_path_logits, load_model, read_tensor, save_model, write_path_logits, write_tensor, DTYPE_F32, MODEL_MAGIC,
    PATH_LOGITS_MAGIC, TENSOR_MAGIC,
};
pub use dataset::{decode_ppm, encode_ppm, load_image, LabeledDataset, LabeledImage};
pub use experiment::{
    ingest_file, mean_over_runs, run_measurement, run_sweep, summarize, summarize_path_logits, Experiment,
    IngestSummary, Measurement, SweepReport,
};
pub use report_io::{emit_report, read_report, to_json_string, RoundTripFormatter};
pub use sampling::{sample_pairs, PairSample};
