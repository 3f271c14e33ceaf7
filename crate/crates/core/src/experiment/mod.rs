//! Experiment configuration and the generate / train / evaluate pipeline
//! driven by the command-line tool.

mod config;
mod pipeline;

pub use config::{parse_override, sha256_hex, ExperimentConfig, CONFIG_FORMAT_VERSION};
pub use pipeline::{
    evaluate_all, evaluate_kind, generate_dataset, load_trained, model_dir, model_seed, read_dataset, report_metadata,
    rollout_seed, save_trained, train_kind, write_dataset, Evaluation, Manifest, TrainedModel, TrainingSummary,
    CHECKPOINT_FILE, CONFIG_FILE, DATASET_FILE, HISTORY_FILE, MANIFEST_FILE, SUMMARY_FILE,
};
