//! Dataset plumbing: logit files, reports, synthetic data and a small
//! softmax-regression trainer.

pub mod io;
pub mod synth;
pub mod trainer;

pub use io::{
    load_logits, load_report, save_logits, save_prediction_sets, save_report, save_sweep,
    write_report, LogitFormat, LogitRow, LogitTable,
};
pub use synth::{generate_synthetic, SynthSpec, SyntheticData};
pub use trainer::{train_softmax_classifier, SoftmaxClassifier, TrainConfig};
