//! Linear probes from language embeddings to typological feature classes.

pub mod dataset;
pub mod logreg;
pub mod pattern;
pub mod trajectory;

pub use dataset::{
    cv_probe, majority_baseline, majority_class, stratified_folds, ProbeDataset, ProbeRow, DEFAULT_FOLDS,
};
pub use logreg::{train_logreg, train_logreg_traced, LogRegModel, DEFAULT_LAMBDA};
pub use pattern::{classify_pattern, Pattern, PatternRule, DEFAULT_DELTA};
pub use trajectory::{
    heldout_features, heldout_rows, predict_heldout, predict_heldout_uralic, probe_features, probe_rows,
    probe_trajectory, HeldoutResult, HeldoutRow, ProbeOptions, ProbeResult, SkippedFeature, URALIC,
};
