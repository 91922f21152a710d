//! Dataset manifests, experiment reports and the batch evaluation drivers.

mod harness;
mod manifest;
mod report;

pub use harness::{
    calibrate_speaker, common_params, database, extract_files, extract_manifest, feature_path, identify_eval,
    identify_trials, load_models, load_split_audio, load_split_features, mix_files, mixed_path, model_path,
    save_models, speaker_seed, train_speakers, verify_eval, ExtractSummary, Labelled, MixedFile, CALIBRATION_FOLDS,
};
pub use manifest::{DatasetManifest, Split, Utterance};
pub use report::{
    condition_name, EvalConfig, ExperimentReport, IdentCondition, IdentTrial, VerifCondition, VerifTrial,
};
