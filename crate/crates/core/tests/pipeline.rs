use std::collections::BTreeMap;

use wpmfc_core::eval::{
    database, extract_manifest, identify_eval, load_split_audio, load_split_features, save_models, train_speakers,
    load_models, DatasetManifest, EvalConfig, Split,
};
use wpmfc_core::features::{FeatureKind, FeatureParams, MfccParams};
use wpmfc_core::models::log_likelihood;
use wpmfc_core::recognition::ModelFile;
use wpmfc_core::synth::{corpus, resonator_speakers, write_corpus};
use wpmfc_core::{Error, FeatureMatrix, TrainOptions};

fn setup(dir: &std::path::Path, kind: FeatureKind) -> (DatasetManifest, BTreeMap<String, Vec<FeatureMatrix>>) {
    let c = corpus(&resonator_speakers(3), 4, 0.6, 16000, 77);
    let manifest = DatasetManifest::load(write_corpus(dir, &c, 3).unwrap()).unwrap();
    let feat = dir.join("feat");
    extract_manifest(&manifest, &feat, &FeatureParams::default_for(kind)).unwrap();
    let train = load_split_features(&manifest, &feat, kind, Split::Train).unwrap();
    (manifest, train)
}

#[test]
fn single_gaussian_models_hold_speaker_means() {
    let dir = tempfile::tempdir().unwrap();
    let (_, train) = setup(dir.path(), FeatureKind::Mfcc);
    let models = train_speakers(&train, 1, 1, &TrainOptions::default()).unwrap();
    for (id, model) in &models {
        let all = FeatureMatrix::concat(&train[id].iter().collect::<Vec<_>>()).unwrap();
        let n = all.n_frames() as f64;
        for d in 0..all.dim() {
            let mean = all.rows().map(|r| r[d]).sum::<f64>() / n;
            let got = model.states[0][0].mean[d];
            assert!((got - mean).abs() <= 1e-10 * mean.abs().max(1.0), "{id} dim {d}: {got} vs {mean}");
        }
    }
}

#[test]
fn model_files_round_trip_and_guard_settings() {
    let dir = tempfile::tempdir().unwrap();
    let (manifest, train) = setup(dir.path(), FeatureKind::Wpmfc);
    let models = train_speakers(&train, 2, 2, &TrainOptions::default()).unwrap();
    let files: Vec<ModelFile> = models.iter().map(|(id, m)| ModelFile::new(id.clone(), m.clone())).collect();
    let mdir = dir.path().join("models");
    save_models(&mdir, &files).unwrap();
    let loaded = load_models(&mdir, &manifest.speakers()).unwrap();
    assert_eq!(loaded, files);

    let probe = &train["spk01"][0];
    let a = log_likelihood(&files[0].model, probe).unwrap();
    let b = log_likelihood(&loaded[0].model, probe).unwrap();
    assert_eq!(a.total.to_bits(), b.total.to_bits());

    // same dimension, different extraction settings
    let other = MfccParams {
        n_coeffs: 35,
        ..MfccParams::default()
    };
    let x = &load_split_audio(&manifest, Split::Test).unwrap()[0].item;
    let foreign = wpmfc_core::mfcc::mfcc_features_with(x, &other).unwrap();
    assert_eq!(foreign.dim(), 35);
    assert!(matches!(log_likelihood(&files[0].model, &foreign), Err(Error::FeatureMismatch { .. })));

    assert!(load_models(&mdir, &["spk09".to_string()]).is_err());
}

#[test]
fn reports_are_reproducible() {
    let run = || {
        let dir = tempfile::tempdir().unwrap();
        let (manifest, train) = setup(dir.path(), FeatureKind::Mfcc);
        let opts = TrainOptions { seed: 42, ..TrainOptions::default() };
        let models = train_speakers(&train, 1, 4, &opts).unwrap();
        let files: Vec<ModelFile> = models.iter().map(|(id, m)| ModelFile::new(id.clone(), m.clone())).collect();
        let db = database(&files).unwrap();
        let tests = load_split_audio(&manifest, Split::Test).unwrap();
        let noise = resonator_speakers(5)[4].utterance(0.2, 16000, 3);
        let config = EvalConfig {
            feature: FeatureParams::default_for(FeatureKind::Mfcc),
            n_states: 1,
            n_mixtures: 4,
            train: opts,
            alpha: 2.0,
        };
        let report = identify_eval(&tests, &db, Some(&noise), &[10.0, -5.0], &config).unwrap();
        report.check_consistency().unwrap();
        report.to_json()
    };
    let first = run();
    assert_eq!(first, run());
    assert!(first.contains("\"seed\": 42"));
}
