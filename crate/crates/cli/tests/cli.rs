use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use wpmfc_core::eval::ExperimentReport;
use wpmfc_core::synth::{corpus, resonator_speakers, write_corpus};

fn wpmfc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wpmfc"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn small_corpus(dir: &Path, speakers: usize) -> PathBuf {
    let c = corpus(&resonator_speakers(speakers), 5, 0.5, 16000, 11);
    write_corpus(dir, &c, 3).unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(wpmfc(&["--help"]).status.code(), Some(0));
    assert_eq!(wpmfc(&["--version"]).status.code(), Some(0));
    assert_eq!(wpmfc(&[]).status.code(), Some(1));
    assert_eq!(wpmfc(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(wpmfc(&["extract", "--out", "/tmp/x"]).status.code(), Some(1));
    assert_eq!(wpmfc(&["mix", "--input-dir", "a", "--noise", "n.wav", "--out", "o", "--snr", "5,x"]).status.code(), Some(1));

    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "mixturez = 3\n").unwrap();
    let o = wpmfc(&["--config", s(&cfg), "extract", "--input-dir", s(dir.path()), "--out", s(dir.path())]);
    assert_eq!(o.status.code(), Some(1));
    let o = wpmfc(&["extract", "--input-dir", s(dir.path()), "--out", "o", "--kind", "lpc"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn extract_reports_corrupt_files() {
    let dir = tempfile::tempdir().unwrap();
    let audio = dir.path().join("audio");
    small_corpus(&audio, 1);
    std::fs::write(audio.join("spk01").join("broken.wav"), b"RIFF garbage").unwrap();
    let out = dir.path().join("feat");
    let o = wpmfc(&["extract", "--input-dir", s(&audio), "--out", s(&out), "--kind", "wpmfc"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.contains("extracted 5 of 6"), "{text}");
    assert!(text.contains("1 failure(s)") && text.contains("broken.wav"), "{text}");
    let f = wpmfc_core::FeatureMatrix::load(out.join("spk01/utt01.wpmfc.bin")).unwrap();
    assert_eq!(f.dim(), 35);

    let empty = dir.path().join("empty");
    std::fs::create_dir(&empty).unwrap();
    assert_eq!(wpmfc(&["extract", "--input-dir", s(&empty), "--out", s(&out)]).status.code(), Some(2));
}

#[test]
fn train_identify_verify_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = small_corpus(&dir.path().join("audio"), 3);
    let feat = dir.path().join("feat");
    let models = dir.path().join("models");
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "kind = \"mfcc\"\nmixtures = 2\nseed = 5\n").unwrap();
    let base = ["--config", s(&cfg)];

    let o = wpmfc(&[&base[..], &["extract", "--manifest", s(&manifest), "--out", s(&feat)]].concat());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));

    let train = |out: &Path| {
        let o = wpmfc(&[&base[..], &["train", "--manifest", s(&manifest), "--features", s(&feat), "--models", s(out)]].concat());
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    };
    train(&models);
    let again = dir.path().join("models2");
    train(&again);
    for spk in ["spk01", "spk02", "spk03"] {
        let name = format!("{spk}.model.json");
        let a = std::fs::read(models.join(&name)).unwrap();
        assert_eq!(a, std::fs::read(again.join(&name)).unwrap(), "{spk} not reproducible");
        let m = wpmfc_core::recognition::ModelFile::load(models.join(&name)).unwrap();
        assert_eq!(m.model.n_mixtures, 2);
        assert!(m.verification.is_some());
        assert_eq!(m.training.unwrap().seed, 5);
    }

    let noise = dir.path().join("noise.wav");
    let n = resonator_speakers(6)[5].utterance(0.3, 16000, 99);
    wpmfc_core::audio::write_wav(&noise, &n).unwrap();
    let report = dir.path().join("ident.json");
    let o = wpmfc(&[
        "identify-eval", "--manifest", s(&manifest), "--models", s(&models), "--noise", s(&noise), "--snr", "20,10",
        "--report", s(&report),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("SPEAKER IDENTIFICATION"));
    let r = ExperimentReport::from_json(&std::fs::read_to_string(&report).unwrap()).unwrap();
    let conds: Vec<_> = r.identification.iter().map(|c| c.condition.as_str()).collect();
    assert_eq!(conds, ["clean", "snr20dB", "snr10dB"]);
    assert_eq!(r.identification[0].total, 6);
    assert_eq!(r.identification[0].accuracy_pct, 100.0);
    assert_eq!(r.config.train.seed, 5);

    let vreport = dir.path().join("verify.json");
    let o = wpmfc(&["verify-eval", "--manifest", s(&manifest), "--models", s(&models), "--report", s(&vreport)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = ExperimentReport::from_json(&std::fs::read_to_string(&vreport).unwrap()).unwrap();
    let c = &r.verification[0];
    assert_eq!((c.genuine_trials, c.impostor_trials), (6, 12));

    // a huge alpha lowers every threshold far enough to accept all impostors
    let o = wpmfc(&["verify-eval", "--manifest", s(&manifest), "--models", s(&models), "--alpha", "1e9", "--report", s(&vreport)]);
    assert_eq!(o.status.code(), Some(0));
    let r = ExperimentReport::from_json(&std::fs::read_to_string(&vreport).unwrap()).unwrap();
    assert_eq!(r.verification[0].false_accept_pct, 100.0);

    let o = wpmfc(&["identify-eval", "--manifest", s(&manifest), "--models", s(&dir.path().join("nope"))]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn train_without_features_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = small_corpus(&dir.path().join("audio"), 1);
    let o = wpmfc(&["train", "--manifest", s(&manifest), "--features", s(&dir.path().join("none")), "--models", s(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn mix_writes_one_file_per_input_and_snr() {
    let dir = tempfile::tempdir().unwrap();
    let audio = dir.path().join("audio");
    let c = corpus(&resonator_speakers(2), 1, 0.3, 16000, 4);
    write_corpus(&audio, &c, 1).unwrap();
    let noise = dir.path().join("noise.wav");
    wpmfc_core::audio::write_wav(&noise, &resonator_speakers(3)[2].utterance(0.2, 16000, 1)).unwrap();
    let out = dir.path().join("mixed");
    let o = wpmfc(&["mix", "--input-dir", s(&audio), "--noise", s(&noise), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stdout(&o).lines().count(), 8);
    assert!(out.join("spk01/utt01_snr-5dB.wav").exists());
    assert!(out.join("spk02/utt01_snr20dB.wav").exists());

    let none = dir.path().join("none");
    let o = wpmfc(&["mix", "--input-dir", s(&audio), "--noise", s(&noise), "--out", s(&none), "--snr", ""]);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stderr).contains("empty SNR list"));
    assert!(!none.exists());

    let other = dir.path().join("noise8k.wav");
    wpmfc_core::audio::write_wav(&other, &wpmfc_core::AudioSignal::new(vec![0.1, -0.1, 0.2], 8000)).unwrap();
    let o = wpmfc(&["mix", "--input-dir", s(&audio), "--noise", s(&other), "--out", s(&out), "--snr", "0"]);
    assert_eq!(o.status.code(), Some(2));
}
