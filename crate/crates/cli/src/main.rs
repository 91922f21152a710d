mod config;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use log::{info, warn};

use wpmfc_core::audio::load_wav;
use wpmfc_core::eval::{
    calibrate_speaker, common_params, database, extract_files, identify_eval, load_models, load_split_audio,
    load_split_features, mix_files, save_models, train_speakers, verify_eval, DatasetManifest, EvalConfig,
    ExperimentReport, Labelled, Split,
};
use wpmfc_core::recognition::{ModelFile, VerificationProfile};
use wpmfc_core::AudioSignal;

use config::Settings;

#[derive(Debug, Parser)]
#[command(name = "wpmfc", version, about = "WP-MFC / MFCC speaker identification and verification")]
struct Cli {
    /// TOML file with default settings; command-line flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Extract feature files for every utterance of a manifest or directory.
    Extract(ExtractArgs),
    /// Train one model per speaker on the manifest's train split.
    Train(TrainArgs),
    /// Closed-set identification of the test split, optionally under noise.
    IdentifyEval(IdentifyArgs),
    /// Threshold verification of the test split against impostors.
    VerifyEval(VerifyArgs),
    /// Write noise-corrupted copies of clean WAV files at given SNRs.
    Mix(MixArgs),
}

#[derive(Debug, Args)]
#[group(id = "source", required = true, multiple = false)]
struct Source {
    /// Dataset manifest (`speaker split path` per line).
    #[arg(long, group = "source")]
    manifest: Option<PathBuf>,
    /// Directory searched recursively for .wav files.
    #[arg(long, group = "source")]
    input_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ExtractArgs {
    #[command(flatten)]
    source: Source,
    /// Output directory for feature files.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    settings: Settings,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Directory written by `extract`.
    #[arg(long)]
    features: PathBuf,
    /// Output directory for `<speaker>.model.json` files.
    #[arg(long)]
    models: PathBuf,
    /// Skip fitting verification thresholds.
    #[arg(long)]
    no_calibrate: bool,
    #[command(flatten)]
    settings: Settings,
}

#[derive(Debug, Args)]
struct IdentifyArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    models: PathBuf,
    /// Noise WAV mixed into every test utterance at each SNR.
    #[arg(long)]
    noise: Option<PathBuf>,
    /// Write the full report (with per-trial logs) as JSON.
    #[arg(long)]
    report: Option<PathBuf>,
    #[command(flatten)]
    settings: Settings,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    /// Manifest of enrolled speakers; their test split gives the trials.
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    models: PathBuf,
    /// Manifest of extra impostor speakers without models.
    #[arg(long)]
    impostors: Option<PathBuf>,
    /// Only evaluate claims of these speakers (repeatable).
    #[arg(long)]
    speaker: Vec<String>,
    #[arg(long)]
    noise: Option<PathBuf>,
    #[arg(long)]
    report: Option<PathBuf>,
    #[command(flatten)]
    settings: Settings,
}

#[derive(Debug, Args)]
struct MixArgs {
    #[command(flatten)]
    source: Source,
    #[arg(long)]
    noise: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    settings: Settings,
}

/// Failure categories mapped onto process exit codes.
enum Failure {
    Usage(anyhow::Error),
    Data(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Data(_) => 2,
        }
    }
}

impl From<wpmfc_core::Error> for Failure {
    fn from(e: wpmfc_core::Error) -> Self {
        match e {
            wpmfc_core::Error::InvalidParameter(_) => Failure::Usage(e.into()),
            other => Failure::Data(other.into()),
        }
    }
}

fn usage(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Usage(e.into())
}

fn data(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Data(e.into())
}

type Outcome<T> = std::result::Result<T, Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (Failure::Usage(e) | Failure::Data(e)) = &f;
            eprintln!("error: {e:#}");
            ExitCode::from(f.code())
        }
    }
}

fn run(cli: Cli) -> Outcome<()> {
    let file = match &cli.config {
        Some(p) => Settings::load_file(p).map_err(usage)?,
        None => Settings::default(),
    };
    match cli.command {
        Command::Extract(a) => extract(a, &file),
        Command::Train(a) => train(a, &file),
        Command::IdentifyEval(a) => identify(a, &file),
        Command::VerifyEval(a) => verify(a, &file),
        Command::Mix(a) => mix(a, &file),
    }
}

/// `(absolute path, path relative to the source root)` for every input.
fn source_files(source: &Source) -> Outcome<Vec<(PathBuf, PathBuf)>> {
    if let Some(m) = &source.manifest {
        let manifest = DatasetManifest::load(m)?;
        return Ok(manifest.entries.iter().map(|u| (u.path.clone(), u.rel_path.clone())).collect());
    }
    let dir = source.input_dir.as_ref().expect("clap enforces one source");
    if !dir.is_dir() {
        return Err(data(anyhow!("{} is not a directory", dir.display())));
    }
    let mut files = Vec::new();
    for entry in walkdir::WalkDir::new(dir).sort_by_file_name() {
        let entry = entry.map_err(data)?;
        let is_wav = entry
            .path()
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("wav"));
        if entry.file_type().is_file() && is_wav {
            let rel = entry.path().strip_prefix(dir).expect("walkdir stays under root").to_path_buf();
            files.push((entry.path().to_path_buf(), rel));
        }
    }
    if files.is_empty() {
        return Err(data(anyhow!("no .wav files under {}", dir.display())));
    }
    Ok(files)
}

fn extract(a: ExtractArgs, file: &Settings) -> Outcome<()> {
    let s = a.settings.over(file);
    let params = s.feature_params().map_err(usage)?;
    let inputs = source_files(&a.source)?;
    let summary = extract_files(&inputs, &a.out, &params)?;
    println!(
        "extracted {} of {} files ({} features) into {}",
        summary.written.len(),
        inputs.len(),
        params.kind(),
        a.out.display()
    );
    if !summary.failures.is_empty() {
        println!("{} failure(s):", summary.failures.len());
        for (path, why) in &summary.failures {
            println!("  {}: {why}", path.display());
        }
    }
    Ok(())
}

fn load_manifest(path: &Path) -> Outcome<DatasetManifest> {
    let m = DatasetManifest::load(path)?;
    m.validate_split(1, 0)?;
    Ok(m)
}

fn train(a: TrainArgs, file: &Settings) -> Outcome<()> {
    let s = a.settings.over(file);
    let kind = s.kind().map_err(usage)?;
    let opts = s.train_options();
    let manifest = load_manifest(&a.manifest)?;
    let train = load_split_features(&manifest, &a.features, kind, Split::Train)?;
    let calib = load_split_features(&manifest, &a.features, kind, Split::Calib)?;
    info!("training {} speakers (Q = {}, M = {})", train.len(), s.states(), s.mixtures());
    let models = train_speakers(&train, s.states(), s.mixtures(), &opts)?;
    let mut files = Vec::new();
    for (id, model) in models {
        let mut mf = ModelFile::new(id.clone(), model.clone()).with_training(&opts);
        if !a.no_calibrate {
            let profile = calibrate_speaker(&id, &model, &train[&id], calib.get(&id).map(Vec::as_slice), &opts, s.alpha())?;
            mf = mf.with_profile(&profile);
        }
        files.push(mf);
    }
    let paths = save_models(&a.models, &files)?;
    for (mf, p) in files.iter().zip(&paths) {
        match &mf.verification {
            Some(v) => println!("{}\t{}\tthreshold {:.6}", mf.speaker_id, p.display(), v.threshold),
            None => println!("{}\t{}", mf.speaker_id, p.display()),
        }
    }
    Ok(())
}

fn load_noise(path: Option<&PathBuf>) -> Outcome<Option<AudioSignal>> {
    path.map(|p| load_wav(p).map_err(Failure::from)).transpose()
}

fn eval_config(models: &[ModelFile], s: &Settings) -> Outcome<EvalConfig> {
    let first = models.first().ok_or_else(|| data(anyhow!("no models")))?;
    Ok(EvalConfig {
        feature: first.model.feature_params.clone(),
        n_states: first.model.n_states,
        n_mixtures: first.model.n_mixtures,
        train: first.training.clone().unwrap_or_else(|| s.train_options()),
        alpha: s.alpha(),
    })
}

fn emit(report: &ExperimentReport, path: Option<&PathBuf>) -> Outcome<()> {
    report.check_consistency()?;
    print!("{}", report.to_table());
    if let Some(p) = path {
        std::fs::write(p, report.to_json() + "\n").with_context(|| format!("writing {}", p.display())).map_err(data)?;
        println!("report written to {}", p.display());
    }
    Ok(())
}

fn identify(a: IdentifyArgs, file: &Settings) -> Outcome<()> {
    let s = a.settings.over(file);
    let manifest = load_manifest(&a.manifest)?;
    let models = load_models(&a.models, &manifest.speakers())?;
    let db = database(&models)?;
    common_params(&db)?;
    let tests = load_split_audio(&manifest, Split::Test)?;
    let noise = load_noise(a.noise.as_ref())?;
    let snrs = if noise.is_some() { s.snrs() } else { Vec::new() };
    let report = identify_eval(&tests, &db, noise.as_ref(), &snrs, &eval_config(&models, &s)?)?;
    emit(&report, a.report.as_ref())
}

fn verify(a: VerifyArgs, file: &Settings) -> Outcome<()> {
    let s = a.settings.over(file);
    let manifest = load_manifest(&a.manifest)?;
    let claimed = if a.speaker.is_empty() { manifest.speakers() } else { a.speaker.clone() };
    let models = load_models(&a.models, &claimed)?;
    let mut profiles: BTreeMap<String, VerificationProfile> = BTreeMap::new();
    for mf in &models {
        let mut p = mf.profile().ok_or_else(|| {
            data(anyhow!("model for {} has no verification threshold; retrain without --no-calibrate", mf.speaker_id))
        })?;
        if let Some(alpha) = s.alpha {
            p.threshold = p.calibration.mean - alpha * p.calibration.std;
            p.alpha = alpha;
        }
        profiles.insert(mf.speaker_id.clone(), p);
    }
    let tests = load_split_audio(&manifest, Split::Test)?;
    let impostors: Vec<Labelled<AudioSignal>> = match &a.impostors {
        Some(p) => {
            let m = DatasetManifest::load(p)?;
            if let Some(dup) = m.speakers().into_iter().find(|id| profiles.contains_key(id)) {
                return Err(data(anyhow!("impostor manifest contains enrolled speaker {dup}")));
            }
            [Split::Train, Split::Test, Split::Calib]
                .into_iter()
                .map(|sp| load_split_audio(&m, sp))
                .collect::<wpmfc_core::Result<Vec<_>>>()?
                .into_iter()
                .flatten()
                .collect()
        }
        None => Vec::new(),
    };
    let noise = load_noise(a.noise.as_ref())?;
    let snrs = if noise.is_some() { s.snrs() } else { Vec::new() };
    let mut config = eval_config(&models, &s)?;
    config.alpha = profiles.values().next().map_or(config.alpha, |p| p.alpha);
    let report = verify_eval(&profiles, &tests, &impostors, noise.as_ref(), &snrs, &config)?;
    emit(&report, a.report.as_ref())
}

fn mix(a: MixArgs, file: &Settings) -> Outcome<()> {
    let s = a.settings.over(file);
    let snrs = s.snrs();
    let inputs = source_files(&a.source)?;
    let noise = load_wav(&a.noise)?;
    if snrs.is_empty() {
        warn!("empty SNR list, no files written");
        return Ok(());
    }
    let written = mix_files(&inputs, &noise, &snrs, &a.out)?;
    for f in &written {
        let clip = if f.clipped_samples > 0 {
            format!("\t{} samples clipped", f.clipped_samples)
        } else {
            String::new()
        };
        println!("{}\ttarget {} dB\tmeasured {:.3} dB{clip}", f.path.display(), f.target_snr_db, f.measured_snr_db);
    }
    Ok(())
}
