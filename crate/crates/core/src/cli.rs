//! Command-line front end: run configuration and the `synth`, `extract`,
//! `augment`, `train`, `detect` and `eval` commands.
//!
//! A run configuration is a flat `key=value` file (`#` starts a comment).
//! Command-line flags are applied on top of it.

use std::collections::btree_map::Entry;
use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::augment::augment_dataset;
use crate::detection::{
    events_to_roll, read_detections, roll_to_events, threshold_outputs, write_detections,
};
use crate::error::{Error, Result};
use crate::evaluation::{evaluate_contexts, EvalReport, RecordingResult};
use crate::features::{
    build_mel_filterbank, extract_log_mel, normalize_amplitude, read_features, read_wav,
    write_features, FeatureConfig, FrameGeometry, MelSpectrogram,
};
use crate::neural::{read_model, write_model, ModelFile};
use crate::sequence::{read_annotations, read_class_map, ClassMap, EventAnnotation};
use crate::synthgen::{default_classes, generate_dataset, write_dataset, SynthSpec};
use crate::training::{
    cross_validate, fold_split, predict_recording, read_folds, Recording, TrainConfig,
};

const FEATURE_EXT: &str = "feat";

/// Everything a command may need, with defaults for every key.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub train: TrainConfig,
    pub synth: SynthSpec,
    pub features: FeatureConfig,
    /// Dataset root: `audio/`, `annotations.csv`, `classes.csv`, `folds.csv`.
    pub data_dir: PathBuf,
    pub features_dir: PathBuf,
    pub augmented_dir: PathBuf,
    /// Models, logs, detections and reports.
    pub run_dir: PathBuf,
    /// Overrides `<data_dir>/folds.csv`.
    pub folds_file: Option<PathBuf>,
    pub model: Option<PathBuf>,
    /// Detection CSV to evaluate; defaults to `<run_dir>/detections.csv`.
    pub predictions: Option<PathBuf>,
    /// Restrict a command to these folds (their test recordings for
    /// `detect` and `eval`, their training recordings for `augment`).
    pub folds: Vec<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            train: TrainConfig::default(),
            synth: SynthSpec::default(),
            features: FeatureConfig::default(),
            data_dir: PathBuf::from("data"),
            features_dir: PathBuf::from("features"),
            augmented_dir: PathBuf::from("augmented"),
            run_dir: PathBuf::from("run"),
            folds_file: None,
            model: None,
            predictions: None,
            folds: Vec::new(),
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {value:?}")))
}

fn parse_list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse(key, s))
        .collect()
}

fn parse_switch(key: &str, value: &str) -> Result<bool> {
    match value.trim() {
        "on" | "true" | "1" => Ok(true),
        "off" | "false" | "0" => Ok(false),
        other => Err(Error::Config(format!(
            "{key}: expected on or off, got {other:?}"
        ))),
    }
}

impl RunConfig {
    /// Set one key. Unknown keys are an error.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let t = &mut self.train;
        let s = &mut self.synth;
        match key {
            "eta" => t.eta = parse(key, value)?,
            "rho" => t.rho = parse(key, value)?,
            "noise_sigma" => t.noise_sigma = parse(key, value)?,
            "batch_size" => t.batch_size = parse(key, value)?,
            "patience_epochs" => t.patience_epochs = parse(key, value)?,
            "max_epochs" => t.max_epochs = parse(key, value)?,
            "n_restarts" => t.n_restarts = parse(key, value)?,
            "sequence_lengths" => t.sequence_lengths = parse_list(key, value)?,
            "augmented_sequence_length" => t.augmented_sequence_length = parse(key, value)?,
            "test_sequence_length" => t.test_sequence_length = parse(key, value)?,
            "threshold" => t.threshold = parse(key, value)?,
            "hidden_cells" => t.hidden_cells = parse_list(key, value)?,
            "rng_seed" => {
                let seed = parse(key, value)?;
                t.rng_seed = seed;
                t.augmentation.rng_seed = seed;
                s.rng_seed = seed;
            }
            "augment" => t.augment = parse_switch(key, value)?,
            "stretch_factors" => t.augmentation.stretch_factors = parse_list(key, value)?,
            "subframe_shifts" => t.augmentation.subframe_shifts = parse_list(key, value)?,
            "mix_blocks_per_context" => t.augmentation.mix_blocks_per_context = parse(key, value)?,
            "mix_expansion" => t.augmentation.mix_expansion = parse(key, value)?,
            "n_contexts" => s.n_contexts = parse(key, value)?,
            "classes_per_context" => s.classes_per_context = parse(key, value)?,
            "recordings_per_context" => s.recordings_per_context = parse(key, value)?,
            "recording_len_s" => s.recording_len_s = parse(key, value)?,
            "polyphony" => s.polyphony = parse_list(key, value)?,
            "n_classes" => {
                let n = parse(key, value)?;
                s.classes = default_classes(n, s.sample_rate);
            }
            "n_folds" => s.n_folds = parse(key, value)?,
            "noise_floor" => s.noise_floor = parse(key, value)?,
            "sample_rate" => {
                s.sample_rate = parse(key, value)?;
                s.classes = default_classes(s.classes.len(), s.sample_rate);
            }
            "frame_len_s" => self.features.frame_len_s = parse(key, value)?,
            "overlap" => self.features.overlap = parse(key, value)?,
            "n_bands" => self.features.n_bands = parse(key, value)?,
            "data_dir" => self.data_dir = value.trim().into(),
            "features_dir" => self.features_dir = value.trim().into(),
            "augmented_dir" => self.augmented_dir = value.trim().into(),
            "run_dir" => self.run_dir = value.trim().into(),
            "folds_file" => self.folds_file = Some(value.trim().into()),
            "model" => self.model = Some(value.trim().into()),
            "predictions" => self.predictions = Some(value.trim().into()),
            "folds" => self.folds = parse_list(key, value)?,
            _ => return Err(Error::Config(format!("unknown configuration key {key:?}"))),
        }
        Ok(())
    }

    pub fn parse_str(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key=value", n + 1)))?;
            cfg.set(k.trim(), v)?;
        }
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::parse_str(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        self.synth.validate()?;
        let f = &self.features;
        if !(f.frame_len_s > 0.0) || !(0.0..1.0).contains(&f.overlap) || f.n_bands == 0 {
            return Err(Error::Config("invalid feature settings".into()));
        }
        Ok(())
    }

    fn folds_path(&self) -> PathBuf {
        self.folds_file
            .clone()
            .unwrap_or_else(|| self.data_dir.join("folds.csv"))
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Generate the synthetic dataset into `data_dir`.
pub fn cmd_synth(cfg: &RunConfig) -> Result<()> {
    let data = generate_dataset(&cfg.synth)?;
    create_dir(&cfg.data_dir)?;
    write_dataset(&cfg.data_dir, &data)?;
    log::info!(
        "wrote {} recordings to {}",
        data.clips.len(),
        cfg.data_dir.display()
    );
    Ok(())
}

fn wav_files(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.is_dir() {
            wav_files(&path, out)?;
        } else if path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("wav"))
        {
            out.push(path);
        }
    }
    Ok(())
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

/// Log-mel features for every WAV under `<data_dir>/audio`. The context id
/// is the name of the directory holding the file; the recording id is the
/// file stem. Returns the number of files that failed.
pub fn cmd_extract(cfg: &RunConfig) -> Result<usize> {
    let audio = cfg.data_dir.join("audio");
    let mut files = Vec::new();
    wav_files(&audio, &mut files)?;
    files.sort();
    if files.is_empty() {
        return Err(Error::InvalidInput(format!(
            "no recordings under {}",
            audio.display()
        )));
    }
    create_dir(&cfg.features_dir)?;
    let f = &cfg.features;
    let mut failed = 0;
    let mut banks = BTreeMap::new();
    for path in &files {
        let context = path
            .parent()
            .filter(|p| *p != audio)
            .map(stem)
            .unwrap_or_else(|| "default".into());
        let result = (|| {
            let clip = read_wav(path, &context, &stem(path))?;
            let geom = FrameGeometry::new(clip.sample_rate, f.frame_len_s, f.overlap)?;
            let fb = match banks.entry(clip.sample_rate) {
                Entry::Occupied(e) => e.into_mut(),
                Entry::Vacant(e) => e.insert(build_mel_filterbank(
                    clip.sample_rate,
                    geom.n_fft,
                    f.n_bands,
                )?),
            };
            let spec = extract_log_mel(&normalize_amplitude(&clip), fb, f.frame_len_s, f.overlap)?;
            let out = cfg
                .features_dir
                .join(format!("{}.{FEATURE_EXT}", clip.recording_id));
            write_features(&out, &spec)
        })();
        if let Err(e) = result {
            log::error!("{}: {e}", path.display());
            failed += 1;
        }
    }
    log::info!(
        "extracted {} of {} recordings",
        files.len() - failed,
        files.len()
    );
    Ok(failed)
}

/// All feature files of a directory, sorted by recording id.
pub fn load_features(dir: &Path) -> Result<Vec<MelSpectrogram>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == FEATURE_EXT))
        .collect();
    paths.sort();
    let mut specs = paths
        .iter()
        .map(|p| read_features(p))
        .collect::<Result<Vec<_>>>()?;
    specs.sort_by(|a, b| a.recording_id.cmp(&b.recording_id));
    Ok(specs)
}

fn load_truth(cfg: &RunConfig) -> Result<(ClassMap, Vec<EventAnnotation>)> {
    let classes = read_class_map(&cfg.data_dir.join("classes.csv"))?;
    let events = read_annotations(&cfg.data_dir.join("annotations.csv"))?
        .iter()
        .map(|r| r.to_event(&classes))
        .collect::<Result<Vec<_>>>()?;
    Ok((classes, events))
}

/// Feature files paired with target rolls from the annotations.
pub fn load_recordings(cfg: &RunConfig) -> Result<(ClassMap, Vec<Recording>)> {
    let (classes, events) = load_truth(cfg)?;
    let specs = load_features(&cfg.features_dir)?;
    if specs.is_empty() {
        return Err(Error::InvalidInput(format!(
            "no recordings in {}",
            cfg.features_dir.display()
        )));
    }
    let recs = specs
        .into_iter()
        .map(|s| Recording::from_annotations(s, &events, classes.len()))
        .collect::<Result<Vec<_>>>()?;
    Ok((classes, recs))
}

/// Recording ids selected by `cfg.folds` (all when empty), taking the
/// `part` of each fold's split.
fn selected_ids(
    cfg: &RunConfig,
    part: fn(crate::training::FoldSplit) -> Vec<String>,
) -> Result<Option<BTreeSet<String>>> {
    if cfg.folds.is_empty() {
        return Ok(None);
    }
    let assignment = read_folds(&cfg.folds_path())?;
    let mut ids = BTreeSet::new();
    for &f in &cfg.folds {
        ids.extend(part(fold_split(&assignment, f)?));
    }
    Ok(Some(ids))
}

/// Augment the training recordings (of `cfg.folds`, or all) into
/// `augmented_dir`: one feature file per augmented recording, plus
/// `targets.csv` (frame-exact activity in the detection layout) and
/// `sources.csv`.
pub fn cmd_augment(cfg: &RunConfig) -> Result<usize> {
    let (classes, recs) = load_recordings(cfg)?;
    let keep = selected_ids(cfg, |s| s.train)?;
    let pairs: Vec<_> = recs
        .into_iter()
        .filter(|r| keep.as_ref().is_none_or(|k| k.contains(r.id())))
        .map(|r| (r.spec, r.roll))
        .collect();
    let augmented = augment_dataset(&pairs, &cfg.train.augmentation)?;
    create_dir(&cfg.augmented_dir)?;
    let mut targets = Vec::new();
    let mut sources = String::from("recording_id,sources\n");
    for a in &augmented {
        let id = &a.spec.recording_id;
        write_features(
            &cfg.augmented_dir.join(format!("{id}.{FEATURE_EXT}")),
            &a.spec,
        )?;
        targets.extend(roll_to_events(
            &a.roll,
            a.spec.frame_hop_s,
            a.spec.frame_len_s,
            id,
        ));
        sources.push_str(&format!("{id},{}\n", a.sources.join(";")));
    }
    write_detections(&cfg.augmented_dir.join("targets.csv"), &targets, &classes)?;
    let p = cfg.augmented_dir.join("sources.csv");
    fs::write(&p, sources).map_err(|e| Error::io(&p, e))?;
    log::info!("wrote {} augmented recordings", augmented.len());
    Ok(augmented.len())
}

pub fn model_path(run_dir: &Path, fold_id: usize) -> PathBuf {
    run_dir.join(format!("fold{fold_id}.model"))
}

/// Cross-validate and write `fold<f>.model`, per-restart epoch logs and
/// the averaged report into `run_dir`.
pub fn cmd_train(cfg: &RunConfig) -> Result<EvalReport> {
    cfg.train.validate()?;
    let assignment = read_folds(&cfg.folds_path())?;
    for &f in &cfg.folds {
        fold_split(&assignment, f)?;
    }
    let (classes, recs) = load_recordings(cfg)?;
    let missing: Vec<&str> = assignment
        .iter()
        .map(|(id, _)| id.as_str())
        .filter(|id| !recs.iter().any(|r| r.id() == *id))
        .collect();
    if !missing.is_empty() {
        return Err(Error::Config(format!(
            "no features for {}",
            missing.join(", ")
        )));
    }
    create_dir(&cfg.run_dir)?;
    let results = cross_validate(&recs, &assignment, &cfg.folds, &cfg.train)?;
    for r in &results {
        let mut config = cfg.train.to_pairs();
        config.push(("fold".into(), r.fold_id.to_string()));
        config.push(("selected_restart".into(), r.selected.to_string()));
        let model = ModelFile {
            network: r.model.clone(),
            classes: classes.names().to_vec(),
            config,
        };
        write_model(&model_path(&cfg.run_dir, r.fold_id), &model)?;
        for (i, rec) in r.records.iter().enumerate() {
            let p = cfg
                .run_dir
                .join(format!("fold{}_restart{i}.log", r.fold_id));
            fs::write(&p, rec.log_csv()).map_err(|e| Error::io(&p, e))?;
        }
        log::info!(
            "fold {}: F1 {:.3} (frames), {:.3} (1 s blocks)",
            r.fold_id,
            r.report.f1_avgframe,
            r.report.f1_1sec
        );
    }
    let report = EvalReport::mean(&results.iter().map(|r| r.report.clone()).collect::<Vec<_>>());
    report.write_csv(&cfg.run_dir.join("cv_report.csv"))?;
    Ok(report)
}

/// Run a model over the feature files (test recordings of `cfg.folds`, or
/// all) and write `<run_dir>/detections.csv`.
pub fn cmd_detect(cfg: &RunConfig) -> Result<PathBuf> {
    let path = cfg
        .model
        .as_ref()
        .ok_or_else(|| Error::Config("detect needs a model (--model or model=)".into()))?;
    let model = read_model(path)?;
    let classes = ClassMap::new(model.classes.clone())?;
    let keep = selected_ids(cfg, |s| s.test)?;
    let specs = load_features(&cfg.features_dir)?;
    let mut events = Vec::new();
    for spec in specs
        .iter()
        .filter(|s| keep.as_ref().is_none_or(|k| k.contains(&s.recording_id)))
    {
        if spec.n_bands() != model.network.n_bands() {
            return Err(Error::InvalidInput(format!(
                "{} has {} bands, the model expects {}",
                spec.recording_id,
                spec.n_bands(),
                model.network.n_bands()
            )));
        }
        let y = predict_recording(&model.network, spec, cfg.train.test_sequence_length)?;
        let roll = threshold_outputs(y.view(), cfg.train.threshold)?;
        events.extend(roll_to_events(
            &roll,
            spec.frame_hop_s,
            spec.frame_len_s,
            &spec.recording_id,
        ));
    }
    create_dir(&cfg.run_dir)?;
    let out = cfg.run_dir.join("detections.csv");
    write_detections(&out, &events, &classes)?;
    log::info!("{} events written to {}", events.len(), out.display());
    Ok(out)
}

/// Score detections against the annotations of the feature files (test
/// recordings of `cfg.folds`, or all). Writes `report.csv`, `report.txt`
/// and, when `pooled` is set, `report_pooled.csv` with the framewise F1
/// computed from pooled counts.
pub fn cmd_eval(cfg: &RunConfig, pooled: bool) -> Result<EvalReport> {
    let (classes, truth) = load_truth(cfg)?;
    let pred_path = cfg
        .predictions
        .clone()
        .unwrap_or_else(|| cfg.run_dir.join("detections.csv"));
    let detected = read_detections(&pred_path, &classes)?;
    let keep = selected_ids(cfg, |s| s.test)?;
    let specs: Vec<MelSpectrogram> = load_features(&cfg.features_dir)?
        .into_iter()
        .filter(|s| keep.as_ref().is_none_or(|k| k.contains(&s.recording_id)))
        .collect();
    if specs.is_empty() {
        return Err(Error::InvalidInput("no recordings to evaluate".into()));
    }
    let known: BTreeSet<&str> = specs.iter().map(|s| s.recording_id.as_str()).collect();
    let unknown: BTreeSet<&str> = detected
        .iter()
        .map(|e| e.recording_id.as_str())
        .filter(|id| !known.contains(id))
        .collect();
    if !unknown.is_empty() {
        return Err(Error::InvalidInput(format!(
            "detections for unknown recordings: {}",
            unknown.into_iter().collect::<Vec<_>>().join(", ")
        )));
    }
    let hop = specs[0].frame_hop_s;
    let mut results = Vec::with_capacity(specs.len());
    for spec in specs {
        let own: Vec<_> = detected
            .iter()
            .filter(|e| e.recording_id == spec.recording_id)
            .cloned()
            .collect();
        let pred = events_to_roll(
            &own,
            spec.n_frames(),
            spec.frame_hop_s,
            spec.frame_len_s,
            classes.len(),
        )?;
        let rec = Recording::from_annotations(spec, &truth, classes.len())?;
        results.push(RecordingResult {
            recording_id: rec.spec.recording_id.clone(),
            context_id: rec.spec.context_id.clone(),
            pred,
            truth: rec.roll,
        });
    }
    let report = evaluate_contexts(&results, hop)?;
    create_dir(&cfg.run_dir)?;
    report.write_csv(&cfg.run_dir.join("report.csv"))?;
    let p = cfg.run_dir.join("report.txt");
    fs::write(&p, report.to_table()).map_err(|e| Error::io(&p, e))?;
    if pooled {
        let p = cfg.run_dir.join("report_pooled.csv");
        fs::write(&p, pooled_csv(&report)).map_err(|e| Error::io(&p, e))?;
    }
    Ok(report)
}

/// `context,f1_avgframe,f1_frame_pooled,f1_1sec` with an `average` row.
pub fn pooled_csv(report: &EvalReport) -> String {
    let mut s = String::from("context,f1_avgframe,f1_frame_pooled,f1_1sec\n");
    let mut pooled_sum = 0.0;
    for c in &report.contexts {
        let p = c.frame_counts.f1();
        pooled_sum += p;
        s.push_str(&format!(
            "{},{},{},{}\n",
            c.context_id, c.f1_avgframe, p, c.f1_1sec
        ));
    }
    let n = report.contexts.len().max(1) as f64;
    s.push_str(&format!(
        "average,{},{},{}\n",
        report.f1_avgframe,
        pooled_sum / n,
        report.f1_1sec
    ));
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Switch {
    On,
    Off,
}

#[derive(Debug, Args, Default)]
pub struct CommonFlags {
    /// Run configuration file (key=value lines).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Comma-separated fold ids.
    #[arg(long, global = true, value_delimiter = ',')]
    pub folds: Option<Vec<usize>>,
    #[arg(long, global = true)]
    pub restarts: Option<usize>,
    #[arg(long, global = true)]
    pub augment: Option<Switch>,
    #[arg(long, global = true)]
    pub threshold: Option<f64>,
    /// Output directory of the command.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Parser)]
#[command(
    name = "polysed",
    version,
    about = "Polyphonic sound event detection with BLSTM networks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub flags: CommonFlags,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset.
    Synth,
    /// Extract log-mel features from the dataset audio.
    Extract,
    /// Write augmented copies of the training features.
    Augment,
    /// Cross-validate and write one model per fold.
    Train,
    /// Detect events with a trained model.
    Detect {
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Score detections against the annotations.
    Eval {
        #[arg(long)]
        predictions: Option<PathBuf>,
        /// Also report framewise F1 from pooled counts.
        #[arg(long)]
        pooled: bool,
    },
}

impl Cli {
    /// The configuration file (if any) with the flags applied on top.
    pub fn run_config(&self) -> Result<RunConfig> {
        let f = &self.flags;
        let mut cfg = match &f.config {
            Some(p) => RunConfig::from_file(p)?,
            None => RunConfig::default(),
        };
        if let Some(seed) = f.seed {
            cfg.set("rng_seed", &seed.to_string())?;
        }
        if let Some(folds) = &f.folds {
            cfg.folds = folds.clone();
        }
        if let Some(n) = f.restarts {
            cfg.train.n_restarts = n;
        }
        if let Some(a) = f.augment {
            cfg.train.augment = a == Switch::On;
        }
        if let Some(t) = f.threshold {
            cfg.train.threshold = t;
        }
        match &self.command {
            Command::Detect { model: Some(m) } => cfg.model = Some(m.clone()),
            Command::Eval {
                predictions: Some(p),
                ..
            } => cfg.predictions = Some(p.clone()),
            _ => {}
        }
        if let Some(out) = &f.out {
            let target = match self.command {
                Command::Synth => &mut cfg.data_dir,
                Command::Extract => &mut cfg.features_dir,
                Command::Augment => &mut cfg.augmented_dir,
                Command::Train | Command::Detect { .. } | Command::Eval { .. } => &mut cfg.run_dir,
            };
            *target = out.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Execute a parsed command line.
pub fn run(cli: &Cli) -> Result<()> {
    let cfg = cli.run_config()?;
    match &cli.command {
        Command::Synth => cmd_synth(&cfg),
        Command::Extract => match cmd_extract(&cfg)? {
            0 => Ok(()),
            n => Err(Error::InvalidInput(format!(
                "{n} recordings could not be processed"
            ))),
        },
        Command::Augment => cmd_augment(&cfg).map(|_| ()),
        Command::Train => {
            let report = cmd_train(&cfg)?;
            print!("{}", report.to_table());
            Ok(())
        }
        Command::Detect { .. } => cmd_detect(&cfg).map(|p| println!("{}", p.display())),
        Command::Eval { pooled, .. } => {
            let report = cmd_eval(&cfg, *pooled)?;
            print!("{}", report.to_table());
            Ok(())
        }
    }
}
