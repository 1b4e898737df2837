//! Minibatch training with early stopping, best-of-N restarts and k-fold
//! cross-validation.
//!
//! Every sequence carries provenance tags. Before a fold is trained the
//! tags are checked: augmented material and normalizer statistics may only
//! come from the fold's training recordings, and validation sequences must
//! be unaugmented validation recordings.

mod folds;

use std::collections::BTreeSet;
use std::time::Instant;

use ndarray::{concatenate, Array2, Axis};
use rayon::prelude::*;

pub use folds::{fold_ids, fold_split, read_folds, write_folds, FoldSplit};

use crate::augment::{augment_dataset, AugmentationPlan};
use crate::detection::threshold_outputs;
use crate::error::{Error, Result};
use crate::evaluation::{evaluate_contexts, framewise_f1, EvalReport, RecordingResult};
use crate::features::{apply_normalizer, fit_normalizer, BandNormalizer, MelSpectrogram};
use crate::neural::{
    batch_gradient, init_network, predict, Architecture, BlstmNetwork, RmsPropState,
};
use crate::sequence::{
    annotations_to_roll, make_minibatches, split_covering, split_multiscale, EventAnnotation,
    TargetRoll, TrainingSequence,
};

/// Hyperparameters of a training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// RMSProp learning rate.
    pub eta: f64,
    /// RMSProp decay of the squared-gradient average.
    pub rho: f64,
    /// Standard deviation of the Gaussian input noise during training.
    pub noise_sigma: f64,
    pub batch_size: usize,
    pub patience_epochs: usize,
    pub max_epochs: usize,
    pub n_restarts: usize,
    /// Lengths original training recordings are cut into.
    pub sequence_lengths: Vec<usize>,
    /// Length augmented recordings are cut into.
    pub augmented_sequence_length: usize,
    /// Chunk length for validation and test.
    pub test_sequence_length: usize,
    pub threshold: f64,
    /// Cells per direction of every hidden layer.
    pub hidden_cells: Vec<usize>,
    pub rng_seed: u64,
    pub augment: bool,
    pub augmentation: AugmentationPlan,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            eta: 0.005,
            rho: 0.9,
            noise_sigma: 0.2,
            batch_size: 600,
            patience_epochs: 20,
            max_epochs: 500,
            n_restarts: 5,
            sequence_lengths: vec![10, 25, 100],
            augmented_sequence_length: 25,
            test_sequence_length: 100,
            threshold: 0.5,
            hidden_cells: vec![100; 4],
            rng_seed: 0,
            augment: false,
            augmentation: AugmentationPlan::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return bad("eta must be positive");
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return bad("rho must lie in (0, 1)");
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad("noise_sigma must be non-negative");
        }
        if self.batch_size == 0
            || self.patience_epochs == 0
            || self.max_epochs == 0
            || self.n_restarts == 0
        {
            return bad("batch_size, patience_epochs, max_epochs and n_restarts must be positive");
        }
        if self.sequence_lengths.is_empty() || self.sequence_lengths.contains(&0) {
            return bad("sequence_lengths must be positive");
        }
        if self.augmented_sequence_length == 0 || self.test_sequence_length == 0 {
            return bad("sequence lengths must be positive");
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return bad("threshold must lie in (0, 1)");
        }
        if self.hidden_cells.is_empty() || self.hidden_cells.contains(&0) {
            return bad("hidden_cells must list at least one positive layer size");
        }
        if self.augment {
            self.augmentation.validate()?;
        }
        Ok(())
    }

    /// Settings as `key=value` pairs, stored in model files.
    pub fn to_pairs(&self) -> Vec<(String, String)> {
        let list = |v: &[usize]| {
            v.iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        let flist = |v: &[f64]| {
            v.iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        let a = &self.augmentation;
        [
            ("eta", self.eta.to_string()),
            ("rho", self.rho.to_string()),
            ("noise_sigma", self.noise_sigma.to_string()),
            ("batch_size", self.batch_size.to_string()),
            ("patience_epochs", self.patience_epochs.to_string()),
            ("max_epochs", self.max_epochs.to_string()),
            ("n_restarts", self.n_restarts.to_string()),
            ("sequence_lengths", list(&self.sequence_lengths)),
            (
                "augmented_sequence_length",
                self.augmented_sequence_length.to_string(),
            ),
            (
                "test_sequence_length",
                self.test_sequence_length.to_string(),
            ),
            ("threshold", self.threshold.to_string()),
            ("hidden_cells", list(&self.hidden_cells)),
            ("rng_seed", self.rng_seed.to_string()),
            (
                "augment",
                if self.augment { "on" } else { "off" }.to_string(),
            ),
            ("stretch_factors", flist(&a.stretch_factors)),
            ("subframe_shifts", flist(&a.subframe_shifts)),
            (
                "mix_blocks_per_context",
                a.mix_blocks_per_context.to_string(),
            ),
            ("mix_expansion", a.mix_expansion.to_string()),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
    }
}

/// SplitMix64 over `parts`, for per-fold, per-restart, per-epoch seeds.
pub fn derive_seed(base: u64, parts: &[u64]) -> u64 {
    let mut x = base;
    for &p in parts {
        x = x.wrapping_add(p.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let mut z = x;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        x = z ^ (z >> 31);
    }
    x
}

/// Raw (unnormalized) features of one recording with its target roll.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    pub spec: MelSpectrogram,
    pub roll: TargetRoll,
}

impl Recording {
    /// Targets from annotations on the recording's own frame grid.
    pub fn from_annotations(
        spec: MelSpectrogram,
        events: &[EventAnnotation],
        n_classes: usize,
    ) -> Result<Self> {
        let own: Vec<EventAnnotation> = events
            .iter()
            .filter(|e| e.recording_id == spec.recording_id)
            .cloned()
            .collect();
        let roll = annotations_to_roll(
            &own,
            spec.n_frames(),
            spec.frame_hop_s,
            spec.frame_len_s,
            n_classes,
        )?;
        Ok(Self { spec, roll })
    }

    pub fn id(&self) -> &str {
        &self.spec.recording_id
    }
}

/// Everything one fold trains and validates on.
#[derive(Debug, Clone)]
pub struct PreparedFold {
    pub split: FoldSplit,
    pub normalizer: BandNormalizer,
    /// Recordings the normalizer statistics were computed from.
    pub normalizer_sources: Vec<String>,
    pub train: Vec<TrainingSequence>,
    pub validation: Vec<TrainingSequence>,
}

fn pick<'a>(data: &'a [Recording], ids: &[String]) -> Result<Vec<&'a Recording>> {
    ids.iter()
        .map(|id| {
            data.iter()
                .find(|r| r.id() == id)
                .ok_or_else(|| Error::InvalidInput(format!("recording {id:?} has no features")))
        })
        .collect()
}

/// Fit the normalizer on the training recordings, optionally augment them,
/// and cut every partition into sequences.
pub fn prepare_fold(
    data: &[Recording],
    split: &FoldSplit,
    cfg: &TrainConfig,
) -> Result<PreparedFold> {
    let train = pick(data, &split.train)?;
    let validation = pick(data, &split.validation)?;
    if train.is_empty() || validation.is_empty() {
        return Err(Error::InvalidInput(format!(
            "fold {} needs training and validation recordings",
            split.fold_id
        )));
    }
    let normalizer = fit_normalizer(train.iter().map(|r| &r.spec))?;
    let mut sequences = Vec::new();
    for r in &train {
        let spec = apply_normalizer(&r.spec, &normalizer)?;
        sequences.extend(split_multiscale(
            &spec,
            &r.roll,
            &cfg.sequence_lengths,
            &[r.id().to_string()],
            false,
        )?);
    }
    if cfg.augment {
        let pairs: Vec<(MelSpectrogram, TargetRoll)> = train
            .iter()
            .map(|r| (r.spec.clone(), r.roll.clone()))
            .collect();
        let plan = AugmentationPlan {
            rng_seed: derive_seed(cfg.augmentation.rng_seed, &[split.fold_id as u64]),
            ..cfg.augmentation.clone()
        };
        for aug in augment_dataset(&pairs, &plan)? {
            let spec = apply_normalizer(&aug.spec, &normalizer)?;
            sequences.extend(split_multiscale(
                &spec,
                &aug.roll,
                &[cfg.augmented_sequence_length],
                &aug.sources,
                true,
            )?);
        }
    }
    let mut val_sequences = Vec::new();
    for r in &validation {
        let spec = apply_normalizer(&r.spec, &normalizer)?;
        val_sequences.extend(split_covering(
            &spec,
            &r.roll,
            cfg.test_sequence_length,
            &[r.id().to_string()],
        )?);
    }
    if sequences.is_empty() {
        return Err(Error::InvalidInput(format!(
            "fold {}: training recordings are shorter than every sequence length",
            split.fold_id
        )));
    }
    Ok(PreparedFold {
        split: split.clone(),
        normalizer,
        normalizer_sources: split.train.clone(),
        train: sequences,
        validation: val_sequences,
    })
}

/// Verify the provenance of every sequence of a prepared fold.
pub fn check_leakage(fold: &PreparedFold) -> Result<()> {
    let train: BTreeSet<&str> = fold.split.train.iter().map(String::as_str).collect();
    let val: BTreeSet<&str> = fold.split.validation.iter().map(String::as_str).collect();
    for id in &fold.normalizer_sources {
        if !train.contains(id.as_str()) {
            return Err(Error::Leakage(format!(
                "fold {}: normalizer statistics include {id:?}, which is not a training recording",
                fold.split.fold_id
            )));
        }
    }
    for seq in &fold.train {
        if let Some(src) = seq
            .provenance
            .sources
            .iter()
            .find(|s| !train.contains(s.as_str()))
        {
            return Err(Error::Leakage(format!(
                "fold {}: training sequence {:?} draws on {src:?}, which is not a training recording",
                fold.split.fold_id, seq.provenance.recording_id
            )));
        }
    }
    for seq in &fold.validation {
        let p = &seq.provenance;
        if p.augmented {
            return Err(Error::Leakage(format!(
                "fold {}: augmented sequence {:?} in the validation partition",
                fold.split.fold_id, p.recording_id
            )));
        }
        if !val.contains(p.recording_id.as_str())
            || p.sources.iter().any(|s| !val.contains(s.as_str()))
        {
            return Err(Error::Leakage(format!(
                "fold {}: validation sequence {:?} does not come from a validation recording",
                fold.split.fold_id, p.recording_id
            )));
        }
    }
    Ok(())
}

/// Patience-based stopping on a validation cost that must strictly
/// decrease to count as an improvement.
#[derive(Debug, Clone, PartialEq)]
pub struct EarlyStopping {
    pub patience: usize,
    pub best_cost: f64,
    pub best_epoch: usize,
    epochs_since_best: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        Self {
            patience,
            best_cost: f64::INFINITY,
            best_epoch: 0,
            epochs_since_best: 0,
        }
    }

    /// Record the cost of `epoch`; returns true when it is a new best.
    pub fn observe(&mut self, epoch: usize, cost: f64) -> bool {
        if cost < self.best_cost {
            self.best_cost = cost;
            self.best_epoch = epoch;
            self.epochs_since_best = 0;
            true
        } else {
            self.epochs_since_best += 1;
            false
        }
    }

    pub fn should_stop(&self) -> bool {
        self.epochs_since_best >= self.patience
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Patience,
    MaxEpochs,
    /// The optimizer saw a non-finite gradient in this tensor.
    Diverged {
        tensor: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_rmse: f64,
    pub val_rmse: f64,
    pub elapsed_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainRecord {
    pub epochs: Vec<EpochStats>,
    /// 0 when no epoch completed.
    pub best_epoch: usize,
    pub best_val_rmse: f64,
    pub stop_reason: StopReason,
    pub wall_time_s: f64,
}

impl TrainRecord {
    /// `epoch,train_rmse,val_rmse,elapsed_s` lines with a header.
    pub fn log_csv(&self) -> String {
        let mut s = String::from("epoch,train_rmse,val_rmse,elapsed_s\n");
        for e in &self.epochs {
            s.push_str(&format!(
                "{},{},{},{:.3}\n",
                e.epoch, e.train_rmse, e.val_rmse, e.elapsed_s
            ));
        }
        s
    }
}

/// RMSE of noise-free predictions over all frames and classes.
pub fn validation_rmse(net: &BlstmNetwork, sequences: &[TrainingSequence]) -> Result<f64> {
    let parts: Vec<(f64, usize)> = sequences
        .par_iter()
        .map(|seq| {
            let y = predict(net, seq.features.view())?;
            let d = seq.targets.to_f64();
            Ok(((&y - &d).mapv(|e| e * e).sum(), y.len()))
        })
        .collect::<Result<_>>()?;
    let (sse, n) = parts.iter().fold((0.0, 0), |(s, n), (a, b)| (s + a, n + b));
    Ok(if n == 0 { 0.0 } else { (sse / n as f64).sqrt() })
}

/// Framewise F1 of thresholded predictions, pooled over the frames of all
/// sequences.
pub fn validation_f1(
    net: &BlstmNetwork,
    sequences: &[TrainingSequence],
    threshold: f64,
) -> Result<f64> {
    let parts: Vec<(f64, usize)> = sequences
        .par_iter()
        .map(|seq| {
            let y = predict(net, seq.features.view())?;
            let pred = threshold_outputs(y.view(), threshold)?;
            Ok((
                framewise_f1(&pred, &seq.targets)? * seq.len() as f64,
                seq.len(),
            ))
        })
        .collect::<Result<_>>()?;
    let (sum, n) = parts.iter().fold((0.0, 0), |(s, n), (a, b)| (s + a, n + b));
    Ok(if n == 0 { 1.0 } else { sum / n as f64 })
}

/// Train one network from `init_seed` and return the parameters of the
/// epoch with the lowest validation RMSE.
pub fn train_fold(
    fold: &PreparedFold,
    arch: &Architecture,
    cfg: &TrainConfig,
    init_seed: u64,
) -> Result<(BlstmNetwork, TrainRecord)> {
    check_leakage(fold)?;
    cfg.validate()?;
    let start = Instant::now();
    let mut net = init_network(arch, init_seed)?;
    net.normalizer = fold.normalizer.clone();
    let mut best = net.params.clone();
    let mut opt = RmsPropState::new(&net.params, cfg.eta, cfg.rho);
    let mut stopper = EarlyStopping::new(cfg.patience_epochs);
    let mut epochs = Vec::new();
    let mut stop_reason = StopReason::MaxEpochs;

    'epochs: for epoch in 1..=cfg.max_epochs {
        let epoch_seed = derive_seed(init_seed, &[epoch as u64]);
        let batches = make_minibatches(&fold.train, cfg.batch_size, epoch_seed)?;
        let (mut sse, mut cells) = (0.0, 0usize);
        for (b, batch) in batches.iter().enumerate() {
            let g = batch_gradient(&net, &batch.sequences, cfg.noise_sigma, |i| {
                derive_seed(epoch_seed, &[b as u64, i as u64])
            })?;
            if let Err(Error::Divergence { tensor }) = opt.update(&mut net.params, &g.grads) {
                log::warn!("epoch {epoch}: non-finite gradient in tensor {tensor}, stopping");
                stop_reason = StopReason::Diverged { tensor };
                break 'epochs;
            }
            sse += g.sse;
            cells += g.cells;
        }
        let train_rmse = (sse / cells.max(1) as f64).sqrt();
        let val_rmse = validation_rmse(&net, &fold.validation)?;
        let stats = EpochStats {
            epoch,
            train_rmse,
            val_rmse,
            elapsed_s: start.elapsed().as_secs_f64(),
        };
        log::info!(
            "fold {} seed {init_seed:#x}: {},{},{},{:.3}",
            fold.split.fold_id,
            epoch,
            train_rmse,
            val_rmse,
            stats.elapsed_s
        );
        epochs.push(stats);
        if !val_rmse.is_finite() {
            stop_reason = StopReason::Diverged { tensor: usize::MAX };
            break;
        }
        if stopper.observe(epoch, val_rmse) {
            best.clone_from(&net.params);
        }
        if stopper.should_stop() {
            stop_reason = StopReason::Patience;
            break;
        }
    }
    net.params = best;
    let record = TrainRecord {
        epochs,
        best_epoch: stopper.best_epoch,
        best_val_rmse: stopper.best_cost,
        stop_reason,
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    Ok((net, record))
}

/// Index of the best candidate given `(validation F1, validation RMSE)`:
/// highest F1, then lowest RMSE, then lowest index.
pub fn select_index(scores: &[(f64, f64)]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &(f1, rmse)) in scores.iter().enumerate() {
        best = match best {
            Some(b) if !(f1 > scores[b].0 || (f1 == scores[b].0 && rmse < scores[b].1)) => Some(b),
            _ => Some(i),
        };
    }
    best
}

/// Pick the restart with the highest validation framewise F1.
pub fn select_best(
    candidates: &[(BlstmNetwork, TrainRecord)],
    validation: &[TrainingSequence],
    threshold: f64,
) -> Result<usize> {
    let scores = candidates
        .iter()
        .map(|(net, rec)| {
            Ok((
                validation_f1(net, validation, threshold)?,
                rec.best_val_rmse,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    select_index(&scores).ok_or_else(|| Error::InvalidInput("no candidates to select from".into()))
}

/// Posteriors for a whole recording: normalize with the network's
/// normalizer, run `chunk_len`-frame chunks (the last may be shorter) and
/// stitch the outputs back together.
pub fn predict_recording(
    net: &BlstmNetwork,
    spec: &MelSpectrogram,
    chunk_len: usize,
) -> Result<Array2<f64>> {
    if chunk_len == 0 {
        return Err(Error::InvalidInput("chunk length must be positive".into()));
    }
    let norm = apply_normalizer(spec, &net.normalizer)?;
    if norm.n_frames() == 0 {
        return Ok(Array2::zeros((0, net.n_classes())));
    }
    let chunks: Vec<Array2<f64>> = (0..norm.n_frames())
        .step_by(chunk_len)
        .collect::<Vec<_>>()
        .par_iter()
        .map(|&s| {
            let end = (s + chunk_len).min(norm.n_frames());
            predict(net, norm.values.slice(ndarray::s![s..end, ..]))
        })
        .collect::<Result<_>>()?;
    let views: Vec<_> = chunks.iter().map(|c| c.view()).collect();
    Ok(concatenate(Axis(0), &views).expect("chunks share the class axis"))
}

/// Score a network on whole recordings.
pub fn evaluate_network(
    net: &BlstmNetwork,
    recordings: &[&Recording],
    cfg: &TrainConfig,
) -> Result<(EvalReport, Vec<RecordingResult>)> {
    let results = recordings
        .iter()
        .map(|r| {
            let y = predict_recording(net, &r.spec, cfg.test_sequence_length)?;
            Ok(RecordingResult {
                recording_id: r.id().to_string(),
                context_id: r.spec.context_id.clone(),
                pred: threshold_outputs(y.view(), cfg.threshold)?,
                truth: r.roll.clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let hop = recordings.first().map_or(0.025, |r| r.spec.frame_hop_s);
    Ok((evaluate_contexts(&results, hop)?, results))
}

/// Outcome of one cross-validation fold.
#[derive(Debug, Clone)]
pub struct FoldResult {
    pub fold_id: usize,
    pub model: BlstmNetwork,
    pub records: Vec<TrainRecord>,
    pub selected: usize,
    pub report: EvalReport,
}

/// Architecture implied by the data and the configured layer sizes.
pub fn architecture_for(data: &[Recording], cfg: &TrainConfig) -> Result<Architecture> {
    let first = data
        .first()
        .ok_or_else(|| Error::InvalidInput("no recordings".into()))?;
    Architecture::new(
        first.spec.n_bands(),
        cfg.hidden_cells.clone(),
        first.roll.n_classes(),
    )
}

/// Train `cfg.n_restarts` networks on a prepared fold (in parallel), keep
/// the best on validation F1 and score it on the test recordings.
pub fn run_fold(data: &[Recording], fold: &PreparedFold, cfg: &TrainConfig) -> Result<FoldResult> {
    check_leakage(fold)?;
    let arch = architecture_for(data, cfg)?;
    let fold_id = fold.split.fold_id;
    let candidates = (0..cfg.n_restarts)
        .into_par_iter()
        .map(|r| {
            train_fold(
                fold,
                &arch,
                cfg,
                derive_seed(cfg.rng_seed, &[fold_id as u64, r as u64]),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let selected = select_best(&candidates, &fold.validation, cfg.threshold)?;
    let test = pick(data, &fold.split.test)?;
    let (model, records): (Vec<_>, Vec<_>) = candidates.into_iter().unzip();
    let model = model
        .into_iter()
        .nth(selected)
        .expect("selected index is in range");
    let (report, _) = evaluate_network(&model, &test, cfg)?;
    Ok(FoldResult {
        fold_id,
        model,
        records,
        selected,
        report,
    })
}

/// Cross-validate over the listed folds (all folds when `folds` is empty).
pub fn cross_validate(
    data: &[Recording],
    assignment: &[(String, usize)],
    folds: &[usize],
    cfg: &TrainConfig,
) -> Result<Vec<FoldResult>> {
    cfg.validate()?;
    let all = fold_ids(assignment);
    let chosen: Vec<usize> = if folds.is_empty() {
        all.clone()
    } else {
        folds.to_vec()
    };
    let mut out = Vec::with_capacity(chosen.len());
    for f in chosen {
        let split = fold_split(assignment, f)?;
        let prepared = prepare_fold(data, &split, cfg)?;
        log::info!(
            "fold {f}: {} training, {} validation sequences",
            prepared.train.len(),
            prepared.validation.len()
        );
        out.push(run_fold(data, &prepared, cfg)?);
    }
    Ok(out)
}
