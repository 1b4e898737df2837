//! Frame-level targets, fixed-length training sequences and minibatches.

mod annotations;

use std::collections::BTreeMap;

use ndarray::{s, Array2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use annotations::{
    read_annotations, read_class_map, write_annotations, write_class_map, AnnotationRecord,
    ClassMap,
};

use crate::error::{Error, Result};
use crate::features::MelSpectrogram;

/// A labelled event, times in seconds from the start of the recording.
#[derive(Debug, Clone, PartialEq)]
pub struct EventAnnotation {
    pub onset_s: f64,
    pub offset_s: f64,
    pub class_id: usize,
    pub recording_id: String,
}

impl EventAnnotation {
    pub fn new(
        onset_s: f64,
        offset_s: f64,
        class_id: usize,
        recording_id: impl Into<String>,
    ) -> Result<Self> {
        if !(onset_s >= 0.0 && onset_s < offset_s) {
            return Err(Error::InvalidInput(format!(
                "event span [{onset_s}, {offset_s}) is empty or negative"
            )));
        }
        Ok(Self {
            onset_s,
            offset_s,
            class_id,
            recording_id: recording_id.into(),
        })
    }
}

/// Binary activity matrix, frames x classes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TargetRoll {
    pub values: Array2<bool>,
}

impl TargetRoll {
    pub fn zeros(n_frames: usize, n_classes: usize) -> Self {
        Self {
            values: Array2::from_elem((n_frames, n_classes), false),
        }
    }

    pub fn n_frames(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_classes(&self) -> usize {
        self.values.ncols()
    }

    pub fn active_count(&self, frame: usize) -> usize {
        self.values.row(frame).iter().filter(|&&v| v).count()
    }

    pub fn to_f64(&self) -> Array2<f64> {
        self.values.mapv(|v| if v { 1.0 } else { 0.0 })
    }

    pub fn slice_frames(&self, start: usize, end: usize) -> Self {
        Self {
            values: self.values.slice(s![start..end, ..]).to_owned(),
        }
    }
}

/// Start time of frame `t` on the analysis grid.
pub fn frame_start_s(t: usize, frame_hop_s: f64) -> f64 {
    t as f64 * frame_hop_s
}

/// Mark frame `t` active for class `k` whenever an event of class `k`
/// intersects `[t * hop, t * hop + frame_len)` with nonzero length.
pub fn annotations_to_roll(
    events: &[EventAnnotation],
    n_frames: usize,
    frame_hop_s: f64,
    frame_len_s: f64,
    n_classes: usize,
) -> Result<TargetRoll> {
    let mut roll = TargetRoll::zeros(n_frames, n_classes);
    for ev in events {
        if ev.class_id >= n_classes {
            return Err(Error::ClassOutOfRange {
                class_id: ev.class_id,
                n_classes,
            });
        }
        let first = ((ev.onset_s - frame_len_s) / frame_hop_s).floor().max(0.0) as usize;
        let last = ((ev.offset_s / frame_hop_s).ceil() as usize + 1).min(n_frames);
        for t in first.saturating_sub(1)..last {
            let start = frame_start_s(t, frame_hop_s);
            if start < ev.offset_s && start + frame_len_s > ev.onset_s {
                roll.values[[t, ev.class_id]] = true;
            }
        }
    }
    Ok(roll)
}

/// Where a training sequence came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    /// Id of the (possibly augmented) recording the sequence was cut from.
    pub recording_id: String,
    pub context_id: String,
    /// Original recordings whose frames contributed to this sequence.
    pub sources: Vec<String>,
    pub augmented: bool,
    pub start_frame: usize,
}

/// Features and targets over the same `T` frames.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSequence {
    pub features: Array2<f64>,
    pub targets: TargetRoll,
    pub provenance: Provenance,
}

impl TrainingSequence {
    pub fn len(&self) -> usize {
        self.features.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.features.nrows() == 0
    }
}

fn cut(
    spec: &MelSpectrogram,
    roll: &TargetRoll,
    sources: &[String],
    augmented: bool,
    start: usize,
    end: usize,
) -> TrainingSequence {
    TrainingSequence {
        features: spec.values.slice(s![start..end, ..]).to_owned(),
        targets: roll.slice_frames(start, end),
        provenance: Provenance {
            recording_id: spec.recording_id.clone(),
            context_id: spec.context_id.clone(),
            sources: sources.to_vec(),
            augmented,
            start_frame: start,
        },
    }
}

fn check_aligned(spec: &MelSpectrogram, roll: &TargetRoll) -> Result<()> {
    if spec.n_frames() != roll.n_frames() {
        return Err(Error::DimensionMismatch {
            what: "target roll frames",
            expected: spec.n_frames(),
            actual: roll.n_frames(),
        });
    }
    Ok(())
}

/// Cut a recording into non-overlapping sequences at every requested
/// length, starting at frame 0 and dropping the remainder.
pub fn split_multiscale(
    spec: &MelSpectrogram,
    roll: &TargetRoll,
    lengths: &[usize],
    sources: &[String],
    augmented: bool,
) -> Result<Vec<TrainingSequence>> {
    check_aligned(spec, roll)?;
    if lengths.is_empty() || lengths.contains(&0) {
        return Err(Error::InvalidInput(
            "sequence lengths must be nonempty and positive".into(),
        ));
    }
    let mut out = Vec::new();
    for &len in lengths {
        for i in 0..spec.n_frames() / len {
            out.push(cut(spec, roll, sources, augmented, i * len, (i + 1) * len));
        }
    }
    Ok(out)
}

/// Cut a recording into `len`-frame sequences, keeping a shorter final
/// sequence so every frame is covered exactly once.
pub fn split_covering(
    spec: &MelSpectrogram,
    roll: &TargetRoll,
    len: usize,
    sources: &[String],
) -> Result<Vec<TrainingSequence>> {
    check_aligned(spec, roll)?;
    if len == 0 {
        return Err(Error::InvalidInput(
            "sequence length must be positive".into(),
        ));
    }
    Ok((0..spec.n_frames())
        .step_by(len)
        .map(|start| {
            cut(
                spec,
                roll,
                sources,
                false,
                start,
                (start + len).min(spec.n_frames()),
            )
        })
        .collect())
}

/// Sequences sharing one length, consumed by a single gradient step.
#[derive(Debug, Clone)]
pub struct SequenceBatch<'a> {
    pub sequences: Vec<&'a TrainingSequence>,
}

impl SequenceBatch<'_> {
    pub fn batch_size(&self) -> usize {
        self.sequences.len()
    }

    pub fn seq_len(&self) -> usize {
        self.sequences.first().map_or(0, |s| s.len())
    }
}

/// Group by length, shuffle each group, chunk into batches, then shuffle
/// the batch order. Deterministic for a given seed and input order.
pub fn make_minibatches(
    sequences: &[TrainingSequence],
    batch_size: usize,
    rng_seed: u64,
) -> Result<Vec<SequenceBatch<'_>>> {
    if batch_size == 0 {
        return Err(Error::InvalidInput("batch size must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut groups: BTreeMap<usize, Vec<&TrainingSequence>> = BTreeMap::new();
    for seq in sequences {
        groups.entry(seq.len()).or_default().push(seq);
    }
    let mut batches = Vec::new();
    for (_, mut group) in groups {
        group.shuffle(&mut rng);
        for chunk in group.chunks(batch_size) {
            batches.push(SequenceBatch {
                sequences: chunk.to_vec(),
            });
        }
    }
    batches.shuffle(&mut rng);
    Ok(batches)
}
