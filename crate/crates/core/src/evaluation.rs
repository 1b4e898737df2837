//! Averaged framewise F1 and one-second block F1, per context and overall.
//!
//! The framewise score is an F1 computed for every frame and then averaged
//! over frames; a frame where neither prediction nor reference has any
//! active class scores 1. The block score pools TP/FP/FN over all
//! blocks and classes of a context. Blocks are cut per recording and the
//! trailing partial block is kept.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::sequence::TargetRoll;

/// True positive, false positive and false negative tallies.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Counts {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
}

impl Counts {
    /// `2TP / (2TP + FP + FN)`, 1 when all three are zero.
    pub fn f1(&self) -> f64 {
        let denom = 2 * self.tp + self.fp + self.fn_;
        if denom == 0 {
            1.0
        } else {
            (2 * self.tp) as f64 / denom as f64
        }
    }

    fn add(&mut self, other: Counts) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.fn_ += other.fn_;
    }

    fn tally(&mut self, pred: bool, truth: bool) {
        match (pred, truth) {
            (true, true) => self.tp += 1,
            (true, false) => self.fp += 1,
            (false, true) => self.fn_ += 1,
            (false, false) => {}
        }
    }
}

fn check_shapes(pred: &TargetRoll, truth: &TargetRoll) -> Result<()> {
    if pred.values.dim() != truth.values.dim() {
        let (pt, pk) = pred.values.dim();
        let (tt, tk) = truth.values.dim();
        return Err(Error::InvalidInput(format!(
            "prediction is {pt}x{pk} but reference is {tt}x{tk}"
        )));
    }
    Ok(())
}

/// Sum of per-frame F1 scores and the frame-level tallies pooled over frames.
fn frame_scores(pred: &TargetRoll, truth: &TargetRoll) -> (f64, Counts) {
    let mut sum = 0.0;
    let mut pooled = Counts::default();
    for (p, d) in pred.values.rows().into_iter().zip(truth.values.rows()) {
        let mut c = Counts::default();
        for (&pv, &dv) in p.iter().zip(d.iter()) {
            c.tally(pv, dv);
        }
        sum += c.f1();
        pooled.add(c);
    }
    (sum, pooled)
}

/// Mean over frames of the per-frame F1.
pub fn framewise_f1(pred: &TargetRoll, truth: &TargetRoll) -> Result<f64> {
    check_shapes(pred, truth)?;
    if pred.n_frames() == 0 {
        return Ok(1.0);
    }
    let (sum, _) = frame_scores(pred, truth);
    Ok(sum / pred.n_frames() as f64)
}

/// Frames per block: `round(block_s / frame_hop_s)`, at least one.
pub fn frames_per_block(frame_hop_s: f64, block_s: f64) -> usize {
    ((block_s / frame_hop_s).round() as usize).max(1)
}

/// Block-level tallies: a class is active in a block when it is active in
/// at least one of the block's frames.
pub fn block_counts(
    pred: &TargetRoll,
    truth: &TargetRoll,
    frame_hop_s: f64,
    block_s: f64,
) -> Result<Counts> {
    check_shapes(pred, truth)?;
    let len = frames_per_block(frame_hop_s, block_s);
    let mut counts = Counts::default();
    let n = pred.n_frames();
    for start in (0..n).step_by(len) {
        let end = (start + len).min(n);
        for k in 0..pred.n_classes() {
            let p = (start..end).any(|t| pred.values[[t, k]]);
            let d = (start..end).any(|t| truth.values[[t, k]]);
            counts.tally(p, d);
        }
    }
    Ok(counts)
}

pub fn block_f1(
    pred: &TargetRoll,
    truth: &TargetRoll,
    frame_hop_s: f64,
    block_s: f64,
) -> Result<f64> {
    block_counts(pred, truth, frame_hop_s, block_s).map(|c| c.f1())
}

/// A prediction and its reference for one recording.
#[derive(Debug, Clone)]
pub struct RecordingResult {
    pub recording_id: String,
    pub context_id: String,
    pub pred: TargetRoll,
    pub truth: TargetRoll,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContextScores {
    pub context_id: String,
    pub f1_avgframe: f64,
    pub f1_1sec: f64,
    pub n_frames: usize,
    pub frame_counts: Counts,
    pub block_counts: Counts,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    /// Sorted by context id.
    pub contexts: Vec<ContextScores>,
    /// Unweighted mean of the context scores.
    pub f1_avgframe: f64,
    pub f1_1sec: f64,
}

impl EvalReport {
    fn from_contexts(contexts: Vec<ContextScores>) -> Self {
        let n = contexts.len().max(1) as f64;
        let f1_avgframe = contexts.iter().map(|c| c.f1_avgframe).sum::<f64>() / n;
        let f1_1sec = contexts.iter().map(|c| c.f1_1sec).sum::<f64>() / n;
        Self {
            contexts,
            f1_avgframe,
            f1_1sec,
        }
    }

    /// Average of several reports, e.g. the folds of a cross-validation.
    /// Each context's scores are averaged over the reports that contain
    /// it and its tallies summed; the overall scores are the mean of the
    /// reports' overall scores.
    pub fn mean(reports: &[EvalReport]) -> EvalReport {
        let mut by_ctx: BTreeMap<&str, Vec<&ContextScores>> = BTreeMap::new();
        for r in reports {
            for c in &r.contexts {
                by_ctx.entry(&c.context_id).or_default().push(c);
            }
        }
        let contexts = by_ctx
            .into_iter()
            .map(|(id, list)| {
                let n = list.len() as f64;
                let mut frame_counts = Counts::default();
                let mut block_counts = Counts::default();
                for c in &list {
                    frame_counts.add(c.frame_counts);
                    block_counts.add(c.block_counts);
                }
                ContextScores {
                    context_id: id.to_string(),
                    f1_avgframe: list.iter().map(|c| c.f1_avgframe).sum::<f64>() / n,
                    f1_1sec: list.iter().map(|c| c.f1_1sec).sum::<f64>() / n,
                    n_frames: list.iter().map(|c| c.n_frames).sum(),
                    frame_counts,
                    block_counts,
                }
            })
            .collect();
        let n = reports.len().max(1) as f64;
        EvalReport {
            contexts,
            f1_avgframe: reports.iter().map(|r| r.f1_avgframe).sum::<f64>() / n,
            f1_1sec: reports.iter().map(|r| r.f1_1sec).sum::<f64>() / n,
        }
    }

    /// `context,f1_avgframe,f1_1sec` with a final `average` row.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("context,f1_avgframe,f1_1sec\n");
        for c in &self.contexts {
            let _ = writeln!(s, "{},{},{}", c.context_id, c.f1_avgframe, c.f1_1sec);
        }
        let _ = writeln!(s, "average,{},{}", self.f1_avgframe, self.f1_1sec);
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    /// Fixed-width table with scores in percent.
    pub fn to_table(&self) -> String {
        let width = self
            .contexts
            .iter()
            .map(|c| c.context_id.len())
            .chain([7])
            .max()
            .unwrap_or(7);
        let mut s = format!(
            "{:<width$}  {:>11}  {:>8}\n",
            "context", "F1_AvgFram", "F1_1sec"
        );
        let mut row = |name: &str, a: f64, b: f64| {
            let _ = writeln!(s, "{name:<width$}  {:>11.1}  {:>8.1}", 100.0 * a, 100.0 * b);
        };
        for c in &self.contexts {
            row(&c.context_id, c.f1_avgframe, c.f1_1sec);
        }
        row("average", self.f1_avgframe, self.f1_1sec);
        s
    }
}

/// Score every context by pooling the frames and blocks of its recordings.
pub fn evaluate_contexts(results: &[RecordingResult], frame_hop_s: f64) -> Result<EvalReport> {
    let mut by_ctx: BTreeMap<&str, Vec<&RecordingResult>> = BTreeMap::new();
    for r in results {
        check_shapes(&r.pred, &r.truth)?;
        by_ctx.entry(&r.context_id).or_default().push(r);
    }
    let mut contexts = Vec::with_capacity(by_ctx.len());
    for (id, recs) in by_ctx {
        let mut frame_sum = 0.0;
        let mut n_frames = 0;
        let mut frame_counts = Counts::default();
        let mut blocks = Counts::default();
        for r in recs {
            let (sum, counts) = frame_scores(&r.pred, &r.truth);
            frame_sum += sum;
            n_frames += r.pred.n_frames();
            frame_counts.add(counts);
            blocks.add(block_counts(&r.pred, &r.truth, frame_hop_s, 1.0)?);
        }
        contexts.push(ContextScores {
            context_id: id.to_string(),
            f1_avgframe: if n_frames == 0 {
                1.0
            } else {
                frame_sum / n_frames as f64
            },
            f1_1sec: blocks.f1(),
            n_frames,
            frame_counts,
            block_counts: blocks,
        });
    }
    Ok(EvalReport::from_contexts(contexts))
}
