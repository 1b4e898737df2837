//! Spectrogram-domain data augmentation: time stretching, sub-frame time
//! shifting and mixmax block mixing.
//!
//! Binary targets follow the features by nearest-frame copy under
//! stretching and shifting, and by elementwise OR under mixing.

use std::collections::BTreeMap;

use ndarray::{concatenate, s, Array2, Axis, Zip};
use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::features::MelSpectrogram;
use crate::sequence::TargetRoll;

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentationPlan {
    pub stretch_factors: Vec<f64>,
    pub subframe_shifts: Vec<f64>,
    pub mix_blocks_per_context: usize,
    /// Mixed material to emit per context, as a multiple of the context's
    /// original frame count.
    pub mix_expansion: f64,
    pub rng_seed: u64,
}

impl Default for AugmentationPlan {
    fn default() -> Self {
        Self {
            stretch_factors: vec![0.7, 0.85, 1.2, 1.5],
            subframe_shifts: vec![0.25, 0.5, 0.75],
            mix_blocks_per_context: 20,
            mix_expansion: 9.0,
            rng_seed: 0,
        }
    }
}

impl AugmentationPlan {
    /// A plan that emits nothing.
    pub fn empty() -> Self {
        Self {
            stretch_factors: Vec::new(),
            subframe_shifts: Vec::new(),
            mix_blocks_per_context: 20,
            mix_expansion: 0.0,
            rng_seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(f) = self
            .stretch_factors
            .iter()
            .find(|&&f| !(f > 0.0) || f == 1.0)
        {
            return Err(Error::Config(format!(
                "stretch factor {f} must be positive and not 1"
            )));
        }
        if let Some(s) = self
            .subframe_shifts
            .iter()
            .find(|&&s| !(s > 0.0 && s < 1.0))
        {
            return Err(Error::Config(format!("sub-frame shift {s} outside (0, 1)")));
        }
        if self.mix_blocks_per_context < 2 {
            return Err(Error::Config("block mixing needs at least 2 blocks".into()));
        }
        if !(self.mix_expansion >= 0.0) {
            return Err(Error::Config("mix expansion must be nonnegative".into()));
        }
        Ok(())
    }
}

/// An augmented recording and the original recordings it was built from.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedRecording {
    pub spec: MelSpectrogram,
    pub roll: TargetRoll,
    pub sources: Vec<String>,
}

fn check_pair(spec: &MelSpectrogram, roll: &TargetRoll) -> Result<()> {
    if spec.n_frames() != roll.n_frames() {
        return Err(Error::DimensionMismatch {
            what: "target roll frames",
            expected: spec.n_frames(),
            actual: roll.n_frames(),
        });
    }
    if spec.n_frames() < 2 {
        return Err(Error::InvalidInput(
            "need at least 2 frames to interpolate".into(),
        ));
    }
    Ok(())
}

fn lerp_rows(values: &Array2<f64>, pos: f64) -> Vec<f64> {
    let lo = pos.floor() as usize;
    let frac = pos - lo as f64;
    if frac == 0.0 || lo + 1 >= values.nrows() {
        return values.row(lo.min(values.nrows() - 1)).to_vec();
    }
    values
        .row(lo)
        .iter()
        .zip(values.row(lo + 1).iter())
        .map(|(a, b)| (1.0 - frac) * a + frac * b)
        .collect()
}

/// Resample to `round(n * factor)` frames by linear interpolation on a
/// grid that maps the first and last output frames onto the first and
/// last input frames.
pub fn time_stretch(
    spec: &MelSpectrogram,
    roll: &TargetRoll,
    factor: f64,
) -> Result<(MelSpectrogram, TargetRoll)> {
    if !(factor > 0.0) {
        return Err(Error::InvalidInput(format!(
            "stretch factor {factor} must be positive"
        )));
    }
    check_pair(spec, roll)?;
    let n = spec.n_frames();
    let n_out = (n as f64 * factor).round() as usize;
    if n_out < 1 {
        return Err(Error::InvalidInput("stretched output has no frames".into()));
    }
    let position = |t: usize| {
        if n_out == 1 {
            0.0
        } else {
            (t * (n - 1)) as f64 / (n_out - 1) as f64
        }
    };
    let mut values = Array2::zeros((n_out, spec.n_bands()));
    let mut out_roll = TargetRoll::zeros(n_out, roll.n_classes());
    for t in 0..n_out {
        let pos = position(t);
        values
            .row_mut(t)
            .assign(&ndarray::ArrayView1::from(&lerp_rows(&spec.values, pos)));
        let nearest = (pos.round() as usize).min(n - 1);
        out_roll.values.row_mut(t).assign(&roll.values.row(nearest));
    }
    let id = format!("{}_stretch{}", spec.recording_id, factor);
    Ok((spec.derive(values, id), out_roll))
}

/// Interpolate a frame `shift` of the way between each pair of neighbours.
pub fn subframe_shift(
    spec: &MelSpectrogram,
    roll: &TargetRoll,
    shift: f64,
) -> Result<(MelSpectrogram, TargetRoll)> {
    if !(shift > 0.0 && shift < 1.0) {
        return Err(Error::InvalidInput(format!("shift {shift} outside (0, 1)")));
    }
    check_pair(spec, roll)?;
    let n_out = spec.n_frames() - 1;
    let mut values = Array2::zeros((n_out, spec.n_bands()));
    Zip::from(values.rows_mut())
        .and(spec.values.slice(s![..n_out, ..]).rows())
        .and(spec.values.slice(s![1.., ..]).rows())
        .for_each(|mut out, a, b| {
            Zip::from(&mut out)
                .and(&a)
                .and(&b)
                .for_each(|o, &x, &y| *o = (1.0 - shift) * x + shift * y);
        });
    let mut out_roll = TargetRoll::zeros(n_out, roll.n_classes());
    for t in 0..n_out {
        let src = ((t as f64 + shift).round() as usize).min(spec.n_frames() - 1);
        out_roll.values.row_mut(t).assign(&roll.values.row(src));
    }
    let id = format!("{}_shift{}", spec.recording_id, shift);
    Ok((spec.derive(values, id), out_roll))
}

/// Mixmax combination: elementwise max of log-mel energies, OR of targets.
/// Both inputs are truncated to the shorter length.
pub fn block_mix(
    spec_a: &MelSpectrogram,
    roll_a: &TargetRoll,
    spec_b: &MelSpectrogram,
    roll_b: &TargetRoll,
) -> Result<(MelSpectrogram, TargetRoll)> {
    if spec_a.n_bands() != spec_b.n_bands() {
        return Err(Error::DimensionMismatch {
            what: "bands in block mix",
            expected: spec_a.n_bands(),
            actual: spec_b.n_bands(),
        });
    }
    if roll_a.n_classes() != roll_b.n_classes() {
        return Err(Error::DimensionMismatch {
            what: "classes in block mix",
            expected: roll_a.n_classes(),
            actual: roll_b.n_classes(),
        });
    }
    let n = spec_a
        .n_frames()
        .min(spec_b.n_frames())
        .min(roll_a.n_frames())
        .min(roll_b.n_frames());
    let mut values = spec_a.values.slice(s![..n, ..]).to_owned();
    Zip::from(&mut values)
        .and(spec_b.values.slice(s![..n, ..]))
        .for_each(|a, &b| *a = a.max(b));
    let mut targets = roll_a.values.slice(s![..n, ..]).to_owned();
    Zip::from(&mut targets)
        .and(roll_b.values.slice(s![..n, ..]))
        .for_each(|a, &b| *a = *a || b);
    let id = format!("{}+{}", spec_a.recording_id, spec_b.recording_id);
    Ok((spec_a.derive(values, id), TargetRoll { values: targets }))
}

fn context_seed(base: u64, context_index: usize) -> u64 {
    base ^ (context_index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Apply the full plan. Originals are not part of the output.
pub fn augment_dataset(
    data: &[(MelSpectrogram, TargetRoll)],
    plan: &AugmentationPlan,
) -> Result<Vec<AugmentedRecording>> {
    plan.validate()?;
    let mut out = Vec::new();
    let mut by_context: BTreeMap<&str, Vec<&(MelSpectrogram, TargetRoll)>> = BTreeMap::new();

    for pair in data {
        let (spec, roll) = pair;
        by_context
            .entry(spec.context_id.as_str())
            .or_default()
            .push(pair);
        if spec.n_frames() < 2 {
            log::warn!("{}: too short to stretch or shift", spec.recording_id);
            continue;
        }
        let sources = vec![spec.recording_id.clone()];
        for &factor in &plan.stretch_factors {
            let (s, r) = time_stretch(spec, roll, factor)?;
            out.push(AugmentedRecording {
                spec: s,
                roll: r,
                sources: sources.clone(),
            });
        }
        for &shift in &plan.subframe_shifts {
            let (s, r) = subframe_shift(spec, roll, shift)?;
            out.push(AugmentedRecording {
                spec: s,
                roll: r,
                sources: sources.clone(),
            });
        }
    }

    if plan.mix_expansion == 0.0 {
        return Ok(out);
    }
    for (ci, (context, items)) in by_context.iter().enumerate() {
        out.extend(mix_context(
            context,
            items,
            plan,
            context_seed(plan.rng_seed, ci),
        )?);
    }
    Ok(out)
}

fn mix_context(
    context: &str,
    items: &[&(MelSpectrogram, TargetRoll)],
    plan: &AugmentationPlan,
    seed: u64,
) -> Result<Vec<AugmentedRecording>> {
    let first = &items[0].0;
    for (spec, roll) in items.iter().map(|p| (&p.0, &p.1)) {
        if spec.n_bands() != first.n_bands() || roll.n_frames() != spec.n_frames() {
            return Err(Error::InvalidInput(format!(
                "context {context}: inconsistent recording {}",
                spec.recording_id
            )));
        }
    }
    let features = concatenate(
        Axis(0),
        &items.iter().map(|p| p.0.values.view()).collect::<Vec<_>>(),
    )
    .expect("band counts checked");
    let targets = concatenate(
        Axis(0),
        &items.iter().map(|p| p.1.values.view()).collect::<Vec<_>>(),
    )
    .map_err(|_| Error::InvalidInput(format!("context {context}: class counts differ")))?;
    let total = features.nrows();

    let mut n_blocks = plan.mix_blocks_per_context;
    if total < n_blocks {
        log::warn!(
            "context {context}: {total} frames, reducing mix blocks from {n_blocks} to {total}"
        );
        n_blocks = total;
    }
    if n_blocks < 2 {
        log::warn!("context {context}: too short for block mixing");
        return Ok(Vec::new());
    }
    let block_len = total / n_blocks;
    let all_pairs: Vec<(usize, usize)> = (0..n_blocks)
        .flat_map(|i| (i + 1..n_blocks).map(move |j| (i, j)))
        .collect();
    let mut wanted = (plan.mix_expansion * total as f64 / block_len as f64).round() as usize;
    if wanted > all_pairs.len() {
        log::warn!(
            "context {context}: only {} block pairs available, {wanted} requested",
            all_pairs.len()
        );
        wanted = all_pairs.len();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen: Vec<(usize, usize)> = all_pairs
        .choose_multiple(&mut rng, wanted)
        .copied()
        .collect();
    chosen.sort_unstable();

    // Frame offset of each recording inside the concatenation.
    let mut starts = Vec::with_capacity(items.len());
    let mut acc = 0;
    for p in items {
        starts.push(acc);
        acc += p.0.n_frames();
    }
    let block_sources = |b: usize| -> Vec<String> {
        let (lo, hi) = (b * block_len, (b + 1) * block_len);
        items
            .iter()
            .zip(&starts)
            .filter(|(p, &st)| st < hi && st + p.0.n_frames() > lo)
            .map(|(p, _)| p.0.recording_id.clone())
            .collect()
    };
    let block = |b: usize| {
        let range = b * block_len..(b + 1) * block_len;
        let spec = first.derive(
            features.slice(s![range.clone(), ..]).to_owned(),
            String::new(),
        );
        let roll = TargetRoll {
            values: targets.slice(s![range, ..]).to_owned(),
        };
        (spec, roll)
    };

    let mut out = Vec::with_capacity(chosen.len());
    for (i, j) in chosen {
        let (sa, ra) = block(i);
        let (sb, rb) = block(j);
        let (mut spec, roll) = block_mix(&sa, &ra, &sb, &rb)?;
        spec.recording_id = format!("{context}_mix{i:03}_{j:03}");
        let mut sources = block_sources(i);
        for s in block_sources(j) {
            if !sources.contains(&s) {
                sources.push(s);
            }
        }
        out.push(AugmentedRecording {
            spec,
            roll,
            sources,
        });
    }
    Ok(out)
}
