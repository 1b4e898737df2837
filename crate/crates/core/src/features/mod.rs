//! Audio front end: amplitude normalization, mel filterbanks, log-mel
//! extraction and per-band feature normalization.
//!
//! All operations here are pure functions of their inputs. The
//! [`BandNormalizer`] is fitted once on a training pool and is immutable
//! afterwards, so it can be shared freely across threads.

mod extract;
mod featfile;
mod filterbank;
mod normalizer;
mod wav;

use ndarray::Array2;

pub use extract::{extract_log_mel, frame_count, FrameGeometry, LOG_FLOOR};
pub use featfile::{read_features, write_features, FEATURE_MAGIC};
pub use filterbank::{build_mel_filterbank, hz_to_mel, mel_to_hz, MelFilterbank};
pub use normalizer::{apply_normalizer, fit_normalizer, BandNormalizer};
pub use wav::{read_wav, write_wav};

use crate::error::{Error, Result};

/// Settings shared by every recording of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureConfig {
    pub frame_len_s: f64,
    pub overlap: f64,
    pub n_bands: usize,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            frame_len_s: 0.050,
            overlap: 0.5,
            n_bands: 40,
        }
    }
}

/// A mono recording.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
    pub context_id: String,
    pub recording_id: String,
}

impl AudioClip {
    pub fn new(
        samples: Vec<f64>,
        sample_rate: u32,
        context_id: impl Into<String>,
        recording_id: impl Into<String>,
    ) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::InvalidInput("sample rate must be positive".into()));
        }
        if samples.is_empty() {
            return Err(Error::InvalidInput("audio clip has no samples".into()));
        }
        Ok(Self {
            samples,
            sample_rate,
            context_id: context_id.into(),
            recording_id: recording_id.into(),
        })
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

/// Log-mel energies, one row per frame and one column per band.
#[derive(Debug, Clone, PartialEq)]
pub struct MelSpectrogram {
    pub values: Array2<f64>,
    pub frame_hop_s: f64,
    pub frame_len_s: f64,
    pub context_id: String,
    pub recording_id: String,
}

impl MelSpectrogram {
    pub fn n_frames(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_bands(&self) -> usize {
        self.values.ncols()
    }

    /// Same metadata, new values and recording id.
    pub fn derive(&self, values: Array2<f64>, recording_id: impl Into<String>) -> Self {
        Self {
            values,
            frame_hop_s: self.frame_hop_s,
            frame_len_s: self.frame_len_s,
            context_id: self.context_id.clone(),
            recording_id: recording_id.into(),
        }
    }
}

/// Scale the clip so that its peak absolute sample is exactly 1.
///
/// An all-zero clip is returned unchanged.
pub fn normalize_amplitude(clip: &AudioClip) -> AudioClip {
    let peak = clip.samples.iter().fold(0.0f64, |m, &s| m.max(s.abs()));
    let mut out = clip.clone();
    if peak > 0.0 {
        for s in &mut out.samples {
            *s /= peak;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn clip(samples: Vec<f64>) -> AudioClip {
        AudioClip::new(samples, 16_000, "ctx", "rec").unwrap()
    }

    #[test]
    fn normalize_scales_by_peak() {
        assert_eq!(
            normalize_amplitude(&clip(vec![0.5, -0.25])).samples,
            vec![1.0, -0.5]
        );
        assert_eq!(
            normalize_amplitude(&clip(vec![-2.0, 1.0])).samples,
            vec![-1.0, 0.5]
        );
    }

    #[test]
    fn normalize_leaves_silence_alone() {
        assert_eq!(
            normalize_amplitude(&clip(vec![0.0; 3])).samples,
            vec![0.0; 3]
        );
    }

    #[test]
    fn clip_invariants_enforced() {
        assert!(AudioClip::new(vec![], 16_000, "c", "r").is_err());
        assert!(AudioClip::new(vec![0.0], 0, "c", "r").is_err());
    }

    proptest! {
        #[test]
        fn normalize_is_idempotent(v in proptest::collection::vec(-100.0f64..100.0, 1..64)) {
            let once = normalize_amplitude(&clip(v));
            let twice = normalize_amplitude(&once);
            prop_assert_eq!(&once.samples, &twice.samples);
            if once.samples.iter().any(|&s| s != 0.0) {
                let peak = once.samples.iter().fold(0.0f64, |m, &s| m.max(s.abs()));
                prop_assert!((peak - 1.0).abs() <= f64::EPSILON);
            }
        }
    }
}
