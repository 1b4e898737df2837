use std::f64::consts::PI;

use ndarray::Array2;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::{AudioClip, MelFilterbank, MelSpectrogram};
use crate::error::{Error, Result};

/// Energies below this are clamped before taking the log.
pub const LOG_FLOOR: f64 = 1e-10;

/// Frame length and hop in samples for a given rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameGeometry {
    pub frame_len: usize,
    pub hop: usize,
    pub n_fft: usize,
}

impl FrameGeometry {
    pub fn new(sample_rate: u32, frame_len_s: f64, overlap: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&overlap) {
            return Err(Error::InvalidInput(format!(
                "overlap {overlap} outside [0, 1)"
            )));
        }
        if !(frame_len_s > 0.0) {
            return Err(Error::InvalidInput("frame length must be positive".into()));
        }
        let frame_len = (frame_len_s * sample_rate as f64).round() as usize;
        if frame_len == 0 {
            return Err(Error::InvalidInput("frame shorter than one sample".into()));
        }
        let hop = ((frame_len as f64 * (1.0 - overlap)).floor() as usize).max(1);
        Ok(Self {
            frame_len,
            hop,
            n_fft: frame_len.next_power_of_two(),
        })
    }

    pub fn hop_s(&self, sample_rate: u32) -> f64 {
        self.hop as f64 / sample_rate as f64
    }

    pub fn frame_len_s(&self, sample_rate: u32) -> f64 {
        self.frame_len as f64 / sample_rate as f64
    }
}

/// Number of full frames in `n_samples`, or `None` if not even one fits.
pub fn frame_count(n_samples: usize, frame_len: usize, hop: usize) -> Option<usize> {
    if n_samples < frame_len || hop == 0 {
        None
    } else {
        Some((n_samples - frame_len) / hop + 1)
    }
}

fn hamming(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    (0..n)
        .map(|i| 0.54 - 0.46 * (2.0 * PI * i as f64 / (n - 1) as f64).cos())
        .collect()
}

/// Hamming-windowed magnitude spectra projected through `fb`, then
/// `ln(max(x, LOG_FLOOR))`.
pub fn extract_log_mel(
    clip: &AudioClip,
    fb: &MelFilterbank,
    frame_len_s: f64,
    overlap: f64,
) -> Result<MelSpectrogram> {
    if clip.sample_rate != fb.sample_rate {
        return Err(Error::InvalidInput(format!(
            "clip rate {} Hz does not match filterbank rate {} Hz",
            clip.sample_rate, fb.sample_rate
        )));
    }
    let geom = FrameGeometry::new(clip.sample_rate, frame_len_s, overlap)?;
    if fb.n_fft < geom.frame_len {
        return Err(Error::InvalidInput(format!(
            "filterbank FFT size {} shorter than frame length {}",
            fb.n_fft, geom.frame_len
        )));
    }
    let n_frames =
        frame_count(clip.samples.len(), geom.frame_len, geom.hop).ok_or(Error::ClipTooShort {
            n_samples: clip.samples.len(),
            frame_len: geom.frame_len,
        })?;

    let window = hamming(geom.frame_len);
    let fft = FftPlanner::<f64>::new().plan_fft_forward(fb.n_fft);
    let mut buf = vec![Complex::new(0.0, 0.0); fb.n_fft];
    let mut scratch = vec![Complex::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    let mut magnitude = vec![0.0; fb.n_bins()];
    let n_bands = fb.n_bands();
    let mut values = Array2::zeros((n_frames, n_bands));

    for t in 0..n_frames {
        let start = t * geom.hop;
        let frame = &clip.samples[start..start + geom.frame_len];
        for (slot, (&s, &w)) in buf.iter_mut().zip(frame.iter().zip(&window)) {
            *slot = Complex::new(s * w, 0.0);
        }
        for slot in &mut buf[geom.frame_len..] {
            *slot = Complex::new(0.0, 0.0);
        }
        fft.process_with_scratch(&mut buf, &mut scratch);
        for (m, c) in magnitude.iter_mut().zip(&buf) {
            *m = c.norm();
        }
        for b in 0..n_bands {
            let energy: f64 = fb
                .weights
                .row(b)
                .iter()
                .zip(&magnitude)
                .map(|(w, m)| w * m)
                .sum();
            values[[t, b]] = energy.max(LOG_FLOOR).ln();
        }
    }

    Ok(MelSpectrogram {
        values,
        frame_hop_s: geom.hop_s(clip.sample_rate),
        frame_len_s: geom.frame_len_s(clip.sample_rate),
        context_id: clip.context_id.clone(),
        recording_id: clip.recording_id.clone(),
    })
}
