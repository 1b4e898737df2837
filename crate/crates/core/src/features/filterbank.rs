use ndarray::Array2;

use crate::error::{Error, Result};

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular filters on the mel scale.
///
/// `band_edges_hz` holds `n_bands + 2` points: band `b` rises from
/// `band_edges_hz[b]`, peaks at `band_edges_hz[b + 1]` and falls to zero at
/// `band_edges_hz[b + 2]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MelFilterbank {
    pub weights: Array2<f64>,
    pub band_edges_hz: Vec<f64>,
    pub sample_rate: u32,
    pub n_fft: usize,
}

impl MelFilterbank {
    pub fn n_bands(&self) -> usize {
        self.weights.nrows()
    }

    pub fn n_bins(&self) -> usize {
        self.weights.ncols()
    }

    pub fn center_hz(&self, band: usize) -> f64 {
        self.band_edges_hz[band + 1]
    }

    pub fn bin_hz(&self, bin: usize) -> f64 {
        bin as f64 * self.sample_rate as f64 / self.n_fft as f64
    }
}

pub fn build_mel_filterbank(
    sample_rate: u32,
    n_fft: usize,
    n_bands: usize,
) -> Result<MelFilterbank> {
    if sample_rate == 0 {
        return Err(Error::Filterbank("sample rate must be positive".into()));
    }
    if !n_fft.is_power_of_two() || n_fft < 2 {
        return Err(Error::Filterbank(format!(
            "n_fft {n_fft} is not a power of two"
        )));
    }
    if n_bands == 0 {
        return Err(Error::Filterbank("need at least one band".into()));
    }

    let nyquist = sample_rate as f64 / 2.0;
    let mel_max = hz_to_mel(nyquist);
    let step = mel_max / (n_bands + 1) as f64;
    let band_edges_hz: Vec<f64> = (0..n_bands + 2)
        .map(|i| {
            if i == n_bands + 1 {
                nyquist
            } else {
                mel_to_hz(step * i as f64)
            }
        })
        .collect();

    let bin_width = sample_rate as f64 / n_fft as f64;
    let nearest_bin = |hz: f64| (hz / bin_width).round() as i64;
    for b in 1..n_bands {
        if nearest_bin(band_edges_hz[b]) == nearest_bin(band_edges_hz[b + 1]) {
            return Err(Error::Filterbank(format!(
                "{n_bands} bands too many for n_fft {n_fft}: centers {} and {} Hz share an FFT bin",
                band_edges_hz[b],
                band_edges_hz[b + 1]
            )));
        }
    }

    let n_bins = n_fft / 2 + 1;
    let mut weights = Array2::zeros((n_bands, n_bins));
    for b in 0..n_bands {
        let (lo, center, hi) = (band_edges_hz[b], band_edges_hz[b + 1], band_edges_hz[b + 2]);
        for k in 0..n_bins {
            let f = k as f64 * bin_width;
            let w = if f > lo && f < center {
                (f - lo) / (center - lo)
            } else if f >= center && f < hi {
                (hi - f) / (hi - center)
            } else {
                0.0
            };
            weights[[b, k]] = w;
        }
        if weights.row(b).iter().all(|&w| w <= 0.0) {
            return Err(Error::Filterbank(format!("band {b} covers no FFT bin")));
        }
    }

    Ok(MelFilterbank {
        weights,
        band_edges_hz,
        sample_rate,
        n_fft,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mel_scale_round_trips() {
        for hz in [0.0, 100.0, 1000.0, 8000.0, 22050.0] {
            assert!((mel_to_hz(hz_to_mel(hz)) - hz).abs() < 1e-9);
        }
        assert!((hz_to_mel(700.0) - 2595.0 * 2f64.log10()).abs() < 1e-12);
    }

    #[test]
    fn forty_bands_cover_interior_bins() {
        let fb = build_mel_filterbank(44_100, 2048, 40).unwrap();
        assert_eq!(fb.n_bands(), 40);
        assert_eq!(fb.n_bins(), 1025);
        let first = fb.center_hz(0);
        let last = fb.center_hz(39);
        for k in 0..fb.n_bins() {
            let f = fb.bin_hz(k);
            if f >= first && f <= last {
                let covered = (0..40).any(|b| fb.weights[[b, k]] > 0.0);
                assert!(covered, "bin {k} ({f} Hz) uncovered");
            }
        }
    }

    #[test]
    fn centers_strictly_increase() {
        let fb = build_mel_filterbank(44_100, 2048, 40).unwrap();
        assert!(fb.center_hz(0) < fb.center_hz(39));
        for b in 1..40 {
            assert!(fb.center_hz(b) > fb.center_hz(b - 1));
        }
    }

    #[test]
    fn single_band_spans_everything() {
        let fb = build_mel_filterbank(16_000, 512, 1).unwrap();
        assert_eq!(fb.band_edges_hz.first(), Some(&0.0));
        assert_eq!(fb.band_edges_hz.last(), Some(&8000.0));
        let positive = fb.weights.row(0).iter().filter(|&&w| w > 0.0).count();
        assert_eq!(positive, fb.n_bins() - 2);
    }

    #[test]
    fn rows_nonnegative_and_unimodal() {
        let fb = build_mel_filterbank(16_000, 1024, 40).unwrap();
        for row in fb.weights.rows() {
            assert!(row.iter().all(|&w| w >= 0.0));
            let peak = row
                .iter()
                .enumerate()
                .fold(
                    (0, f64::MIN),
                    |acc, (i, &w)| if w > acc.1 { (i, w) } else { acc },
                )
                .0;
            assert!(row
                .iter()
                .take(peak + 1)
                .collect::<Vec<_>>()
                .windows(2)
                .all(|w| w[0] <= w[1]));
            assert!(row
                .iter()
                .skip(peak)
                .collect::<Vec<_>>()
                .windows(2)
                .all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn too_many_bands_rejected() {
        assert!(matches!(
            build_mel_filterbank(16_000, 64, 40),
            Err(Error::Filterbank(_))
        ));
        assert!(build_mel_filterbank(16_000, 500, 10).is_err());
        assert!(build_mel_filterbank(16_000, 512, 0).is_err());
    }
}
