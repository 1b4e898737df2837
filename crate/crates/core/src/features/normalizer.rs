use ndarray::Array1;

use super::MelSpectrogram;
use crate::error::{Error, Result};

/// Per-band mean and standard deviation fitted on a training pool.
#[derive(Debug, Clone, PartialEq)]
pub struct BandNormalizer {
    pub means: Vec<f64>,
    pub std_devs: Vec<f64>,
}

impl BandNormalizer {
    pub fn identity(n_bands: usize) -> Self {
        Self {
            means: vec![0.0; n_bands],
            std_devs: vec![1.0; n_bands],
        }
    }

    pub fn n_bands(&self) -> usize {
        self.means.len()
    }
}

/// Population statistics per band over every frame of every spectrogram.
///
/// Bands with zero variance get a standard deviation of 1.
pub fn fit_normalizer<'a, I>(training_specs: I) -> Result<BandNormalizer>
where
    I: IntoIterator<Item = &'a MelSpectrogram>,
{
    let specs: Vec<&MelSpectrogram> = training_specs.into_iter().collect();
    let first = specs.first().ok_or_else(|| {
        Error::InvalidInput("cannot fit a normalizer on zero spectrograms".into())
    })?;
    let n_bands = first.n_bands();
    let mut count = 0usize;
    let mut sum = Array1::<f64>::zeros(n_bands);
    for spec in &specs {
        if spec.n_bands() != n_bands {
            return Err(Error::DimensionMismatch {
                what: "bands in normalizer pool",
                expected: n_bands,
                actual: spec.n_bands(),
            });
        }
        count += spec.n_frames();
        for row in spec.values.rows() {
            sum += &row;
        }
    }
    if count < 2 {
        return Err(Error::InvalidInput(format!(
            "normalizer needs at least 2 frames, pool has {count}"
        )));
    }
    let means = sum / count as f64;

    let mut sq = Array1::<f64>::zeros(n_bands);
    for spec in &specs {
        for row in spec.values.rows() {
            let d = &row - &means;
            sq += &(&d * &d);
        }
    }
    let std_devs: Vec<f64> = sq
        .iter()
        .enumerate()
        .map(|(b, &s)| {
            let sd = (s / count as f64).sqrt();
            if sd > 0.0 {
                sd
            } else {
                log::warn!("band {b} has zero variance in the training pool; using std 1");
                1.0
            }
        })
        .collect();

    Ok(BandNormalizer {
        means: means.to_vec(),
        std_devs,
    })
}

pub fn apply_normalizer(spec: &MelSpectrogram, norm: &BandNormalizer) -> Result<MelSpectrogram> {
    if spec.n_bands() != norm.n_bands() {
        return Err(Error::DimensionMismatch {
            what: "normalizer bands",
            expected: norm.n_bands(),
            actual: spec.n_bands(),
        });
    }
    let mut out = spec.clone();
    for mut row in out.values.rows_mut() {
        for ((v, m), s) in row.iter_mut().zip(&norm.means).zip(&norm.std_devs) {
            *v = (*v - m) / s;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};

    fn spec(values: Array2<f64>) -> MelSpectrogram {
        MelSpectrogram {
            values,
            frame_hop_s: 0.025,
            frame_len_s: 0.05,
            context_id: "c".into(),
            recording_id: "r".into(),
        }
    }

    #[test]
    fn two_point_population_stats() {
        let norm = fit_normalizer([&spec(array![[1.0], [3.0]])]).unwrap();
        assert_eq!(norm.means, vec![2.0]);
        assert_eq!(norm.std_devs, vec![1.0]);
    }

    #[test]
    fn constant_bands_fall_back_to_unit_std() {
        let a = spec(Array2::from_elem((3, 4), 2.5));
        let b = spec(Array2::from_elem((5, 4), 2.5));
        let norm = fit_normalizer([&a, &b]).unwrap();
        assert_eq!(norm.means, vec![2.5; 4]);
        assert_eq!(norm.std_devs, vec![1.0; 4]);
    }

    #[test]
    fn apply_uses_the_formula() {
        let norm = BandNormalizer {
            means: vec![3.0],
            std_devs: vec![2.0],
        };
        let out = apply_normalizer(&spec(array![[5.0]]), &norm).unwrap();
        assert_eq!(out.values[[0, 0]], 1.0);
    }

    #[test]
    fn identity_normalizer_is_neutral() {
        let s = spec(array![[1.5, -2.0], [0.25, 7.0]]);
        assert_eq!(
            apply_normalizer(&s, &BandNormalizer::identity(2)).unwrap(),
            s
        );
    }

    #[test]
    fn errors() {
        assert!(fit_normalizer(std::iter::empty()).is_err());
        assert!(fit_normalizer([&spec(array![[1.0, 2.0]])]).is_err());
        let mismatch = apply_normalizer(&spec(array![[1.0, 2.0]]), &BandNormalizer::identity(3));
        assert!(matches!(mismatch, Err(Error::DimensionMismatch { .. })));
    }
}
