//! `POLYSED-FEAT v1` feature files.
//!
//! One ASCII header line
//!
//! ```text
//! POLYSED-FEAT v1, <n_frames>, <n_bands>, <frame_hop_s>, <context_id>, <recording_id>
//! ```
//!
//! followed by `n_frames * n_bands` little-endian `f64` values in row-major
//! order. The hop is printed with Rust's shortest round-trip float
//! formatting, so reading a file back reproduces every bit.

use std::fs;
use std::io::Write;
use std::path::Path;

use ndarray::Array2;

use super::MelSpectrogram;
use crate::error::{Error, Result};

pub const FEATURE_MAGIC: &str = "POLYSED-FEAT v1";

fn check_label(path: &Path, what: &str, label: &str) -> Result<()> {
    if label.is_empty() || label.contains([',', '\n', '\r']) || label.trim() != label {
        return Err(Error::format(
            path,
            format!("{what} {label:?} cannot be stored in a header"),
        ));
    }
    Ok(())
}

pub fn write_features(path: &Path, spec: &MelSpectrogram) -> Result<()> {
    check_label(path, "context id", &spec.context_id)?;
    check_label(path, "recording id", &spec.recording_id)?;
    let mut bytes = Vec::with_capacity(64 + spec.values.len() * 8);
    writeln!(
        bytes,
        "{FEATURE_MAGIC}, {}, {}, {}, {}, {}",
        spec.n_frames(),
        spec.n_bands(),
        spec.frame_hop_s,
        spec.context_id,
        spec.recording_id
    )
    .expect("writing to a Vec cannot fail");
    for v in spec.values.iter() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Read a feature file. The header carries no frame length, so it is
/// reconstructed as twice the hop (50% overlap).
pub fn read_features(path: &Path) -> Result<MelSpectrogram> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let newline = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::format(path, "missing header line"))?;
    let header = std::str::from_utf8(&bytes[..newline])
        .map_err(|_| Error::format(path, "header is not UTF-8"))?;
    let fields: Vec<&str> = header.split(", ").collect();
    if fields.len() != 6 || fields[0] != FEATURE_MAGIC {
        return Err(Error::format(path, format!("bad header {header:?}")));
    }
    let parse_usize = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| Error::format(path, format!("bad count {s:?}")))
    };
    let n_frames = parse_usize(fields[1])?;
    let n_bands = parse_usize(fields[2])?;
    let frame_hop_s: f64 = fields[3]
        .parse()
        .map_err(|_| Error::format(path, format!("bad hop {:?}", fields[3])))?;

    let payload = &bytes[newline + 1..];
    if payload.len() != n_frames * n_bands * 8 {
        return Err(Error::format(
            path,
            format!(
                "payload has {} bytes, header promises {}",
                payload.len(),
                n_frames * n_bands * 8
            ),
        ));
    }
    let data: Vec<f64> = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    let values = Array2::from_shape_vec((n_frames, n_bands), data)
        .map_err(|e| Error::format(path, e.to_string()))?;
    Ok(MelSpectrogram {
        values,
        frame_hop_s,
        frame_len_s: 2.0 * frame_hop_s,
        context_id: fields[4].to_string(),
        recording_id: fields[5].to_string(),
    })
}
