//! `POLYSED-MODEL v1` files.
//!
//! A UTF-8 header of one record per line
//!
//! ```text
//! POLYSED-MODEL v1
//! n_bands <n>
//! n_classes <n>
//! cells <n per direction, layer 1> <layer 2> ...
//! class <name>            (one per class, in id order)
//! config <key>=<value>    (zero or more)
//! tensors <count>
//! ```
//!
//! followed by binary blocks, each a little-endian `u64` length and that
//! many little-endian `f64` values: normalizer means, normalizer standard
//! deviations, then every parameter tensor in canonical order.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::{Architecture, BlstmNetwork};
use crate::error::{Error, Result};
use crate::features::BandNormalizer;

pub const MODEL_MAGIC: &str = "POLYSED-MODEL v1";

/// A network with the class names it was trained on and the settings that
/// produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelFile {
    pub network: BlstmNetwork,
    pub classes: Vec<String>,
    pub config: Vec<(String, String)>,
}

fn push_block(bytes: &mut Vec<u8>, values: &[f64]) {
    bytes.extend_from_slice(&(values.len() as u64).to_le_bytes());
    for v in values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
}

fn single_line(path: &Path, what: &str, s: &str) -> Result<()> {
    if s.is_empty() || s.contains(['\n', '\r']) || s.trim() != s {
        return Err(Error::format(
            path,
            format!("{what} {s:?} cannot be stored in a header"),
        ));
    }
    Ok(())
}

pub fn write_model(path: &Path, model: &ModelFile) -> Result<()> {
    let net = &model.network;
    if model.classes.len() != net.n_classes() {
        return Err(Error::DimensionMismatch {
            what: "class names",
            expected: net.n_classes(),
            actual: model.classes.len(),
        });
    }
    let mut bytes = Vec::new();
    let cells: Vec<String> = net
        .arch
        .cells_per_layer
        .iter()
        .map(|c| c.to_string())
        .collect();
    let mut header = format!(
        "{MODEL_MAGIC}\nn_bands {}\nn_classes {}\ncells {}\n",
        net.n_bands(),
        net.n_classes(),
        cells.join(" ")
    );
    for name in &model.classes {
        single_line(path, "class name", name)?;
        header.push_str(&format!("class {name}\n"));
    }
    for (key, value) in &model.config {
        single_line(path, "config key", key)?;
        if key.contains('=') || value.contains(['\n', '\r']) {
            return Err(Error::format(
                path,
                format!("config entry {key:?} cannot be stored"),
            ));
        }
        header.push_str(&format!("config {key}={value}\n"));
    }
    let tensors = net.params.tensors();
    header.push_str(&format!("tensors {}\n", tensors.len()));
    bytes
        .write_all(header.as_bytes())
        .expect("writing to a Vec cannot fail");
    push_block(&mut bytes, &net.normalizer.means);
    push_block(&mut bytes, &net.normalizer.std_devs);
    for t in tensors {
        push_block(&mut bytes, t);
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

struct Cursor<'a> {
    path: &'a Path,
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn line(&mut self) -> Result<&str> {
        let rest = &self.bytes[self.pos..];
        let end = rest
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| Error::format(self.path, "truncated header"))?;
        self.pos += end + 1;
        std::str::from_utf8(&rest[..end])
            .map_err(|_| Error::format(self.path, "header is not UTF-8"))
    }

    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::format(self.path, "truncated tensor data"));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn block(&mut self, expected: usize) -> Result<Vec<f64>> {
        let len = u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")) as usize;
        if len != expected {
            return Err(Error::format(
                self.path,
                format!("tensor of {len} values where {expected} were expected"),
            ));
        }
        let raw = self.take(
            len.checked_mul(8)
                .ok_or_else(|| Error::format(self.path, "bad length"))?,
        )?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }
}

fn parse_count(path: &Path, line: &str, key: &str) -> Result<usize> {
    line.strip_prefix(key)
        .and_then(|v| v.strip_prefix(' '))
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| Error::format(path, format!("expected `{key} <count>`, found {line:?}")))
}

pub fn read_model(path: &Path) -> Result<ModelFile> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut cur = Cursor {
        path,
        bytes: &bytes,
        pos: 0,
    };
    if cur.line()? != MODEL_MAGIC {
        return Err(Error::format(path, "not a POLYSED-MODEL v1 file"));
    }
    let n_bands = parse_count(path, cur.line()?, "n_bands")?;
    let n_classes = parse_count(path, cur.line()?, "n_classes")?;
    let cells_line = cur.line()?.to_owned();
    let cells = cells_line
        .strip_prefix("cells ")
        .map(|v| {
            v.split(' ')
                .map(str::parse)
                .collect::<std::result::Result<Vec<usize>, _>>()
        })
        .and_then(|r| r.ok())
        .ok_or_else(|| Error::format(path, format!("bad layer sizes {cells_line:?}")))?;
    let arch = Architecture::new(n_bands, cells, n_classes)
        .map_err(|e| Error::format(path, e.to_string()))?;

    let mut classes = Vec::new();
    let mut config = Vec::new();
    let n_tensors = loop {
        let line = cur.line()?.to_owned();
        if let Some(name) = line.strip_prefix("class ") {
            classes.push(name.to_owned());
        } else if let Some(entry) = line.strip_prefix("config ") {
            let (k, v) = entry
                .split_once('=')
                .ok_or_else(|| Error::format(path, format!("bad config line {line:?}")))?;
            config.push((k.to_owned(), v.to_owned()));
        } else {
            break parse_count(path, &line, "tensors")?;
        }
    };
    if classes.len() != n_classes {
        return Err(Error::format(
            path,
            format!("{} class names for {n_classes} classes", classes.len()),
        ));
    }

    let mut network = BlstmNetwork::zeros(arch);
    let means = cur.block(n_bands)?;
    let std_devs = cur.block(n_bands)?;
    network.normalizer = BandNormalizer { means, std_devs };
    let mut tensors = network.params.tensors_mut();
    if tensors.len() != n_tensors {
        return Err(Error::format(
            path,
            format!(
                "{n_tensors} tensors listed, architecture has {}",
                tensors.len()
            ),
        ));
    }
    for t in tensors.iter_mut() {
        let values = cur.block(t.len())?;
        t.copy_from_slice(&values);
    }
    if cur.pos != bytes.len() {
        return Err(Error::format(path, "trailing bytes after the last tensor"));
    }
    Ok(ModelFile {
        network,
        classes,
        config,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::init_network;

    fn sample() -> ModelFile {
        let arch = Architecture::new(4, vec![3, 2], 2).unwrap();
        let mut network = init_network(&arch, 21).unwrap();
        network.normalizer = BandNormalizer {
            means: vec![-3.25, 0.1, 1.0 / 3.0, 7.0],
            std_devs: vec![1.0, 0.5, 2.0_f64.sqrt(), 1e-3],
        };
        ModelFile {
            network,
            classes: vec!["dog bark".into(), "car".into()],
            config: vec![
                ("learning_rate".into(), "0.005".into()),
                ("seed".into(), "7".into()),
            ],
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.model");
        let model = sample();
        write_model(&path, &model).unwrap();
        let back = read_model(&path).unwrap();
        assert_eq!(back.classes, model.classes);
        assert_eq!(back.config, model.config);
        assert_eq!(back.network.arch, model.network.arch);
        let bits = |v: Vec<f64>| v.into_iter().map(f64::to_bits).collect::<Vec<_>>();
        assert_eq!(
            bits(back.network.params.to_flat()),
            bits(model.network.params.to_flat())
        );
        assert_eq!(back.network.normalizer, model.network.normalizer);

        let again = dir.path().join("m2.model");
        write_model(&again, &back).unwrap();
        assert_eq!(fs::read(&path).unwrap(), fs::read(&again).unwrap());
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.model");
        write_model(&path, &sample()).unwrap();
        let bytes = fs::read(&path).unwrap();

        fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
        assert!(read_model(&path).is_err());

        let mut extra = bytes.clone();
        extra.push(0);
        fs::write(&path, &extra).unwrap();
        assert!(read_model(&path).is_err());

        let mut wrong_count = bytes.clone();
        let at = bytes.windows(11).position(|w| w == b"n_classes 2").unwrap();
        wrong_count[at + 10] = b'3';
        fs::write(&path, &wrong_count).unwrap();
        assert!(read_model(&path).is_err());
    }

    #[test]
    fn class_names_must_match() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = sample();
        m.classes.pop();
        assert!(write_model(&dir.path().join("x"), &m).is_err());
        let mut m = sample();
        m.classes[0] = "two\nlines".into();
        assert!(write_model(&dir.path().join("x"), &m).is_err());
    }
}
