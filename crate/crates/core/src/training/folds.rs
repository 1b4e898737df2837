//! Fold assignments: CSV `recording_id,fold_id`.

use std::collections::BTreeSet;
use std::path::Path;

use crate::error::{Error, Result};

/// Whole recordings per partition of one fold.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldSplit {
    pub fold_id: usize,
    pub train: Vec<String>,
    pub validation: Vec<String>,
    pub test: Vec<String>,
}

/// Distinct fold ids, ascending.
pub fn fold_ids(assignment: &[(String, usize)]) -> Vec<usize> {
    assignment
        .iter()
        .map(|(_, f)| *f)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect()
}

/// Fold `f` tests on the recordings assigned to `f`, validates on the next
/// fold id (cyclically) and trains on the rest.
pub fn fold_split(assignment: &[(String, usize)], fold_id: usize) -> Result<FoldSplit> {
    let ids = fold_ids(assignment);
    let pos = ids
        .iter()
        .position(|&f| f == fold_id)
        .ok_or_else(|| Error::Config(format!("fold {fold_id} has no recordings")))?;
    if ids.len() < 3 {
        return Err(Error::Config(format!(
            "{} folds cannot provide disjoint training, validation and test sets",
            ids.len()
        )));
    }
    let val_fold = ids[(pos + 1) % ids.len()];
    let mut split = FoldSplit {
        fold_id,
        train: Vec::new(),
        validation: Vec::new(),
        test: Vec::new(),
    };
    for (rec, f) in assignment {
        let part = if *f == fold_id {
            &mut split.test
        } else if *f == val_fold {
            &mut split.validation
        } else {
            &mut split.train
        };
        part.push(rec.clone());
    }
    Ok(split)
}

pub fn read_folds(path: &Path) -> Result<Vec<(String, usize)>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    let headers = rdr.headers().map_err(|e| Error::csv(path, e))?.clone();
    if headers.iter().collect::<Vec<_>>() != ["recording_id", "fold_id"] {
        return Err(Error::format(path, "expected header recording_id,fold_id"));
    }
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        let fold = rec[1]
            .trim()
            .parse()
            .map_err(|_| Error::format(path, format!("bad fold id {:?}", &rec[1])))?;
        if !seen.insert(rec[0].to_string()) {
            return Err(Error::format(
                path,
                format!("recording {:?} assigned twice", &rec[0]),
            ));
        }
        out.push((rec[0].to_string(), fold));
    }
    Ok(out)
}

pub fn write_folds(path: &Path, assignment: &[(String, usize)]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    w.write_record(["recording_id", "fold_id"])
        .map_err(|e| Error::csv(path, e))?;
    for (rec, f) in assignment {
        w.write_record([rec.as_str(), &f.to_string()])
            .map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
