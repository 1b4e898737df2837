//! Annotation and class-map CSV files.
//!
//! Annotations: `recording_id,context_id,onset_s,offset_s,class_name`.
//! Class map: `class_name,class_id`, ids dense from 0.

use std::collections::HashMap;
use std::path::Path;

use super::EventAnnotation;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct AnnotationRecord {
    pub recording_id: String,
    pub context_id: String,
    pub onset_s: f64,
    pub offset_s: f64,
    pub class_name: String,
}

/// Class names in index order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ClassMap {
    names: Vec<String>,
    index: HashMap<String, usize>,
}

impl ClassMap {
    pub fn new(names: Vec<String>) -> Result<Self> {
        let mut index = HashMap::new();
        for (i, n) in names.iter().enumerate() {
            if n.is_empty() || n.contains([',', '\n']) {
                return Err(Error::InvalidInput(format!("bad class name {n:?}")));
            }
            if index.insert(n.clone(), i).is_some() {
                return Err(Error::InvalidInput(format!("duplicate class name {n:?}")));
            }
        }
        Ok(Self { names, index })
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, id: usize) -> Option<&str> {
        self.names.get(id).map(String::as_str)
    }

    pub fn id(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }
}

impl AnnotationRecord {
    pub fn to_event(&self, classes: &ClassMap) -> Result<EventAnnotation> {
        let id = classes
            .id(&self.class_name)
            .ok_or_else(|| Error::InvalidInput(format!("unknown class {:?}", self.class_name)))?;
        EventAnnotation::new(self.onset_s, self.offset_s, id, &self.recording_id)
    }
}

pub fn read_annotations(path: &Path) -> Result<Vec<AnnotationRecord>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    let headers = rdr.headers().map_err(|e| Error::csv(path, e))?.clone();
    let expected = [
        "recording_id",
        "context_id",
        "onset_s",
        "offset_s",
        "class_name",
    ];
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(Error::format(
            path,
            format!("expected header {}", expected.join(",")),
        ));
    }
    let mut out = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        let num = |i: usize| {
            rec[i].trim().parse::<f64>().map_err(|_| {
                Error::format(path, format!("row {}: bad number {:?}", line + 2, &rec[i]))
            })
        };
        out.push(AnnotationRecord {
            recording_id: rec[0].to_string(),
            context_id: rec[1].to_string(),
            onset_s: num(2)?,
            offset_s: num(3)?,
            class_name: rec[4].to_string(),
        });
    }
    Ok(out)
}

pub fn write_annotations(path: &Path, records: &[AnnotationRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    w.write_record([
        "recording_id",
        "context_id",
        "onset_s",
        "offset_s",
        "class_name",
    ])
    .map_err(|e| Error::csv(path, e))?;
    for r in records {
        w.write_record([
            r.recording_id.as_str(),
            r.context_id.as_str(),
            &r.onset_s.to_string(),
            &r.offset_s.to_string(),
            r.class_name.as_str(),
        ])
        .map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_class_map(path: &Path) -> Result<ClassMap> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    let mut pairs = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        let id: usize = rec[1]
            .trim()
            .parse()
            .map_err(|_| Error::format(path, format!("bad class id {:?}", &rec[1])))?;
        pairs.push((id, rec[0].to_string()));
    }
    pairs.sort();
    if pairs.iter().enumerate().any(|(i, (id, _))| *id != i) {
        return Err(Error::format(path, "class ids must be dense from 0"));
    }
    ClassMap::new(pairs.into_iter().map(|(_, n)| n).collect())
}

pub fn write_class_map(path: &Path, classes: &ClassMap) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    w.write_record(["class_name", "class_id"])
        .map_err(|e| Error::csv(path, e))?;
    for (i, n) in classes.names().iter().enumerate() {
        w.write_record([n.as_str(), &i.to_string()])
            .map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
