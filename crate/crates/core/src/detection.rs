//! From network outputs to binary activity and event lists. No smoothing
//! or other post-processing is applied.
//!
//! Detection files: `recording_id,class_name,onset_s,offset_s`.

use std::path::Path;

use ndarray::ArrayView2;

use crate::error::{Error, Result};
use crate::sequence::{frame_start_s, ClassMap, TargetRoll};

/// Slack for comparing event boundaries with frame boundaries, seconds.
const GRID_TOLERANCE_S: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct DetectedEvent {
    pub class_id: usize,
    pub onset_s: f64,
    pub offset_s: f64,
    pub recording_id: String,
}

/// Active where `y >= threshold`.
pub fn threshold_outputs(y: ArrayView2<f64>, threshold: f64) -> Result<TargetRoll> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::InvalidInput(format!(
            "threshold {threshold} outside (0, 1)"
        )));
    }
    Ok(TargetRoll {
        values: y.mapv(|v| v >= threshold),
    })
}

/// One event per maximal run of active frames of a class. A run over
/// frames `a..=b` spans `[a * hop, b * hop + frame_len)`. Sorted by onset,
/// then class.
pub fn roll_to_events(
    roll: &TargetRoll,
    frame_hop_s: f64,
    frame_len_s: f64,
    recording_id: &str,
) -> Vec<DetectedEvent> {
    let mut events = Vec::new();
    for (k, col) in roll.values.columns().into_iter().enumerate() {
        let mut start = None;
        for (t, &on) in col.iter().chain(std::iter::once(&false)).enumerate() {
            match (on, start) {
                (true, None) => start = Some(t),
                (false, Some(a)) => {
                    events.push(DetectedEvent {
                        class_id: k,
                        onset_s: frame_start_s(a, frame_hop_s),
                        offset_s: frame_start_s(t - 1, frame_hop_s) + frame_len_s,
                        recording_id: recording_id.to_string(),
                    });
                    start = None;
                }
                _ => {}
            }
        }
    }
    events.sort_by(|a, b| {
        a.onset_s
            .total_cmp(&b.onset_s)
            .then(a.class_id.cmp(&b.class_id))
    });
    events
}

/// Mark the frames lying entirely inside an event. This is the exact
/// inverse of [`roll_to_events`]; for reference annotations, whose
/// boundaries are not frame-aligned, use
/// [`annotations_to_roll`](crate::sequence::annotations_to_roll).
pub fn events_to_roll(
    events: &[DetectedEvent],
    n_frames: usize,
    frame_hop_s: f64,
    frame_len_s: f64,
    n_classes: usize,
) -> Result<TargetRoll> {
    let mut roll = TargetRoll::zeros(n_frames, n_classes);
    for ev in events {
        if ev.class_id >= n_classes {
            return Err(Error::ClassOutOfRange {
                class_id: ev.class_id,
                n_classes,
            });
        }
        let first = ((ev.onset_s - GRID_TOLERANCE_S) / frame_hop_s)
            .ceil()
            .max(0.0) as usize;
        for t in first..n_frames {
            let start = frame_start_s(t, frame_hop_s);
            if start + frame_len_s > ev.offset_s + GRID_TOLERANCE_S {
                break;
            }
            if start >= ev.onset_s - GRID_TOLERANCE_S {
                roll.values[[t, ev.class_id]] = true;
            }
        }
    }
    Ok(roll)
}

const HEADER: [&str; 4] = ["recording_id", "class_name", "onset_s", "offset_s"];

pub fn write_detections(path: &Path, events: &[DetectedEvent], classes: &ClassMap) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    w.write_record(HEADER).map_err(|e| Error::csv(path, e))?;
    for ev in events {
        let name = classes.name(ev.class_id).ok_or(Error::ClassOutOfRange {
            class_id: ev.class_id,
            n_classes: classes.len(),
        })?;
        w.write_record([
            ev.recording_id.as_str(),
            name,
            &ev.onset_s.to_string(),
            &ev.offset_s.to_string(),
        ])
        .map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_detections(path: &Path, classes: &ClassMap) -> Result<Vec<DetectedEvent>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    let headers = rdr.headers().map_err(|e| Error::csv(path, e))?.clone();
    if headers.iter().collect::<Vec<_>>() != HEADER {
        return Err(Error::format(
            path,
            format!("expected header {}", HEADER.join(",")),
        ));
    }
    let mut out = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        let row = line + 2;
        let num = |i: usize| {
            rec[i]
                .trim()
                .parse::<f64>()
                .map_err(|_| Error::format(path, format!("row {row}: bad number {:?}", &rec[i])))
        };
        let class_id = classes.id(&rec[1]).ok_or_else(|| {
            Error::format(path, format!("row {row}: unknown class {:?}", &rec[1]))
        })?;
        out.push(DetectedEvent {
            class_id,
            onset_s: num(2)?,
            offset_s: num(3)?,
            recording_id: rec[0].to_string(),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};
    use proptest::prelude::*;

    #[test]
    fn threshold_is_inclusive() {
        let y = array![[0.5, 0.49], [0.2, 0.8]];
        let roll = threshold_outputs(y.view(), 0.5).unwrap();
        assert_eq!(roll.values, array![[true, false], [false, true]]);
        assert!(threshold_outputs(y.view(), 0.0).is_err());
        assert!(threshold_outputs(y.view(), 1.0).is_err());
    }

    #[test]
    fn below_threshold_everywhere() {
        let y = Array2::from_elem((5, 3), 0.49);
        assert_eq!(threshold_outputs(y.view(), 0.5).unwrap().active_count(0), 0);
    }

    #[test]
    fn run_becomes_one_event() {
        let mut roll = TargetRoll::zeros(8, 4);
        for t in 2..=4 {
            roll.values[[t, 3]] = true;
        }
        let ev = roll_to_events(&roll, 0.025, 0.05, "r");
        assert_eq!(ev.len(), 1);
        assert_eq!(ev[0].class_id, 3);
        assert!((ev[0].onset_s - 0.05).abs() < 1e-12);
        assert!((ev[0].offset_s - 0.15).abs() < 1e-12);
        assert!(roll_to_events(&TargetRoll::zeros(8, 4), 0.025, 0.05, "r").is_empty());
    }

    #[test]
    fn runs_touching_the_ends() {
        let mut roll = TargetRoll::zeros(4, 1);
        roll.values[[0, 0]] = true;
        roll.values[[3, 0]] = true;
        let ev = roll_to_events(&roll, 0.025, 0.05, "r");
        assert_eq!(ev.len(), 2);
        assert!((ev[1].onset_s - 0.075).abs() < 1e-12);
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("det.csv");
        let classes = ClassMap::new(vec!["a".into(), "b".into()]).unwrap();
        let events = vec![
            DetectedEvent {
                class_id: 1,
                onset_s: 0.1,
                offset_s: 0.35,
                recording_id: "r1".into(),
            },
            DetectedEvent {
                class_id: 0,
                onset_s: 1.0 / 3.0,
                offset_s: 2.0,
                recording_id: "r1".into(),
            },
        ];
        write_detections(&path, &events, &classes).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("recording_id,class_name,onset_s,offset_s\nr1,b,0.1,0.35\n"));
        assert_eq!(read_detections(&path, &classes).unwrap(), events);
    }

    fn hop_and_len() -> impl Strategy<Value = (f64, f64)> {
        prop_oneof![
            Just((0.025, 0.05)),
            Just((1102.0 / 44100.0, 2205.0 / 44100.0)),
            Just((0.02, 0.05))
        ]
    }

    proptest! {
        #[test]
        fn roll_events_roll_is_identity(
            cells in proptest::collection::vec(any::<bool>(), 1..240),
            classes in 1usize..4,
            (hop, len) in hop_and_len(),
        ) {
            let n = cells.len() / classes;
            prop_assume!(n > 0);
            let roll = TargetRoll {
                values: Array2::from_shape_vec((n, classes), cells[..n * classes].to_vec()).unwrap(),
            };
            let events = roll_to_events(&roll, hop, len, "r");
            prop_assert_eq!(events_to_roll(&events, n, hop, len, classes).unwrap(), roll);
        }

        #[test]
        fn raising_the_threshold_never_adds_activity(
            y in proptest::collection::vec(0.0f64..=1.0, 12),
            a in 0.01f64..0.99,
            b in 0.01f64..0.99,
        ) {
            let y = Array2::from_shape_vec((4, 3), y).unwrap();
            let (lo, hi) = (a.min(b), a.max(b));
            let r_lo = threshold_outputs(y.view(), lo).unwrap();
            let r_hi = threshold_outputs(y.view(), hi).unwrap();
            for (h, l) in r_hi.values.iter().zip(r_lo.values.iter()) {
                prop_assert!(!*h || *l);
            }
        }
    }
}
