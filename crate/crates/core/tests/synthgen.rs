use polysed::features::{read_wav, FeatureConfig, FrameGeometry};
use polysed::sequence::{read_annotations, read_class_map};
use polysed::synthgen::{
    generate_dataset, measure_polyphony, write_dataset, SynthSpec, MAX_TV_DISTANCE,
};
use polysed::training::read_folds;

fn frame_grid(
    spec: &SynthSpec,
    data: &polysed::synthgen::SynthDataset,
) -> (Vec<(String, usize)>, f64, f64) {
    let cfg = FeatureConfig::default();
    let geom = FrameGeometry::new(spec.sample_rate, cfg.frame_len_s, cfg.overlap).unwrap();
    let grid = data
        .clips
        .iter()
        .map(|c| {
            let n =
                polysed::features::frame_count(c.samples.len(), geom.frame_len, geom.hop).unwrap();
            (c.recording_id.clone(), n)
        })
        .collect();
    (
        grid,
        geom.hop_s(spec.sample_rate),
        geom.frame_len_s(spec.sample_rate),
    )
}

#[test]
fn default_dataset_matches_the_reference_polyphony() {
    let spec = SynthSpec::default();
    let data = generate_dataset(&spec).unwrap();
    assert_eq!(data.clips.len(), 80);
    let (grid, hop, len) = frame_grid(&spec, &data);
    assert!(grid.iter().all(|(_, n)| *n == 2399));
    let hist = measure_polyphony(&data.events, &grid, hop, len);
    let tv = hist.tv_distance(&spec.effective_polyphony());
    assert!(tv < MAX_TV_DISTANCE, "TV distance {tv}");
    assert!(
        (hist.mean - 2.53).abs() <= 0.3,
        "mean polyphony {}",
        hist.mean
    );
}

#[test]
fn written_dataset_reads_back() {
    let spec = SynthSpec {
        n_contexts: 3,
        recordings_per_context: 5,
        recording_len_s: 20.0,
        n_folds: 5,
        rng_seed: 4,
        ..SynthSpec::default()
    };
    let data = generate_dataset(&spec).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_dataset(dir.path(), &data).unwrap();

    let classes = read_class_map(&dir.path().join("classes.csv")).unwrap();
    assert_eq!(classes, data.classes);
    let records = read_annotations(&dir.path().join("annotations.csv")).unwrap();
    assert_eq!(records.len(), data.events.len());
    for (r, e) in records.iter().zip(&data.events) {
        let ev = r.to_event(&classes).unwrap();
        assert_eq!(ev.recording_id, e.recording_id);
        assert_eq!(ev.class_id, e.class_id);
        assert!((ev.onset_s - e.onset_s).abs() < 1e-9);
        assert!((ev.offset_s - e.offset_s).abs() < 1e-9);
    }
    assert_eq!(
        read_folds(&dir.path().join("folds.csv")).unwrap(),
        data.folds
    );

    let clip = &data.clips[4];
    let wav = dir
        .path()
        .join("audio")
        .join(&clip.context_id)
        .join(format!("{}.wav", clip.recording_id));
    let back = read_wav(&wav, &clip.context_id, &clip.recording_id).unwrap();
    assert_eq!(back.samples.len(), clip.samples.len());
    let worst = back
        .samples
        .iter()
        .zip(&clip.samples)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    assert!(worst <= 1.0 / 32767.0, "{worst}");
}

#[test]
fn seeds_change_the_placement() {
    let base = SynthSpec {
        n_contexts: 1,
        recordings_per_context: 2,
        recording_len_s: 30.0,
        ..SynthSpec::default()
    };
    let a = generate_dataset(&base).unwrap();
    let b = generate_dataset(&SynthSpec {
        rng_seed: 1,
        ..base.clone()
    })
    .unwrap();
    assert_ne!(a.placements, b.placements);
    assert_eq!(a.placements, generate_dataset(&base).unwrap().placements);
}
