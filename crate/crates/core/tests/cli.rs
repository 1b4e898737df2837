use std::fs;
use std::path::Path;
use std::process::Command;

use polysed::cli::{
    cmd_augment, cmd_detect, cmd_eval, cmd_extract, cmd_synth, cmd_train, load_recordings,
    model_path, RunConfig,
};
use polysed::detection::{read_detections, roll_to_events, write_detections};
use polysed::features::{read_features, write_wav, AudioClip};
use polysed::neural::read_model;
use polysed::sequence::ClassMap;

fn small_config(root: &Path) -> RunConfig {
    let mut cfg = RunConfig::parse_str(
        "n_contexts=3\nrecordings_per_context=5\nrecording_len_s=20\nn_folds=5\n\
         hidden_cells=4\nmax_epochs=2\nn_restarts=1\nbatch_size=32\nrng_seed=3\n\
         mix_blocks_per_context=4\nmix_expansion=1\n",
    )
    .unwrap();
    cfg.data_dir = root.join("data");
    cfg.features_dir = root.join("features");
    cfg.augmented_dir = root.join("augmented");
    cfg.run_dir = root.join("run");
    cfg
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_polysed"))
}

#[test]
fn pipeline_from_synthesis_to_report() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config(dir.path());
    cmd_synth(&cfg).unwrap();
    let wavs = fs::read_dir(cfg.data_dir.join("audio/ctx01"))
        .unwrap()
        .count();
    assert_eq!(wavs, 5);

    assert_eq!(cmd_extract(&cfg).unwrap(), 0);
    let spec = read_features(&cfg.features_dir.join("ctx02_rec04.feat")).unwrap();
    assert_eq!((spec.n_frames(), spec.n_bands()), (799, 40));
    assert_eq!(spec.context_id, "ctx02");
    let before = fs::read(cfg.features_dir.join("ctx02_rec04.feat")).unwrap();
    cmd_extract(&cfg).unwrap();
    assert_eq!(
        fs::read(cfg.features_dir.join("ctx02_rec04.feat")).unwrap(),
        before
    );

    cfg.folds = vec![0];
    let n_aug = cmd_augment(&cfg).unwrap();
    assert!(n_aug > 0);
    let sources = fs::read_to_string(cfg.augmented_dir.join("sources.csv")).unwrap();
    for line in sources.lines().skip(1) {
        for src in line.split(',').nth(1).unwrap().split(';') {
            assert!(!src.ends_with("rec00") && !src.ends_with("rec01"), "{line}");
        }
    }

    cmd_train(&cfg).unwrap();
    let model = model_path(&cfg.run_dir, 0);
    assert!(read_model(&model).is_ok());
    let log = fs::read_to_string(cfg.run_dir.join("fold0_restart0.log")).unwrap();
    assert_eq!(log.lines().count(), 3);
    assert!(cfg.run_dir.join("cv_report.csv").exists());

    cfg.model = Some(model);
    let det = cmd_detect(&cfg).unwrap();
    let classes = ClassMap::new(read_model(cfg.model.as_ref().unwrap()).unwrap().classes).unwrap();
    let events = read_detections(&det, &classes).unwrap();
    assert!(events.iter().all(|e| e.recording_id.ends_with("rec00")));

    cfg.train.threshold = 0.99;
    let strict_dir = dir.path().join("strict");
    let mut strict = cfg.clone();
    strict.run_dir = strict_dir;
    let strict_events = read_detections(&cmd_detect(&strict).unwrap(), &classes).unwrap();
    for e in &strict_events {
        assert!(
            events.iter().any(|n| n.recording_id == e.recording_id
                && n.class_id == e.class_id
                && n.onset_s <= e.onset_s + 1e-9
                && n.offset_s >= e.offset_s - 1e-9),
            "{e:?}"
        );
    }

    let report = cmd_eval(&cfg, true).unwrap();
    assert_eq!(report.contexts.len(), 3);
    let table = fs::read_to_string(cfg.run_dir.join("report.txt")).unwrap();
    assert!(table.lines().last().unwrap().starts_with("average"));
    let pooled = fs::read_to_string(cfg.run_dir.join("report_pooled.csv")).unwrap();
    assert!(pooled.starts_with("context,f1_avgframe,f1_frame_pooled,f1_1sec\n"));
}

#[test]
fn reference_as_prediction_scores_one() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config(dir.path());
    cfg.synth.recordings_per_context = 2;
    cmd_synth(&cfg).unwrap();
    cmd_extract(&cfg).unwrap();
    let (classes, recs) = load_recordings(&cfg).unwrap();
    let events: Vec<_> = recs
        .iter()
        .flat_map(|r| roll_to_events(&r.roll, r.spec.frame_hop_s, r.spec.frame_len_s, r.id()))
        .collect();
    let pred = dir.path().join("truth.csv");
    write_detections(&pred, &events, &classes).unwrap();
    cfg.predictions = Some(pred.clone());
    let report = cmd_eval(&cfg, false).unwrap();
    assert_eq!(report.f1_avgframe, 1.0);
    assert_eq!(report.f1_1sec, 1.0);

    fs::write(
        &pred,
        "recording_id,class_name,onset_s,offset_s\nnowhere,tone_200hz,0,1\nelse,tone_200hz,0,1\n",
    )
    .unwrap();
    let msg = cmd_eval(&cfg, false).unwrap_err().to_string();
    assert!(msg.contains("nowhere") && msg.contains("else"), "{msg}");
}

#[test]
fn thirty_seconds_at_44k1_give_1199_frames() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config(dir.path());
    let audio = cfg.data_dir.join("audio").join("street");
    fs::create_dir_all(&audio).unwrap();
    let samples: Vec<f64> = (0..30 * 44_100)
        .map(|i| 0.3 * (i as f64 * 0.05).sin())
        .collect();
    let clip = AudioClip::new(samples, 44_100, "street", "walk").unwrap();
    write_wav(&audio.join("walk.wav"), &clip).unwrap();
    cfg.features.n_bands = 40;
    cmd_extract(&cfg).unwrap();
    let spec = read_features(&cfg.features_dir.join("walk.feat")).unwrap();
    assert_eq!(spec.n_frames(), 1199);
    assert_eq!(spec.context_id, "street");
}

#[test]
fn empty_feature_directory_gives_a_header_only_csv() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config(dir.path());
    fs::create_dir_all(&cfg.features_dir).unwrap();
    let net = polysed::neural::init_network(
        &polysed::neural::Architecture::new(40, vec![2], 6).unwrap(),
        1,
    )
    .unwrap();
    let classes: Vec<String> = (0..6).map(|k| format!("c{k}")).collect();
    let model = dir.path().join("m.model");
    polysed::neural::write_model(
        &model,
        &polysed::neural::ModelFile {
            network: net,
            classes,
            config: vec![],
        },
    )
    .unwrap();
    cfg.model = Some(model);
    let out = cmd_detect(&cfg).unwrap();
    assert_eq!(
        fs::read_to_string(out).unwrap(),
        "recording_id,class_name,onset_s,offset_s\n"
    );
}

#[test]
fn synthesis_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(&dir.path().join("a"));
    let other = small_config(&dir.path().join("b"));
    cmd_synth(&cfg).unwrap();
    cmd_synth(&other).unwrap();
    for f in [
        "annotations.csv",
        "classes.csv",
        "folds.csv",
        "audio/ctx00/ctx00_rec03.wav",
    ] {
        assert_eq!(
            fs::read(cfg.data_dir.join(f)).unwrap(),
            fs::read(other.data_dir.join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn training_without_a_fold_file_is_a_configuration_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let err = cmd_train(&cfg).unwrap_err();
    assert!(
        matches!(err, polysed::Error::Csv { .. } | polysed::Error::Io { .. }),
        "{err}"
    );
    assert!(!cfg.run_dir.exists());
}

#[test]
fn binary_reports_failures_on_stderr() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["extract", "--out"])
        .arg(dir.path().join("f"))
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
    assert!(out.stdout.is_empty());

    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "no_such_key=1\n").unwrap();
    let out = bin()
        .args(["synth", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("no_such_key"));

    let blocker = dir.path().join("file");
    fs::write(&blocker, "").unwrap();
    let out = bin()
        .args(["synth", "--out"])
        .arg(blocker.join("sub"))
        .env("POLYSED_LOG", "warn")
        .output()
        .unwrap();
    assert!(!out.status.success());
}

#[test]
fn binary_synthesizes_a_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(
        &cfg,
        "n_contexts=1\nrecordings_per_context=3\nrecording_len_s=30\n",
    )
    .unwrap();
    let out = bin()
        .args(["synth", "--seed", "5", "--jobs", "2", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("data"))
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert_eq!(
        fs::read_dir(dir.path().join("data/audio/ctx00"))
            .unwrap()
            .count(),
        3
    );
}
