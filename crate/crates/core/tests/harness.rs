mod common;

use common::{small_config, synthetic_digits, write_idx_dir};
use hlop_core::checkpoint;
use hlop_core::experiment::{load_tasks, run_checkpointed, run_tasks, RunState};
use hlop_core::mnist::{load_mnist_dir, load_mnist_idx, to_idx_bytes, TRAIN_IMAGES, TRAIN_LABELS};
use hlop_core::output::{summary_csv, write_run_outputs, CHECKPOINT_FILE, CONFIG_ECHO_FILE, METRICS_FILE, SUMMARY_FILE};
use hlop_core::{run_continual, ExperimentConfig, HlopError};

fn setup(extra: &str) -> (tempfile::TempDir, ExperimentConfig) {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    std::fs::create_dir(&data).unwrap();
    write_idx_dir(&data, 400, 200);
    let cfg = ExperimentConfig::parse(&small_config(&data, &dir.path().join("out"), extra)).unwrap();
    (dir, cfg)
}

#[test]
fn idx_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    write_idx_dir(dir.path(), 30, 10);
    let (train, test) = load_mnist_dir(dir.path()).unwrap();
    assert_eq!((train.len(), test.len()), (30, 10));
    let want = synthetic_digits(30, 1);
    assert_eq!(train.labels, want.labels);
    // Pixels survive up to byte rounding.
    let worst = train.images.sub(&want.images).unwrap().max_abs();
    assert!(worst <= 0.5 / 255.0 + 1e-12, "{worst}");
}

#[test]
fn idx_errors_are_distinct() {
    let dir = tempfile::tempdir().unwrap();
    let (img, lab) = to_idx_bytes(&synthetic_digits(5, 0));
    let (ip, lp) = (dir.path().join(TRAIN_IMAGES), dir.path().join(TRAIN_LABELS));

    assert!(matches!(load_mnist_idx(&ip, &lp), Err(HlopError::MissingData(_))));

    let mut bad = img.clone();
    bad[3] = 0x01;
    std::fs::write(&ip, &bad).unwrap();
    std::fs::write(&lp, &lab).unwrap();
    assert!(matches!(load_mnist_idx(&ip, &lp), Err(HlopError::IdxMagic { found: 0x0801, .. })));

    std::fs::write(&ip, &img[..img.len() - 7]).unwrap();
    assert!(matches!(load_mnist_idx(&ip, &lp), Err(HlopError::IdxTruncated { .. })));

    std::fs::write(&ip, &img).unwrap();
    let (_, fewer) = to_idx_bytes(&synthetic_digits(4, 0));
    std::fs::write(&lp, &fewer).unwrap();
    assert!(matches!(load_mnist_idx(&ip, &lp), Err(HlopError::IdxCountMismatch { images: 5, labels: 4 })));
}

#[test]
fn runs_are_deterministic() {
    let (_dir, cfg) = setup("");
    let a = run_continual(&cfg).unwrap();
    let b = run_continual(&cfg).unwrap();
    assert_eq!(a.accuracy, b.accuracy);
    assert_eq!(a.accuracy.tasks(), 3);
    assert_eq!(summary_csv(&a.accuracy).unwrap(), summary_csv(&b.accuracy).unwrap());
    // The synthetic classes are easy; the first task must be learned.
    assert!(a.accuracy.get(0, 0).unwrap() > 50.0, "{:?}", a.accuracy.rows());
}

#[test]
fn different_seeds_differ() {
    let (_dir, cfg) = setup("");
    let other = ExperimentConfig { seed: cfg.seed + 1, ..cfg.clone() };
    assert_ne!(run_continual(&cfg).unwrap().accuracy, run_continual(&other).unwrap().accuracy);
}

#[test]
fn checkpoint_round_trip_preserves_state() {
    let (_dir, cfg) = setup("");
    let seq = load_tasks(&cfg).unwrap();
    let mut state = RunState::new(&cfg).unwrap();
    let mut saved = Vec::new();
    run_tasks(&cfg, &seq, &mut state, |s| {
        saved.push((checkpoint::encode(&cfg, s), s.clone()));
        Ok(())
    })
    .unwrap();
    for (bytes, snapshot) in &saved {
        assert_eq!(&checkpoint::decode(&cfg, bytes).unwrap(), snapshot);
    }
}

#[test]
fn resuming_mid_sequence_reproduces_the_run() {
    let (dir, cfg) = setup("");
    let full = run_continual(&cfg).unwrap();

    // Interrupt after the first task, leaving only its checkpoint behind.
    let seq = load_tasks(&cfg).unwrap();
    let mut state = RunState::new(&cfg).unwrap();
    let path = cfg.output_dir.join(CHECKPOINT_FILE);
    let crashed = run_tasks(&cfg, &seq, &mut state, |s| {
        checkpoint::save(&path, &cfg, s)?;
        Err(HlopError::InvalidArgument("simulated crash".into()))
    });
    assert!(crashed.is_err());
    assert_eq!(checkpoint::load(&path, &cfg).unwrap().next_task, 1);

    let resumed = run_checkpointed(&cfg, true).unwrap();
    assert_eq!(resumed.accuracy, full.accuracy);
    assert_eq!(resumed.audit, full.audit);
    drop(dir);
}

#[test]
fn checkpoint_rejects_other_configs_and_corruption() {
    let (_dir, cfg) = setup("");
    let state = RunState::new(&cfg).unwrap();
    let bytes = checkpoint::encode(&cfg, &state);
    let other = ExperimentConfig { lr: 0.05, ..cfg.clone() };
    assert!(matches!(checkpoint::decode(&other, &bytes), Err(HlopError::Checkpoint(_))));
    let mut bad = bytes.clone();
    bad[0] = b'X';
    assert!(checkpoint::decode(&cfg, &bad).is_err());
    assert!(checkpoint::decode(&cfg, &bytes[..bytes.len() - 3]).is_err());
    let mut longer = bytes.clone();
    longer.push(0);
    assert!(checkpoint::decode(&cfg, &longer).is_err());
    let (stored, _) = checkpoint::decode_stored(&bytes).unwrap();
    assert_eq!(stored, cfg);
}

#[test]
fn outputs_and_config_echo_close_the_loop() {
    let (_dir, cfg) = setup("checkpoint = false");
    let out = run_continual(&cfg).unwrap();
    write_run_outputs(&cfg, &out.accuracy).unwrap();
    let dir = &cfg.output_dir;
    let metrics = std::fs::read_to_string(dir.join(METRICS_FILE)).unwrap();
    assert_eq!(metrics.lines().next(), Some("after_task,task,accuracy"));
    assert_eq!(metrics.lines().count(), 1 + 1 + 2 + 3);
    let summary = std::fs::read_to_string(dir.join(SUMMARY_FILE)).unwrap();
    assert_eq!(summary.lines().next(), Some("k,avg_acc,avg_bwt"));
    assert!(summary.lines().nth(1).unwrap().ends_with(','));
    assert!(summary.lines().nth(3).unwrap().starts_with("3,"));

    let echo = std::fs::read_to_string(dir.join(CONFIG_ECHO_FILE)).unwrap();
    let again = ExperimentConfig::parse(&echo).unwrap();
    assert_eq!(again, cfg);
    assert_eq!(run_continual(&again).unwrap().accuracy, out.accuracy);
}

#[test]
fn audit_is_reported_for_hlop_runs() {
    let (_dir, cfg) = setup("");
    let out = run_continual(&cfg).unwrap();
    let audit = out.audit.expect("HLOP runs are audited");
    assert_eq!(audit.max_ratio.len(), 3);
    assert!(audit.max_ratio.iter().all(|r| r.is_finite() && *r >= 0.0));
    let (_dir2, off) = setup("hlop = \"off\"");
    assert!(run_continual(&off).unwrap().audit.is_none());
}

#[test]
fn other_trainers_and_the_conv_path_run() {
    for extra in [
        "trainer = \"rate\"\nT = 20\nlambda = 0.5\nv_th = 0.3",
        "trainer = \"bptt\"\nerrorprop = \"fa\"",
        "errorprop = \"ss\"\nhlop = \"spiking\"",
        "tasks = \"split_mnist\"\nn_tasks = 5\nhead_mode = \"multi\"\nnetwork = \"conv\"\nconv_channels = [4, 8]",
    ] {
        let (_dir, cfg) = setup(extra);
        let out = run_continual(&cfg).unwrap_or_else(|e| panic!("{extra}: {e}"));
        assert_eq!(out.accuracy.tasks(), cfg.n_tasks, "{extra}");
        assert!(out.accuracy.rows().iter().flatten().all(|a| (0.0..=100.0).contains(a)));
    }
}
