#![allow(dead_code)]

pub mod reference;

use std::path::Path;

use hlop_core::mnist::{to_idx_bytes, Dataset, TEST_IMAGES, TEST_LABELS, TRAIN_IMAGES, TRAIN_LABELS};
use hlop_core::{Matrix, Rng};

/// 28×28 "digits": class `c` lights a class-specific set of bars plus noise.
pub fn synthetic_digits(n: usize, seed: u64) -> Dataset {
    let mut rng = Rng::new(seed);
    let mut data = Vec::with_capacity(n * 784);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let c = i % 10;
        for r in 0..28 {
            for col in 0..28 {
                let on = (r / 3 == c && col > 4 && col < 24) || (col / 3 == (c * 7) % 9 && r > 6);
                let base = if on { 0.9 } else { 0.05 };
                data.push((base + 0.1 * rng.uniform()).min(1.0));
            }
        }
        labels.push(c);
    }
    Dataset { images: Matrix::from_vec(n, 784, data).unwrap(), labels, height: 28, width: 28 }
}

/// Writes train/test IDX files into `dir`.
pub fn write_idx_dir(dir: &Path, train: usize, test: usize) {
    for (data, images, labels) in [
        (synthetic_digits(train, 1), TRAIN_IMAGES, TRAIN_LABELS),
        (synthetic_digits(test, 2), TEST_IMAGES, TEST_LABELS),
    ] {
        let (img, lab) = to_idx_bytes(&data);
        std::fs::write(dir.join(images), img).unwrap();
        std::fs::write(dir.join(labels), lab).unwrap();
    }
}

/// A small PMNIST run over the synthetic files; `key = value` lines in
/// `extra` replace the defaults with the same key.
pub fn small_config(data_dir: &Path, out_dir: &Path, extra: &str) -> String {
    let mut lines: Vec<String> = vec![
        "hlop = \"linear\"".into(),
        "hidden_sizes = [32, 24]".into(),
        "n_tasks = 3".into(),
        "train_per_task = 120".into(),
        "test_per_task = 60".into(),
        "batch = 20".into(),
        "audit_samples = 30".into(),
        format!("data_dir = {:?}", data_dir.display().to_string()),
        format!("output_dir = {:?}", out_dir.display().to_string()),
    ];
    let key = |l: &str| l.split('=').next().unwrap_or("").trim().to_string();
    for extra_line in extra.lines().filter(|l| !l.trim().is_empty()) {
        lines.retain(|l| key(l) != key(extra_line));
        lines.push(extra_line.to_string());
    }
    lines.join("\n") + "\n"
}
