//! CSV emission. Files appear complete or not at all.

use std::io::Write;
use std::path::Path;

use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::metrics::{compute_acc_bwt, AccuracyMatrix};
use crate::mnist::resolve_data_dir;

pub const METRICS_FILE: &str = "metrics.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const CONFIG_ECHO_FILE: &str = "resolved_config.toml";
pub const CHECKPOINT_FILE: &str = "checkpoint.bin";

/// Writes `bytes` to a temporary file next to `path`, then renames it over
/// `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// `after_task,task,accuracy`, tasks numbered from 1.
pub fn metrics_csv(m: &AccuracyMatrix) -> String {
    let mut s = String::from("after_task,task,accuracy\n");
    for (k, row) in m.rows().iter().enumerate() {
        for (i, a) in row.iter().enumerate() {
            s.push_str(&format!("{},{},{a:.4}\n", k + 1, i + 1));
        }
    }
    s
}

/// `k,avg_acc,avg_bwt`; BWT is empty for `k = 1`.
pub fn summary_csv(m: &AccuracyMatrix) -> Result<String> {
    let mut s = String::from("k,avg_acc,avg_bwt\n");
    for k in 1..=m.tasks() {
        let (acc, bwt) = compute_acc_bwt(m, k)?;
        let bwt = bwt.map_or(String::new(), |b| format!("{b:.4}"));
        s.push_str(&format!("{k},{acc:.4},{bwt}\n"));
    }
    Ok(s)
}

/// Writes the metrics and summary CSVs and the resolved config into
/// `cfg.output_dir`.
pub fn write_run_outputs(cfg: &ExperimentConfig, accuracy: &AccuracyMatrix) -> Result<()> {
    let dir = &cfg.output_dir;
    // The echo records the data directory actually used.
    let resolved = ExperimentConfig { data_dir: Some(resolve_data_dir(cfg.data_dir.as_deref())), ..cfg.clone() };
    write_atomic(&dir.join(CONFIG_ECHO_FILE), resolved.to_toml().as_bytes())?;
    write_atomic(&dir.join(METRICS_FILE), metrics_csv(accuracy).as_bytes())?;
    write_atomic(&dir.join(SUMMARY_FILE), summary_csv(accuracy)?.as_bytes())
}
