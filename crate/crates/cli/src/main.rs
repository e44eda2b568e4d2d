use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use hlop_core::checkpoint;
use hlop_core::experiment::run_checkpointed;
use hlop_core::metrics::subspace_alignment_error;
use hlop_core::numeric::topk_principal;
use hlop_core::output::write_run_outputs;
use hlop_core::verify::{run_suite, Suite};
use hlop_core::{ExperimentConfig, HlopError, Matrix};

#[derive(Parser)]
#[command(name = "hlop", version, about = "Continual learning for spiking networks with Hebbian orthogonal projection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a continual-learning experiment described by a TOML config.
    Run {
        config: PathBuf,
        /// Continue from the checkpoint in the output directory, if present.
        #[arg(long)]
        resume: bool,
    },
    /// Run one invariant suite: algebra, hebbian-oracle, gradients,
    /// quantization or metrics.
    Verify { suite: String },
    /// Top-k principal directions of a CSV sample matrix (one sample per row).
    Oracle {
        csv: PathBuf,
        #[arg(long)]
        k: usize,
        /// Report alignment against the consolidated subspace of this checkpoint.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Layer whose subspace is compared.
        #[arg(long, default_value_t = 0)]
        layer: usize,
        /// Write the principal rows here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Failure carrying its process exit code.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        let error = e.into();
        let code = match error.downcast_ref::<HlopError>() {
            Some(HlopError::Config { .. } | HlopError::InvalidArgument(_)) => 2,
            Some(HlopError::MissingData(_)) => 3,
            _ => 1,
        };
        Failure { code, error }
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure { code: 2, error: anyhow::anyhow!(msg.into()) }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, resume } => cmd_run(&config, resume),
        Command::Verify { suite } => cmd_verify(&suite),
        Command::Oracle { csv, k, checkpoint, layer, out } => cmd_oracle(&csv, k, checkpoint.as_deref(), layer, out.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

fn cmd_run(path: &Path, resume: bool) -> Result<(), Failure> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    let cfg = ExperimentConfig::parse(&text)?;
    let output = run_checkpointed(&cfg, resume)?;
    for line in &output.logs {
        println!("{line}");
    }
    write_run_outputs(&cfg, &output.accuracy)?;
    println!("wrote {}", cfg.output_dir.display());
    Ok(())
}

fn cmd_verify(name: &str) -> Result<(), Failure> {
    let suite: Suite = name.parse().map_err(usage)?;
    let checks = run_suite(suite)?;
    for c in &checks {
        println!("{c}");
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    if failed > 0 {
        return Err(Failure { code: 1, error: anyhow::anyhow!("{failed} of {} checks failed in suite {suite}", checks.len()) });
    }
    Ok(())
}

/// Parses a numeric CSV; a first line that is not numeric is taken as a header.
fn read_csv_matrix(path: &Path) -> anyhow::Result<Matrix> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_path(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let parsed: Result<Vec<f64>, _> = record.iter().map(str::parse::<f64>).collect();
        match parsed {
            Ok(r) => rows.push(r),
            Err(_) if i == 0 => continue,
            Err(e) => anyhow::bail!("{}: line {}: {e}", path.display(), i + 1),
        }
    }
    anyhow::ensure!(!rows.is_empty(), "{}: no numeric rows", path.display());
    let cols = rows[0].len();
    Ok(Matrix::from_vec(rows.len(), cols, rows.concat())?)
}

fn cmd_oracle(csv: &Path, k: usize, ckpt: Option<&Path>, layer: usize, out: Option<&Path>) -> Result<(), Failure> {
    let data = read_csv_matrix(csv)?;
    let n = data.cols();
    if k == 0 || k > n {
        return Err(usage(format!("--k must be between 1 and the sample dimension {n}, got {k}")));
    }
    let m = topk_principal(&data, k)?;
    let mut text = String::new();
    for r in 0..m.rows() {
        let row: Vec<String> = m.row(r).iter().map(|v| format!("{v:.10}")).collect();
        text.push_str(&row.join(","));
        text.push('\n');
    }
    match out {
        Some(p) => hlop_core::output::write_atomic(p, text.as_bytes())?,
        None => print!("{text}"),
    }
    if let Some(path) = ckpt {
        let (_, state) = checkpoint::load_stored(path)?;
        let sub = state
            .subspaces
            .get(layer)
            .and_then(Option::as_ref)
            .ok_or_else(|| usage(format!("checkpoint has no subspace at layer {layer}")))?;
        let h = sub.consolidated();
        if h.cols() != n {
            return Err(usage(format!("layer {layer} subspace has dimension {}, samples have {n}", h.cols())));
        }
        let err = subspace_alignment_error(h, &m)?;
        eprintln!("alignment error vs layer {layer} subspace ({} rows): {err:.6e}", h.rows());
    }
    Ok(())
}
