//! The continual-learning loop.
//!
//! For each task: expand the lateral circuits, train batch by batch (weight
//! update on projected traces, then Hebbian learning on raw presynaptic
//! activity), evaluate every task seen so far, consolidate. All state that
//! later tasks depend on lives in [`RunState`], which the checkpoint module
//! serializes.

use std::time::Instant;

use crate::checkpoint;
use crate::config::{ExperimentConfig, HlopMode, TaskFamily};
use crate::error::{HlopError, Result};
use crate::hlop::LateralSubspace;
use crate::metrics::{compute_acc_bwt, AccuracyMatrix, PINV_TOL};
use crate::mnist::{load_mnist_dir, resolve_data_dir};
use crate::network::Network;
use crate::output::CHECKPOINT_FILE;
use crate::numeric::{matmul, matmul_nt, rowspace_projector, streams, Matrix, Rng};
use crate::tasks::{make_pmnist_tasks, make_split_mnist_tasks, Task, TaskSequence};
use crate::trainers::bptt::{bptt_batch, bptt_forward};
use crate::trainers::ottt::ottt_batch;
use crate::trainers::rate::{rate_batch, rate_forward, RateForward};
use crate::trainers::{infer, predict, sgd_update, BatchResult, ErrorPropConfig, Target, TrainerKind};

/// Snapshot taken when the first task ends, for the interference audit.
#[derive(Clone, Debug, PartialEq)]
pub struct AuditBaseline {
    /// Weights of every hosted layer after task 1.
    pub weights: Vec<Matrix>,
    /// Consolidated `H` of every hosted layer after task 1.
    pub subspaces: Vec<Matrix>,
    /// Stored task-1 presynaptic rows (time-averaged activity) per hosted layer.
    pub inputs: Vec<Matrix>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunState {
    pub net: Network,
    pub errorprop: ErrorPropConfig,
    /// One entry per layer; `None` where no lateral circuit is hosted.
    pub subspaces: Vec<Option<LateralSubspace>>,
    /// Batch order and subspace initialization.
    pub rng: Rng,
    pub accuracy: AccuracyMatrix,
    /// Index of the next task to train.
    pub next_task: usize,
    pub audit: Option<AuditBaseline>,
}

/// Interference of later learning with task-1 inputs, per hosted layer:
/// `‖(W_final − W_task1)·P_H x‖ / ‖x‖` over the stored samples.
#[derive(Clone, Debug, PartialEq)]
pub struct AuditReport {
    pub max_ratio: Vec<f64>,
    pub mean_ratio: Vec<f64>,
}

/// Bound on the audit ratio.
pub const AUDIT_BOUND: f64 = 5e-2;

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.max_ratio.iter().all(|&r| r < AUDIT_BOUND)
    }
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub accuracy: AccuracyMatrix,
    pub logs: Vec<String>,
    pub audit: Option<AuditReport>,
}

impl RunState {
    pub fn new(cfg: &ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let mut wrng = Rng::with_stream(cfg.seed, streams::WEIGHTS);
        let net = match cfg.network {
            crate::config::Architecture::Mlp => Network::mlp(784, &cfg.hidden_sizes, 10, &mut wrng)?,
            crate::config::Architecture::Conv => Network::small_conv(cfg.conv_channels, 10, &mut wrng)?,
        };
        let mut frng = Rng::with_stream(cfg.seed, streams::FEEDBACK);
        let mut errorprop = ErrorPropConfig::for_mode(cfg.errorprop, &net, &mut frng)?;
        errorprop.ss_scale = cfg.ss_scale;
        let hosted = if cfg.hlop == HlopMode::Off { 0 } else { cfg.hosted_layers() };
        let subspaces = net
            .layers
            .iter()
            .enumerate()
            .map(|(l, layer)| (l < hosted).then(|| LateralSubspace::new(layer.fan_in(), cfg.hebbian, cfg.lateral_mode())))
            .collect();
        Ok(Self {
            net,
            errorprop,
            subspaces,
            rng: Rng::with_stream(cfg.seed, streams::TRAINING),
            accuracy: AccuracyMatrix::new(),
            next_task: 0,
            audit: None,
        })
    }
}

/// Builds the configured task sequence from the MNIST files.
pub fn load_tasks(cfg: &ExperimentConfig) -> Result<TaskSequence> {
    let dir = resolve_data_dir(cfg.data_dir.as_deref());
    let (mut train, mut test) = load_mnist_dir(&dir)?;
    if cfg.normalize {
        let (mean, std) = train.pixel_stats();
        train = train.standardized(mean, std)?;
        test = test.standardized(mean, std)?;
    }
    match cfg.tasks {
        TaskFamily::Pmnist => make_pmnist_tasks(&train, &test, cfg.n_tasks, cfg.seed, cfg.train_per_task, cfg.test_per_task),
        TaskFamily::SplitMnist => {
            make_split_mnist_tasks(&train, &test, cfg.n_tasks, cfg.seed, cfg.train_per_task, cfg.test_per_task, cfg.head_mode)
        }
    }
}

/// Loads the data, trains on every task and returns the accuracy matrix.
pub fn run_continual(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let seq = load_tasks(cfg)?;
    let mut state = RunState::new(cfg)?;
    run_tasks(cfg, &seq, &mut state, |_| Ok(()))
}

/// [`run_continual`] with a checkpoint in `cfg.output_dir` after every task
/// when `cfg.checkpoint` is set. With `resume`, an existing checkpoint is
/// loaded first and only the remaining tasks run.
pub fn run_checkpointed(cfg: &ExperimentConfig, resume: bool) -> Result<RunOutput> {
    let seq = load_tasks(cfg)?;
    let path = cfg.output_dir.join(CHECKPOINT_FILE);
    let mut state = if resume && path.exists() { checkpoint::load(&path, cfg)? } else { RunState::new(cfg)? };
    run_tasks(cfg, &seq, &mut state, |s| if cfg.checkpoint { checkpoint::save(&path, cfg, s) } else { Ok(()) })
}

/// Trains the remaining tasks of `seq` starting at `state.next_task`;
/// `after_task` sees the state at each task boundary.
pub fn run_tasks(
    cfg: &ExperimentConfig,
    seq: &TaskSequence,
    state: &mut RunState,
    mut after_task: impl FnMut(&RunState) -> Result<()>,
) -> Result<RunOutput> {
    let mut logs = Vec::new();
    while state.next_task < seq.tasks.len() {
        let t = state.next_task;
        let started = Instant::now();
        let loss = train_task(cfg, seq, t, state)?;
        let row = (0..=t).map(|i| evaluate(cfg, &state.net, &seq.tasks[i], seq)).collect::<Result<Vec<_>>>()?;
        for sub in state.subspaces.iter_mut().flatten() {
            sub.consolidate()?;
        }
        if t == 0 && cfg.hlop != HlopMode::Off {
            state.audit = Some(audit_baseline(cfg, state, &seq.tasks[0])?);
        }
        state.accuracy.push_row(row.clone())?;
        state.next_task += 1;
        let (acc, bwt) = compute_acc_bwt(&state.accuracy, t + 1)?;
        let dims: Vec<usize> = state.subspaces.iter().flatten().map(|s| s.consolidated().rows()).collect();
        logs.push(format!(
            "task {} ({}): mean loss {loss:.4}, accuracies {:?}, ACC {acc:.2}, BWT {}, subspace {:?}, {:.1}s",
            t + 1,
            seq.tasks[t].name,
            row.iter().map(|a| format!("{a:.2}")).collect::<Vec<_>>(),
            bwt.map_or("-".to_string(), |b| format!("{b:.2}")),
            dims,
            started.elapsed().as_secs_f64()
        ));
        after_task(state)?;
    }
    let audit = match &state.audit {
        Some(base) if seq.tasks.len() > 1 => Some(audit(state, base)?),
        _ => None,
    };
    if let Some(a) = &audit {
        logs.push(format!(
            "audit: max ‖ΔW·P_H x‖/‖x‖ per layer {:?} (bound {AUDIT_BOUND})",
            a.max_ratio.iter().map(|r| format!("{r:.3e}")).collect::<Vec<_>>()
        ));
    }
    Ok(RunOutput { accuracy: state.accuracy.clone(), logs, audit })
}

fn train_batch(cfg: &ExperimentConfig, net: &Network, x: &Matrix, target: &Target, ep: &ErrorPropConfig) -> Result<BatchResult> {
    match cfg.trainer {
        TrainerKind::Rate => rate_batch(net, x, target, &cfg.neuron, ep),
        TrainerKind::Bptt => bptt_batch(net, x, target, &cfg.neuron, ep),
        TrainerKind::Ottt => ottt_batch(net, x, target, &cfg.neuron, ep),
    }
}

/// One task of training; returns the mean per-sample loss.
fn train_task(cfg: &ExperimentConfig, seq: &TaskSequence, t: usize, state: &mut RunState) -> Result<f64> {
    let task = &seq.tasks[t];
    if cfg.hlop != HlopMode::Off {
        for (l, sub) in state.subspaces.iter_mut().enumerate() {
            if let Some(sub) = sub {
                sub.expand(cfg.subspace.added(l, t), &mut state.rng)?;
            }
        }
    }
    let classes = task.classes(seq.head_mode);
    let (mut loss_sum, mut batches) = (0.0, 0usize);
    for _ in 0..cfg.epochs {
        let order = state.rng.permutation(task.train.len());
        for chunk in order.chunks(cfg.batch) {
            let x = task.train.images.select_rows(chunk);
            let labels: Vec<usize> = chunk.iter().map(|&i| task.train.labels[i]).collect();
            let target = Target { labels: &labels, classes };
            let result = train_batch(cfg, &state.net, &x, &target, &state.errorprop)?;
            for (l, grad) in result.packet.layers.iter().enumerate() {
                let projection = state.subspaces[l].as_ref().filter(|s| s.consolidated().rows() > 0);
                sgd_update(&mut state.net.layers[l], grad, chunk.len(), cfg.lr, projection, cfg.update_bias)?;
            }
            for (sub, rows) in state.subspaces.iter_mut().zip(&result.hebbian) {
                if let Some(sub) = sub {
                    sub.hebbian_update(rows)?;
                }
            }
            loss_sum += result.loss;
            batches += 1;
        }
    }
    Ok(loss_sum / batches.max(1) as f64)
}

/// Rows evaluated per forward pass during testing.
const EVAL_CHUNK: usize = 500;

/// Test accuracy (%) on one task; inference only.
pub fn evaluate(cfg: &ExperimentConfig, net: &Network, task: &Task, seq: &TaskSequence) -> Result<f64> {
    let classes = task.classes(seq.head_mode);
    let n = task.test.len();
    if n == 0 {
        return Err(HlopError::InvalidArgument(format!("task {} has no test samples", task.name)));
    }
    let mut correct = 0usize;
    for start in (0..n).step_by(EVAL_CHUNK) {
        let end = (start + EVAL_CHUNK).min(n);
        let x = task.test.images.slice_rows(start, end);
        let (scores, tie) = infer(cfg.trainer, net, &x, &cfg.neuron)?;
        let pred = predict(&scores, &tie, classes);
        correct += pred.iter().zip(&task.test.labels[start..end]).filter(|(p, l)| p == l).count();
    }
    Ok(100.0 * correct as f64 / n as f64)
}

/// Time-averaged presynaptic rows of every layer for the inputs `x`.
pub fn mean_presynaptic_rows(cfg: &ExperimentConfig, net: &Network, x: &Matrix) -> Result<Vec<Matrix>> {
    match cfg.trainer {
        TrainerKind::Rate => {
            let tape = rate_forward(net, x, &cfg.neuron, RateForward::Spiking)?;
            net.layers.iter().zip(&tape.inputs).map(|(layer, a)| layer.presynaptic_rows(a)).collect()
        }
        TrainerKind::Bptt | TrainerKind::Ottt => {
            let tape = bptt_forward(net, x, &cfg.neuron)?;
            tape.presynaptic
                .iter()
                .map(|steps| {
                    let mut mean = steps[0].clone();
                    for s in &steps[1..] {
                        mean.add_scaled(s, 1.0)?;
                    }
                    mean.scale(1.0 / steps.len() as f64);
                    Ok(mean)
                })
                .collect()
        }
    }
}

fn audit_baseline(cfg: &ExperimentConfig, state: &RunState, task: &Task) -> Result<AuditBaseline> {
    let mut rng = Rng::with_stream(cfg.seed, streams::AUDIT);
    let mut idx = rng.permutation(task.train.len());
    idx.truncate(cfg.audit_samples.min(task.train.len()));
    let rows = mean_presynaptic_rows(cfg, &state.net, &task.train.images.select_rows(&idx))?;
    let hosted: Vec<usize> = (0..state.net.len()).filter(|&l| state.subspaces[l].is_some()).collect();
    Ok(AuditBaseline {
        weights: hosted.iter().map(|&l| state.net.layers[l].weights.clone()).collect(),
        subspaces: hosted.iter().map(|&l| state.subspaces[l].as_ref().expect("hosted").consolidated().clone()).collect(),
        inputs: hosted.iter().map(|&l| rows[l].clone()).collect(),
    })
}

fn audit(state: &RunState, base: &AuditBaseline) -> Result<AuditReport> {
    let hosted: Vec<usize> = (0..state.net.len()).filter(|&l| state.subspaces[l].is_some()).collect();
    let mut report = AuditReport { max_ratio: Vec::new(), mean_ratio: Vec::new() };
    for (i, &l) in hosted.iter().enumerate() {
        let delta = state.net.layers[l].weights.sub(&base.weights[i])?;
        let p = rowspace_projector(&base.subspaces[i], PINV_TOL)?;
        let x = &base.inputs[i];
        let moved = matmul_nt(&matmul(x, &p)?, &delta)?;
        let (mut max, mut sum, mut count) = (0.0f64, 0.0, 0usize);
        for r in 0..x.rows() {
            let nx = crate::numeric::norm(x.row(r));
            if nx == 0.0 {
                continue;
            }
            let ratio = crate::numeric::norm(moved.row(r)) / nx;
            max = max.max(ratio);
            sum += ratio;
            count += 1;
        }
        report.max_ratio.push(max);
        report.mean_ratio.push(if count == 0 { 0.0 } else { sum / count as f64 });
    }
    Ok(report)
}
