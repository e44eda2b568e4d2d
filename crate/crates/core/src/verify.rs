//! Named property suites, runnable outside the test harness (`hlop verify`).
//!
//! Each suite returns one [`Check`] per invariant with the measured value, so
//! a failure names what broke and by how much.

use std::fmt;
use std::str::FromStr;

use crate::error::{HlopError, Result};
use crate::hlop::{oja_subspace_delta, quantize, HebbianConfig, LateralMode, LateralSubspace, QuantConfig};
use crate::layer::{Layer, LayerKind};
use crate::metrics::{compute_acc_bwt, subspace_alignment_error, AccuracyMatrix};
use crate::network::Network;
use crate::neuron::{Firing, NeuronConfig};
use crate::numeric::{matmul, matmul_nt, orthonormalize_rows, topk_principal, Matrix, Rng};
use crate::trainers::bptt::{bptt_batch, bptt_loss};
use crate::trainers::ottt::ottt_batch;
use crate::trainers::rate::{rate_backward, rate_forward, rate_loss, RateForward};
use crate::trainers::{sgd_update, ErrorPropConfig, GradPacket, LayerGrad, Target};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    Algebra,
    HebbianOracle,
    Gradients,
    Quantization,
    Metrics,
}

impl Suite {
    pub const ALL: [Suite; 5] = [Suite::Algebra, Suite::HebbianOracle, Suite::Gradients, Suite::Quantization, Suite::Metrics];
}

impl FromStr for Suite {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Suite::ALL
            .into_iter()
            .find(|suite| suite.to_string() == s)
            .ok_or_else(|| format!("unknown suite `{s}` (expected algebra, hebbian-oracle, gradients, quantization or metrics)"))
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Suite::Algebra => "algebra",
            Suite::HebbianOracle => "hebbian-oracle",
            Suite::Gradients => "gradients",
            Suite::Quantization => "quantization",
            Suite::Metrics => "metrics",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    /// Passes when `value < bound`.
    fn below(name: &'static str, value: f64, bound: f64) -> Self {
        Self { name, passed: value < bound, detail: format!("{value:.3e} (bound {bound:.0e})") }
    }

    fn holds(name: &'static str, passed: bool, detail: String) -> Self {
        Self { name, passed, detail }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}: {}", if self.passed { "PASS" } else { "FAIL" }, self.name, self.detail)
    }
}

pub fn run_suite(suite: Suite) -> Result<Vec<Check>> {
    match suite {
        Suite::Algebra => algebra(),
        Suite::HebbianOracle => hebbian_oracle(),
        Suite::Gradients => gradients(),
        Suite::Quantization => quantization(),
        Suite::Metrics => metrics(),
    }
}

fn random_matrix(rows: usize, cols: usize, rng: &mut Rng) -> Matrix {
    let data = (0..rows * cols).map(|_| rng.uniform_range(-1.0, 1.0)).collect();
    Matrix::from_vec(rows, cols, data).expect("finite by construction")
}

fn relative_error(a: &Matrix, b: &Matrix) -> f64 {
    let scale = a.frobenius_norm().max(b.frobenius_norm()).max(f64::MIN_POSITIVE);
    a.sub(b).map_or(f64::INFINITY, |d| d.frobenius_norm() / scale)
}

fn algebra() -> Result<Vec<Check>> {
    let mut rng = Rng::new(11);
    let mut checks = Vec::new();

    // Two-stage update versus the Oja subspace form, η folded in.
    let eta = 0.01;
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let n = 2 + rng.below(7);
        let k = 1 + rng.below(n);
        let h = random_matrix(k, n, &mut rng);
        let x = random_matrix(1, n, &mut rng);
        let mut sub = LateralSubspace::new(n, HebbianConfig::default(), LateralMode::Linear);
        sub.set_fresh(h.clone())?;
        let a = sub.hebbian_delta(&x)?.scaled(eta);
        let b = oja_subspace_delta(&h, &x)?.scaled(eta);
        worst = worst.max(a.sub(&b)?.max_abs());
    }
    checks.push(Check::below("two-stage update equals Oja subspace form", worst, 1e-12));

    // Projection against orthonormal H.
    let (mut idem, mut orth): (f64, f64) = (0.0, 0.0);
    for _ in 0..200 {
        let n = 3 + rng.below(10);
        let k = 1 + rng.below(n - 1);
        let h = orthonormalize_rows(&random_matrix(k, n, &mut rng));
        let mut sub = LateralSubspace::new(n, HebbianConfig::default(), LateralMode::Linear);
        sub.set_consolidated(h.clone())?;
        let x = random_matrix(1, n, &mut rng);
        let p = sub.project_trace(x.row(0))?;
        let pp = sub.project_trace(&p)?;
        idem = idem.max(p.iter().zip(&pp).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
        orth = orth.max(matmul_nt(&Matrix::row_vector(&p), &h)?.max_abs());
    }
    checks.push(Check::below("projection is idempotent", idem, 1e-10));
    checks.push(Check::below("projected trace is orthogonal to H", orth, 1e-10));

    // Projected updates leave responses to protected inputs unchanged.
    let n = 12;
    let h = orthonormalize_rows(&random_matrix(4, n, &mut rng));
    let mut sub = LateralSubspace::new(n, HebbianConfig::default(), LateralMode::Linear);
    sub.set_consolidated(h.clone())?;
    let mut layer = Layer::from_parts(random_matrix(5, n, &mut rng), vec![0.0; 5], LayerKind::Dense { inputs: n, outputs: 5 })?;
    let before = layer.weights.clone();
    let grad = LayerGrad::new(random_matrix(8, 5, &mut rng), random_matrix(8, n, &mut rng))?;
    sgd_update(&mut layer, &grad, 8, 0.5, Some(&sub), false)?;
    let old = matmul(&random_matrix(50, 4, &mut rng), &h)?;
    let drift = matmul_nt(&old, &layer.weights)?.sub(&matmul_nt(&old, &before)?)?.max_abs();
    checks.push(Check::below("projected update preserves W·x on protected inputs", drift, 1e-10));

    // Hebbian gradient against the explicit objective.
    checks.push(Check::below("Hebbian update is the descent direction of the residual objective", objective_gradient_error(&mut rng)?, 1e-4));

    let (a, b, c) = (random_matrix(4, 6, &mut rng), random_matrix(6, 3, &mut rng), random_matrix(3, 5, &mut rng));
    let left = matmul(&matmul(&a, &b)?, &c)?;
    let right = matmul(&a, &matmul(&b, &c)?)?;
    checks.push(Check::below("matmul is associative", relative_error(&left, &right), 1e-10));
    Ok(checks)
}

/// `‖x − HᵀHx − H′ᵀH′x‖²` summed over rows.
fn residual_objective(h: &Matrix, h_new: &Matrix, x: &Matrix) -> Result<f64> {
    let mut r = x.clone();
    r.add_scaled(&matmul(&matmul_nt(x, h)?, h)?, -1.0)?;
    r.add_scaled(&matmul(&matmul_nt(x, h_new)?, h_new)?, -1.0)?;
    Ok(r.as_slice().iter().map(|v| v * v).sum())
}

/// With H′ orthonormal and orthogonal to H, the batch-mean Hebbian update is
/// exactly −½·∇ of the mean residual objective. Returns the relative error
/// against central differences.
fn objective_gradient_error(rng: &mut Rng) -> Result<f64> {
    let basis = orthonormalize_rows(&random_matrix(3, 3, rng));
    let h = basis.slice_rows(0, 1);
    let h_new = basis.slice_rows(1, 2);
    let x = random_matrix(6, 3, rng);
    let mut sub = LateralSubspace::new(3, HebbianConfig::default(), LateralMode::Linear);
    sub.set_consolidated(h.clone())?;
    sub.set_fresh(h_new.clone())?;
    let delta = sub.hebbian_delta(&x)?;
    let step = 1e-5;
    let mut fd = Matrix::zeros(1, 3);
    for c in 0..3 {
        let (mut p, mut m) = (h_new.clone(), h_new.clone());
        p[(0, c)] += step;
        m[(0, c)] -= step;
        let g = (residual_objective(&h, &p, &x)? - residual_objective(&h, &m, &x)?) / (2.0 * step);
        fd[(0, c)] = -0.5 * g / x.rows() as f64;
    }
    Ok(relative_error(&delta, &fd))
}

/// Draws `samples` zero-mean Gaussian vectors with the given covariance
/// spectrum (in a random basis), feeds them in batches to a `k`-neuron
/// lateral subspace for `passes` sweeps, and returns the alignment error
/// against the top-`k` principal directions of the same samples.
pub fn streaming_pca(spectrum: &[f64], k: usize, samples: usize, batch: usize, passes: usize, seed: u64) -> Result<f64> {
    let n = spectrum.len();
    let mut rng = Rng::new(seed);
    let basis = orthonormalize_rows(&random_matrix(n, n, &mut rng));
    let mut data = Matrix::zeros(samples, n);
    for r in 0..samples {
        let z: Vec<f64> = spectrum.iter().map(|l| l.sqrt() * rng.normal()).collect();
        let x = matmul(&Matrix::row_vector(&z), &basis)?;
        data.row_mut(r).copy_from_slice(x.row(0));
    }
    let mut sub = LateralSubspace::new(n, HebbianConfig::default(), LateralMode::Linear);
    sub.expand(k, &mut rng)?;
    for _ in 0..passes {
        for start in (0..samples).step_by(batch) {
            sub.hebbian_update(&data.slice_rows(start, (start + batch).min(samples)))?;
        }
    }
    subspace_alignment_error(sub.fresh(), &topk_principal(&data, k)?)
}

/// Spectrum `{10, 5, 2, 1, …, 1}` in 20 dimensions.
pub fn reference_spectrum() -> Vec<f64> {
    let mut s = vec![1.0; 20];
    s[..3].copy_from_slice(&[10.0, 5.0, 2.0]);
    s
}

/// Batch size of the streaming-PCA oracle runs.
pub const ORACLE_BATCH: usize = 1000;
/// Passes over the sample set in the streaming-PCA oracle runs.
pub const ORACLE_PASSES: usize = 10;

fn hebbian_oracle() -> Result<Vec<Check>> {
    let mut checks = vec![Check::below(
        "3-neuron subspace on the 20-dim spectrum matches top-3 PCA",
        streaming_pca(&reference_spectrum(), 3, 5000, ORACLE_BATCH, ORACLE_PASSES, 2022)?,
        0.1,
    )];

    // ±e₁ mixture with small e₂ jitter, single neuron, 2000 updates.
    let mut rng = Rng::new(5);
    let mut sub = LateralSubspace::new(2, HebbianConfig { repeats: 1, ..HebbianConfig::default() }, LateralMode::Linear);
    sub.expand(1, &mut rng)?;
    let mut seen = Matrix::zeros(0, 2);
    for _ in 0..2000 {
        let sign = if rng.uniform() < 0.5 { -1.0 } else { 1.0 };
        let x = Matrix::from_rows(&[[sign, 0.1 * rng.normal()]]);
        sub.hebbian_update(&x)?;
        seen = seen.vstack(&x)?;
    }
    checks.push(Check::below(
        "single neuron on a ±e1 stream converges to e1",
        subspace_alignment_error(sub.fresh(), &topk_principal(&seen, 1)?)?,
        0.05,
    ));
    Ok(checks)
}

/// Dense two-layer net with the given weights and zero-free biases.
pub fn toy_net(w1: Matrix, b1: Vec<f64>, w2: Matrix, b2: Vec<f64>) -> Result<Network> {
    let (h, i) = w1.shape();
    let (o, _) = w2.shape();
    Network::new(vec![
        Layer::from_parts(w1, b1, LayerKind::Dense { inputs: i, outputs: h })?,
        Layer::from_parts(w2, b2, LayerKind::Dense { inputs: h, outputs: o })?,
    ])
}

/// Relative error between the packet gradient and central differences of
/// `loss` (summed over the batch) over every weight and bias.
fn finite_difference_error(
    net: &Network,
    packet: &GradPacket,
    step: f64,
    loss: impl Fn(&Network) -> Result<f64>,
) -> Result<f64> {
    let batch = packet.batch as f64;
    let (mut num, mut den) = (0.0, 0.0);
    for l in 0..net.len() {
        let analytic_w = packet.weight_grad(l)?.scaled(batch);
        let analytic_b = packet.bias_grad(l);
        let (rows, cols) = net.layers[l].weights.shape();
        for idx in 0..rows * cols + rows {
            let mut plus = net.clone();
            let mut minus = net.clone();
            let analytic = if idx < rows * cols {
                plus.layers[l].weights.as_mut_slice()[idx] += step;
                minus.layers[l].weights.as_mut_slice()[idx] -= step;
                analytic_w.as_slice()[idx]
            } else {
                plus.layers[l].bias[idx - rows * cols] += step;
                minus.layers[l].bias[idx - rows * cols] -= step;
                analytic_b[idx - rows * cols] * batch
            };
            let fd = (loss(&plus)? - loss(&minus)?) / (2.0 * step);
            num += (fd - analytic).powi(2);
            den += fd.powi(2).max(analytic.powi(2));
        }
    }
    Ok((num / den.max(f64::MIN_POSITIVE)).sqrt())
}

/// BPTT with a smooth (sigmoid) forward on a 3-4-2 net.
pub fn bptt_gradient_error(seed: u64) -> Result<f64> {
    let mut rng = Rng::new(seed);
    let net = toy_net(
        random_matrix(4, 3, &mut rng).scaled(0.8),
        (0..4).map(|_| rng.uniform_range(0.0, 0.5)).collect(),
        random_matrix(2, 4, &mut rng),
        vec![0.2, 0.4],
    )?;
    let x = Matrix::from_rows(&[[1.2, 0.3, 0.8], [0.1, 1.5, 0.6], [0.9, 0.9, 0.0]]);
    let labels = [0, 1, 1];
    let target = Target::new(&labels);
    let cfg = NeuronConfig { time_steps: 4, firing: Firing::Sigmoid, ..NeuronConfig::default() };
    let result = bptt_batch(&net, &x, &target, &cfg, &ErrorPropConfig::bp())?;
    finite_difference_error(&net, &result.packet, 1e-5, |n| bptt_loss(n, &x, &target, &cfg))
}

/// Rate trainer on a 2-2-2 net whose currents all sit inside the clamp.
pub fn rate_gradient_error() -> Result<f64> {
    let net = toy_net(
        Matrix::from_rows(&[[0.8, 0.5], [0.3, 0.9]]),
        vec![0.1, -0.2],
        Matrix::from_rows(&[[0.7, -0.4], [0.2, 0.6]]),
        vec![0.5, 0.3],
    )?;
    let x = Matrix::from_rows(&[[1.0, 2.0], [2.5, 0.5]]);
    let labels = [1, 0];
    let target = Target::new(&labels);
    let cfg = NeuronConfig::rate_default();
    let tape = rate_forward(&net, &x, &cfg, RateForward::Analytic)?;
    let (packet, _) = rate_backward(&net, &tape, &target, &cfg, &ErrorPropConfig::bp())?;
    finite_difference_error(&net, &packet, 1e-5, |n| rate_loss(n, &x, &target, &cfg))
}

/// Largest entry of `|ΔW_OTTT − ΔW_BPTT|` at `T = 1`.
pub fn ottt_bptt_single_step_gap(seed: u64) -> Result<f64> {
    let mut rng = Rng::new(seed);
    let net = Network::mlp(5, &[6], 3, &mut rng)?;
    let x = Matrix::from_vec(4, 5, (0..20).map(|_| rng.uniform_range(0.0, 2.0)).collect())?;
    let labels = [0, 2, 1, 2];
    let target = Target::new(&labels);
    let cfg = NeuronConfig { time_steps: 1, ..NeuronConfig::default() };
    let ep = ErrorPropConfig::bp();
    let a = ottt_batch(&net, &x, &target, &cfg, &ep)?.packet;
    let b = bptt_batch(&net, &x, &target, &cfg, &ep)?.packet;
    let mut gap: f64 = 0.0;
    for l in 0..net.len() {
        gap = gap.max(a.weight_grad(l)?.sub(&b.weight_grad(l)?)?.max_abs());
    }
    Ok(gap)
}

fn gradients() -> Result<Vec<Check>> {
    Ok(vec![
        Check::below("BPTT-SG gradient matches finite differences (sigmoid forward)", bptt_gradient_error(3)?, 1e-4),
        Check::below("rate gradient matches finite differences (clamp chain)", rate_gradient_error()?, 1e-6),
        {
            let gap = ottt_bptt_single_step_gap(9)?;
            Check::holds("OTTT equals BPTT-SG at T=1", gap == 0.0, format!("max |difference| {gap:e}"))
        },
    ])
}

fn quantization() -> Result<Vec<Check>> {
    let q = QuantConfig::default();
    let mut checks = vec![
        Check::holds("clamp saturation", quantize(25.0, &q) == 20.0, format!("q(25) = {}", quantize(25.0, &q))),
        Check::below("3.27 quantizes to 3.5", (quantize(3.27, &q) - 3.5).abs(), 1e-12),
        {
            let t = QuantConfig { scale: 1.0, steps: 2 };
            let (a, b) = (quantize(0.25, &t), quantize(-0.25, &t));
            Check::holds("ties round away from zero", a == 0.5 && b == -0.5, format!("q(±0.25) = {a}, {b}"))
        },
    ];
    let mut rng = Rng::new(17);
    let fine = QuantConfig { scale: 20.0, steps: 1000 };
    let n = 16;
    // One neuron: elementwise error is at most half a grid step times |h_i| ≤ 1.
    let (single, _) = spiking_gap(&orthonormalize_rows(&random_matrix(1, n, &mut rng)), fine, &mut rng)?;
    checks.push(Check::holds(
        "spiking projection with T_l=1000 tracks linear (one neuron)",
        single <= 1e-2,
        format!("{single:.3e} (bound 1e-2)"),
    ));
    // Several neurons: errors add up through Hᵀ, bounded by the column ℓ1 norm.
    let (multi, bound) = spiking_gap(&orthonormalize_rows(&random_matrix(5, n, &mut rng)), fine, &mut rng)?;
    checks.push(Check::holds(
        "spiking projection error within the quantization grid bound (five neurons)",
        multi <= bound,
        format!("{multi:.3e} (bound {bound:.3e})"),
    ));
    Ok(checks)
}

/// Worst elementwise `|x̂_linear − x̂_spiking|` over unit-norm inputs, and
/// the bound `scale/(2T_l) · max_i Σ_j |H_ji|`.
fn spiking_gap(h: &Matrix, q: QuantConfig, rng: &mut Rng) -> Result<(f64, f64)> {
    let n = h.cols();
    let mut linear = LateralSubspace::new(n, HebbianConfig::default(), LateralMode::Linear);
    linear.set_consolidated(h.clone())?;
    let mut spiking = linear.clone();
    spiking.mode = LateralMode::Spiking(q);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let mut x = random_matrix(1, n, rng);
        let nx = x.frobenius_norm();
        x.scale(1.0 / nx);
        let a = linear.project_trace(x.row(0))?;
        let b = spiking.project_trace(x.row(0))?;
        worst = worst.max(a.iter().zip(&b).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max));
    }
    let col_l1 = (0..n).map(|c| (0..h.rows()).map(|r| h[(r, c)].abs()).sum::<f64>()).fold(0.0, f64::max);
    Ok((worst, q.scale / (2.0 * q.steps as f64) * col_l1))
}

fn metrics() -> Result<Vec<Check>> {
    let m = AccuracyMatrix::from_rows(vec![vec![90.0], vec![85.0, 92.0]])?;
    let (acc, bwt) = compute_acc_bwt(&m, 2)?;
    let flat = AccuracyMatrix::from_rows(vec![vec![70.0], vec![70.0, 60.0]])?;
    let single = compute_acc_bwt(&m, 1)?.1;
    let e = Matrix::from_rows(&[[1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0]]);
    let f = Matrix::from_rows(&[[0.0, 0.0, 1.0, 0.0], [0.0, 0.0, 0.0, 1.0]]);
    Ok(vec![
        Check::holds("hand matrix gives ACC 88.5, BWT -5", acc == 88.5 && bwt == Some(-5.0), format!("({acc}, {bwt:?})")),
        Check::holds("no forgetting gives BWT 0", compute_acc_bwt(&flat, 2)?.1 == Some(0.0), String::new()),
        Check::holds("single task has no BWT", single.is_none(), format!("{single:?}")),
        Check::below("alignment of a subspace with itself", subspace_alignment_error(&e, &e)?, 1e-12),
        Check::below("alignment of complementary subspaces is 1", (subspace_alignment_error(&f, &e)? - 1.0).abs(), 1e-12),
    ])
}

/// Runs a suite and reports failure as an error naming the broken checks.
pub fn require(suite: Suite) -> Result<Vec<Check>> {
    let checks = run_suite(suite)?;
    let failed: Vec<_> = checks.iter().filter(|c| !c.passed).map(|c| c.name).collect();
    if failed.is_empty() {
        Ok(checks)
    } else {
        Err(HlopError::InvalidArgument(format!("{suite}: failed {}", failed.join(", "))))
    }
}
