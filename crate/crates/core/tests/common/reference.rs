//! Plain-loop reference networks that share no code with the library, and
//! finite differences of their losses.

use hlop_core::layer::{Layer, LayerKind};
use hlop_core::neuron::NeuronConfig;
use hlop_core::{GradPacket, Matrix, Network, Rng};

#[derive(Clone)]
pub struct Dense {
    pub w: Vec<Vec<f64>>,
    pub b: Vec<f64>,
}

impl Dense {
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.w.iter().zip(&self.b).map(|(row, b)| row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + b).collect()
    }
}

pub fn cross_entropy(scores: &[f64], label: usize) -> f64 {
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = scores.iter().map(|s| (s - max).exp()).sum();
    z.ln() + max - scores[label]
}

/// LIF hidden layers with sigmoid firing, linear readout averaged over time.
pub fn lif_loss(layers: &[Dense], xs: &[Vec<f64>], labels: &[usize], cfg: &NeuronConfig) -> f64 {
    let (hidden, readout) = layers.split_at(layers.len() - 1);
    let mut total = 0.0;
    for (x, &label) in xs.iter().zip(labels) {
        let mut u: Vec<Vec<f64>> = hidden.iter().map(|l| vec![0.0; l.b.len()]).collect();
        let mut s = u.clone();
        let mut mean = vec![0.0; readout[0].b.len()];
        for _ in 0..cfg.time_steps {
            let mut input = x.clone();
            for (l, layer) in hidden.iter().enumerate() {
                let current = layer.apply(&input);
                for i in 0..current.len() {
                    u[l][i] = cfg.lambda * (u[l][i] - cfg.v_th * s[l][i]) + current[i];
                    s[l][i] = 1.0 / (1.0 + ((cfg.v_th - u[l][i]) / cfg.a2).exp());
                }
                input = s[l].clone();
            }
            for (m, o) in mean.iter_mut().zip(readout[0].apply(&input)) {
                *m += o / cfg.time_steps as f64;
            }
        }
        total += cross_entropy(&mean, label);
    }
    total
}

/// Closed-form rate chain: `a ← clamp((W a + b)/τ, 0, V_th/Δt)` per layer.
pub fn clamp_loss(layers: &[Dense], xs: &[Vec<f64>], labels: &[usize], cfg: &NeuronConfig) -> f64 {
    let bound = cfg.v_th / cfg.delta_t;
    xs.iter()
        .zip(labels)
        .map(|(x, &label)| {
            let out = layers.iter().fold(x.clone(), |a, l| l.apply(&a).iter().map(|c| (c / cfg.tau).clamp(0.0, bound)).collect());
            cross_entropy(&out, label)
        })
        .sum()
}

pub fn to_network(layers: &[Dense]) -> Network {
    let built = layers
        .iter()
        .map(|l| {
            let (o, i) = (l.w.len(), l.w[0].len());
            Layer::from_parts(Matrix::from_rows(&l.w), l.b.clone(), LayerKind::Dense { inputs: i, outputs: o }).unwrap()
        })
        .collect();
    Network::new(built).unwrap()
}

pub fn random_dense(outputs: usize, inputs: usize, scale: f64, rng: &mut Rng) -> Dense {
    Dense {
        w: (0..outputs).map(|_| (0..inputs).map(|_| scale * rng.uniform_range(-1.0, 1.0)).collect()).collect(),
        b: (0..outputs).map(|_| rng.uniform_range(0.0, 0.4)).collect(),
    }
}

/// `‖fd − analytic‖ / ‖fd‖` over all weights and biases, with the packet
/// scaled back from a batch mean to the summed loss.
pub fn relative_error(layers: &[Dense], packet: &GradPacket, loss: impl Fn(&[Dense]) -> f64) -> f64 {
    let h = 1e-5;
    let batch = packet.batch as f64;
    let (mut diff, mut norm) = (0.0, 0.0);
    for l in 0..layers.len() {
        let gw = packet.weight_grad(l).unwrap();
        let gb = packet.bias_grad(l);
        for r in 0..layers[l].w.len() {
            let cols = layers[l].w[r].len();
            for c in 0..=cols {
                let mut plus = layers.to_vec();
                let mut minus = layers.to_vec();
                let analytic = if c < cols {
                    plus[l].w[r][c] += h;
                    minus[l].w[r][c] -= h;
                    gw[(r, c)] * batch
                } else {
                    plus[l].b[r] += h;
                    minus[l].b[r] -= h;
                    gb[r] * batch
                };
                let fd = (loss(&plus) - loss(&minus)) / (2.0 * h);
                diff += (fd - analytic).powi(2);
                norm += fd.powi(2);
            }
        }
    }
    (diff / norm).sqrt()
}

