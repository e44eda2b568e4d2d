//! Experiment description in a flat `key = value` TOML file.
//!
//! Every key is optional; omitted keys take the defaults of the scaled
//! permuted-MNIST protocol. Unknown keys and inconsistent combinations are
//! rejected with the offending field named. [`ExperimentConfig::to_toml`]
//! writes the fully resolved configuration, which parses back to the same
//! value.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use toml::{Table, Value};

use crate::error::{HlopError, Result};
use crate::hlop::{HebbianConfig, LateralMode, QuantConfig};
use crate::neuron::{Firing, NeuronConfig};
use crate::trainers::{ErrorPropMode, TrainerKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum HlopMode {
    Off,
    #[default]
    Linear,
    Spiking,
}

impl FromStr for HlopMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "off" => Ok(Self::Off),
            "linear" => Ok(Self::Linear),
            "spiking" => Ok(Self::Spiking),
            _ => Err(format!("unknown hlop mode `{s}` (expected off, linear or spiking)")),
        }
    }
}

impl fmt::Display for HlopMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Off => "off",
            Self::Linear => "linear",
            Self::Spiking => "spiking",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum TaskFamily {
    /// Permuted MNIST, one shared classifier.
    #[default]
    Pmnist,
    /// Five two-class splits of MNIST.
    SplitMnist,
}

impl FromStr for TaskFamily {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "pmnist" => Ok(Self::Pmnist),
            "split_mnist" => Ok(Self::SplitMnist),
            _ => Err(format!("unknown task family `{s}` (expected pmnist or split_mnist)")),
        }
    }
}

impl fmt::Display for TaskFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Pmnist => "pmnist",
            Self::SplitMnist => "split_mnist",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum HeadMode {
    /// One classifier shared by all tasks.
    #[default]
    Single,
    /// Each task reads only its own output units.
    Multi,
}

impl FromStr for HeadMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "single" => Ok(Self::Single),
            "multi" => Ok(Self::Multi),
            _ => Err(format!("unknown head mode `{s}` (expected single or multi)")),
        }
    }
}

impl fmt::Display for HeadMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Single => "single",
            Self::Multi => "multi",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Architecture {
    #[default]
    Mlp,
    /// Two 5×5 conv layers with 2×2 average pooling, then a dense readout.
    Conv,
}

impl FromStr for Architecture {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "mlp" => Ok(Self::Mlp),
            "conv" => Ok(Self::Conv),
            _ => Err(format!("unknown network `{s}` (expected mlp or conv)")),
        }
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Mlp => "mlp",
            Self::Conv => "conv",
        })
    }
}

/// Subspace neurons per hosted layer: `first` on task 0, `expand` on each
/// later task, with `reduce` subtracted after every `reduce_every` later
/// tasks (never below zero).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SubspaceSchedule {
    pub first: Vec<usize>,
    pub expand: Vec<usize>,
    pub reduce: Vec<usize>,
    pub reduce_every: usize,
}

impl SubspaceSchedule {
    /// Neurons added to layer `l` at the start of `task`.
    pub fn added(&self, l: usize, task: usize) -> usize {
        if task == 0 {
            return self.first[l];
        }
        let cuts = if self.reduce_every == 0 { 0 } else { (task - 1) / self.reduce_every };
        self.expand[l].saturating_sub(cuts * self.reduce[l])
    }

    /// Neurons in layer `l` after `tasks` tasks.
    pub fn total(&self, l: usize, tasks: usize) -> usize {
        (0..tasks).map(|t| self.added(l, t)).sum()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub trainer: TrainerKind,
    pub errorprop: ErrorPropMode,
    /// SS scale; `None` uses mean |W| per layer.
    pub ss_scale: Option<f64>,
    pub hlop: HlopMode,
    pub neuron: NeuronConfig,
    pub lr: f64,
    pub batch: usize,
    pub epochs: usize,
    pub update_bias: bool,
    pub network: Architecture,
    pub hidden_sizes: Vec<usize>,
    pub conv_channels: [usize; 2],
    pub subspace: SubspaceSchedule,
    pub hebbian: HebbianConfig,
    pub quant: QuantConfig,
    pub tasks: TaskFamily,
    pub n_tasks: usize,
    pub train_per_task: usize,
    pub test_per_task: usize,
    pub head_mode: HeadMode,
    /// Standardize pixels with the training split's mean and deviation.
    pub normalize: bool,
    pub audit_samples: usize,
    pub checkpoint: bool,
    pub output_dir: PathBuf,
    /// Overrides `HLOP_DATA_DIR` when set.
    pub data_dir: Option<PathBuf>,
}

const KEYS: &[&str] = &[
    "seed",
    "trainer",
    "errorprop",
    "ss_scale",
    "hlop",
    "T",
    "lambda",
    "v_th",
    "a2",
    "delta_t",
    "tau",
    "lr",
    "batch",
    "epochs",
    "update_bias",
    "network",
    "hidden_sizes",
    "conv_channels",
    "subspace_first",
    "subspace_expand",
    "subspace_reduce",
    "subspace_reduce_every",
    "hebbian_lr",
    "hebbian_momentum",
    "hebbian_repeats",
    "hebbian_init_scale",
    "quant_scale",
    "quant_steps",
    "tasks",
    "n_tasks",
    "train_per_task",
    "test_per_task",
    "head_mode",
    "normalize",
    "audit_samples",
    "checkpoint",
    "output_dir",
    "data_dir",
];

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::parse("").expect("defaults are consistent")
    }
}

struct Fields {
    table: Table,
}

impl Fields {
    fn take(&mut self, key: &str) -> Option<Value> {
        self.table.remove(key)
    }

    fn string(&mut self, key: &str) -> Result<Option<String>> {
        match self.take(key) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s)),
            Some(v) => Err(HlopError::config(key, format!("expected a string, found {}", v.type_str()))),
        }
    }

    fn parsed<T: FromStr<Err = String>>(&mut self, key: &str, default: T) -> Result<T> {
        match self.string(key)? {
            None => Ok(default),
            Some(s) => s.parse().map_err(|e| HlopError::config(key, e)),
        }
    }

    fn float(&mut self, key: &str) -> Result<Option<f64>> {
        match self.take(key) {
            None => Ok(None),
            Some(Value::Float(f)) => Ok(Some(f)),
            Some(Value::Integer(i)) => Ok(Some(i as f64)),
            Some(v) => Err(HlopError::config(key, format!("expected a number, found {}", v.type_str()))),
        }
    }

    fn float_or(&mut self, key: &str, default: f64) -> Result<f64> {
        Ok(self.float(key)?.unwrap_or(default))
    }

    fn uint(&mut self, key: &str) -> Result<Option<u64>> {
        match self.take(key) {
            None => Ok(None),
            Some(Value::Integer(i)) if i >= 0 => Ok(Some(i as u64)),
            Some(Value::Integer(i)) => Err(HlopError::config(key, format!("must be non-negative, got {i}"))),
            Some(v) => Err(HlopError::config(key, format!("expected an integer, found {}", v.type_str()))),
        }
    }

    fn count(&mut self, key: &str, default: usize) -> Result<usize> {
        Ok(self.uint(key)?.map_or(default, |v| v as usize))
    }

    fn boolean(&mut self, key: &str, default: bool) -> Result<bool> {
        match self.take(key) {
            None => Ok(default),
            Some(Value::Boolean(b)) => Ok(b),
            Some(v) => Err(HlopError::config(key, format!("expected true or false, found {}", v.type_str()))),
        }
    }

    fn counts(&mut self, key: &str) -> Result<Option<Vec<usize>>> {
        match self.take(key) {
            None => Ok(None),
            Some(Value::Array(items)) => items
                .into_iter()
                .map(|v| match v {
                    Value::Integer(i) if i >= 0 => Ok(i as usize),
                    other => Err(HlopError::config(key, format!("expected non-negative integers, found {other}"))),
                })
                .collect::<Result<Vec<_>>>()
                .map(Some),
            Some(v) => Err(HlopError::config(key, format!("expected an array of integers, found {}", v.type_str()))),
        }
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let table: Table = text.parse().map_err(|e: toml::de::Error| {
            HlopError::config("<file>", e.message().to_string())
        })?;
        if let Some(unknown) = table.keys().find(|k| !KEYS.contains(&k.as_str())) {
            return Err(HlopError::config(unknown.clone(), "unknown key"));
        }
        let mut f = Fields { table };

        let seed = f.uint("seed")?.unwrap_or(2022);
        let trainer: TrainerKind = f.parsed("trainer", TrainerKind::Ottt)?;
        let errorprop = f.parsed("errorprop", ErrorPropMode::Bp)?;
        let ss_scale = f.float("ss_scale")?;
        let hlop = f.parsed("hlop", HlopMode::Linear)?;

        let base = match trainer {
            TrainerKind::Rate => NeuronConfig::rate_default(),
            TrainerKind::Bptt | TrainerKind::Ottt => NeuronConfig::default(),
        };
        let delta_t = f.float_or("delta_t", base.delta_t)?;
        let tau = f.float_or("tau", base.tau)?;
        let lambda_default = match trainer {
            TrainerKind::Rate => (-delta_t / tau).exp(),
            _ => base.lambda,
        };
        let neuron = NeuronConfig {
            lambda: f.float_or("lambda", lambda_default)?,
            v_th: f.float_or("v_th", base.v_th)?,
            time_steps: f.count("T", base.time_steps)?,
            a2: f.float_or("a2", base.a2)?,
            delta_t,
            tau,
            firing: Firing::Heaviside,
        };

        let lr = f.float_or("lr", 0.1)?;
        let batch = f.count("batch", 64)?;
        let epochs = f.count("epochs", 1)?;
        let update_bias = f.boolean("update_bias", true)?;

        let tasks: TaskFamily = f.parsed("tasks", TaskFamily::Pmnist)?;
        let (default_net, default_head) = match tasks {
            TaskFamily::Pmnist => (Architecture::Mlp, HeadMode::Single),
            TaskFamily::SplitMnist => (Architecture::Conv, HeadMode::Multi),
        };
        let network = f.parsed("network", default_net)?;
        let head_mode = f.parsed("head_mode", default_head)?;
        let hidden_sizes = f.counts("hidden_sizes")?.unwrap_or_else(|| vec![200, 200]);
        let conv_channels = match f.counts("conv_channels")? {
            None => [8, 16],
            Some(c) if c.len() == 2 => [c[0], c[1]],
            Some(c) => return Err(HlopError::config("conv_channels", format!("expected 2 entries, got {}", c.len()))),
        };

        let (first, expand, reduce) = default_schedule(network, &hidden_sizes, head_mode);
        let subspace = SubspaceSchedule {
            first: f.counts("subspace_first")?.unwrap_or(first),
            expand: f.counts("subspace_expand")?.unwrap_or(expand),
            reduce: f.counts("subspace_reduce")?.unwrap_or(reduce),
            reduce_every: f.count("subspace_reduce_every", 3)?,
        };
        let defaults = HebbianConfig::default();
        let hebbian = HebbianConfig {
            lr: f.float_or("hebbian_lr", defaults.lr)?,
            momentum: f.float_or("hebbian_momentum", defaults.momentum)?,
            repeats: f.count("hebbian_repeats", defaults.repeats)?,
            init_scale: f.float_or("hebbian_init_scale", defaults.init_scale)?,
        };
        let quant = QuantConfig {
            scale: f.float_or("quant_scale", QuantConfig::default().scale)?,
            steps: f.count("quant_steps", QuantConfig::default().steps)?,
        };

        let cfg = Self {
            seed,
            trainer,
            errorprop,
            ss_scale,
            hlop,
            neuron,
            lr,
            batch,
            epochs,
            update_bias,
            network,
            hidden_sizes,
            conv_channels,
            subspace,
            hebbian,
            quant,
            tasks,
            n_tasks: f.count("n_tasks", 5)?,
            train_per_task: f.count("train_per_task", 2000)?,
            test_per_task: f.count("test_per_task", 1000)?,
            head_mode,
            normalize: f.boolean("normalize", false)?,
            audit_samples: f.count("audit_samples", 200)?,
            checkpoint: f.boolean("checkpoint", true)?,
            output_dir: PathBuf::from(f.string("output_dir")?.unwrap_or_else(|| "out".into())),
            data_dir: f.string("data_dir")?.map(PathBuf::from),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Number of layers in the configured network.
    pub fn layer_count(&self) -> usize {
        match self.network {
            Architecture::Mlp => self.hidden_sizes.len() + 1,
            Architecture::Conv => 3,
        }
    }

    /// Presynaptic width seen by each layer's lateral circuit (patch length
    /// for conv layers).
    pub fn presynaptic_widths(&self) -> Vec<usize> {
        match self.network {
            Architecture::Mlp => std::iter::once(784).chain(self.hidden_sizes.iter().copied()).collect(),
            Architecture::Conv => {
                let [c1, c2] = self.conv_channels;
                vec![25, 25 * c1, 4 * 4 * c2]
            }
        }
    }

    /// Layers that host a lateral circuit: all of them with a shared
    /// classifier, all but the readout with per-task heads.
    pub fn hosted_layers(&self) -> usize {
        match self.head_mode {
            HeadMode::Single => self.layer_count(),
            HeadMode::Multi => self.layer_count() - 1,
        }
    }

    pub fn lateral_mode(&self) -> LateralMode {
        match self.hlop {
            HlopMode::Spiking => LateralMode::Spiking(self.quant),
            _ => LateralMode::Linear,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.neuron.validate()?;
        self.quant.validate()?;
        let positive = |field: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(HlopError::config(field, format!("must be positive, got {v}")))
            }
        };
        positive("lr", self.lr)?;
        positive("hebbian_lr", self.hebbian.lr)?;
        positive("hebbian_init_scale", self.hebbian.init_scale)?;
        if !(0.0..1.0).contains(&self.hebbian.momentum) {
            return Err(HlopError::config("hebbian_momentum", "must lie in [0, 1)"));
        }
        if let Some(s) = self.ss_scale {
            positive("ss_scale", s)?;
            if self.errorprop != ErrorPropMode::Ss {
                return Err(HlopError::config("ss_scale", "only meaningful with errorprop = \"ss\""));
            }
        }
        for (field, v) in [
            ("batch", self.batch),
            ("epochs", self.epochs),
            ("n_tasks", self.n_tasks),
            ("train_per_task", self.train_per_task),
            ("test_per_task", self.test_per_task),
            ("hebbian_repeats", self.hebbian.repeats),
        ] {
            if v == 0 {
                return Err(HlopError::config(field, "must be at least 1"));
            }
        }
        match self.network {
            Architecture::Mlp => {
                if self.hidden_sizes.is_empty() || self.hidden_sizes.contains(&0) {
                    return Err(HlopError::config("hidden_sizes", "needs at least one non-zero width"));
                }
            }
            Architecture::Conv => {
                if self.conv_channels.contains(&0) {
                    return Err(HlopError::config("conv_channels", "channels must be non-zero"));
                }
                if self.trainer == TrainerKind::Rate {
                    return Err(HlopError::config("network", "the rate trainer supports mlp only"));
                }
            }
        }
        if self.tasks == TaskFamily::SplitMnist && self.n_tasks > 5 {
            return Err(HlopError::config("n_tasks", "split_mnist has 5 tasks"));
        }
        if self.tasks == TaskFamily::Pmnist && self.head_mode == HeadMode::Multi {
            return Err(HlopError::config("head_mode", "permuted tasks share all 10 classes; use single"));
        }

        let hosted = self.hosted_layers();
        let widths = self.presynaptic_widths();
        for (field, list) in [
            ("subspace_first", &self.subspace.first),
            ("subspace_expand", &self.subspace.expand),
            ("subspace_reduce", &self.subspace.reduce),
        ] {
            if list.len() != hosted {
                return Err(HlopError::config(
                    field,
                    format!("needs one entry per hosted layer ({hosted}), got {}", list.len()),
                ));
            }
        }
        if self.hlop != HlopMode::Off {
            for (l, &n) in widths.iter().take(hosted).enumerate() {
                let total = self.subspace.total(l, self.n_tasks);
                if total > n {
                    return Err(HlopError::config(
                        "subspace_expand",
                        format!("layer {l} would reach {total} subspace neurons but has only {n} presynaptic inputs"),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Fully resolved configuration as flat TOML; parsing it back yields
    /// an equal config.
    pub fn to_toml(&self) -> String {
        let list = |v: &[usize]| format!("[{}]", v.iter().map(usize::to_string).collect::<Vec<_>>().join(", "));
        let n = &self.neuron;
        let mut out = String::new();
        let mut line = |k: &str, v: String| {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        };
        line("seed", self.seed.to_string());
        line("trainer", format!("\"{}\"", self.trainer));
        line("errorprop", format!("\"{}\"", self.errorprop));
        if let Some(s) = self.ss_scale {
            line("ss_scale", float(s));
        }
        line("hlop", format!("\"{}\"", self.hlop));
        line("T", n.time_steps.to_string());
        line("lambda", float(n.lambda));
        line("v_th", float(n.v_th));
        line("a2", float(n.a2));
        line("delta_t", float(n.delta_t));
        line("tau", float(n.tau));
        line("lr", float(self.lr));
        line("batch", self.batch.to_string());
        line("epochs", self.epochs.to_string());
        line("update_bias", self.update_bias.to_string());
        line("network", format!("\"{}\"", self.network));
        line("hidden_sizes", list(&self.hidden_sizes));
        line("conv_channels", list(&self.conv_channels));
        line("subspace_first", list(&self.subspace.first));
        line("subspace_expand", list(&self.subspace.expand));
        line("subspace_reduce", list(&self.subspace.reduce));
        line("subspace_reduce_every", self.subspace.reduce_every.to_string());
        line("hebbian_lr", float(self.hebbian.lr));
        line("hebbian_momentum", float(self.hebbian.momentum));
        line("hebbian_repeats", self.hebbian.repeats.to_string());
        line("hebbian_init_scale", float(self.hebbian.init_scale));
        line("quant_scale", float(self.quant.scale));
        line("quant_steps", self.quant.steps.to_string());
        line("tasks", format!("\"{}\"", self.tasks));
        line("n_tasks", self.n_tasks.to_string());
        line("train_per_task", self.train_per_task.to_string());
        line("test_per_task", self.test_per_task.to_string());
        line("head_mode", format!("\"{}\"", self.head_mode));
        line("normalize", self.normalize.to_string());
        line("audit_samples", self.audit_samples.to_string());
        line("checkpoint", self.checkpoint.to_string());
        line("output_dir", Value::String(self.output_dir.display().to_string()).to_string());
        if let Some(d) = &self.data_dir {
            line("data_dir", Value::String(d.display().to_string()).to_string());
        }
        out
    }
}

/// Shortest round-trip decimal that TOML reads back as a float.
fn float(v: f64) -> String {
    let s = format!("{v:?}");
    if s.contains(['.', 'e', 'E']) || s.contains("inf") || s.contains("nan") {
        s
    } else {
        format!("{s}.0")
    }
}

/// Default schedule scaled from the 800-wide reference (80/200/100 first,
/// +70 per later task, −20 every 3 tasks) to the configured widths.
fn default_schedule(network: Architecture, hidden: &[usize], head: HeadMode) -> (Vec<usize>, Vec<usize>, Vec<usize>) {
    match network {
        Architecture::Mlp => {
            let scale = |count: usize, width: usize| (count * width + 400) / 800;
            let mut first = vec![80];
            let mut expand = vec![70];
            let mut reduce = vec![20];
            for (i, &w) in hidden.iter().enumerate() {
                let is_last = i + 1 == hidden.len();
                if is_last && head == HeadMode::Multi {
                    break;
                }
                let base = if is_last { 100 } else { 200 };
                first.push(scale(base, w));
                expand.push(scale(70, w));
                reduce.push(scale(20, w));
            }
            (first, expand, reduce)
        }
        // Roughly a fifth of each patch width first, then small additions.
        Architecture::Conv => match head {
            HeadMode::Multi => (vec![5, 40], vec![2, 10], vec![0, 0]),
            HeadMode::Single => (vec![5, 40, 50], vec![2, 10, 12], vec![0, 0, 0]),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_the_scaled_protocol() {
        let c = ExperimentConfig::default();
        assert_eq!(c.trainer, TrainerKind::Ottt);
        assert_eq!(c.neuron.time_steps, 6);
        assert_eq!((c.lr, c.batch, c.epochs), (0.1, 64, 1));
        assert_eq!(c.hidden_sizes, vec![200, 200]);
        assert_eq!(c.subspace.first, vec![80, 50, 25]);
        assert_eq!(c.subspace.expand, vec![70, 18, 18]);
        assert_eq!(c.subspace.reduce, vec![20, 5, 5]);
        assert_eq!((c.n_tasks, c.train_per_task, c.test_per_task), (5, 2000, 1000));
    }

    #[test]
    fn schedule_reduces_every_three_tasks() {
        let c = ExperimentConfig::default();
        let added: Vec<usize> = (0..8).map(|t| c.subspace.added(0, t)).collect();
        assert_eq!(added, vec![80, 70, 70, 70, 50, 50, 50, 30]);
        assert_eq!(c.subspace.total(1, 5), 50 + 18 * 3 + 13);
    }

    #[test]
    fn echo_round_trips() {
        for text in ["", "trainer = \"rate\"\nhlop = \"spiking\"\nss_scale = 0.5\nerrorprop = \"ss\"", "tasks = \"split_mnist\"\ndata_dir = \"/tmp/x y\""] {
            let c = ExperimentConfig::parse(text).unwrap();
            assert_eq!(ExperimentConfig::parse(&c.to_toml()).unwrap(), c);
        }
    }

    #[test]
    fn rate_defaults() {
        let c = ExperimentConfig::parse("trainer = \"rate\"").unwrap();
        assert_eq!(c.neuron.time_steps, 20);
        assert_eq!(c.neuron.v_th, 0.3);
        assert!((c.neuron.lambda - (-0.05f64).exp()).abs() < 1e-15);
    }

    fn field_of(text: &str) -> String {
        match ExperimentConfig::parse(text).unwrap_err() {
            HlopError::Config { field, .. } => field,
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn diagnostics_name_the_field() {
        assert_eq!(field_of("bogus = 1"), "bogus");
        assert_eq!(field_of("trainer = \"sgd\""), "trainer");
        assert_eq!(field_of("lr = \"fast\""), "lr");
        assert_eq!(field_of("batch = -3"), "batch");
        assert_eq!(field_of("lambda = 1.5"), "lambda");
        assert_eq!(field_of("subspace_first = [1, 2]"), "subspace_first");
        assert_eq!(field_of("subspace_expand = [70, 100, 18]"), "subspace_expand");
        assert_eq!(field_of("ss_scale = 1.0"), "ss_scale");
        assert_eq!(field_of("seed = "), "<file>");
    }

    #[test]
    fn multi_head_drops_the_classifier_circuit() {
        let c = ExperimentConfig::parse("tasks = \"split_mnist\"").unwrap();
        assert_eq!(c.network, Architecture::Conv);
        assert_eq!(c.hosted_layers(), 2);
        assert_eq!(c.presynaptic_widths(), vec![25, 200, 256]);
    }
}
