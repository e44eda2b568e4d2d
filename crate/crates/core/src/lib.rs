//! Hebbian-learning-based orthogonal projection (HLOP) for continual learning
//! in spiking neural networks.
//!
//! Lateral "subspace neurons" learn the principal subspace of each layer's
//! presynaptic activity with a Hebbian/anti-Hebbian rule. On later tasks the
//! same lateral circuit projects activity traces onto the orthogonal
//! complement of that subspace before they enter the weight update, so new
//! learning leaves responses to old inputs untouched.

pub mod checkpoint;
pub mod config;
pub mod error;
pub mod experiment;
pub mod hlop;
pub mod layer;
pub mod metrics;
pub mod mnist;
pub mod network;
pub mod neuron;
pub mod numeric;
pub mod output;
pub mod tasks;
pub mod trainers;
pub mod verify;

pub use config::{ExperimentConfig, HeadMode, HlopMode, TaskFamily};
pub use error::{HlopError, Result};
pub use experiment::{run_continual, RunOutput, RunState};
pub use hlop::{HebbianConfig, LateralMode, LateralSubspace, QuantConfig};
pub use metrics::{compute_acc_bwt, subspace_alignment_error, AccuracyMatrix};
pub use layer::{ConvGeometry, Layer, LayerKind};
pub use network::Network;
pub use neuron::{Firing, NeuronConfig};
pub use numeric::{Matrix, Rng};
pub use trainers::{ErrorPropConfig, ErrorPropMode, GradPacket, LayerGrad, Target, TrainerKind};
