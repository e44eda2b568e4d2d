//! Single-file checkpoint of a [`RunState`] taken at a task boundary.
//!
//! Layout (all integers `u64` little-endian unless noted, reals `f64` LE):
//!
//! ```text
//! magic      8 bytes  "HLOPCKPT"
//! version    u32 LE   (currently 1)
//! config     len, UTF-8 bytes of the resolved config
//! next_task
//! rng        seed, stream, word_pos low, word_pos high
//! layers     count, then per layer: matrix W, vector b
//! feedback   count, then matrices
//! subspaces  count, then per layer: u8 present, [matrix H, matrix H_new, matrix velocity]
//! accuracy   rows, then per row: vector
//! audit      u8 present, [count, matrices W₁ | count, matrices H₁ | count, matrices X₁]
//!
//! matrix  = rows, cols, rows·cols reals (row-major)
//! vector  = len, len reals
//! ```
//!
//! Files are written to a temporary sibling and renamed into place.

use std::path::Path;

use crate::config::ExperimentConfig;
use crate::error::{HlopError, Result};
use crate::experiment::{AuditBaseline, RunState};
use crate::hlop::LateralSubspace;
use crate::layer::Layer;
use crate::metrics::AccuracyMatrix;
use crate::network::Network;
use crate::numeric::{Matrix, Rng, RngState};
use crate::output::write_atomic;

const MAGIC: &[u8; 8] = b"HLOPCKPT";
pub const VERSION: u32 = 1;

struct Writer(Vec<u8>);

impl Writer {
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn usize(&mut self, v: usize) {
        self.u64(v as u64);
    }
    fn flag(&mut self, v: bool) {
        self.0.push(u8::from(v));
    }
    fn reals(&mut self, v: &[f64]) {
        self.usize(v.len());
        for x in v {
            self.0.extend_from_slice(&x.to_le_bytes());
        }
    }
    fn matrix(&mut self, m: &Matrix) {
        self.usize(m.rows());
        self.usize(m.cols());
        for x in m.as_slice() {
            self.0.extend_from_slice(&x.to_le_bytes());
        }
    }
    fn matrices(&mut self, ms: &[Matrix]) {
        self.usize(ms.len());
        ms.iter().for_each(|m| self.matrix(m));
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(HlopError::Checkpoint(format!("truncated at byte {}", self.pos)));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn usize(&mut self) -> Result<usize> {
        let v = self.u64()?;
        usize::try_from(v).map_err(|_| HlopError::Checkpoint(format!("count {v} out of range")))
    }
    /// A count of items that each occupy at least `item_bytes`; rejects
    /// counts the remaining input cannot hold.
    fn count(&mut self, item_bytes: usize) -> Result<usize> {
        let n = self.usize()?;
        if n.saturating_mul(item_bytes.max(1)) > self.bytes.len() - self.pos {
            return Err(HlopError::Checkpoint(format!("count {n} exceeds remaining data")));
        }
        Ok(n)
    }
    fn flag(&mut self) -> Result<bool> {
        match self.take(1)?[0] {
            0 => Ok(false),
            1 => Ok(true),
            b => Err(HlopError::Checkpoint(format!("bad flag byte {b}"))),
        }
    }
    fn real(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn reals(&mut self) -> Result<Vec<f64>> {
        let n = self.count(8)?;
        (0..n).map(|_| self.real()).collect()
    }
    fn matrix(&mut self) -> Result<Matrix> {
        let rows = self.usize()?;
        let cols = self.usize()?;
        let len = rows.checked_mul(cols).filter(|&l| l.saturating_mul(8) <= self.bytes.len() - self.pos);
        let len = len.ok_or_else(|| HlopError::Checkpoint(format!("matrix {rows}x{cols} exceeds remaining data")))?;
        let data = (0..len).map(|_| self.real()).collect::<Result<Vec<_>>>()?;
        Matrix::from_vec(rows, cols, data).map_err(|e| HlopError::Checkpoint(e.to_string()))
    }
    fn matrices(&mut self) -> Result<Vec<Matrix>> {
        let n = self.count(16)?;
        (0..n).map(|_| self.matrix()).collect()
    }
}

pub fn encode(cfg: &ExperimentConfig, state: &RunState) -> Vec<u8> {
    let mut w = Writer(MAGIC.to_vec());
    w.0.extend_from_slice(&VERSION.to_le_bytes());
    let text = cfg.to_toml();
    w.usize(text.len());
    w.0.extend_from_slice(text.as_bytes());
    w.usize(state.next_task);
    let rng = state.rng.state();
    w.u64(rng.seed);
    w.u64(rng.stream);
    w.u64(rng.word_pos as u64);
    w.u64((rng.word_pos >> 64) as u64);
    w.usize(state.net.len());
    for layer in &state.net.layers {
        w.matrix(&layer.weights);
        w.reals(&layer.bias);
    }
    w.matrices(&state.errorprop.feedback);
    w.usize(state.subspaces.len());
    for sub in &state.subspaces {
        w.flag(sub.is_some());
        if let Some(s) = sub {
            w.matrix(s.consolidated());
            w.matrix(s.fresh());
            w.matrix(s.velocity());
        }
    }
    w.usize(state.accuracy.tasks());
    for row in state.accuracy.rows() {
        w.reals(row);
    }
    w.flag(state.audit.is_some());
    if let Some(a) = &state.audit {
        w.matrices(&a.weights);
        w.matrices(&a.subspaces);
        w.matrices(&a.inputs);
    }
    w.0
}

/// Restores a state written by [`encode`] for the same configuration.
pub fn decode(cfg: &ExperimentConfig, bytes: &[u8]) -> Result<RunState> {
    decode_inner(Some(cfg), bytes).map(|(_, state)| state)
}

/// Restores a state together with the configuration stored in the file.
pub fn decode_stored(bytes: &[u8]) -> Result<(ExperimentConfig, RunState)> {
    decode_inner(None, bytes)
}

fn decode_inner(expected: Option<&ExperimentConfig>, bytes: &[u8]) -> Result<(ExperimentConfig, RunState)> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err(HlopError::Checkpoint("not a checkpoint file (bad magic)".into()));
    }
    let version = u32::from_le_bytes(r.take(4)?.try_into().expect("4 bytes"));
    if version != VERSION {
        return Err(HlopError::Checkpoint(format!("unsupported version {version} (expected {VERSION})")));
    }
    let len = r.count(1)?;
    let text = std::str::from_utf8(r.take(len)?).map_err(|_| HlopError::Checkpoint("config is not UTF-8".into()))?;
    let stored = ExperimentConfig::parse(text).map_err(|e| HlopError::Checkpoint(format!("stored config: {e}")))?;
    if expected.is_some_and(|cfg| cfg != &stored) {
        return Err(HlopError::Checkpoint("checkpoint was written for a different configuration".into()));
    }
    let cfg = &stored;

    // A fresh state supplies layer kinds and Hebbian settings; the file
    // supplies every number.
    let mut state = RunState::new(cfg)?;
    state.next_task = r.usize()?;
    let seed = r.u64()?;
    let stream = r.u64()?;
    let word_pos = u128::from(r.u64()?) | (u128::from(r.u64()?) << 64);
    state.rng = Rng::from_state(RngState { seed, stream, word_pos });

    let n_layers = r.usize()?;
    if n_layers != state.net.len() {
        return Err(HlopError::Checkpoint(format!("{n_layers} layers stored, network has {}", state.net.len())));
    }
    let mut layers = Vec::with_capacity(n_layers);
    for layer in &state.net.layers {
        let w = r.matrix()?;
        let b = r.reals()?;
        layers.push(Layer::from_parts(w, b, layer.kind.clone()).map_err(|e| HlopError::Checkpoint(e.to_string()))?);
    }
    state.net = Network::new(layers)?;
    state.errorprop.feedback = r.matrices()?;

    let n_subs = r.usize()?;
    if n_subs != state.subspaces.len() {
        return Err(HlopError::Checkpoint(format!("{n_subs} subspace slots stored, expected {}", state.subspaces.len())));
    }
    for slot in state.subspaces.iter_mut() {
        let present = r.flag()?;
        match (present, slot.as_ref()) {
            (false, None) => {}
            (true, Some(s)) => {
                let (h, f, v) = (r.matrix()?, r.matrix()?, r.matrix()?);
                *slot = Some(LateralSubspace::from_parts(h, f, v, s.hebbian, s.mode)?);
            }
            _ => return Err(HlopError::Checkpoint("subspace layout differs from configuration".into())),
        }
    }

    let rows = r.count(8)?;
    let mut accuracy = AccuracyMatrix::new();
    for _ in 0..rows {
        accuracy.push_row(r.reals()?).map_err(|e| HlopError::Checkpoint(e.to_string()))?;
    }
    state.accuracy = accuracy;
    if r.flag()? {
        state.audit = Some(AuditBaseline { weights: r.matrices()?, subspaces: r.matrices()?, inputs: r.matrices()? });
    }
    if r.pos != bytes.len() {
        return Err(HlopError::Checkpoint(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    if state.accuracy.tasks() != state.next_task {
        return Err(HlopError::Checkpoint("accuracy rows do not match the task cursor".into()));
    }
    Ok((stored.clone(), state))
}

pub fn save(path: &Path, cfg: &ExperimentConfig, state: &RunState) -> Result<()> {
    write_atomic(path, &encode(cfg, state))
}

pub fn load(path: &Path, cfg: &ExperimentConfig) -> Result<RunState> {
    decode(cfg, &std::fs::read(path)?)
}

pub fn load_stored(path: &Path) -> Result<(ExperimentConfig, RunState)> {
    decode_stored(&std::fs::read(path)?)
}
