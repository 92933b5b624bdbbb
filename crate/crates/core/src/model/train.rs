use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::net::two_layer::{reduce_in_order, REDUCTION_CHUNK};
use crate::net::{sgd_step, SgdConfig, TwoLayerNet};
use crate::rng::{self, domain};

/// A per-row loss over a bundle of nets whose parameters are concatenated
/// in bundle order.
pub trait Objective: Sync {
    fn rows(&self) -> usize;

    /// Loss of row `i`; adds its gradient into `grad`.
    fn row_loss(&self, nets: &[TwoLayerNet], i: usize, grad: &mut [f64]) -> f64;
}

/// Mean loss and gradient over `rows` (all rows when `None`).
///
/// Rows are processed in fixed chunks and reduced in order, so the result is
/// the same for any thread count.
pub fn batch_gradient<O: Objective + ?Sized>(
    objective: &O,
    nets: &[TwoLayerNet],
    rows: Option<&[usize]>,
) -> (f64, Vec<f64>) {
    let np = bundle_len(nets);
    let all: Vec<usize>;
    let rows = match rows {
        Some(r) => r,
        None => {
            all = (0..objective.rows()).collect();
            &all
        }
    };
    let parts: Vec<(f64, Vec<f64>)> = rows
        .par_chunks(REDUCTION_CHUNK)
        .map(|chunk| {
            let mut g = vec![0.0; np];
            let loss = chunk.iter().map(|&i| objective.row_loss(nets, i, &mut g)).sum();
            (loss, g)
        })
        .collect();
    let (loss, mut grad) = reduce_in_order(parts, np);
    let scale = 1.0 / rows.len().max(1) as f64;
    grad.iter_mut().for_each(|g| *g *= scale);
    (loss * scale, grad)
}

pub fn bundle_len(nets: &[TwoLayerNet]) -> usize {
    nets.iter().map(TwoLayerNet::param_count).sum()
}

/// Start offset of each net's block in the bundle layout.
pub fn bundle_offsets(nets: &[TwoLayerNet]) -> Vec<usize> {
    nets.iter()
        .scan(0, |acc, n| {
            let o = *acc;
            *acc += n.param_count();
            Some(o)
        })
        .collect()
}

pub fn bundle_params(nets: &[TwoLayerNet]) -> Vec<f64> {
    nets.iter().flat_map(TwoLayerNet::params).collect()
}

pub fn set_bundle_params(nets: &mut [TwoLayerNet], params: &[f64]) -> Result<()> {
    let mut at = 0;
    for n in nets.iter_mut() {
        let len = n.param_count();
        n.set_params(&params[at..at + len])?;
        at += len;
    }
    Ok(())
}

/// Which of the three networks a training run belongs to; keys its RNG streams.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Drift,
    Aleatoric,
    Epistemic,
}

impl Role {
    pub fn name(self) -> &'static str {
        match self {
            Role::Drift => "drift",
            Role::Aleatoric => "aleatoric",
            Role::Epistemic => "epistemic",
        }
    }

    fn tag(self) -> u64 {
        (self as u64 + 1) << 40
    }

    pub(crate) fn init_stream(self, seed: u64, net: usize) -> rand_chacha::ChaCha20Rng {
        rng::stream(seed, domain::NET_INIT | self.tag() | net as u64)
    }
}

/// Everything needed to continue training exactly where it stopped.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainState {
    pub role: Role,
    pub seed: u64,
    pub epoch: usize,
    pub params: Vec<f64>,
    pub velocity: Vec<f64>,
    /// Mean minibatch loss of each completed epoch.
    pub losses: Vec<f64>,
}

impl TrainState {
    pub fn new(role: Role, seed: u64, nets: &[TwoLayerNet]) -> Self {
        let params = bundle_params(nets);
        TrainState { role, seed, epoch: 0, velocity: vec![0.0; params.len()], params, losses: Vec::new() }
    }
}

/// Runs SGD epochs until `state.epoch == until`, then writes the parameters
/// back into `nets`.
///
/// Each epoch visits the rows in an order drawn from a stream keyed by the
/// seed, role and epoch number, so stopping and resuming from a saved state
/// reproduces an uninterrupted run bit for bit.
pub fn train_epochs<O: Objective + ?Sized>(
    objective: &O,
    nets: &mut [TwoLayerNet],
    cfg: &SgdConfig,
    state: &mut TrainState,
    until: usize,
) -> Result<()> {
    cfg.validate()?;
    let n = objective.rows();
    if n == 0 {
        return Err(Error::InvalidArgument(format!("no rows to train the {} nets on", state.role.name())));
    }
    if state.params.len() != bundle_len(nets) || state.velocity.len() != state.params.len() {
        return Err(Error::DimensionMismatch { expected: bundle_len(nets), got: state.params.len() });
    }
    set_bundle_params(nets, &state.params)?;
    let batch = cfg.batch_size(n);
    let mut order: Vec<usize> = (0..n).collect();
    while state.epoch < until.min(cfg.iterations) {
        let mut r = rng::stream(state.seed, domain::MINIBATCH | state.role.tag() | state.epoch as u64);
        order.iter_mut().enumerate().for_each(|(i, o)| *o = i);
        if batch < n {
            order.shuffle(&mut r);
        }
        let mut total = 0.0;
        let mut batches = 0usize;
        for rows in order.chunks(batch) {
            let (loss, grad) = batch_gradient(objective, nets, Some(rows));
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::Divergence { net: state.role.name(), iteration: state.epoch + 1 });
            }
            sgd_step(&mut state.params, &grad, &mut state.velocity, cfg);
            if state.params.iter().any(|p| !p.is_finite()) {
                return Err(Error::Divergence { net: state.role.name(), iteration: state.epoch + 1 });
            }
            set_bundle_params(nets, &state.params)?;
            total += loss;
            batches += 1;
        }
        state.epoch += 1;
        state.losses.push(total / batches as f64);
        log::debug!("{} epoch {}: loss {:.6e}", state.role.name(), state.epoch, total / batches as f64);
    }
    Ok(())
}
