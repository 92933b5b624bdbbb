use crate::net::{logistic, TwoLayerNet};

use super::train::{bundle_offsets, Objective};
use super::windows::{Normalizer, Window};

/// `f_j(t, window) = drift_scale_j · net_j(encode(t, window))`.
pub fn drift_into(nets: &[TwoLayerNet], norm: &Normalizer, time: f64, window: &[f64], enc: &mut [f64], out: &mut [f64]) {
    norm.encode(time, window, enc);
    for (j, (o, net)) in out.iter_mut().zip(nets).enumerate() {
        *o = norm.drift_scale[j] * net.eval(enc);
    }
}

/// Euler rollout of the drift alone; returns `x̂_1..x̂_N` flattened.
///
/// Predictions re-enter the lag window once the horizon exceeds the history.
pub fn drift_rollout(
    nets: &[TwoLayerNet],
    norm: &Normalizer,
    time: f64,
    window: &[f64],
    horizon: usize,
    dt: f64,
) -> Vec<f64> {
    let d = norm.dim();
    let p = window.len() / d;
    let mut z = Vec::with_capacity(window.len() + horizon * d);
    z.extend_from_slice(window);
    let mut enc = vec![0.0; 1 + window.len()];
    let mut f = vec![0.0; d];
    for s in 0..horizon {
        drift_into(nets, norm, time + s as f64 * dt, &z[s * d..(s + p) * d], &mut enc, &mut f);
        let cur = (s + p - 1) * d;
        for j in 0..d {
            let next = z[cur + j] + f[j] * dt;
            z.push(next);
        }
    }
    z.split_off(window.len())
}

/// Mean squared error of the `N`-step Euler rollout at its endpoint, with
/// gradients through every step of the rollout.
///
/// The loss is divided by `(s̄·NΔt)²`, `s̄` the mean drift scale, so that its
/// magnitude does not depend on the units of the data.
pub struct DriftObjective<'a> {
    pub rows: &'a [Window],
    pub norm: &'a Normalizer,
    pub horizon: usize,
    pub dt: f64,
}

impl DriftObjective<'_> {
    fn loss_scale(&self) -> f64 {
        let s = self.norm.drift_scale.iter().sum::<f64>() / self.norm.dim() as f64;
        (s * self.horizon as f64 * self.dt).powi(-2)
    }
}

impl Objective for DriftObjective<'_> {
    fn rows(&self) -> usize {
        self.rows.len()
    }

    fn row_loss(&self, nets: &[TwoLayerNet], i: usize, grad: &mut [f64]) -> f64 {
        let w = &self.rows[i];
        let d = self.norm.dim();
        let p = w.lags.len() / d;
        let n = self.horizon;
        let in_dim = 1 + d * p;
        let offsets = bundle_offsets(nets);

        let mut z = Vec::with_capacity((p + n) * d);
        z.extend_from_slice(&w.lags);
        let mut encs = vec![0.0; n * in_dim];
        let mut pres = vec![Vec::new(); n * d];
        let mut next = vec![0.0; d];
        for s in 0..n {
            let enc = &mut encs[s * in_dim..(s + 1) * in_dim];
            self.norm.encode(w.time + s as f64 * self.dt, &z[s * d..(s + p) * d], enc);
            let cur = (s + p - 1) * d;
            for j in 0..d {
                let y = nets[j].eval_traced(enc, &mut pres[s * d + j]);
                next[j] = z[cur + j] + self.norm.drift_scale[j] * y * self.dt;
            }
            z.extend_from_slice(&next);
        }

        let c = self.loss_scale();
        let last = (p + n - 1) * d;
        let mut adj = vec![0.0; (p + n) * d];
        let mut loss = 0.0;
        for j in 0..d {
            let err = z[last + j] - w.target[j];
            loss += c * err * err;
            adj[last + j] = 2.0 * c * err;
        }
        let mut input_grad = vec![0.0; in_dim];
        for s in (0..n).rev() {
            let (out, cur) = ((s + p) * d, (s + p - 1) * d);
            let enc = &encs[s * in_dim..(s + 1) * in_dim];
            // adjoints of observed states are never used
            let through_inputs = s > 0;
            input_grad.iter_mut().for_each(|g| *g = 0.0);
            for j in 0..d {
                let a = adj[out + j];
                adj[cur + j] += a;
                let net = &nets[j];
                let block = &mut grad[offsets[j]..offsets[j] + net.param_count()];
                let ig = through_inputs.then_some(&mut input_grad[..]);
                net.backward(enc, &pres[s * d + j], a * self.dt * self.norm.drift_scale[j], block, ig);
            }
            if through_inputs {
                for l in 0..d * p {
                    adj[s * d + l] += input_grad[1 + l] / self.norm.state_std[l % d];
                }
            }
        }
        loss
    }
}

/// Encoded inputs `(t_k + iΔt, window_k)` for `i = 0..N`, row-major.
pub fn aleatoric_inputs(rows: &[Window], norm: &Normalizer, horizon: usize, dt: f64) -> Vec<f64> {
    let in_dim = 1 + rows.first().map_or(0, |w| w.lags.len());
    let mut out = vec![0.0; rows.len() * horizon * in_dim];
    for (r, w) in rows.iter().enumerate() {
        for s in 0..horizon {
            let at = (r * horizon + s) * in_dim;
            norm.encode(w.time + s as f64 * dt, &w.lags, &mut out[at..at + in_dim]);
        }
    }
    out
}

/// Squared error between the accumulated variance `V_j·Δt` and `e_j²`.
///
/// `g_j = scale_j · h_j` and `V_j = Σ_{i<N} g_j(t_k + iΔt, window_k)²`. Each
/// coordinate's term is divided by `(mean e_j²)²`; coordinates have separate
/// nets, so this only rescales each net's gradient.
pub struct AleatoricObjective<'a> {
    pub inputs: &'a [f64],
    pub residuals: &'a [Vec<f64>],
    pub scale: &'a [f64],
    pub horizon: usize,
    pub dt: f64,
    pub mean_square: Vec<f64>,
}

impl<'a> AleatoricObjective<'a> {
    pub fn new(inputs: &'a [f64], residuals: &'a [Vec<f64>], scale: &'a [f64], horizon: usize, dt: f64) -> Self {
        let d = scale.len();
        let n = residuals.len().max(1) as f64;
        let mean_square = (0..d)
            .map(|j| {
                let m = residuals.iter().map(|e| e[j] * e[j]).sum::<f64>() / n;
                if m > 0.0 { m } else { 1.0 }
            })
            .collect();
        AleatoricObjective { inputs, residuals, scale, horizon, dt, mean_square }
    }
}

impl Objective for AleatoricObjective<'_> {
    fn rows(&self) -> usize {
        self.residuals.len()
    }

    fn row_loss(&self, nets: &[TwoLayerNet], i: usize, grad: &mut [f64]) -> f64 {
        let in_dim = nets[0].input_dim();
        let n = self.horizon;
        let offsets = bundle_offsets(nets);
        let mut pres = vec![Vec::new(); n];
        let mut hs = vec![0.0; n];
        let mut loss = 0.0;
        for (j, net) in nets.iter().enumerate() {
            let q = self.scale[j];
            let mut v = 0.0;
            for s in 0..n {
                let at = (i * n + s) * in_dim;
                hs[s] = net.eval_traced(&self.inputs[at..at + in_dim], &mut pres[s]);
                v += (q * hs[s]).powi(2);
            }
            let e2 = self.residuals[i][j].powi(2);
            let m2 = self.mean_square[j].powi(2);
            let diff = v * self.dt - e2;
            loss += diff * diff / m2;
            let outer = 2.0 * diff / m2 * self.dt;
            let block = &mut grad[offsets[j]..offsets[j] + net.param_count()];
            for s in 0..n {
                let at = (i * n + s) * in_dim;
                net.backward(&self.inputs[at..at + in_dim], &pres[s], outer * 2.0 * q * q * hs[s], block, None);
            }
        }
        loss
    }
}

/// Mean classifier probability on in-distribution rows minus the mean on
/// out-of-distribution rows.
///
/// Row weights are `n/n_id` and `-n/n_ood`, so the mean over all rows equals
/// the difference of class means. With several classifiers their losses add.
pub struct EpistemicObjective<'a> {
    pub inputs: &'a [Vec<f64>],
    pub weights: Vec<f64>,
}

impl<'a> EpistemicObjective<'a> {
    /// `inputs` holds the in-distribution rows followed by `n_ood` OOD rows.
    pub fn new(inputs: &'a [Vec<f64>], n_ood: usize) -> Self {
        let n = inputs.len() as f64;
        let n_id = inputs.len() - n_ood;
        let weights = (0..inputs.len())
            .map(|i| if i < n_id { n / n_id as f64 } else { -n / n_ood as f64 })
            .collect();
        EpistemicObjective { inputs, weights }
    }
}

impl Objective for EpistemicObjective<'_> {
    fn rows(&self) -> usize {
        self.inputs.len()
    }

    fn row_loss(&self, nets: &[TwoLayerNet], i: usize, grad: &mut [f64]) -> f64 {
        let x = &self.inputs[i];
        let w = self.weights[i];
        let mut pre = Vec::new();
        let mut at = 0;
        let mut loss = 0.0;
        for net in nets {
            let prob = logistic(net.eval_traced(x, &mut pre));
            loss += w * prob;
            let len = net.param_count();
            net.backward(x, &pre, w * prob * (1.0 - prob), &mut grad[at..at + len], None);
            at += len;
        }
        loss
    }
}
