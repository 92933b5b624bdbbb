use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::activation::Activation;
use crate::error::{Error, Result};

/// Rows per parallel work unit. Partial sums are reduced in chunk order, so
/// results do not depend on the number of worker threads.
pub const REDUCTION_CHUNK: usize = 256;

/// Scalar-output two-layer network `x ↦ Σᵢ aᵢ σ(wᵢᵀx + bᵢ) (+ c)`.
///
/// Parameters flatten as `a (m) | w (m × n, row-major) | b (m) | c`, the
/// layout shared by [`TwoLayerNet::params`], gradients and SGD velocity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "NetRepr", into = "NetRepr")]
pub struct TwoLayerNet {
    width: usize,
    input_dim: usize,
    activation: Activation,
    a: Vec<f64>,
    w: Vec<f64>,
    b: Vec<f64>,
    output_bias: Option<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetRepr {
    width: usize,
    input_dim: usize,
    activation: Activation,
    a: Vec<f64>,
    w: Vec<Vec<f64>>,
    b: Vec<f64>,
    output_bias: Option<f64>,
}

impl TryFrom<NetRepr> for TwoLayerNet {
    type Error = Error;

    fn try_from(r: NetRepr) -> Result<Self> {
        if r.w.len() != r.width {
            return Err(Error::DimensionMismatch { expected: r.width, got: r.w.len() });
        }
        let mut w = Vec::with_capacity(r.width * r.input_dim);
        for row in &r.w {
            if row.len() != r.input_dim {
                return Err(Error::DimensionMismatch { expected: r.input_dim, got: row.len() });
            }
            w.extend_from_slice(row);
        }
        TwoLayerNet::new(r.activation, r.input_dim, r.a, w, r.b, r.output_bias)
    }
}

impl From<TwoLayerNet> for NetRepr {
    fn from(n: TwoLayerNet) -> Self {
        let w = n.w.chunks(n.input_dim).map(<[f64]>::to_vec).collect();
        NetRepr {
            width: n.width,
            input_dim: n.input_dim,
            activation: n.activation,
            a: n.a,
            w,
            b: n.b,
            output_bias: n.output_bias,
        }
    }
}

/// Outer loss applied to the scalar net output.
pub enum Loss<'a> {
    /// `(y - target)²`
    Mse,
    /// Caller-supplied `(output, target) -> (loss, dloss/doutput)`.
    Adjoint(&'a (dyn Fn(f64, f64) -> (f64, f64) + Sync)),
}

impl TwoLayerNet {
    pub fn new(
        activation: Activation,
        input_dim: usize,
        a: Vec<f64>,
        w: Vec<f64>,
        b: Vec<f64>,
        output_bias: Option<f64>,
    ) -> Result<Self> {
        let width = a.len();
        if width == 0 || input_dim == 0 {
            return Err(Error::InvalidArgument("width and input_dim must be positive".into()));
        }
        if b.len() != width {
            return Err(Error::DimensionMismatch { expected: width, got: b.len() });
        }
        if w.len() != width * input_dim {
            return Err(Error::DimensionMismatch { expected: width * input_dim, got: w.len() });
        }
        let net = TwoLayerNet { width, input_dim, activation, a, w, b, output_bias };
        if !net.params().iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidArgument("network parameters must be finite".into()));
        }
        Ok(net)
    }

    /// Fan-in uniform initialization: hidden weights and biases from
    /// `U(-1/√n, 1/√n)`, outer weights from `U(-1/√m, 1/√m)`, output bias 0.
    pub fn init<R: Rng + ?Sized>(
        width: usize,
        input_dim: usize,
        activation: Activation,
        with_output_bias: bool,
        rng: &mut R,
    ) -> Self {
        assert!(width > 0 && input_dim > 0);
        let hidden = 1.0 / (input_dim as f64).sqrt();
        let outer = 1.0 / (width as f64).sqrt();
        let w = (0..width * input_dim).map(|_| rng.random_range(-hidden..hidden)).collect();
        let b = (0..width).map(|_| rng.random_range(-hidden..hidden)).collect();
        let a = (0..width).map(|_| rng.random_range(-outer..outer)).collect();
        TwoLayerNet {
            width,
            input_dim,
            activation,
            a,
            w,
            b,
            output_bias: with_output_bias.then_some(0.0),
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn outer_weights(&self) -> &[f64] {
        &self.a
    }

    pub fn hidden_weights(&self, unit: usize) -> &[f64] {
        &self.w[unit * self.input_dim..(unit + 1) * self.input_dim]
    }

    pub fn hidden_biases(&self) -> &[f64] {
        &self.b
    }

    pub fn output_bias(&self) -> Option<f64> {
        self.output_bias
    }

    /// Multiplies the represented function by `factor` exactly in the outer layer.
    pub fn scale_output(&mut self, factor: f64) {
        self.a.iter_mut().for_each(|a| *a *= factor);
        if let Some(c) = self.output_bias.as_mut() {
            *c *= factor;
        }
    }

    pub fn param_count(&self) -> usize {
        self.width * (self.input_dim + 2) + usize::from(self.output_bias.is_some())
    }

    pub fn params(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.param_count());
        p.extend_from_slice(&self.a);
        p.extend_from_slice(&self.w);
        p.extend_from_slice(&self.b);
        p.extend(self.output_bias);
        p
    }

    pub fn set_params(&mut self, p: &[f64]) -> Result<()> {
        if p.len() != self.param_count() {
            return Err(Error::DimensionMismatch { expected: self.param_count(), got: p.len() });
        }
        let (m, n) = (self.width, self.input_dim);
        self.a.copy_from_slice(&p[..m]);
        self.w.copy_from_slice(&p[m..m + m * n]);
        self.b.copy_from_slice(&p[m + m * n..2 * m + m * n]);
        if let Some(c) = self.output_bias.as_mut() {
            *c = p[2 * m + m * n];
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.input_dim {
            return Err(Error::DimensionMismatch { expected: self.input_dim, got: x.len() });
        }
        Ok(self.eval(x))
    }

    /// Forward pass without the dimension check.
    #[inline]
    pub fn eval(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.input_dim);
        let mut y = self.output_bias.unwrap_or(0.0);
        for (i, row) in self.w.chunks_exact(self.input_dim).enumerate() {
            let z = dot(row, x) + self.b[i];
            y += self.a[i] * self.activation.value(z);
        }
        y
    }

    /// Forward pass that records pre-activations for a later [`Self::backward`].
    pub fn eval_traced(&self, x: &[f64], pre: &mut Vec<f64>) -> f64 {
        pre.clear();
        let mut y = self.output_bias.unwrap_or(0.0);
        for (i, row) in self.w.chunks_exact(self.input_dim).enumerate() {
            let z = dot(row, x) + self.b[i];
            pre.push(z);
            y += self.a[i] * self.activation.value(z);
        }
        y
    }

    /// Reverse-mode pass for one input given `∂L/∂y`.
    ///
    /// Adds the parameter gradient into `grad` (flat layout) and, when
    /// requested, the input gradient into `input_grad`.
    pub fn backward(
        &self,
        x: &[f64],
        pre: &[f64],
        adjoint: f64,
        grad: &mut [f64],
        mut input_grad: Option<&mut [f64]>,
    ) {
        let (m, n) = (self.width, self.input_dim);
        debug_assert_eq!(grad.len(), self.param_count());
        let (ga, rest) = grad.split_at_mut(m);
        let (gw, rest) = rest.split_at_mut(m * n);
        let (gb, gc) = rest.split_at_mut(m);
        for i in 0..m {
            let (s, ds) = self.activation.value_and_derivative(pre[i]);
            ga[i] += adjoint * s;
            let dz = adjoint * self.a[i] * ds;
            if dz == 0.0 {
                continue;
            }
            gb[i] += dz;
            let row = &self.w[i * n..(i + 1) * n];
            for (g, &xi) in gw[i * n..(i + 1) * n].iter_mut().zip(x) {
                *g += dz * xi;
            }
            if let Some(ig) = input_grad.as_deref_mut() {
                for (g, &wi) in ig.iter_mut().zip(row) {
                    *g += dz * wi;
                }
            }
        }
        if let Some(c) = gc.first_mut() {
            *c += adjoint;
        }
    }

    /// Mean loss over `batch` and its exact gradient with respect to all parameters.
    pub fn gradient(&self, batch: &[(Vec<f64>, f64)], loss: &Loss<'_>) -> Result<(f64, Vec<f64>)> {
        if batch.is_empty() {
            return Err(Error::InvalidArgument("gradient of an empty batch".into()));
        }
        if let Some((x, _)) = batch.iter().find(|(x, _)| x.len() != self.input_dim) {
            return Err(Error::DimensionMismatch { expected: self.input_dim, got: x.len() });
        }
        let np = self.param_count();
        let parts: Vec<(f64, Vec<f64>)> = batch
            .par_chunks(REDUCTION_CHUNK)
            .map(|chunk| {
                let mut g = vec![0.0; np];
                let mut pre = Vec::with_capacity(self.width);
                let mut total = 0.0;
                for (x, target) in chunk {
                    let y = self.eval_traced(x, &mut pre);
                    let (l, dl) = match loss {
                        Loss::Mse => ((y - target).powi(2), 2.0 * (y - target)),
                        Loss::Adjoint(f) => f(y, *target),
                    };
                    total += l;
                    self.backward(x, &pre, dl, &mut g, None);
                }
                (total, g)
            })
            .collect();
        let (total, mut grad) = reduce_in_order(parts, np);
        let scale = 1.0 / batch.len() as f64;
        grad.iter_mut().for_each(|g| *g *= scale);
        Ok((total * scale, grad))
    }
}

/// Sums `(loss, gradient)` partials in their given order.
pub fn reduce_in_order(parts: Vec<(f64, Vec<f64>)>, len: usize) -> (f64, Vec<f64>) {
    let mut total = 0.0;
    let mut grad = vec![0.0; len];
    for (l, g) in parts {
        total += l;
        for (acc, v) in grad.iter_mut().zip(&g) {
            *acc += v;
        }
    }
    (total, grad)
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn net(act: Activation, a: Vec<f64>, w: Vec<f64>, b: Vec<f64>) -> TwoLayerNet {
        let n = w.len() / a.len();
        TwoLayerNet::new(act, n, a, w, b, None).unwrap()
    }

    #[test]
    fn zero_weights_give_zero_for_tanh() {
        let n = net(Activation::default(), vec![1.0], vec![0.0, 0.0], vec![0.0]);
        assert_eq!(n.forward(&[3.0, -7.0]).unwrap(), 0.0);
    }

    #[test]
    fn scalar_evaluation() {
        let n = net(Activation::default(), vec![2.0], vec![1.0, 0.0], vec![0.0]);
        let y = n.forward(&[0.5, 9.0]).unwrap();
        assert!((y - 2.0 * 0.5f64.tanh()).abs() < 1e-15);
        assert!((y - 0.924_234_314_520_019_5).abs() < 1e-12);
    }

    #[test]
    fn identical_units_with_opposite_weights_cancel() {
        let n = net(Activation::default(), vec![1.0, -1.0], vec![0.3, -0.2, 0.3, -0.2], vec![0.1, 0.1]);
        for x in [[0.0, 0.0], [1.0, 2.0], [-4.0, 0.5]] {
            assert_eq!(n.forward(&x).unwrap(), 0.0);
        }
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let n = net(Activation::Relu, vec![1.0], vec![1.0, 1.0], vec![0.0]);
        assert!(matches!(n.forward(&[1.0]), Err(Error::DimensionMismatch { expected: 2, got: 1 })));
    }

    #[test]
    fn zero_residual_batch_has_zero_gradient() {
        let n = TwoLayerNet::init(3, 2, Activation::default(), true, &mut rng::stream(1, 0));
        let batch: Vec<_> = [[0.1, 0.2], [1.0, -1.0]]
            .iter()
            .map(|x| (x.to_vec(), n.eval(x)))
            .collect();
        let (l, g) = n.gradient(&batch, &Loss::Mse).unwrap();
        assert_eq!(l, 0.0);
        assert!(g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn dead_relu_unit_has_zero_gradient() {
        let n = net(Activation::Relu, vec![1.5], vec![1.0, 1.0], vec![-5.0]);
        let (_, g) = n.gradient(&[(vec![1.0, 1.0], 3.0)], &Loss::Mse).unwrap();
        assert!(g.iter().all(|&v| v == 0.0), "{g:?}");
    }

    #[test]
    fn params_roundtrip_through_flat_layout() {
        let mut n = TwoLayerNet::init(4, 3, Activation::default(), true, &mut rng::stream(2, 0));
        let p: Vec<f64> = (0..n.param_count()).map(|i| i as f64 * 0.1).collect();
        n.set_params(&p).unwrap();
        assert_eq!(n.params(), p);
        assert_eq!(n.hidden_weights(1), &p[4 + 3..4 + 6]);
        assert!(n.set_params(&p[1..]).is_err());
    }

    #[test]
    fn json_roundtrip_is_value_exact() {
        let n = TwoLayerNet::init(5, 3, Activation::Sigmoid { lambda: 0.3 }, true, &mut rng::stream(3, 0));
        let s = serde_json::to_string(&n).unwrap();
        let back: TwoLayerNet = serde_json::from_str(&s).unwrap();
        assert_eq!(back, n);
        let v: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert_eq!(v["w"].as_array().unwrap().len(), 5);
        assert_eq!(v["w"][0].as_array().unwrap().len(), 3);
    }

    #[test]
    fn rejects_non_finite_parameters() {
        let r = TwoLayerNet::new(Activation::Relu, 1, vec![f64::NAN], vec![1.0], vec![0.0], None);
        assert!(r.is_err());
    }
}
