use super::activation::Activation;
use super::two_layer::TwoLayerNet;
use crate::error::{Error, Result};

const TAIL_TOL: f64 = 1e-10;
const QUAD_TOL: f64 = 1e-12;
const MAX_DEPTH: u32 = 60;

/// Activation constants entering the Barron approximation bound.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ActivationConstant {
    /// `∫|σ''(x)|(|x|+1) dx`
    pub gamma0: f64,
    /// `inf_x |σ(x)| + (|x|+2)|σ'(x)|`
    pub inf_u: f64,
    pub gamma: f64,
    /// `(γ + min(|σ'(+∞)|, |σ'(-∞)|) + |σ(0)|)²`
    pub c_sigma: f64,
}

pub fn activation_constant(act: Activation) -> Result<ActivationConstant> {
    let gamma0 = match act {
        // distributional second derivative: unit point mass at 0, weight |0|+1
        Activation::Relu => 1.0,
        _ => second_derivative_moment(act)?,
    };
    let inf_u = infimum_u(act);
    let gamma = gamma0 + inf_u;
    let [_, _, d_pos, d_neg] = act.limits();
    let c_sigma = (gamma + d_pos.abs().min(d_neg.abs()) + act.value(0.0).abs()).powi(2);
    Ok(ActivationConstant { gamma0, inf_u, gamma, c_sigma })
}

/// Barron path norm `Σ|aᵢ|(‖wᵢ‖₁ + |bᵢ| + 1)`, an upper bound on the Barron
/// norm of the function the net represents.
pub fn path_norm(net: &TwoLayerNet) -> f64 {
    net.outer_weights()
        .iter()
        .zip(net.hidden_biases())
        .enumerate()
        .map(|(i, (a, b))| {
            let l1: f64 = net.hidden_weights(i).iter().map(|w| w.abs()).sum();
            a.abs() * (l1 + b.abs() + 1.0)
        })
        .sum()
}

fn second_derivative_moment(act: Activation) -> Result<f64> {
    let mut bound = 8.0;
    while act.second_derivative_tail(bound) * 2.0 >= TAIL_TOL {
        bound *= 2.0;
        if bound > 1e6 {
            return Err(Error::QuadratureFailure { tol: TAIL_TOL });
        }
    }
    let f = |x: f64| act.second_derivative(x).abs() * (x.abs() + 1.0);
    // |σ''| has a kink at 0 and is smooth elsewhere
    let left = adaptive_simpson(&f, -bound, 0.0, QUAD_TOL)?;
    let right = adaptive_simpson(&f, 0.0, bound, QUAD_TOL)?;
    Ok(left + right)
}

/// Adaptive Simpson quadrature with Richardson correction.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> Result<f64> {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, MAX_DEPTH).ok_or(Error::QuadratureFailure { tol })
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> Option<f64> {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if delta.abs() <= 15.0 * tol {
        return Some(left + right + delta / 15.0);
    }
    if depth == 0 {
        return None;
    }
    let l = simpson_step(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)?;
    let r = simpson_step(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)?;
    Some(l + r)
}

fn u(act: Activation, x: f64) -> f64 {
    act.value(x).abs() + (x.abs() + 2.0) * act.derivative(x).abs()
}

/// Infimum of `u` over the real line, including its limits at `±∞`.
fn infimum_u(act: Activation) -> f64 {
    let [s_pos, s_neg, d_pos, d_neg] = act.limits();
    // (|x|+2)|σ'(x)| → ∞ when σ' has a nonzero limit, → 0 for the
    // exponentially decaying derivatives of tanh and sigmoid
    let tail = |s: f64, d: f64| if d != 0.0 { f64::INFINITY } else { s.abs() };
    let at_infinity = tail(s_pos, d_pos).min(tail(s_neg, d_neg));

    let (lo, hi, n) = (-40.0, 40.0, 8001);
    let step = (hi - lo) / (n - 1) as f64;
    let (best_i, best) = (0..n)
        .map(|i| (i, u(act, lo + i as f64 * step)))
        .fold((0, f64::INFINITY), |acc, (i, v)| if v < acc.1 { (i, v) } else { acc });
    let centre = lo + best_i as f64 * step;
    let (_, refined) = golden_section(|x| u(act, x), centre - step, centre + step, 1e-12);
    best.min(refined).min(at_infinity)
}

/// `(argmin, min)` of a unimodal function on `[a, b]` by golden-section search.
pub fn golden_section<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol * (1.0 + a.abs().max(b.abs())) {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    if fc <= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}
