use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hidden-unit nonlinearity of a two-layer net.
///
/// Serialized as `{"kind": "tanh", "param": 1.0}`. The parameter is the
/// slope `α` of `tanh(αz)` or `λ` of `1/(1+e^{-λz})`; it is ignored for relu.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ActivationRepr", into = "ActivationRepr")]
pub enum Activation {
    Tanh { alpha: f64 },
    Sigmoid { lambda: f64 },
    Relu,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ActivationRepr {
    kind: String,
    #[serde(default = "one")]
    param: f64,
}

fn one() -> f64 {
    1.0
}

impl TryFrom<ActivationRepr> for Activation {
    type Error = Error;

    fn try_from(r: ActivationRepr) -> Result<Self> {
        match r.kind.as_str() {
            "tanh" => Activation::tanh(r.param),
            "sigmoid" => Activation::sigmoid(r.param),
            "relu" => Ok(Activation::Relu),
            other => Err(Error::Config(format!("unknown activation kind `{other}`"))),
        }
    }
}

impl From<Activation> for ActivationRepr {
    fn from(a: Activation) -> Self {
        let (kind, param) = match a {
            Activation::Tanh { alpha } => ("tanh", alpha),
            Activation::Sigmoid { lambda } => ("sigmoid", lambda),
            Activation::Relu => ("relu", 1.0),
        };
        ActivationRepr { kind: kind.to_string(), param }
    }
}

impl Default for Activation {
    fn default() -> Self {
        Activation::Tanh { alpha: 1.0 }
    }
}

impl Activation {
    pub fn tanh(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidArgument(format!("tanh slope must be positive, got {alpha}")));
        }
        Ok(Activation::Tanh { alpha })
    }

    pub fn sigmoid(lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidArgument(format!("sigmoid slope must be positive, got {lambda}")));
        }
        Ok(Activation::Sigmoid { lambda })
    }

    #[inline]
    pub fn value(&self, z: f64) -> f64 {
        match *self {
            Activation::Tanh { alpha } => (alpha * z).tanh(),
            Activation::Sigmoid { lambda } => logistic(lambda * z),
            Activation::Relu => z.max(0.0),
        }
    }

    #[inline]
    pub fn derivative(&self, z: f64) -> f64 {
        match *self {
            Activation::Tanh { alpha } => {
                let t = (alpha * z).tanh();
                alpha * (1.0 - t * t)
            }
            Activation::Sigmoid { lambda } => {
                let s = logistic(lambda * z);
                lambda * s * (1.0 - s)
            }
            // Subgradient 0 at the kink.
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Value and first derivative in one evaluation.
    #[inline]
    pub fn value_and_derivative(&self, z: f64) -> (f64, f64) {
        match *self {
            Activation::Tanh { alpha } => {
                let t = (alpha * z).tanh();
                (t, alpha * (1.0 - t * t))
            }
            Activation::Sigmoid { lambda } => {
                let s = logistic(lambda * z);
                (s, lambda * s * (1.0 - s))
            }
            Activation::Relu => {
                if z > 0.0 {
                    (z, 1.0)
                } else {
                    (0.0, 0.0)
                }
            }
        }
    }

    /// Second derivative; relu's distributional part is handled by the
    /// caller (it is a unit point mass at 0).
    pub fn second_derivative(&self, z: f64) -> f64 {
        match *self {
            Activation::Tanh { alpha } => {
                let t = (alpha * z).tanh();
                -2.0 * alpha * alpha * t * (1.0 - t * t)
            }
            Activation::Sigmoid { lambda } => {
                let s = logistic(lambda * z);
                lambda * lambda * s * (1.0 - s) * (1.0 - 2.0 * s)
            }
            Activation::Relu => 0.0,
        }
    }

    /// Limits `σ(+∞)`, `σ(-∞)`, `σ'(+∞)`, `σ'(-∞)`.
    pub fn limits(&self) -> [f64; 4] {
        match *self {
            Activation::Tanh { .. } => [1.0, -1.0, 0.0, 0.0],
            Activation::Sigmoid { .. } => [1.0, 0.0, 0.0, 0.0],
            Activation::Relu => [f64::INFINITY, 0.0, 1.0, 0.0],
        }
    }

    /// Upper bound on `∫_B^∞ |σ''(x)|(x+1) dx`; the integrand is even for
    /// tanh and sigmoid so the same bound holds on `(-∞, -B]`.
    pub fn second_derivative_tail(&self, b: f64) -> f64 {
        match *self {
            // |σ''| ≤ 8α² e^{-2αx}
            Activation::Tanh { alpha } => {
                8.0 * alpha * alpha
                    * (-2.0 * alpha * b).exp()
                    * ((b + 1.0) / (2.0 * alpha) + 1.0 / (4.0 * alpha * alpha))
            }
            // |σ''| ≤ λ² e^{-λx}
            Activation::Sigmoid { lambda } => {
                lambda * lambda * (-lambda * b).exp() * ((b + 1.0) / lambda + 1.0 / (lambda * lambda))
            }
            Activation::Relu => 0.0,
        }
    }
}

/// Numerically stable logistic function.
#[inline]
pub fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}
