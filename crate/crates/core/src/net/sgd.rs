use std::fmt;

use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Minibatch {
    Full,
    Size(usize),
}

impl Serialize for Minibatch {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Minibatch::Full => s.serialize_str("full"),
            Minibatch::Size(n) => s.serialize_u64(*n as u64),
        }
    }
}

impl<'de> Deserialize<'de> for Minibatch {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = Minibatch;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("\"full\" or a positive integer")
            }
            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Minibatch, E> {
                match v {
                    "full" => Ok(Minibatch::Full),
                    _ => v
                        .parse::<u64>()
                        .map_err(|_| E::invalid_value(de::Unexpected::Str(v), &self))
                        .and_then(|n| self.visit_u64(n)),
                }
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Minibatch, E> {
                if v == 0 {
                    return Err(E::invalid_value(de::Unexpected::Unsigned(0), &self));
                }
                Ok(Minibatch::Size(v as usize))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Minibatch, E> {
                u64::try_from(v)
                    .map_err(|_| E::invalid_value(de::Unexpected::Signed(v), &self))
                    .and_then(|n| self.visit_u64(n))
            }
        }
        d.deserialize_any(V)
    }
}

/// SGD with classical momentum and coupled weight decay.
///
/// `iterations` counts passes over the training rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SgdConfig {
    pub learning_rate: f64,
    #[serde(default = "default_momentum")]
    pub momentum: f64,
    #[serde(default = "default_weight_decay")]
    pub weight_decay: f64,
    pub iterations: usize,
    #[serde(default = "default_minibatch")]
    pub minibatch: Minibatch,
}

fn default_momentum() -> f64 {
    0.9
}

fn default_weight_decay() -> f64 {
    5e-5
}

fn default_minibatch() -> Minibatch {
    Minibatch::Full
}

impl SgdConfig {
    pub fn new(learning_rate: f64, iterations: usize) -> Self {
        SgdConfig {
            learning_rate,
            momentum: default_momentum(),
            weight_decay: default_weight_decay(),
            iterations,
            minibatch: Minibatch::Full,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning_rate must be positive, got {}", self.learning_rate)));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config(format!("momentum must lie in [0, 1), got {}", self.momentum)));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::Config(format!("weight_decay must be nonnegative, got {}", self.weight_decay)));
        }
        if self.iterations == 0 {
            return Err(Error::Config("iterations must be positive".into()));
        }
        Ok(())
    }

    pub fn batch_size(&self, rows: usize) -> usize {
        match self.minibatch {
            Minibatch::Full => rows,
            Minibatch::Size(n) => n.min(rows),
        }
    }
}

/// `v ← μv + g + λθ`, `θ ← θ − lr·v`.
pub fn sgd_step(params: &mut [f64], grad: &[f64], velocity: &mut [f64], cfg: &SgdConfig) {
    assert_eq!(params.len(), grad.len());
    assert_eq!(params.len(), velocity.len());
    for ((p, g), v) in params.iter_mut().zip(grad).zip(velocity.iter_mut()) {
        *v = cfg.momentum * *v + g + cfg.weight_decay * *p;
        *p -= cfg.learning_rate * *v;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(lr: f64, momentum: f64, weight_decay: f64) -> SgdConfig {
        SgdConfig { learning_rate: lr, momentum, weight_decay, iterations: 1, minibatch: Minibatch::Full }
    }

    #[test]
    fn vanilla_step() {
        let mut p = vec![1.0, -2.0];
        let mut v = vec![0.0; 2];
        sgd_step(&mut p, &[0.5, 1.0], &mut v, &cfg(0.1, 0.0, 0.0));
        assert_eq!(p, vec![1.0 - 0.05, -2.0 - 0.1]);
    }

    #[test]
    fn zero_gradient_is_fixed_point() {
        let mut p = vec![3.0, 4.0];
        let mut v = vec![0.0; 2];
        sgd_step(&mut p, &[0.0, 0.0], &mut v, &cfg(0.1, 0.9, 0.0));
        assert_eq!(p, vec![3.0, 4.0]);
    }

    #[test]
    fn momentum_two_steps() {
        let (lr, g) = (0.01, 2.0);
        let mut p = vec![0.0];
        let mut v = vec![0.0];
        let c = cfg(lr, 0.9, 0.0);
        sgd_step(&mut p, &[g], &mut v, &c);
        sgd_step(&mut p, &[g], &mut v, &c);
        // first step moves lr·g, second lr·(0.9g + g)
        let mut expected = 0.0;
        let mut vel = 0.0;
        for _ in 0..2 {
            vel = 0.9 * vel + g;
            expected -= lr * vel;
        }
        assert!((p[0] - expected).abs() < 1e-15);
        assert!((p[0] + lr * g * 2.9).abs() < 1e-15);
    }

    #[test]
    fn weight_decay_is_coupled() {
        let mut p = vec![2.0];
        let mut v = vec![0.0];
        sgd_step(&mut p, &[0.0], &mut v, &cfg(0.5, 0.0, 0.1));
        assert_eq!(v[0], 0.2);
        assert_eq!(p[0], 1.9);
    }

    #[test]
    fn minibatch_parses_both_forms() {
        let c: SgdConfig = toml::from_str("learning_rate = 0.1\niterations = 3\nminibatch = \"full\"").unwrap();
        assert_eq!(c.minibatch, Minibatch::Full);
        let c: SgdConfig = toml::from_str("learning_rate = 0.1\niterations = 3\nminibatch = 64").unwrap();
        assert_eq!(c.minibatch, Minibatch::Size(64));
        assert!(toml::from_str::<SgdConfig>("learning_rate = 0.1\niterations = 3\nminibatch = 0").is_err());
        assert!(toml::from_str::<SgdConfig>("learning_rate = 0.1\niterations = 3\nbogus = 1").is_err());
    }

    #[test]
    fn validation_rejects_bad_momentum() {
        assert!(cfg(0.1, 1.0, 0.0).validate().is_err());
        assert!(cfg(0.0, 0.5, 0.0).validate().is_err());
        assert!(cfg(0.1, 0.5, 0.0).validate().is_ok());
    }
}
