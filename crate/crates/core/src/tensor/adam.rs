use std::collections::BTreeMap;

use super::{ParamStore, Real};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 3e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        AdamConfig {
            lr,
            ..Self::default()
        }
    }
}

/// Bias-corrected Adam. Moments are kept in `f64` regardless of the
/// parameter element type.
#[derive(Clone, Debug)]
pub struct Adam {
    config: AdamConfig,
    t: u64,
    m: BTreeMap<String, Vec<f64>>,
    v: BTreeMap<String, Vec<f64>>,
}

impl Adam {
    pub fn new(config: AdamConfig) -> Result<Self> {
        let AdamConfig {
            lr,
            beta1,
            beta2,
            epsilon,
        } = config;
        if !(lr > 0.0) {
            return Err(Error::param(format!("learning rate must be positive, got {lr}")));
        }
        if !(0.0..1.0).contains(&beta1) || !(0.0..1.0).contains(&beta2) {
            return Err(Error::param("Adam decay rates must lie in [0,1)"));
        }
        if !(epsilon > 0.0) {
            return Err(Error::param("Adam epsilon must be positive"));
        }
        Ok(Adam {
            config,
            t: 0,
            m: BTreeMap::new(),
            v: BTreeMap::new(),
        })
    }

    pub fn config(&self) -> &AdamConfig {
        &self.config
    }

    /// Number of steps taken.
    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn moments(&self, name: &str) -> Option<(&[f64], &[f64])> {
        Some((self.m.get(name)?, self.v.get(name)?))
    }

    /// One update over every parameter in name order. A parameter without a
    /// gradient keeps its value; only its moments decay.
    pub fn step<T: Real>(&mut self, params: &mut ParamStore<T>) {
        self.t += 1;
        let AdamConfig {
            lr,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        let t = self.t as i32;
        let bc1 = 1.0 - beta1.powi(t);
        let bc2 = 1.0 - beta2.powi(t);

        for p in params.iter_mut() {
            let n = p.value().len();
            let m = self
                .m
                .entry(p.name().to_string())
                .or_insert_with(|| vec![0.0; n]);
            let v = self
                .v
                .entry(p.name().to_string())
                .or_insert_with(|| vec![0.0; n]);
            match p.grad() {
                None => {
                    m.iter_mut().for_each(|x| *x *= beta1);
                    v.iter_mut().for_each(|x| *x *= beta2);
                }
                Some(g) => {
                    let g: Vec<f64> = g.iter().map(|x| x.as_f64()).collect();
                    let values = p.value_mut().data_mut();
                    for i in 0..n {
                        m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
                        v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
                        let m_hat = m[i] / bc1;
                        let v_hat = v[i] / bc2;
                        let update = lr * m_hat / (v_hat.sqrt() + epsilon);
                        values[i] = T::cast_from(values[i].as_f64() - update);
                    }
                }
            }
        }
    }
}
