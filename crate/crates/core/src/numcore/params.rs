//! Named parameter store with gradient accumulators and Adam state.

use crate::error::{Error, Result};
use crate::numcore::matrix::Matrix;
use std::collections::HashMap;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct Param {
    pub name: String,
    pub value: Matrix,
    pub grad: Matrix,
    moment1: Matrix,
    moment2: Matrix,
    step: u64,
}

/// Ordered collection of named parameter matrices. Iteration order is
/// insertion order, which keeps every consumer deterministic.
#[derive(Debug, Clone, Default)]
pub struct ParamStore {
    params: Vec<Param>,
    index: HashMap<String, usize>,
}

impl ParamStore {
    pub fn new() -> Self {
        ParamStore::default()
    }

    pub fn insert(&mut self, name: &str, value: Matrix) {
        assert!(
            !self.index.contains_key(name),
            "parameter {name} already registered"
        );
        let (r, c) = value.shape();
        self.index.insert(name.to_string(), self.params.len());
        self.params.push(Param {
            name: name.to_string(),
            value,
            grad: Matrix::zeros(r, c),
            moment1: Matrix::zeros(r, c),
            moment2: Matrix::zeros(r, c),
            step: 0,
        });
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.params.iter().map(|p| p.name.as_str())
    }

    pub fn value_at(&self, idx: usize) -> &Matrix {
        &self.params[idx].value
    }

    pub fn value(&self, name: &str) -> &Matrix {
        &self.params[self.index[name]].value
    }

    pub fn value_mut(&mut self, name: &str) -> &mut Matrix {
        let idx = self.index[name];
        &mut self.params[idx].value
    }

    pub fn grad(&self, name: &str) -> &Matrix {
        &self.params[self.index[name]].grad
    }

    pub fn add_grad(&mut self, idx: usize, delta: &Matrix) {
        let g = &mut self.params[idx].grad;
        debug_assert_eq!(g.shape(), delta.shape(), "gradient shape for {}", self.params[idx].name);
        for (gv, dv) in g.data.iter_mut().zip(&delta.data) {
            *gv += dv;
        }
    }

    /// Scale every accumulated gradient (batch averaging).
    pub fn scale_grads(&mut self, factor: f64) {
        for p in &mut self.params {
            for g in p.grad.data.iter_mut() {
                *g *= factor;
            }
        }
    }

    pub fn zero_grads(&mut self) {
        for p in &mut self.params {
            for g in p.grad.data.iter_mut() {
                *g = 0.0;
            }
        }
    }

    /// Sum of squared parameter entries — the reported regularizer value.
    pub fn omega_sq(&self) -> f64 {
        self.params.iter().map(|p| p.value.frobenius_sq()).sum()
    }

    /// Adam with decoupled L2 weight decay over every parameter.
    pub fn adam_step(&mut self, lr: f64, weight_decay: f64) -> Result<()> {
        self.adam_step_filtered(lr, weight_decay, |_| true)
    }

    /// Adam restricted to parameters whose name satisfies the predicate.
    /// Per-parameter step counters advance only when stepped, so staged
    /// training keeps textbook bias correction.
    pub fn adam_step_filtered(
        &mut self,
        lr: f64,
        weight_decay: f64,
        keep: impl Fn(&str) -> bool,
    ) -> Result<()> {
        if lr <= 0.0 {
            return Err(Error::InvalidConfig(format!("learning rate must be > 0, got {lr}")));
        }
        if weight_decay < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "weight decay must be >= 0, got {weight_decay}"
            )));
        }
        for p in &mut self.params {
            if !keep(&p.name) {
                continue;
            }
            p.step += 1;
            let t = p.step as i32;
            let bc1 = 1.0 - ADAM_BETA1.powi(t);
            let bc2 = 1.0 - ADAM_BETA2.powi(t);
            for i in 0..p.value.data.len() {
                let g = p.grad.data[i];
                let m = ADAM_BETA1 * p.moment1.data[i] + (1.0 - ADAM_BETA1) * g;
                let v = ADAM_BETA2 * p.moment2.data[i] + (1.0 - ADAM_BETA2) * g * g;
                p.moment1.data[i] = m;
                p.moment2.data[i] = v;
                let m_hat = m / bc1;
                let v_hat = v / bc2;
                p.value.data[i] -=
                    lr * m_hat / (v_hat.sqrt() + ADAM_EPS) + lr * weight_decay * p.value.data[i];
            }
        }
        Ok(())
    }

    /// Interpolate this store's values toward another: v ← m·v + (1−m)·other.
    /// Only parameters present in both stores are touched.
    pub fn momentum_blend(&mut self, live: &ParamStore, momentum: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&momentum) {
            return Err(Error::InvalidConfig(format!(
                "momentum must be in [0,1], got {momentum}"
            )));
        }
        for p in &mut self.params {
            if let Some(idx) = live.index_of(&p.name) {
                let lv = live.value_at(idx);
                debug_assert_eq!(lv.shape(), p.value.shape());
                for (c, l) in p.value.data.iter_mut().zip(&lv.data) {
                    *c = momentum * *c + (1.0 - momentum) * l;
                }
            }
        }
        Ok(())
    }

    /// New store holding copies of the parameters whose name satisfies the
    /// predicate (fresh optimizer state).
    pub fn subset(&self, keep: impl Fn(&str) -> bool) -> ParamStore {
        let mut out = ParamStore::new();
        for p in &self.params {
            if keep(&p.name) {
                out.insert(&p.name, p.value.clone());
            }
        }
        out
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Matrix)> {
        self.params.iter().map(|p| (p.name.as_str(), &p.value))
    }
}
