//! Central finite-difference verification of tape gradients.

use crate::error::{Error, Result};
use crate::numcore::params::ParamStore;
use crate::numcore::tape::{NodeId, Tape};

/// Per-parameter comparison of analytic vs numeric gradients.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    /// (parameter name, relative error of its gradient block).
    pub per_param: Vec<(String, f64)>,
    pub max_rel_err: f64,
    pub tol: f64,
    pub passed: bool,
}

impl GradCheckReport {
    pub fn worst(&self) -> Option<&(String, f64)> {
        self.per_param
            .iter()
            .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
    }
}

fn block_rel_err(analytic: &[f64], numeric: &[f64]) -> f64 {
    let na: f64 = analytic.iter().map(|v| v * v).sum::<f64>().sqrt();
    let nn: f64 = numeric.iter().map(|v| v * v).sum::<f64>().sqrt();
    let diff: f64 = analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n) * (a - n))
        .sum::<f64>()
        .sqrt();
    if na == 0.0 && nn == 0.0 {
        0.0
    } else {
        diff / na.max(nn).max(1e-12)
    }
}

/// Compare the tape gradient of `loss_fn` against central finite
/// differences of step `h` for every parameter in `params`.
///
/// `loss_fn` builds the forward graph on the given tape and returns the
/// scalar root node. It is evaluated twice up front; if the two values
/// disagree bit-for-bit the function is rejected as non-deterministic.
/// The check passes when every parameter's relative error is < `tol`
/// (strict, so `tol = 0` always fails).
pub fn finite_diff_check<F>(
    loss_fn: F,
    params: &mut ParamStore,
    h: f64,
    tol: f64,
) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape, &ParamStore) -> Result<NodeId>,
{
    if h <= 0.0 {
        return Err(Error::InvalidInput(format!("step h must be > 0, got {h}")));
    }

    let eval = |params: &ParamStore| -> Result<f64> {
        let mut tape = Tape::new();
        let root = loss_fn(&mut tape, params)?;
        Ok(tape.scalar(root))
    };

    let v1 = eval(params)?;
    let v2 = eval(params)?;
    if v1.to_bits() != v2.to_bits() {
        return Err(Error::Nondeterminism(format!(
            "two forward passes disagree: {v1} vs {v2}"
        )));
    }

    // Analytic gradients from one backward pass.
    params.zero_grads();
    let mut tape = Tape::new();
    let root = loss_fn(&mut tape, params)?;
    tape.backward(root)?;
    tape.export_grads(params);
    let analytic: Vec<(String, Vec<f64>)> = params
        .names()
        .map(|n| (n.to_string(), params.grad(n).data.clone()))
        .collect();

    // Numeric gradients, one entry at a time.
    let mut per_param = Vec::new();
    let mut max_rel = 0.0f64;
    for (name, a_grad) in &analytic {
        let numel = params.value(name).numel();
        let mut numeric = vec![0.0; numel];
        for i in 0..numel {
            let original = params.value(name).data[i];
            params.value_mut(name).data[i] = original + h;
            let plus = eval(params)?;
            params.value_mut(name).data[i] = original - h;
            let minus = eval(params)?;
            params.value_mut(name).data[i] = original;
            numeric[i] = (plus - minus) / (2.0 * h);
        }
        let err = block_rel_err(a_grad, &numeric);
        max_rel = max_rel.max(err);
        per_param.push((name.clone(), err));
    }

    Ok(GradCheckReport {
        per_param,
        max_rel_err: max_rel,
        tol,
        passed: max_rel < tol,
    })
}
