//! Dense f64 kernels, a reverse-mode differentiation tape, parameter
//! storage with Adam, and a finite-difference gradient verifier.

mod gradcheck;
mod matrix;
mod params;
mod tape;

pub use gradcheck::{finite_diff_check, GradCheckReport};
pub use matrix::{matmul, Matrix};
pub use params::{ParamStore, ADAM_BETA1, ADAM_BETA2, ADAM_EPS};
pub use tape::{segment_bounds, softmax_slice, NodeId, Tape};

use crate::error::{Error, Result};

/// Numerically stable softmax of a non-empty vector. Output entries lie
/// in (0, 1) and sum to 1 up to roundoff.
pub fn softmax(v: &[f64]) -> Result<Vec<f64>> {
    if v.is_empty() {
        return Err(Error::InvalidInput("softmax of empty vector".into()));
    }
    for (i, x) in v.iter().enumerate() {
        if !x.is_finite() {
            return Err(Error::InvalidInput(format!(
                "softmax input has non-finite entry {x} at index {i}"
            )));
        }
    }
    Ok(softmax_slice(v))
}
