//! Central-difference gradient checking.

use super::{NeuralLm, Params, TrainConfig};
use crate::corpus::Sentence;
use crate::error::{Error, Result};

/// Denominator floor for relative errors, so that components whose true
/// gradient is zero compare on absolute error against round-off.
pub const GRADCHECK_ABS_FLOOR: f64 = 1e-6;

pub const MAX_CHECKED_PARAMETERS: usize = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    pub worst_tensor: String,
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub parameters_checked: usize,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(GRADCHECK_ABS_FLOOR)
}

/// Worst relative error between backpropagated and central-difference
/// gradients over every parameter.
pub fn finite_difference_check(
    model: &NeuralLm,
    positive: &[Sentence],
    negative: &[Sentence],
    cfg: &TrainConfig,
    step: f64,
) -> Result<GradCheckReport> {
    let analytic = model.gradients(positive, negative, cfg)?.grads;
    compare_gradients(model, positive, negative, cfg, step, &analytic)
}

/// Like [`finite_difference_check`] but against caller-supplied gradients.
pub fn compare_gradients(
    model: &NeuralLm,
    positive: &[Sentence],
    negative: &[Sentence],
    cfg: &TrainConfig,
    step: f64,
    analytic: &Params,
) -> Result<GradCheckReport> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "finite-difference step must be positive and finite, got {step}"
        )));
    }
    let n_params = model.params().parameter_count();
    if n_params > MAX_CHECKED_PARAMETERS {
        return Err(Error::InvalidArgument(format!(
            "gradient check limited to {MAX_CHECKED_PARAMETERS} parameters, model has {n_params}"
        )));
    }

    let mut probe = model.clone();
    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        worst_tensor: String::new(),
        worst_index: 0,
        analytic: 0.0,
        numeric: 0.0,
        parameters_checked: 0,
    };
    let grads = analytic.tensors();
    for (ti, grad) in grads.iter().enumerate() {
        for k in 0..grad.data.len() {
            let original = probe.params_mut().tensors_mut()[ti].data[k];
            probe.params_mut().tensors_mut()[ti].data[k] = original + step;
            let plus = probe.batch_loss(positive, negative, cfg);
            probe.params_mut().tensors_mut()[ti].data[k] = original - step;
            let minus = probe.batch_loss(positive, negative, cfg);
            probe.params_mut().tensors_mut()[ti].data[k] = original;

            let numeric = (plus - minus) / (2.0 * step);
            let err = relative_error(grad.data[k], numeric);
            report.parameters_checked += 1;
            if err > report.max_relative_error || report.worst_tensor.is_empty() {
                report.max_relative_error = err;
                report.worst_tensor = grad.name.clone();
                report.worst_index = k;
                report.analytic = grad.data[k];
                report.numeric = numeric;
            }
        }
    }
    Ok(report)
}
