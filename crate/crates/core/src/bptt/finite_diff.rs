//! Central finite differences on the smoothed forward pass.
//!
//! With spikes replaced by `smooth_heaviside`, the forward pass is
//! differentiable and its exact derivative is what BPTT computes with the
//! triangle surrogate, so the two can be compared parameter by parameter.

use super::backward::{batch_loss, batch_loss_and_grads, Gradients};
use crate::error::{Error, Result};
use crate::ndcore::Matrix;
use crate::snn::{Dropout, ForwardOptions, Network};

#[derive(Debug, Clone, PartialEq)]
pub struct FdReport {
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    /// Parameter tensor and flat index of the worst entry.
    pub worst_param: String,
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub checked: usize,
}

/// `|fd - analytic| / (|fd| + |analytic| + 1e-12)`.
pub fn relative_error(numeric: f64, analytic: f64) -> f64 {
    (numeric - analytic).abs() / (numeric.abs() + analytic.abs() + 1e-12)
}

/// Compares BPTT on the smoothed forward against central differences for
/// every parameter. If `dropout` is given, the same mask seed is replayed
/// for every evaluation.
pub fn finite_diff_check(
    net: &Network,
    inputs: &[&Matrix],
    labels: &[usize],
    eps: f64,
    dropout: Option<&Dropout>,
) -> Result<FdReport> {
    let mut d = dropout.cloned();
    let analytic = batch_loss_and_grads(net, inputs, labels, ForwardOptions::smooth(), d.as_mut())?.grads;
    finite_diff_against(net, inputs, labels, eps, dropout, &analytic)
}

/// Compares the supplied gradients against central differences of the
/// smoothed batch loss.
pub fn finite_diff_against(
    net: &Network,
    inputs: &[&Matrix],
    labels: &[usize],
    eps: f64,
    dropout: Option<&Dropout>,
    analytic: &Gradients,
) -> Result<FdReport> {
    if !(eps > 0.0) {
        return Err(Error::invalid(format!("eps {eps} must be positive")));
    }
    let opts = ForwardOptions::smooth();
    let fresh = || dropout.cloned();
    let analytic_slices = analytic.slices();
    if analytic_slices.len() != net.params().len() {
        return Err(Error::shape("gradients do not match the network"));
    }

    let names: Vec<String> = net.params().into_iter().map(|(n, _, _)| n).collect();
    let mut probe = net.clone();
    let mut report = FdReport {
        max_rel_error: 0.0,
        max_abs_error: 0.0,
        worst_param: String::new(),
        worst_index: 0,
        analytic: 0.0,
        numeric: 0.0,
        checked: 0,
    };

    for (p, name) in names.iter().enumerate() {
        for i in 0..analytic_slices[p].len() {
            let original = net.params()[p].2[i];
            set_param(&mut probe, p, i, original + eps);
            let mut d = fresh();
            let plus = batch_loss(&probe, inputs, labels, opts, d.as_mut())?;
            set_param(&mut probe, p, i, original - eps);
            let mut d = fresh();
            let minus = batch_loss(&probe, inputs, labels, opts, d.as_mut())?;
            set_param(&mut probe, p, i, original);

            let numeric = (plus - minus) / (2.0 * eps);
            let a = analytic_slices[p][i];
            let err = relative_error(numeric, a);
            report.max_abs_error = report.max_abs_error.max((numeric - a).abs());
            report.checked += 1;
            if err > report.max_rel_error || report.worst_param.is_empty() {
                report.max_rel_error = err;
                report.worst_param = name.clone();
                report.worst_index = i;
                report.analytic = a;
                report.numeric = numeric;
            }
        }
    }
    Ok(report)
}

/// Central difference for a single parameter entry.
pub fn finite_diff_param(
    net: &Network,
    inputs: &[&Matrix],
    labels: &[usize],
    tensor: usize,
    index: usize,
    eps: f64,
) -> Result<f64> {
    let opts = ForwardOptions::smooth();
    let mut probe = net.clone();
    let original = net.params()[tensor].2[index];
    set_param(&mut probe, tensor, index, original + eps);
    let plus = batch_loss(&probe, inputs, labels, opts, None)?;
    set_param(&mut probe, tensor, index, original - eps);
    let minus = batch_loss(&probe, inputs, labels, opts, None)?;
    Ok((plus - minus) / (2.0 * eps))
}

fn set_param(net: &mut Network, tensor: usize, index: usize, value: f64) {
    net.params_mut()[tensor].2[index] = value;
}
