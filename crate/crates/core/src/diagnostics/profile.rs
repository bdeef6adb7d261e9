use std::path::Path;

use super::csv::{fmt_e12, write_lines};
use crate::bptt::{backward_sample, Gradients};
use crate::error::{Error, Result};
use crate::ndcore::Matrix;
use crate::snn::{cross_entropy, ForwardCache, ForwardOptions, Network, Readout};

/// Mean `|dLoss/du_pre|` over samples and neurons, per layer and step.
#[derive(Debug, Clone, PartialEq)]
pub struct GradProfile {
    /// `layers[l][t]` with `t` counted from 0.
    pub layers: Vec<Vec<f64>>,
}

impl GradProfile {
    pub fn steps(&self) -> usize {
        self.layers.first().map_or(0, Vec::len)
    }

    /// Rows `layer,t,value` with `t` counted from 1.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let rows = self.layers.iter().enumerate().flat_map(|(l, vals)| {
            vals.iter()
                .enumerate()
                .map(move |(t, &v)| format!("{l},{},{}", t + 1, fmt_e12(v)))
        });
        write_lines(path, "layer,t,value", rows)
    }
}

/// Runs a training-mode forward and backward pass over the batch (batch-mean
/// cross-entropy on the chosen readout) and records the per-step gradient
/// magnitude of every layer's membrane potential.
pub fn grad_profile(net: &Network, inputs: &[&Matrix], labels: &[usize], readout: Readout) -> Result<GradProfile> {
    if inputs.is_empty() || inputs.len() != labels.len() {
        return Err(Error::invalid("gradient profile needs a non-empty labelled batch"));
    }
    let net = &Network {
        readout,
        ..net.clone()
    };
    let steps = inputs[0].rows();
    let mut layers: Vec<Vec<f64>> = net.layers.iter().map(|_| vec![0.0; steps]).collect();
    let mut scratch = Gradients::zeros_like(net);
    let mut probe = Vec::new();
    let batch = inputs.len() as f64;
    for (x, &label) in inputs.iter().zip(labels) {
        if x.rows() != steps {
            return Err(Error::shape("all sequences in a profile batch must share a length"));
        }
        let (logits, trace) = net.run_sample(x, ForwardOptions::train(), None, true)?;
        let trace = trace.expect("recorded");
        let (_, mut dl) = cross_entropy(&logits, label);
        dl.iter_mut().for_each(|g| *g /= batch);
        backward_sample(net, &trace, &dl, &mut scratch, Some(&mut probe))?;
        for (acc, g_u) in layers.iter_mut().zip(&probe) {
            let width = g_u.cols() as f64;
            for (t, a) in acc.iter_mut().enumerate() {
                *a += g_u.row(t).iter().map(|v| v.abs()).sum::<f64>() / width / batch;
            }
        }
    }
    Ok(GradProfile { layers })
}

/// Mean firing rate of every layer over neurons, steps and samples.
pub fn spike_rate(cache: &ForwardCache) -> Vec<f64> {
    let Some(first) = cache.samples.first() else {
        return Vec::new();
    };
    let mut rates = vec![0.0; first.layers.len()];
    let mut counts = vec![0usize; first.layers.len()];
    for sample in &cache.samples {
        for (l, layer) in sample.layers.iter().enumerate() {
            rates[l] += layer.s.as_slice().iter().sum::<f64>();
            counts[l] += layer.s.as_slice().len();
        }
    }
    rates
        .iter()
        .zip(&counts)
        .map(|(&r, &c)| if c == 0 { 0.0 } else { r / c as f64 })
        .collect()
}
