//! Reverse-mode gradients through time for the cached forward pass.

use crate::error::{Error, Result};
use crate::ndcore::Matrix;
use crate::snn::{
    cross_entropy, surrogate_grad, Dropout, ForwardCache, ForwardOptions,
    Network, Readout, RecurrenceMode, SampleTrace,
};

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrads {
    pub d_w1: Matrix,
    pub d_w2: Matrix,
    pub d_kernel_w: Option<Vec<f64>>,
}

/// Gradients with the same shapes as the network's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGrads>,
    pub d_readout_w: Matrix,
    pub d_readout_b: Vec<f64>,
}

impl Gradients {
    pub fn zeros_like(net: &Network) -> Self {
        Self {
            layers: net
                .layers
                .iter()
                .map(|l| LayerGrads {
                    d_w1: Matrix::zeros(l.w1.rows(), l.w1.cols()),
                    d_w2: Matrix::zeros(l.w2.rows(), l.w2.cols()),
                    d_kernel_w: l.kernel.as_ref().map(|k| vec![0.0; k.len()]),
                })
                .collect(),
            d_readout_w: Matrix::zeros(net.readout_w.rows(), net.readout_w.cols()),
            d_readout_b: vec![0.0; net.readout_b.len()],
        }
    }

    /// Flat views in the order of [`Network::params`].
    pub fn slices(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::new();
        for l in &self.layers {
            out.push(l.d_w1.as_slice());
            out.push(l.d_w2.as_slice());
            if let Some(k) = &l.d_kernel_w {
                out.push(k);
            }
        }
        out.push(self.d_readout_w.as_slice());
        out.push(&self.d_readout_b);
        out
    }

    pub fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        for l in &mut self.layers {
            out.push(l.d_w1.as_mut_slice());
            out.push(l.d_w2.as_mut_slice());
            if let Some(k) = l.d_kernel_w.as_mut() {
                out.push(k);
            }
        }
        out.push(self.d_readout_w.as_mut_slice());
        out.push(&mut self.d_readout_b);
        out
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.slices().concat()
    }

    pub fn global_norm(&self) -> f64 {
        self.slices()
            .iter()
            .flat_map(|s| s.iter())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    pub fn scale(&mut self, factor: f64) {
        for s in self.slices_mut() {
            s.iter_mut().for_each(|v| *v *= factor);
        }
    }

    /// Rescales so the global norm is at most `max_norm`. Returns the norm
    /// before clipping.
    pub fn clip_global_norm(&mut self, max_norm: f64) -> f64 {
        let norm = self.global_norm();
        if norm > max_norm && norm > 0.0 {
            self.scale(max_norm / norm);
        }
        norm
    }

    pub fn is_finite(&self) -> bool {
        self.slices().iter().all(|s| s.iter().all(|v| v.is_finite()))
    }

    /// Largest `|a - b| / max(|a|, |b|, floor)` over all entries.
    pub fn max_rel_diff(&self, other: &Gradients, floor: f64) -> f64 {
        self.flatten()
            .iter()
            .zip(other.flatten())
            .map(|(a, b)| (a - b).abs() / a.abs().max(b.abs()).max(floor))
            .fold(0.0, f64::max)
    }
}

fn check_trace(net: &Network, trace: &SampleTrace) -> Result<()> {
    if trace.layers.len() != net.layers.len() {
        return Err(Error::shape(format!(
            "cache has {} layers, network has {}",
            trace.layers.len(),
            net.layers.len()
        )));
    }
    let steps = trace.steps();
    for (l, (tr, spec)) in trace.layers.iter().zip(&net.layers).enumerate() {
        if tr.u_pre.shape() != (steps, spec.hidden_dim) {
            return Err(Error::shape(format!(
                "cache layer {l} is {}x{}, expected {steps}x{}",
                tr.u_pre.rows(),
                tr.u_pre.cols(),
                spec.hidden_dim
            )));
        }
        let want_p = spec.kernel.as_ref().map_or(0, |k| k.len());
        if tr.p.len() != want_p {
            return Err(Error::shape(format!("cache layer {l} lag weights do not match the network")));
        }
    }
    if trace.logits.len() != net.classes() {
        return Err(Error::shape("cache logits do not match the readout".to_string()));
    }
    Ok(())
}

/// Backpropagates one sample and accumulates into `grads`. When `probe`
/// is given it receives `dLoss/du_pre` for every layer (rows are steps).
pub fn backward_sample(
    net: &Network,
    trace: &SampleTrace,
    dlogits: &[f64],
    grads: &mut Gradients,
    mut probe: Option<&mut Vec<Matrix>>,
) -> Result<()> {
    check_trace(net, trace)?;
    if dlogits.len() != net.classes() {
        return Err(Error::shape(format!(
            "{} logit gradients for {} classes",
            dlogits.len(),
            net.classes()
        )));
    }
    let steps = trace.steps();
    let n_layers = net.layers.len();

    for (b, &g) in grads.d_readout_b.iter_mut().zip(dlogits) {
        *b += g;
    }
    let top_width = net.layers[n_layers - 1].hidden_dim;
    let mut g_top = vec![0.0; top_width];
    let zeros = vec![0.0; top_width];
    grads.d_readout_w.add_outer(dlogits, &trace.readout_input)?;
    let top_step = match net.readout {
        Readout::MeanOverTime => {
            let per_step: Vec<f64> = dlogits.iter().map(|g| g / steps as f64).collect();
            net.readout_w.matvec_t_acc(&per_step, &mut g_top)?;
            None
        }
        Readout::FinalStep => {
            net.readout_w.matvec_t_acc(dlogits, &mut g_top)?;
            Some(steps - 1)
        }
    };

    if let Some(p) = probe.as_deref_mut() {
        p.clear();
        p.extend(net.layers.iter().map(|l| Matrix::zeros(steps, l.hidden_dim)));
    }

    // dL/d(recurrent source) per layer and step: W2ᵀ g_u.
    let mut g_rec: Vec<Matrix> = net
        .layers
        .iter()
        .map(|l| Matrix::zeros(steps, l.hidden_dim))
        .collect();
    let mut g_u_next: Vec<Vec<f64>> = net.layers.iter().map(|l| vec![0.0; l.hidden_dim]).collect();
    let mut grad_p: Vec<Vec<f64>> = trace.layers.iter().map(|tr| vec![0.0; tr.p.len()]).collect();
    let mut g_from_above: Vec<f64> = Vec::new();
    let mut g_s: Vec<f64> = Vec::new();
    let mut g_u: Vec<f64> = Vec::new();
    let mut below: Vec<f64> = Vec::new();

    for t in (0..steps).rev() {
        for l in (0..n_layers).rev() {
            let spec = &net.layers[l];
            let tr = &trace.layers[l];
            let h = spec.hidden_dim;
            let lif = &spec.lif;

            g_s.clear();
            if l == n_layers - 1 {
                match top_step {
                    Some(only) if only != t => g_s.extend_from_slice(&zeros),
                    _ => g_s.extend_from_slice(&g_top),
                }
            } else {
                g_s.extend_from_slice(&g_from_above);
            }
            if let Some(mask) = &tr.dropout_mask {
                for (g, m) in g_s.iter_mut().zip(mask.row(t)) {
                    *g *= m;
                }
            }

            match spec.mode {
                RecurrenceMode::Vanilla => {
                    if t + 1 < steps {
                        add_into(&mut g_s, g_rec[l].row(t + 1));
                    }
                }
                RecurrenceMode::Src { lambda } => {
                    if t + lambda < steps {
                        add_into(&mut g_s, g_rec[l].row(t + lambda));
                    }
                }
                RecurrenceMode::Asrc { .. } => {
                    for (d, &weight) in tr.p.iter().enumerate() {
                        let future = t + d + 1;
                        if future >= steps {
                            break;
                        }
                        for (g, &r) in g_s.iter_mut().zip(g_rec[l].row(future)) {
                            *g += weight * r;
                        }
                    }
                }
            }

            // Soft reset: u[t+1] depends on s[t] through -α·V_th.
            let reset = -lif.alpha * lif.v_th;
            let next = &g_u_next[l];
            g_u.clear();
            g_u.extend(
                g_s.iter()
                    .zip(next)
                    .zip(tr.u_pre.row(t))
                    .map(|((&gs, &gn), &u)| {
                        (gs + reset * gn) * surrogate_grad(u, lif) + lif.alpha * gn
                    }),
            );

            if let Some(p) = probe.as_deref_mut() {
                p[l].row_mut(t).copy_from_slice(&g_u);
            }

            spec.w2.matvec_t_acc(&g_u, g_rec[l].row_mut(t))?;
            if l > 0 {
                g_from_above.clear();
                g_from_above.resize(spec.in_dim, 0.0);
                spec.w1.matvec_t_acc(&g_u, &mut g_from_above)?;
                trace.layers[l - 1].output_row(t, &mut below);
                grads.layers[l].d_w1.add_outer(&g_u, &below)?;
            } else {
                grads.layers[l].d_w1.add_outer(&g_u, trace.input.row(t))?;
            }
            grads.layers[l].d_w2.add_outer(&g_u, tr.recurrent.row(t))?;

            if spec.mode.is_adaptive() {
                let upstream = g_rec[l].row(t);
                for (d, gp) in grad_p[l].iter_mut().enumerate() {
                    let Some(past) = t.checked_sub(d + 1) else {
                        break;
                    };
                    *gp += dot(upstream, tr.s.row(past));
                }
            }

            debug_assert_eq!(g_u.len(), h);
            g_u_next[l].copy_from_slice(&g_u);
        }
    }

    for (l, spec) in net.layers.iter().enumerate() {
        if let (Some(kernel), Some(dk)) = (&spec.kernel, grads.layers[l].d_kernel_w.as_mut()) {
            let dw = kernel.backward(&trace.layers[l].p, &grad_p[l]);
            add_into(dk, &dw);
        }
    }
    Ok(())
}

#[inline]
fn add_into(acc: &mut [f64], v: &[f64]) {
    for (a, b) in acc.iter_mut().zip(v) {
        *a += b;
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Gradients for a whole cached batch given `dLoss/dlogits` per sample.
/// Samples are reduced in order.
pub fn backward(net: &Network, cache: &ForwardCache, dlogits: &[Vec<f64>]) -> Result<Gradients> {
    if cache.samples.len() != dlogits.len() {
        return Err(Error::shape(format!(
            "cache holds {} samples, got {} logit gradients",
            cache.samples.len(),
            dlogits.len()
        )));
    }
    let mut grads = Gradients::zeros_like(net);
    for (trace, dl) in cache.samples.iter().zip(dlogits) {
        backward_sample(net, trace, dl, &mut grads, None)?;
    }
    Ok(grads)
}

/// Mean cross-entropy of a batch with its gradient.
#[derive(Debug, Clone)]
pub struct BatchGrad {
    pub loss: f64,
    pub correct: usize,
    pub grads: Gradients,
}

/// Forward, loss and backward for one batch, one sample at a time so the
/// cache never holds more than a single sequence.
pub fn batch_loss_and_grads(
    net: &Network,
    inputs: &[&Matrix],
    labels: &[usize],
    opts: ForwardOptions,
    mut dropout: Option<&mut Dropout>,
) -> Result<BatchGrad> {
    if inputs.len() != labels.len() || inputs.is_empty() {
        return Err(Error::shape(format!(
            "{} inputs with {} labels",
            inputs.len(),
            labels.len()
        )));
    }
    let opts = ForwardOptions {
        test_mode: false,
        ..opts
    };
    let inv_b = 1.0 / inputs.len() as f64;
    let mut grads = Gradients::zeros_like(net);
    let mut loss = 0.0;
    let mut correct = 0;
    for (input, &label) in inputs.iter().zip(labels) {
        if label >= net.classes() {
            return Err(Error::invalid(format!("label {label} out of {} classes", net.classes())));
        }
        let (logits, trace) = net.run_sample(input, opts, dropout.as_deref_mut(), true)?;
        let (l, mut dl) = cross_entropy(&logits, label);
        loss += l;
        if crate::snn::predict(&logits) == label {
            correct += 1;
        }
        dl.iter_mut().for_each(|g| *g *= inv_b);
        backward_sample(net, &trace.unwrap(), &dl, &mut grads, None)?;
    }
    Ok(BatchGrad {
        loss: loss * inv_b,
        correct,
        grads,
    })
}

/// Mean cross-entropy of a batch without gradients or cache.
pub fn batch_loss(
    net: &Network,
    inputs: &[&Matrix],
    labels: &[usize],
    opts: ForwardOptions,
    mut dropout: Option<&mut Dropout>,
) -> Result<f64> {
    let mut loss = 0.0;
    for (input, &label) in inputs.iter().zip(labels) {
        let (logits, _) = net.run_sample(input, opts, dropout.as_deref_mut(), false)?;
        loss += cross_entropy(&logits, label).0;
    }
    Ok(loss / inputs.len() as f64)
}
