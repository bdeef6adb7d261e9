//! Independent scalar reverse-mode tape. Rebuilds the unrolled network
//! from scratch one scalar at a time and differentiates it node by node,
//! so it shares no code path with [`super::backward`].

use super::backward::Gradients;
use crate::error::{Error, Result};
use crate::ndcore::Matrix;
use crate::snn::{smooth_heaviside, surrogate_grad, LifParams, Network, Readout, RecurrenceMode, SpikeFn};

pub const MAX_ORACLE_PARAMS: usize = 1000;
pub const MAX_ORACLE_STEPS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

impl Var {
    /// Position on the tape, which indexes the output of [`Tape::gradient`].
    pub fn index(self) -> usize {
        self.0
    }
}

/// Wengert list: each node stores its value and the local partial
/// derivatives with respect to its parents.
#[derive(Debug, Default)]
pub struct Tape {
    values: Vec<f64>,
    parents: Vec<Vec<(usize, f64)>>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn push(&mut self, value: f64, parents: Vec<(usize, f64)>) -> Var {
        self.values.push(value);
        self.parents.push(parents);
        Var(self.values.len() - 1)
    }

    pub fn value(&self, v: Var) -> f64 {
        self.values[v.0]
    }

    pub fn leaf(&mut self, value: f64) -> Var {
        self.push(value, Vec::new())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) + self.value(b);
        self.push(v, vec![(a.0, 1.0), (b.0, 1.0)])
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) - self.value(b);
        self.push(v, vec![(a.0, 1.0), (b.0, -1.0)])
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let (x, y) = (self.value(a), self.value(b));
        self.push(x * y, vec![(a.0, y), (b.0, x)])
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let v = self.value(a) * c;
        self.push(v, vec![(a.0, c)])
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let e = self.value(a).exp();
        self.push(e, vec![(a.0, e)])
    }

    pub fn ln(&mut self, a: Var) -> Var {
        let x = self.value(a);
        self.push(x.ln(), vec![(a.0, 1.0 / x)])
    }

    pub fn div(&mut self, a: Var, b: Var) -> Var {
        let (x, y) = (self.value(a), self.value(b));
        self.push(x / y, vec![(a.0, 1.0 / y), (b.0, -x / (y * y))])
    }

    pub fn sum(&mut self, terms: &[Var]) -> Var {
        let v = terms.iter().map(|t| self.value(*t)).sum();
        self.push(v, terms.iter().map(|t| (t.0, 1.0)).collect())
    }

    /// Spike node: forward value from `spike_fn`, derivative from the
    /// triangle surrogate.
    pub fn spike(&mut self, u: Var, lif: &LifParams, spike_fn: SpikeFn) -> Var {
        let x = self.value(u);
        let value = match spike_fn {
            SpikeFn::Heaviside => {
                if x >= lif.v_th {
                    1.0
                } else {
                    0.0
                }
            }
            SpikeFn::Smooth => smooth_heaviside(x, lif),
        };
        self.push(value, vec![(u.0, surrogate_grad(x, lif))])
    }

    /// Adjoint of every node with respect to `output`.
    pub fn gradient(&self, output: Var) -> Vec<f64> {
        let mut adj = vec![0.0; self.values.len()];
        adj[output.0] = 1.0;
        for node in (0..=output.0).rev() {
            let a = adj[node];
            if a == 0.0 {
                continue;
            }
            for &(p, local) in &self.parents[node] {
                adj[p] += a * local;
            }
        }
        adj
    }
}

struct LayerVars {
    w1: Vec<Var>,
    w2: Vec<Var>,
    kernel: Vec<Var>,
}

/// Loss and gradients of the batch-mean cross-entropy computed on the
/// scalar tape.
pub fn scalar_oracle_backward(
    net: &Network,
    inputs: &[&Matrix],
    labels: &[usize],
    spike_fn: SpikeFn,
) -> Result<(f64, Gradients)> {
    if net.param_count() > MAX_ORACLE_PARAMS {
        return Err(Error::invalid(format!(
            "scalar oracle limited to {MAX_ORACLE_PARAMS} parameters, network has {}",
            net.param_count()
        )));
    }
    if inputs.is_empty() || inputs.len() != labels.len() {
        return Err(Error::invalid("oracle needs a non-empty labelled batch"));
    }
    if let Some(long) = inputs.iter().find(|x| x.rows() > MAX_ORACLE_STEPS || x.rows() == 0) {
        return Err(Error::invalid(format!(
            "scalar oracle limited to 1..={MAX_ORACLE_STEPS} steps, got {}",
            long.rows()
        )));
    }

    let mut tape = Tape::new();
    let leaves = |tape: &mut Tape, m: &[f64]| m.iter().map(|&v| tape.leaf(v)).collect::<Vec<_>>();
    let layer_vars: Vec<LayerVars> = net
        .layers
        .iter()
        .map(|l| LayerVars {
            w1: leaves(&mut tape, l.w1.as_slice()),
            w2: leaves(&mut tape, l.w2.as_slice()),
            kernel: l.kernel.as_ref().map(|k| leaves(&mut tape, &k.w)).unwrap_or_default(),
        })
        .collect();
    let wout = leaves(&mut tape, net.readout_w.as_slice());
    let bout = leaves(&mut tape, &net.readout_b);

    // Lag weights p = exp(w/τ) / Σ exp(w/τ), built on the tape.
    let lag_weights: Vec<Vec<Var>> = net
        .layers
        .iter()
        .zip(&layer_vars)
        .map(|(spec, vars)| match &spec.kernel {
            None => Vec::new(),
            Some(k) => {
                let exps: Vec<Var> = vars
                    .kernel
                    .iter()
                    .map(|&w| {
                        let scaled = tape.scale(w, 1.0 / k.tau);
                        tape.exp(scaled)
                    })
                    .collect();
                let norm = tape.sum(&exps);
                exps.iter().map(|&e| tape.div(e, norm)).collect()
            }
        })
        .collect();

    let zero = tape.leaf(0.0);
    let classes = net.classes();
    let mut sample_losses = Vec::with_capacity(inputs.len());

    for (input, &label) in inputs.iter().zip(labels) {
        let steps = input.rows();
        let x: Vec<Vec<Var>> = (0..steps).map(|t| leaves(&mut tape, input.row(t))).collect();
        let mut below = x;
        for ((spec, vars), p) in net.layers.iter().zip(&layer_vars).zip(&lag_weights) {
            let (h, n_in) = (spec.hidden_dim, spec.in_dim);
            let lif = spec.lif;
            let mut u_hist: Vec<Vec<Var>> = Vec::with_capacity(steps);
            let mut s_hist: Vec<Vec<Var>> = Vec::with_capacity(steps);
            for t in 0..steps {
                let lagged = |lag: usize, s_hist: &Vec<Vec<Var>>, i: usize| -> Option<Var> {
                    t.checked_sub(lag).map(|past| s_hist[past][i])
                };
                let mut recurrent = Vec::with_capacity(h);
                for j in 0..h {
                    let r = match spec.mode {
                        RecurrenceMode::Vanilla => lagged(1, &s_hist, j).unwrap_or(zero),
                        RecurrenceMode::Src { lambda } => lagged(lambda, &s_hist, j).unwrap_or(zero),
                        RecurrenceMode::Asrc { t_lambda } => {
                            let mut terms = Vec::new();
                            for lag in 1..=t_lambda {
                                if let Some(s) = lagged(lag, &s_hist, j) {
                                    terms.push(tape.mul(p[lag - 1], s));
                                }
                            }
                            if terms.is_empty() {
                                zero
                            } else {
                                tape.sum(&terms)
                            }
                        }
                    };
                    recurrent.push(r);
                }
                let mut u_t = Vec::with_capacity(h);
                let mut s_t = Vec::with_capacity(h);
                for i in 0..h {
                    let mut terms = Vec::with_capacity(n_in + h + 1);
                    for k in 0..n_in {
                        terms.push(tape.mul(vars.w1[i * n_in + k], below[t][k]));
                    }
                    for j in 0..h {
                        terms.push(tape.mul(vars.w2[i * h + j], recurrent[j]));
                    }
                    if t > 0 {
                        let reset = tape.scale(s_hist[t - 1][i], lif.v_th);
                        let leak = tape.sub(u_hist[t - 1][i], reset);
                        terms.push(tape.scale(leak, lif.alpha));
                    }
                    let u = tape.sum(&terms);
                    u_t.push(u);
                    s_t.push(tape.spike(u, &lif, spike_fn));
                }
                u_hist.push(u_t);
                s_hist.push(s_t);
            }
            below = s_hist;
        }

        // y[t] = W_out s[t] + b; logits are mean_t y[t] or y[T-1].
        let last = net.layers.last().unwrap().hidden_dim;
        let read_steps = match net.readout {
            Readout::MeanOverTime => &below[..],
            Readout::FinalStep => &below[steps - 1..],
        };
        let mut logits = Vec::with_capacity(classes);
        for c in 0..classes {
            let mut per_step = Vec::with_capacity(read_steps.len());
            for s_t in read_steps {
                let mut terms: Vec<Var> = (0..last).map(|j| tape.mul(wout[c * last + j], s_t[j])).collect();
                terms.push(bout[c]);
                per_step.push(tape.sum(&terms));
            }
            let total = tape.sum(&per_step);
            logits.push(tape.scale(total, 1.0 / read_steps.len() as f64));
        }
        let exps: Vec<Var> = logits.iter().map(|&z| tape.exp(z)).collect();
        let norm = tape.sum(&exps);
        let log_norm = tape.ln(norm);
        sample_losses.push(tape.sub(log_norm, logits[label]));
    }
    let total = tape.sum(&sample_losses);
    let loss = tape.scale(total, 1.0 / inputs.len() as f64);

    let adj = tape.gradient(loss);
    let read = |vars: &[Var]| vars.iter().map(|v| adj[v.0]).collect::<Vec<_>>();
    let mut grads = Gradients::zeros_like(net);
    for (g, vars) in grads.layers.iter_mut().zip(&layer_vars) {
        g.d_w1.as_mut_slice().copy_from_slice(&read(&vars.w1));
        g.d_w2.as_mut_slice().copy_from_slice(&read(&vars.w2));
        if let Some(k) = g.d_kernel_w.as_mut() {
            k.copy_from_slice(&read(&vars.kernel));
        }
    }
    grads.d_readout_w.as_mut_slice().copy_from_slice(&read(&wout));
    grads.d_readout_b.copy_from_slice(&read(&bout));
    Ok((tape.value(loss), grads))
}
