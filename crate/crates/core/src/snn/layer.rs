use super::kernel::SoftmaxKernel;
use super::lif::{lif_step, LifParams, SpikeFn};
use super::ring::SpikeRing;
use crate::error::{Error, Result};
use crate::ndcore::Matrix;

/// Which past spikes feed a layer's recurrent weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecurrenceMode {
    /// Previous step only.
    Vanilla,
    /// Fixed skip of `lambda` steps.
    Src { lambda: usize },
    /// Softmax-weighted mix over lags `1..=t_lambda`.
    Asrc { t_lambda: usize },
}

impl RecurrenceMode {
    /// Number of past spike vectors the layer must remember.
    pub fn span(&self) -> usize {
        match *self {
            RecurrenceMode::Vanilla => 1,
            RecurrenceMode::Src { lambda } => lambda,
            RecurrenceMode::Asrc { t_lambda } => t_lambda,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            RecurrenceMode::Src { lambda: 0 } => Err(Error::invalid("src mode needs lambda >= 1")),
            RecurrenceMode::Asrc { t_lambda: 0 } => {
                Err(Error::invalid("asrc mode needs t_lambda >= 1"))
            }
            _ => Ok(()),
        }
    }

    pub fn is_adaptive(&self) -> bool {
        matches!(self, RecurrenceMode::Asrc { .. })
    }
}

/// Weights and constants of one recurrent spiking layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerSpec {
    pub in_dim: usize,
    pub hidden_dim: usize,
    /// Feedforward weights, `hidden x in`.
    pub w1: Matrix,
    /// Recurrent weights, `hidden x hidden`.
    pub w2: Matrix,
    pub mode: RecurrenceMode,
    /// Present exactly when `mode` is adaptive.
    pub kernel: Option<SoftmaxKernel>,
    pub lif: LifParams,
}

impl LayerSpec {
    pub fn new(w1: Matrix, w2: Matrix, mode: RecurrenceMode, lif: LifParams) -> Result<Self> {
        mode.validate()?;
        lif.validate()?;
        let hidden_dim = w1.rows();
        if w2.shape() != (hidden_dim, hidden_dim) {
            return Err(Error::shape(format!(
                "recurrent weights are {}x{}, expected {hidden_dim}x{hidden_dim}",
                w2.rows(),
                w2.cols()
            )));
        }
        let kernel = match mode {
            RecurrenceMode::Asrc { t_lambda } => Some(SoftmaxKernel::new(t_lambda)),
            _ => None,
        };
        Ok(Self {
            in_dim: w1.cols(),
            hidden_dim,
            w1,
            w2,
            mode,
            kernel,
            lif,
        })
    }

    /// Lag weights in effect for a pass; empty unless adaptive.
    pub fn lag_weights(&self, test_mode: bool) -> Vec<f64> {
        self.kernel
            .as_ref()
            .map(|k| k.weights(test_mode))
            .unwrap_or_default()
    }
}

/// Per-sequence mutable state of one layer.
#[derive(Debug, Clone)]
pub struct LayerState {
    /// Pre-reset membrane potential from the latest step.
    pub u: Vec<f64>,
    /// Spikes from the latest step.
    pub s: Vec<f64>,
    pub ring: SpikeRing,
    /// Recurrent input used by the latest step.
    pub recurrent: Vec<f64>,
    /// Lag weights fixed for the whole sequence.
    pub p: Vec<f64>,
    pub spike_fn: SpikeFn,
    w1t: Matrix,
    w2t: Matrix,
    current: Vec<f64>,
    u_next: Vec<f64>,
    s_next: Vec<f64>,
}

impl LayerState {
    /// Fresh state (zero potential, empty history) for `spec`.
    pub fn new(spec: &LayerSpec, test_mode: bool, spike_fn: SpikeFn) -> Self {
        let h = spec.hidden_dim;
        Self {
            u: vec![0.0; h],
            s: vec![0.0; h],
            ring: SpikeRing::new(h, spec.mode.span()),
            recurrent: vec![0.0; h],
            p: spec.lag_weights(test_mode),
            spike_fn,
            w1t: spec.w1.transpose(),
            w2t: spec.w2.transpose(),
            current: vec![0.0; h],
            u_next: vec![0.0; h],
            s_next: vec![0.0; h],
        }
    }

    pub fn reset(&mut self) {
        self.u.iter_mut().for_each(|v| *v = 0.0);
        self.s.iter_mut().for_each(|v| *v = 0.0);
        self.ring.reset();
    }
}

/// `out[i] += Σ_k wt[k][i] · x[k]` with `k` ascending; zero inputs skipped.
#[inline]
fn accumulate_transposed(wt: &Matrix, x: &[f64], out: &mut [f64]) {
    let width = out.len();
    let data = wt.as_slice();
    for (k, &xk) in x.iter().enumerate() {
        if xk == 0.0 {
            continue;
        }
        let row = &data[k * width..(k + 1) * width];
        if xk == 1.0 {
            for (o, &w) in out.iter_mut().zip(row) {
                *o += w;
            }
        } else {
            for (o, &w) in out.iter_mut().zip(row) {
                *o += w * xk;
            }
        }
    }
}

fn gather_recurrent(mode: RecurrenceMode, ring: &SpikeRing, p: &[f64], out: &mut [f64]) {
    match mode {
        RecurrenceMode::Vanilla => out.copy_from_slice(ring.lag(1)),
        RecurrenceMode::Src { lambda } => out.copy_from_slice(ring.lag(lambda)),
        RecurrenceMode::Asrc { .. } => {
            out.iter_mut().for_each(|v| *v = 0.0);
            for (d, &weight) in p.iter().enumerate() {
                if weight == 0.0 {
                    continue;
                }
                for (o, &s) in out.iter_mut().zip(ring.lag(d + 1)) {
                    *o += weight * s;
                }
            }
        }
    }
}

/// Advances one layer by one timestep. On return `state.u`/`state.s`
/// hold the new pre-reset potential and spikes, `state.recurrent` the
/// recurrent source that was used, and the spikes have been pushed into
/// the ring.
pub fn layer_step(spec: &LayerSpec, state: &mut LayerState, input: &[f64]) -> Result<()> {
    if input.len() != spec.in_dim {
        return Err(Error::shape(format!(
            "layer expects input of {}, got {}",
            spec.in_dim,
            input.len()
        )));
    }
    gather_recurrent(spec.mode, &state.ring, &state.p, &mut state.recurrent);

    state.current.iter_mut().for_each(|v| *v = 0.0);
    accumulate_transposed(&state.w1t, input, &mut state.current);
    accumulate_transposed(&state.w2t, &state.recurrent, &mut state.current);

    lif_step(
        &state.u,
        &state.s,
        &state.current,
        &spec.lif,
        state.spike_fn,
        &mut state.u_next,
        &mut state.s_next,
    )?;
    std::mem::swap(&mut state.u, &mut state.u_next);
    std::mem::swap(&mut state.s, &mut state.s_next);
    state.ring.push(&state.s);
    Ok(())
}
