use super::layer::{layer_step, LayerSpec, LayerState, RecurrenceMode};
use super::lif::{LifParams, SpikeFn};
use crate::error::{Error, Result};
use crate::ndcore::{orthogonal_init, uniform_fanin_init, Matrix, Rng};

/// How logits are read from the last layer's outputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Readout {
    /// `W_out · mean_t out[t] + b`.
    #[default]
    MeanOverTime,
    /// `W_out · out[T-1] + b`.
    FinalStep,
}

/// Stack of recurrent spiking layers with a linear readout on the last
/// layer's spikes.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub layers: Vec<LayerSpec>,
    /// `classes x hidden_last`.
    pub readout_w: Matrix,
    pub readout_b: Vec<f64>,
    pub readout: Readout,
}

/// Architecture description used to build a freshly initialised network.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub classes: usize,
    /// One mode per hidden layer.
    pub modes: Vec<RecurrenceMode>,
    pub lif: LifParams,
}

impl Topology {
    pub fn uniform(
        input_dim: usize,
        hidden: &[usize],
        classes: usize,
        mode: RecurrenceMode,
        lif: LifParams,
    ) -> Self {
        Self {
            input_dim,
            hidden: hidden.to_vec(),
            classes,
            modes: vec![mode; hidden.len()],
            lif,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    Weight,
    KernelLogits,
}

/// Inverted dropout on layer outputs.
#[derive(Debug, Clone)]
pub struct Dropout {
    pub rate: f64,
    pub rng: Rng,
}

impl Dropout {
    pub fn new(rate: f64, seed: u64) -> Result<Self> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::invalid(format!("dropout rate {rate} outside [0, 1)")));
        }
        Ok(Self {
            rate,
            rng: Rng::new(seed),
        })
    }

    fn mask(&mut self, out: &mut [f64]) {
        let keep = 1.0 / (1.0 - self.rate);
        for m in out.iter_mut() {
            *m = if self.rng.uniform() < self.rate { 0.0 } else { keep };
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ForwardOptions {
    /// Hardmax lag selection, no cache.
    pub test_mode: bool,
    pub spike_fn: SpikeFn,
}

impl ForwardOptions {
    pub fn train() -> Self {
        Self::default()
    }

    pub fn test() -> Self {
        Self {
            test_mode: true,
            spike_fn: SpikeFn::Heaviside,
        }
    }

    pub fn smooth() -> Self {
        Self {
            test_mode: false,
            spike_fn: SpikeFn::Smooth,
        }
    }
}

/// Everything one layer produced over one sequence; rows are timesteps.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerTrace {
    /// Membrane potential before the threshold comparison.
    pub u_pre: Matrix,
    pub s: Matrix,
    /// Recurrent source fed to `w2` at each step (lagged or mixed spikes).
    pub recurrent: Matrix,
    /// Dropout multipliers applied to `s` before it leaves the layer.
    pub dropout_mask: Option<Matrix>,
    /// Lag weights in effect (adaptive layers only).
    pub p: Vec<f64>,
}

impl LayerTrace {
    /// Spikes as seen by the next layer (after dropout).
    pub fn output_row(&self, t: usize, buf: &mut Vec<f64>) {
        buf.clear();
        match &self.dropout_mask {
            None => buf.extend_from_slice(self.s.row(t)),
            Some(mask) => buf.extend(self.s.row(t).iter().zip(mask.row(t)).map(|(s, m)| s * m)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleTrace {
    pub input: Matrix,
    pub layers: Vec<LayerTrace>,
    /// What the readout was applied to: the time-averaged or the final
    /// output of the last layer.
    pub readout_input: Vec<f64>,
    pub logits: Vec<f64>,
}

impl SampleTrace {
    pub fn steps(&self) -> usize {
        self.input.rows()
    }
}

/// Per-sample traces of a training-mode batch forward.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardCache {
    pub samples: Vec<SampleTrace>,
    pub spike_fn: SpikeFn,
}

impl Network {
    /// Feedforward weights uniform fan-in, recurrent weights orthogonal with
    /// unit gain, kernel logits zero, readout uniform fan-in, bias zero.
    pub fn init(topology: &Topology, rng: &mut Rng) -> Result<Self> {
        if topology.hidden.is_empty() {
            return Err(Error::invalid("network needs at least one hidden layer"));
        }
        if topology.modes.len() != topology.hidden.len() {
            return Err(Error::invalid(format!(
                "{} recurrence modes for {} hidden layers",
                topology.modes.len(),
                topology.hidden.len()
            )));
        }
        if topology.input_dim == 0 || topology.classes == 0 {
            return Err(Error::invalid("input dim and class count must be positive"));
        }
        let mut layers = Vec::with_capacity(topology.hidden.len());
        let mut in_dim = topology.input_dim;
        for (&hidden, &mode) in topology.hidden.iter().zip(&topology.modes) {
            if hidden == 0 {
                return Err(Error::invalid("hidden layer size must be positive"));
            }
            let w1 = uniform_fanin_init(hidden, in_dim, in_dim, rng)?;
            let w2 = orthogonal_init(hidden, 1.0, rng)?;
            layers.push(LayerSpec::new(w1, w2, mode, topology.lif)?);
            in_dim = hidden;
        }
        let readout_w = uniform_fanin_init(topology.classes, in_dim, in_dim, rng)?;
        Ok(Self {
            layers,
            readout_w,
            readout_b: vec![0.0; topology.classes],
            readout: Readout::MeanOverTime,
        })
    }

    pub fn from_parts(layers: Vec<LayerSpec>, readout_w: Matrix, readout_b: Vec<f64>) -> Result<Self> {
        let net = Self {
            layers,
            readout_w,
            readout_b,
            readout: Readout::MeanOverTime,
        };
        net.validate()?;
        Ok(net)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::invalid("network needs at least one hidden layer"));
        }
        for (l, pair) in self.layers.windows(2).enumerate() {
            if pair[1].in_dim != pair[0].hidden_dim {
                return Err(Error::shape(format!(
                    "layer {} expects input {}, layer {l} produces {}",
                    l + 1,
                    pair[1].in_dim,
                    pair[0].hidden_dim
                )));
            }
        }
        for (l, layer) in self.layers.iter().enumerate() {
            layer.mode.validate()?;
            if layer.w1.shape() != (layer.hidden_dim, layer.in_dim)
                || layer.w2.shape() != (layer.hidden_dim, layer.hidden_dim)
            {
                return Err(Error::shape(format!("layer {l} weight shapes disagree with its dims")));
            }
            let want = layer.mode.is_adaptive();
            match &layer.kernel {
                Some(k) if want && k.len() == layer.mode.span() => {}
                None if !want => {}
                _ => return Err(Error::invalid(format!("layer {l} kernel does not match its mode"))),
            }
        }
        let last = self.layers.last().unwrap().hidden_dim;
        if self.readout_w.cols() != last || self.readout_b.len() != self.readout_w.rows() {
            return Err(Error::shape(format!(
                "readout is {}x{} with {} biases, last layer has {last} units",
                self.readout_w.rows(),
                self.readout_w.cols(),
                self.readout_b.len()
            )));
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn classes(&self) -> usize {
        self.readout_w.rows()
    }

    pub fn set_temperature(&mut self, tau: f64) {
        for layer in &mut self.layers {
            if let Some(k) = layer.kernel.as_mut() {
                k.tau = tau;
            }
        }
    }

    pub fn temperature(&self) -> Option<f64> {
        self.layers.iter().find_map(|l| l.kernel.as_ref().map(|k| k.tau))
    }

    pub fn has_adaptive_layers(&self) -> bool {
        self.layers.iter().any(|l| l.kernel.is_some())
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|(_, _, p)| p.len()).sum()
    }

    /// Trainable tensors in a fixed order: per layer `w1`, `w2`, kernel
    /// logits (adaptive only), then readout weights and bias.
    pub fn params(&self) -> Vec<(String, ParamKind, &[f64])> {
        let mut out = Vec::new();
        for (l, layer) in self.layers.iter().enumerate() {
            out.push((format!("layer{l}.w1"), ParamKind::Weight, layer.w1.as_slice()));
            out.push((format!("layer{l}.w2"), ParamKind::Weight, layer.w2.as_slice()));
            if let Some(k) = &layer.kernel {
                out.push((format!("layer{l}.kernel"), ParamKind::KernelLogits, &k.w[..]));
            }
        }
        out.push(("readout.w".to_string(), ParamKind::Weight, self.readout_w.as_slice()));
        out.push(("readout.b".to_string(), ParamKind::Weight, &self.readout_b[..]));
        out
    }

    /// Mutable counterpart of [`Network::params`], same order.
    pub fn params_mut(&mut self) -> Vec<(String, ParamKind, &mut [f64])> {
        let mut out = Vec::new();
        for (l, layer) in self.layers.iter_mut().enumerate() {
            out.push((format!("layer{l}.w1"), ParamKind::Weight, layer.w1.as_mut_slice()));
            out.push((format!("layer{l}.w2"), ParamKind::Weight, layer.w2.as_mut_slice()));
            if let Some(k) = layer.kernel.as_mut() {
                out.push((format!("layer{l}.kernel"), ParamKind::KernelLogits, &mut k.w[..]));
            }
        }
        out.push(("readout.w".to_string(), ParamKind::Weight, self.readout_w.as_mut_slice()));
        out.push(("readout.b".to_string(), ParamKind::Weight, &mut self.readout_b[..]));
        out
    }

    /// Runs one sequence (`T x input_dim`). Returns the logits and, when
    /// `record` is set, the full trace needed for backpropagation.
    pub fn run_sample(
        &self,
        input: &Matrix,
        opts: ForwardOptions,
        mut dropout: Option<&mut Dropout>,
        record: bool,
    ) -> Result<(Vec<f64>, Option<SampleTrace>)> {
        let steps = input.rows();
        if steps == 0 {
            return Err(Error::invalid("empty input sequence"));
        }
        if input.cols() != self.input_dim() {
            return Err(Error::shape(format!(
                "input has {} features, network expects {}",
                input.cols(),
                self.input_dim()
            )));
        }
        if opts.test_mode {
            dropout = None;
        }

        let mut states: Vec<LayerState> = self
            .layers
            .iter()
            .map(|spec| LayerState::new(spec, opts.test_mode, opts.spike_fn))
            .collect();
        let mut traces: Vec<LayerTrace> = if record {
            self.layers
                .iter()
                .zip(&states)
                .map(|(spec, state)| {
                    let h = spec.hidden_dim;
                    LayerTrace {
                        u_pre: Matrix::zeros(steps, h),
                        s: Matrix::zeros(steps, h),
                        recurrent: Matrix::zeros(steps, h),
                        dropout_mask: dropout.as_ref().map(|_| Matrix::zeros(steps, h)),
                        p: state.p.clone(),
                    }
                })
                .collect()
        } else {
            Vec::new()
        };

        let last_width = self.layers.last().unwrap().hidden_dim;
        let mut output_sum = vec![0.0; last_width];
        let mut carried: Vec<f64> = Vec::new();
        let mut mask: Vec<f64> = Vec::new();

        for t in 0..steps {
            carried.clear();
            carried.extend_from_slice(input.row(t));
            for (l, spec) in self.layers.iter().enumerate() {
                let state = &mut states[l];
                layer_step(spec, state, &carried)?;
                carried.clear();
                carried.extend_from_slice(&state.s);
                if let Some(d) = dropout.as_deref_mut() {
                    mask.resize(spec.hidden_dim, 0.0);
                    d.mask(&mut mask);
                    for (c, m) in carried.iter_mut().zip(&mask) {
                        *c *= m;
                    }
                }
                if record {
                    let tr = &mut traces[l];
                    tr.u_pre.row_mut(t).copy_from_slice(&state.u);
                    tr.s.row_mut(t).copy_from_slice(&state.s);
                    tr.recurrent.row_mut(t).copy_from_slice(&state.recurrent);
                    if let Some(m) = tr.dropout_mask.as_mut() {
                        m.row_mut(t).copy_from_slice(&mask);
                    }
                }
            }
            for (acc, &v) in output_sum.iter_mut().zip(&carried) {
                *acc += v;
            }
        }

        let readout_input: Vec<f64> = match self.readout {
            Readout::MeanOverTime => {
                let inv_t = 1.0 / steps as f64;
                output_sum.iter().map(|v| v * inv_t).collect()
            }
            Readout::FinalStep => carried,
        };
        let mut logits = self.readout_b.clone();
        self.readout_w.matvec_acc(&readout_input, &mut logits)?;

        let trace = record.then(|| SampleTrace {
            input: input.clone(),
            layers: traces,
            readout_input,
            logits: logits.clone(),
        });
        Ok((logits, trace))
    }

    /// Logits for one sequence without recording a trace.
    pub fn logits(&self, input: &Matrix, test_mode: bool) -> Result<Vec<f64>> {
        let opts = ForwardOptions {
            test_mode,
            spike_fn: SpikeFn::Heaviside,
        };
        Ok(self.run_sample(input, opts, None, false)?.0)
    }
}

/// Batch forward. Samples are processed in order and independently. The
/// cache is filled only outside test mode.
pub fn network_forward(
    net: &Network,
    batch: &[&Matrix],
    opts: ForwardOptions,
    mut dropout: Option<&mut Dropout>,
) -> Result<(Vec<Vec<f64>>, Option<ForwardCache>)> {
    let steps = batch
        .first()
        .map(|m| m.rows())
        .ok_or_else(|| Error::invalid("empty batch"))?;
    if steps == 0 {
        return Err(Error::invalid("empty input sequence"));
    }
    if let Some(bad) = batch.iter().position(|m| m.rows() != steps) {
        return Err(Error::shape(format!(
            "sample {bad} has {} steps, sample 0 has {steps}",
            batch[bad].rows()
        )));
    }
    let record = !opts.test_mode;
    let mut all_logits = Vec::with_capacity(batch.len());
    let mut samples = Vec::with_capacity(if record { batch.len() } else { 0 });
    for input in batch {
        let (logits, trace) = net.run_sample(input, opts, dropout.as_deref_mut(), record)?;
        all_logits.push(logits);
        samples.extend(trace);
    }
    let cache = record.then_some(ForwardCache {
        samples,
        spike_fn: opts.spike_fn,
    });
    Ok((all_logits, cache))
}
