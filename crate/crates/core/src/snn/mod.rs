//! Spiking network forward dynamics: LIF neurons, the three recurrence
//! modes, the lag kernel and the readout.

mod kernel;
mod layer;
mod lif;
mod loss;
mod network;
mod ring;

pub use kernel::{argmax, softmax_tau, SoftmaxKernel};
pub use layer::{layer_step, LayerSpec, LayerState, RecurrenceMode};
pub use lif::{lif_step, smooth_heaviside, surrogate_grad, LifParams, SpikeFn};
pub use loss::{cross_entropy, predict};
pub use network::{
    network_forward, Dropout, ForwardCache, ForwardOptions, LayerTrace, Network, ParamKind,
    Readout, SampleTrace, Topology,
};
pub use ring::SpikeRing;
