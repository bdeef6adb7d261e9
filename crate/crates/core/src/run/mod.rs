//! Training runs: configuration, data loading, the training loop,
//! checkpoints, evaluation, sweeps and the gradient self-check.

mod checkpoint;
mod config;
mod gradcheck;
mod sweep;
mod train;

use std::path::Path;

pub use checkpoint::{Checkpoint, Entry, CHECKPOINT_VERSION};
pub use config::{DatasetKind, ModeKind, ReadoutKind, RunConfig, ScheduleKind};
pub use gradcheck::{
    default_modes, mode_label, run_gradcheck, tiny_problem, GradcheckReport, ModeCheck, Mutation, FD_EPS,
    FD_TOLERANCE, ORACLE_TOLERANCE,
};
pub use sweep::{run_sweep, SweepAxis, SweepRow};
pub use train::{
    build_network, derive_seed, evaluate, evaluate_checked, files, load_datasets, load_state, train, train_on,
    EpochMetrics, TrainOutcome, TrainState, DATA_DIR_ENV, METRICS_HEADER,
};

use crate::diagnostics::{grad_profile, GradProfile, KernelTrace};
use crate::error::Result;
use crate::ndcore::Matrix;
use crate::snn::Readout;

/// Gradient profile of `state`'s network on the first `samples` test
/// sequences.
pub fn probe_gradients(state: &TrainState, samples: usize, readout: Readout) -> Result<GradProfile> {
    let (_, test) = load_datasets(&state.config)?;
    let n = samples.clamp(1, test.len().max(1));
    let idx: Vec<usize> = (0..n.min(test.len())).collect();
    let inputs: Vec<&Matrix> = test.input_refs(&idx);
    let labels: Vec<usize> = idx.iter().map(|&i| test.labels[i]).collect();
    grad_profile(&state.net, &inputs, &labels, readout)
}

/// Writes the current lag weights and argmax lags of every adaptive layer.
pub fn export_kernels(state: &TrainState, dir: &Path) -> Result<KernelTrace> {
    let mut trace = KernelTrace::new();
    trace.record(&state.net, state.epoch)?;
    std::fs::create_dir_all(dir)?;
    trace.write_csv(dir)?;
    Ok(trace)
}
