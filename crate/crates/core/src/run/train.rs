use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use log::info;

use super::checkpoint::Checkpoint;
use super::config::{DatasetKind, RunConfig, ScheduleKind};
use crate::bptt::batch_loss_and_grads;
use crate::data::{
    apply_permutation, batches, delayed_recall, load_mnist_split, make_permutation, sequentialize,
    stratified_select, SequenceDataset,
};
use crate::diagnostics::{fmt_e12, write_lines, KernelTrace};
use crate::error::{Error, Result};
use crate::ndcore::Rng;
use crate::optim::{
    adamw_step, cosine_lr, network_groups, onecycle_lr, temperature_at, AdamConfig, OptimState,
    TemperatureSchedule,
};
use crate::snn::{predict, Dropout, ForwardOptions, Network, Topology};

/// Environment variable naming the MNIST directory when the config has no
/// `data_dir`.
pub const DATA_DIR_ENV: &str = "ASNN_DATA_DIR";

pub const METRICS_HEADER: &str = "epoch,train_loss,train_acc,test_acc,tau,lr";

const STREAM_INIT: u64 = 1;
const STREAM_TRAIN_DATA: u64 = 2;
const STREAM_TEST_DATA: u64 = 3;
const STREAM_BATCHES: u64 = 1 << 32;
const STREAM_DROPOUT: u64 = 2 << 32;

/// Independent sub-seed for one named use of the run seed.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    Rng::new(seed ^ stream.wrapping_mul(0xD1B5_4A32_D192_ED03)).next_u64()
}

/// Train and test splits for a config.
pub fn load_datasets(config: &RunConfig) -> Result<(SequenceDataset, SequenceDataset)> {
    match config.dataset {
        DatasetKind::DelayedRecall => Ok((
            delayed_recall(
                config.train_samples,
                config.delay,
                config.classes,
                derive_seed(config.seed, STREAM_TRAIN_DATA),
            )?,
            delayed_recall(
                config.test_samples,
                config.delay,
                config.classes,
                derive_seed(config.seed, STREAM_TEST_DATA),
            )?,
        )),
        DatasetKind::Smnist | DatasetKind::Psmnist => {
            let dir = resolve_data_dir(config)?;
            let pick = |train: bool, n: usize, stream: u64| -> Result<SequenceDataset> {
                let raw = load_mnist_split(&dir, train)?;
                let raw = if n == 0 {
                    raw
                } else {
                    stratified_select(&raw, n, derive_seed(config.seed, stream))?
                };
                let seq = sequentialize(&raw);
                if config.dataset == DatasetKind::Psmnist {
                    apply_permutation(&seq, &make_permutation(config.permutation_seed))
                } else {
                    Ok(seq)
                }
            };
            Ok((
                pick(true, config.train_samples, STREAM_TRAIN_DATA)?,
                pick(false, config.test_samples, STREAM_TEST_DATA)?,
            ))
        }
    }
}

fn resolve_data_dir(config: &RunConfig) -> Result<PathBuf> {
    config
        .data_dir
        .clone()
        .or_else(|| std::env::var_os(DATA_DIR_ENV).map(PathBuf::from))
        .ok_or_else(|| Error::Config(format!("MNIST needs data_dir or the {DATA_DIR_ENV} environment variable")))
}

/// Freshly initialised network for a config and data shape.
pub fn build_network(config: &RunConfig, input_dim: usize, classes: usize) -> Result<Network> {
    config.validate()?;
    let topology = Topology::uniform(input_dim, &config.hidden, classes, config.recurrence(), config.lif());
    let mut rng = Rng::new(derive_seed(config.seed, STREAM_INIT));
    let mut net = Network::init(&topology, &mut rng)?;
    if config.ff_gain != 1.0 {
        for layer in &mut net.layers {
            layer.w1.scale(config.ff_gain);
        }
    }
    net.readout = config.readout_mode();
    Ok(net)
}

/// Test-mode accuracy (hardmax lag selection, no dropout).
pub fn evaluate(net: &Network, dataset: &SequenceDataset) -> Result<f64> {
    if dataset.is_empty() {
        return Ok(0.0);
    }
    let mut correct = 0;
    for (x, &label) in dataset.inputs.iter().zip(&dataset.labels) {
        if predict(&net.logits(x, true)?) == label {
            correct += 1;
        }
    }
    Ok(correct as f64 / dataset.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub test_acc: f64,
    pub tau: f64,
    pub lr: f64,
}

impl EpochMetrics {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.epoch,
            fmt_e12(self.train_loss),
            fmt_e12(self.train_acc),
            fmt_e12(self.test_acc),
            fmt_e12(self.tau),
            fmt_e12(self.lr)
        )
    }
}

/// Everything needed to continue or evaluate a run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    pub config: RunConfig,
    pub net: Network,
    pub optim: OptimState,
    /// Completed epochs.
    pub epoch: usize,
    pub best_test_acc: f64,
}

impl TrainState {
    pub fn new(config: RunConfig, net: Network) -> Self {
        let optim = OptimState::for_network(&net);
        Self {
            config,
            net,
            optim,
            epoch: 0,
            best_test_acc: f64::NEG_INFINITY,
        }
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut c = Checkpoint::new();
        for (l, layer) in self.net.layers.iter().enumerate() {
            c.push(format!("layer{l}.w1"), &[layer.w1.rows(), layer.w1.cols()], layer.w1.as_slice().to_vec());
            c.push(format!("layer{l}.w2"), &[layer.w2.rows(), layer.w2.cols()], layer.w2.as_slice().to_vec());
            if let Some(k) = &layer.kernel {
                c.push(format!("layer{l}.kernel"), &[k.w.len()], k.w.clone());
            }
        }
        let r = &self.net.readout_w;
        c.push("readout.w", &[r.rows(), r.cols()], r.as_slice().to_vec());
        c.push("readout.b", &[self.net.readout_b.len()], self.net.readout_b.clone());
        c.push_scalar("tau", self.net.temperature().unwrap_or(temperature_at(&TemperatureSchedule::default(), self.epoch)));
        c.push_scalar("epoch", self.epoch as f64);
        c.push_scalar("best_test_acc", self.best_test_acc);
        c.push_scalar("optim.step", self.optim.step as f64);
        for ((name, _, _), (m, v)) in self.net.params().iter().zip(self.optim.m.iter().zip(&self.optim.v)) {
            c.push(format!("optim.m.{name}"), &[m.len()], m.clone());
            c.push(format!("optim.v.{name}"), &[v.len()], v.clone());
        }
        c.push_text("run_config", &self.config.to_text());
        c
    }

    pub fn from_checkpoint(c: &Checkpoint) -> Result<Self> {
        let config = RunConfig::parse(&c.text("run_config")?)?;
        let w1 = c.get("layer0.w1")?;
        let rw = c.get("readout.w")?;
        let (input_dim, classes) = match (&w1.dims[..], &rw.dims[..]) {
            ([_, i], [k, _]) => (*i, *k),
            _ => return Err(Error::Checkpoint("weight entries must be matrices".into())),
        };
        let mut net = build_network(&config, input_dim, classes)?;
        for (name, _, dst) in net.params_mut() {
            let e = c.get(&name)?;
            if e.data.len() != dst.len() {
                return Err(Error::Checkpoint(format!(
                    "entry '{name}' has {} values, config implies {}",
                    e.data.len(),
                    dst.len()
                )));
            }
            dst.copy_from_slice(&e.data);
        }
        net.set_temperature(c.scalar("tau")?);
        let mut optim = OptimState::for_network(&net);
        optim.step = c.scalar("optim.step")? as u64;
        for (i, (name, _, _)) in net.params().iter().enumerate() {
            for (prefix, dst) in [("m", &mut optim.m[i]), ("v", &mut optim.v[i])] {
                let e = c.get(&format!("optim.{prefix}.{name}"))?;
                if e.data.len() != dst.len() {
                    return Err(Error::Checkpoint(format!("optimizer moments for '{name}' have the wrong size")));
                }
                dst.copy_from_slice(&e.data);
            }
        }
        Ok(Self {
            config,
            net,
            optim,
            epoch: c.scalar("epoch")? as usize,
            best_test_acc: c.scalar("best_test_acc")?,
        })
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub metrics: Vec<EpochMetrics>,
    pub best_test_acc: f64,
    pub final_state: TrainState,
    pub kernel_trace: Option<KernelTrace>,
}

/// Output file names inside the run directory.
pub mod files {
    pub const METRICS: &str = "metrics.csv";
    pub const CONFIG: &str = "config.txt";
    pub const LAST: &str = "checkpoint_last.asnn";
    pub const BEST: &str = "checkpoint_best.asnn";
    pub const RUN_LOG: &str = "run.log";
}

/// Loads the data for `config` and trains, writing outputs to its
/// `output_dir`.
pub fn train(config: &RunConfig) -> Result<TrainOutcome> {
    config.validate()?;
    let (train_set, test_set) = load_datasets(config)?;
    train_on(config, &train_set, &test_set, Some(&config.output_dir))
}

fn unix_time() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

struct RunLog(Option<fs::File>);

impl RunLog {
    fn line(&mut self, msg: &str) {
        if let Some(f) = self.0.as_mut() {
            let _ = writeln!(f, "{:.3} {msg}", unix_time());
        }
    }
}

/// Trains on the given splits. With `out` set, writes `metrics.csv`, the
/// config echo, best and last checkpoints, kernel traces (adaptive runs)
/// and a timestamped `run.log`.
pub fn train_on(
    config: &RunConfig,
    train_set: &SequenceDataset,
    test_set: &SequenceDataset,
    out: Option<&Path>,
) -> Result<TrainOutcome> {
    config.validate()?;
    if train_set.is_empty() {
        return Err(Error::invalid("training set is empty"));
    }
    if (test_set.dim, test_set.classes) != (train_set.dim, train_set.classes) {
        return Err(Error::shape("train and test sets differ in input width or class count"));
    }
    let net = build_network(config, train_set.dim, train_set.classes)?;
    let mut state = TrainState::new(config.clone(), net);
    let groups = network_groups(&state.net, config.weight_decay, config.kernel_lr_multiplier);
    let adam = AdamConfig::new(config.optimizer);
    let temps = TemperatureSchedule::default();
    let adaptive = state.net.has_adaptive_layers();
    let mut trace = adaptive.then(KernelTrace::new);

    let mut log = RunLog(None);
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        fs::write(dir.join(files::CONFIG), config.to_text())?;
        log.0 = Some(OpenOptions::new().create(true).append(true).open(dir.join(files::RUN_LOG))?);
        log.line(&format!("start {} samples train, {} test", train_set.len(), test_set.len()));
    }

    let n = train_set.len();
    let steps_per_epoch = n.div_ceil(config.batch_size);
    let total_steps = steps_per_epoch * config.epochs;
    let mut metrics = Vec::with_capacity(config.epochs);
    let write_metrics = |metrics: &[EpochMetrics]| -> Result<()> {
        if let Some(dir) = out {
            write_lines(&dir.join(files::METRICS), METRICS_HEADER, metrics.iter().map(EpochMetrics::csv_row))?;
        }
        Ok(())
    };
    write_metrics(&metrics)?;
    if let Some(dir) = out {
        state.to_checkpoint().save(&dir.join(files::LAST))?;
    }

    for epoch in 0..config.epochs {
        let started = Instant::now();
        state.net.set_temperature(temps.training(epoch));
        if let Some(t) = trace.as_mut() {
            t.record(&state.net, epoch)?;
        }
        let mut dropout = (config.dropout > 0.0)
            .then(|| Dropout::new(config.dropout, derive_seed(config.seed, STREAM_DROPOUT + epoch as u64)))
            .transpose()?;
        let mut loss_sum = 0.0;
        let mut correct = 0;
        let mut lr = config.base_lr;
        for (b, idx) in batches(n, config.batch_size, derive_seed(config.seed, STREAM_BATCHES + epoch as u64))?
            .iter()
            .enumerate()
        {
            lr = match config.schedule {
                ScheduleKind::OneCycle => onecycle_lr(epoch * steps_per_epoch + b, total_steps, config.base_lr),
                ScheduleKind::Cosine => cosine_lr(epoch, config.epochs, config.base_lr, 0.0),
            };
            let inputs = train_set.input_refs(idx);
            let labels: Vec<usize> = idx.iter().map(|&i| train_set.labels[i]).collect();
            let step = batch_loss_and_grads(&state.net, &inputs, &labels, ForwardOptions::train(), dropout.as_mut())?;
            if !step.grads.is_finite() || !step.loss.is_finite() {
                return Err(Error::invalid(format!("non-finite loss or gradient in epoch {epoch}, batch {b}")));
            }
            loss_sum += step.loss * idx.len() as f64;
            correct += step.correct;
            let grads = step.grads.slices();
            let mut params: Vec<&mut [f64]> = state.net.params_mut().into_iter().map(|(_, _, p)| p).collect();
            adamw_step(&mut params, &grads, &mut state.optim, lr, &groups, &adam)?;
        }
        let test_acc = evaluate(&state.net, test_set)?;
        let row = EpochMetrics {
            epoch,
            train_loss: loss_sum / n as f64,
            train_acc: correct as f64 / n as f64,
            test_acc,
            tau: temperature_at(&temps, epoch),
            lr,
        };
        metrics.push(row);
        state.epoch = epoch + 1;
        state.net.set_temperature(temps.training(epoch + 1));
        let improved = test_acc > state.best_test_acc;
        if improved {
            state.best_test_acc = test_acc;
        }
        info!(
            "epoch {epoch}: loss {:.4} train {:.4} test {:.4} tau {:.4} lr {:.2e}",
            row.train_loss, row.train_acc, row.test_acc, row.tau, row.lr
        );
        write_metrics(&metrics)?;
        if let Some(dir) = out {
            let ckpt = state.to_checkpoint();
            ckpt.save(&dir.join(files::LAST))?;
            if improved {
                ckpt.save(&dir.join(files::BEST))?;
            }
            log.line(&format!("epoch {epoch} done in {:.1}s", started.elapsed().as_secs_f64()));
        }
    }

    if let Some(t) = trace.as_mut() {
        state.net.set_temperature(temps.training(config.epochs));
        t.record(&state.net, config.epochs)?;
        if let Some(dir) = out {
            t.write_csv(dir)?;
        }
    }
    log.line("finished");
    Ok(TrainOutcome {
        best_test_acc: state.best_test_acc,
        metrics,
        final_state: state,
        kernel_trace: trace,
    })
}

/// Loads a checkpoint file into a [`TrainState`].
pub fn load_state(path: &Path) -> Result<TrainState> {
    TrainState::from_checkpoint(&Checkpoint::load(path)?)
}

/// Accuracy of `net` on `dataset` after checking that their shapes agree.
pub fn evaluate_checked(net: &Network, dataset: &SequenceDataset) -> Result<f64> {
    if net.input_dim() != dataset.dim || net.classes() != dataset.classes {
        return Err(Error::shape(format!(
            "network expects {} inputs and {} classes, dataset has {} and {}",
            net.input_dim(),
            net.classes(),
            dataset.dim,
            dataset.classes
        )));
    }
    evaluate(net, dataset)
}

