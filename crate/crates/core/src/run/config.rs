use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::optim::OptimizerKind;
use crate::snn::{LifParams, Readout, RecurrenceMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetKind {
    Smnist,
    Psmnist,
    DelayedRecall,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeKind {
    Vanilla,
    Src,
    Asrc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScheduleKind {
    OneCycle,
    Cosine,
}

/// Readout choice in the config; `Auto` picks the final-step readout for
/// delayed recall and the temporal mean otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReadoutKind {
    Auto,
    Mean,
    Last,
}

macro_rules! keyword_enum {
    ($ty:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        impl $ty {
            pub fn as_str(self) -> &'static str {
                match self {
                    $($ty::$variant => $text),+
                }
            }
        }

        impl FromStr for $ty {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($text => Ok($ty::$variant),)+
                    other => Err(Error::Config(format!(
                        "unknown {} '{other}' (expected one of: {})",
                        stringify!($ty),
                        [$($text),+].join(", ")
                    ))),
                }
            }
        }
    };
}

keyword_enum!(DatasetKind { Smnist => "smnist", Psmnist => "psmnist", DelayedRecall => "delayed_recall" });
keyword_enum!(ModeKind { Vanilla => "vanilla", Src => "src", Asrc => "asrc" });
keyword_enum!(ScheduleKind { OneCycle => "onecycle", Cosine => "cosine" });
keyword_enum!(ReadoutKind { Auto => "auto", Mean => "mean", Last => "last" });

fn optimizer_name(kind: OptimizerKind) -> &'static str {
    match kind {
        OptimizerKind::Adam => "adam",
        OptimizerKind::AdamW => "adamw",
    }
}

fn parse_optimizer(s: &str) -> Result<OptimizerKind> {
    match s {
        "adam" => Ok(OptimizerKind::Adam),
        "adamw" => Ok(OptimizerKind::AdamW),
        other => Err(Error::Config(format!("unknown optimizer '{other}' (expected adam or adamw)"))),
    }
}

/// Everything that determines a training run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub dataset: DatasetKind,
    pub mode: ModeKind,
    pub lambda: usize,
    pub t_lambda: usize,
    pub hidden: Vec<usize>,
    pub alpha: f64,
    pub v_th: f64,
    pub base_lr: f64,
    pub kernel_lr_multiplier: f64,
    pub weight_decay: f64,
    pub dropout: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub permutation_seed: u64,
    pub schedule: ScheduleKind,
    pub optimizer: OptimizerKind,
    /// 0 selects the whole split.
    pub train_samples: usize,
    pub test_samples: usize,
    /// Delayed-recall length of the silent period.
    pub delay: usize,
    /// Delayed-recall class count.
    pub classes: usize,
    pub readout: ReadoutKind,
    /// Multiplier on the feedforward weights after fan-in initialisation.
    pub ff_gain: f64,
    pub data_dir: Option<PathBuf>,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    /// Sequential MNIST with the best-model ASRC architecture.
    fn default() -> Self {
        Self {
            dataset: DatasetKind::Smnist,
            mode: ModeKind::Asrc,
            lambda: 16,
            t_lambda: 41,
            hidden: vec![64, 128, 128],
            alpha: 0.5,
            v_th: 1.0,
            base_lr: 0.001,
            kernel_lr_multiplier: 100.0,
            weight_decay: 0.01,
            dropout: 0.0,
            batch_size: 256,
            epochs: 200,
            seed: 0,
            permutation_seed: 42,
            schedule: ScheduleKind::OneCycle,
            optimizer: OptimizerKind::AdamW,
            train_samples: 0,
            test_samples: 0,
            delay: 50,
            classes: 8,
            readout: ReadoutKind::Auto,
            ff_gain: 1.0,
            data_dir: None,
            output_dir: PathBuf::from("runs/default"),
        }
    }
}

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("invalid value '{value}' for {key}")))
}

impl RunConfig {
    /// Parses flat `key = value` lines (`#` starts a comment) on top of the
    /// defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut config = Self::default();
        config.apply_text(text)?;
        Ok(config)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value, got '{line}'", n + 1)))?;
            self.set(key.trim(), value.trim())
                .map_err(|e| Error::Config(format!("line {}: {}", n + 1, strip_prefix(e))))?;
        }
        Ok(())
    }

    /// Applies a `key=value` override.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (key, value) = assignment
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override '{assignment}' is not key=value")))?;
        self.set(key.trim(), value.trim())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "dataset" => self.dataset = value.parse()?,
            "mode" => self.mode = value.parse()?,
            "lambda" => self.lambda = parse_num(key, value)?,
            "t_lambda" => self.t_lambda = parse_num(key, value)?,
            "hidden" => {
                self.hidden = value
                    .split(',')
                    .map(|v| parse_num(key, v.trim()))
                    .collect::<Result<_>>()?
            }
            "alpha" => self.alpha = parse_num(key, value)?,
            "v_th" => self.v_th = parse_num(key, value)?,
            "base_lr" => self.base_lr = parse_num(key, value)?,
            "kernel_lr_multiplier" => self.kernel_lr_multiplier = parse_num(key, value)?,
            "weight_decay" => self.weight_decay = parse_num(key, value)?,
            "dropout" => self.dropout = parse_num(key, value)?,
            "batch_size" => self.batch_size = parse_num(key, value)?,
            "epochs" => self.epochs = parse_num(key, value)?,
            "seed" => self.seed = parse_num(key, value)?,
            "permutation_seed" => self.permutation_seed = parse_num(key, value)?,
            "schedule" => self.schedule = value.parse()?,
            "optimizer" => self.optimizer = parse_optimizer(value)?,
            "train_samples" => self.train_samples = parse_num(key, value)?,
            "test_samples" => self.test_samples = parse_num(key, value)?,
            "delay" => self.delay = parse_num(key, value)?,
            "classes" => self.classes = parse_num(key, value)?,
            "readout" => self.readout = value.parse()?,
            "ff_gain" => self.ff_gain = parse_num(key, value)?,
            "data_dir" => self.data_dir = (!value.is_empty()).then(|| PathBuf::from(value)),
            "output_dir" => self.output_dir = PathBuf::from(value),
            other => return Err(Error::Config(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    /// Canonical text form; parsing it reproduces the config exactly.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let hidden: Vec<String> = self.hidden.iter().map(usize::to_string).collect();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        kv("dataset", self.dataset.as_str().into());
        kv("mode", self.mode.as_str().into());
        kv("lambda", self.lambda.to_string());
        kv("t_lambda", self.t_lambda.to_string());
        kv("hidden", hidden.join(","));
        kv("alpha", format!("{:?}", self.alpha));
        kv("v_th", format!("{:?}", self.v_th));
        kv("base_lr", format!("{:?}", self.base_lr));
        kv("kernel_lr_multiplier", format!("{:?}", self.kernel_lr_multiplier));
        kv("weight_decay", format!("{:?}", self.weight_decay));
        kv("dropout", format!("{:?}", self.dropout));
        kv("batch_size", self.batch_size.to_string());
        kv("epochs", self.epochs.to_string());
        kv("seed", self.seed.to_string());
        kv("permutation_seed", self.permutation_seed.to_string());
        kv("schedule", self.schedule.as_str().into());
        kv("optimizer", optimizer_name(self.optimizer).into());
        kv("train_samples", self.train_samples.to_string());
        kv("test_samples", self.test_samples.to_string());
        kv("delay", self.delay.to_string());
        kv("classes", self.classes.to_string());
        kv("readout", self.readout.as_str().into());
        kv("ff_gain", format!("{:?}", self.ff_gain));
        kv(
            "data_dir",
            self.data_dir.as_ref().map(|p| p.display().to_string()).unwrap_or_default(),
        );
        kv("output_dir", self.output_dir.display().to_string());
        out
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.mode == ModeKind::Src && self.lambda < 1 {
            return fail("mode src requires lambda >= 1".into());
        }
        if self.mode == ModeKind::Asrc && self.t_lambda < 1 {
            return fail("mode asrc requires t_lambda >= 1".into());
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return fail(format!("hidden sizes must be positive, got {:?}", self.hidden));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return fail(format!("alpha {} outside [0, 1]", self.alpha));
        }
        if !(self.v_th > 0.0) {
            return fail(format!("v_th {} must be positive", self.v_th));
        }
        if !(self.base_lr > 0.0 && self.base_lr.is_finite()) {
            return fail(format!("base_lr {} must be positive", self.base_lr));
        }
        if !(self.kernel_lr_multiplier > 0.0) {
            return fail("kernel_lr_multiplier must be positive".into());
        }
        if !(self.weight_decay >= 0.0) {
            return fail("weight_decay must be non-negative".into());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return fail(format!("dropout {} outside [0, 1)", self.dropout));
        }
        if !(self.ff_gain > 0.0 && self.ff_gain.is_finite()) {
            return fail(format!("ff_gain {} must be positive", self.ff_gain));
        }
        if self.batch_size == 0 {
            return fail("batch_size must be at least 1".into());
        }
        if self.dataset == DatasetKind::DelayedRecall {
            if self.classes < 2 || self.delay < 1 {
                return fail("delayed_recall needs classes >= 2 and delay >= 1".into());
            }
            if self.train_samples == 0 || self.test_samples == 0 {
                return fail("delayed_recall needs explicit train_samples and test_samples".into());
            }
        }
        Ok(())
    }

    pub fn recurrence(&self) -> RecurrenceMode {
        match self.mode {
            ModeKind::Vanilla => RecurrenceMode::Vanilla,
            ModeKind::Src => RecurrenceMode::Src { lambda: self.lambda },
            ModeKind::Asrc => RecurrenceMode::Asrc { t_lambda: self.t_lambda },
        }
    }

    pub fn lif(&self) -> LifParams {
        LifParams::new(self.alpha, self.v_th)
    }

    pub fn readout_mode(&self) -> Readout {
        match (self.readout, self.dataset) {
            (ReadoutKind::Mean, _) => Readout::MeanOverTime,
            (ReadoutKind::Last, _) => Readout::FinalStep,
            (ReadoutKind::Auto, DatasetKind::DelayedRecall) => Readout::FinalStep,
            (ReadoutKind::Auto, _) => Readout::MeanOverTime,
        }
    }
}

fn strip_prefix(e: Error) -> String {
    match e {
        Error::Config(msg) => msg,
        other => other.to_string(),
    }
}
