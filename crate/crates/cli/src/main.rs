use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use asnn_core::diagnostics::{fmt_e12, write_lines};
use asnn_core::run::{
    default_modes, evaluate_checked, export_kernels, load_datasets, load_state, probe_gradients, run_gradcheck,
    run_sweep, train, Mutation, RunConfig,
};
use asnn_core::snn::Readout;
use clap::{Args, Parser, Subcommand, ValueEnum};

/// Recurrent spiking networks with skip and adaptive skip recurrence.
#[derive(Parser)]
#[command(name = "asnn", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Config file of `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set mode=src --set lambda=16`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl ConfigArgs {
    fn load(&self) -> Result<RunConfig> {
        let mut config = RunConfig::default();
        if let Some(path) = &self.config {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            config.apply_text(&text).with_context(|| format!("in {}", path.display()))?;
        }
        for o in &self.overrides {
            config.apply_override(o)?;
        }
        config.validate()?;
        Ok(config)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum MutationArg {
    FlipW2,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReadoutArg {
    Mean,
    Last,
}

#[derive(Subcommand)]
enum Command {
    /// Train a network; writes metrics, checkpoints and kernel traces.
    Train(ConfigArgs),
    /// Test-mode accuracy of a checkpoint.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Override keys of the stored config (data location, test size).
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Directory for eval.csv; defaults to the checkpoint's directory.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Check BPTT against a scalar tape and finite differences.
    Gradcheck {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Inject a known gradient bug to confirm the check fails.
        #[arg(long)]
        mutate: Option<MutationArg>,
    },
    /// Train once per lambda or t_lambda value.
    Sweep {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        axis: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<usize>,
    },
    /// Mean |dLoss/du| per layer and step on test sequences.
    ProbeGradients {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, default_value_t = 32)]
        samples: usize,
        #[arg(long, value_enum)]
        readout: Option<ReadoutArg>,
        #[arg(long, default_value = "grad_profile.csv")]
        output: PathBuf,
    },
    /// Write the lag weights and argmax lags of a checkpoint.
    ExportKernels {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
}

fn cmd_train(args: &ConfigArgs) -> Result<()> {
    let config = args.load()?;
    let outcome = train(&config)?;
    let last = outcome.metrics.last();
    println!(
        "trained {} epochs, best test acc {:.4}, final test acc {:.4}, outputs in {}",
        outcome.metrics.len(),
        outcome.best_test_acc.max(0.0),
        last.map_or(0.0, |m| m.test_acc),
        config.output_dir.display()
    );
    Ok(())
}

fn cmd_eval(checkpoint: &Path, overrides: &[String], output: Option<&Path>) -> Result<()> {
    let mut state = load_state(checkpoint)?;
    for o in overrides {
        state.config.apply_override(o)?;
    }
    let (_, test) = load_datasets(&state.config)?;
    let acc = evaluate_checked(&state.net, &test)?;
    let dir = output
        .map(Path::to_path_buf)
        .or_else(|| checkpoint.parent().map(Path::to_path_buf))
        .unwrap_or_default();
    fs::create_dir_all(&dir)?;
    let correct = (acc * test.len() as f64).round() as usize;
    write_lines(
        &dir.join("eval.csv"),
        "samples,correct,accuracy",
        [format!("{},{correct},{}", test.len(), fmt_e12(acc))],
    )?;
    println!("accuracy {acc:.6} ({correct}/{})", test.len());
    Ok(())
}

fn cmd_gradcheck(seed: u64, mutate: Option<MutationArg>) -> Result<bool> {
    let mutation = match mutate {
        Some(MutationArg::FlipW2) => Mutation::FlipW2Sign,
        None => Mutation::None,
    };
    let report = run_gradcheck(&default_modes(), seed, mutation)?;
    for line in report.lines() {
        println!("{line}");
    }
    println!("gradcheck {}", if report.passed() { "passed" } else { "FAILED" });
    Ok(report.passed())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Train(args) => cmd_train(args).map(|_| true),
        Command::Eval {
            checkpoint,
            overrides,
            output,
        } => cmd_eval(checkpoint, overrides, output.as_deref()).map(|_| true),
        Command::Gradcheck { seed, mutate } => cmd_gradcheck(*seed, *mutate),
        Command::Sweep { config, axis, values } => (|| {
            let config = config.load()?;
            let rows = run_sweep(&config, axis.parse()?, values)?;
            for r in rows {
                println!("{axis}={} best test acc {:.4}", r.value, r.best_test_acc);
            }
            Ok(true)
        })(),
        Command::ProbeGradients {
            checkpoint,
            config,
            samples,
            readout,
            output,
        } => (|| {
            let state = match checkpoint {
                Some(path) => load_state(path)?,
                None => {
                    let config = config.load()?;
                    let (train_set, _) = load_datasets(&config)?;
                    let net = asnn_core::run::build_network(&config, train_set.dim, train_set.classes)?;
                    asnn_core::run::TrainState::new(config, net)
                }
            };
            let readout = match readout {
                Some(ReadoutArg::Mean) => Readout::MeanOverTime,
                Some(ReadoutArg::Last) => Readout::FinalStep,
                None => state.net.readout,
            };
            let profile = probe_gradients(&state, *samples, readout)?;
            profile.write_csv(output)?;
            for (l, layer) in profile.layers.iter().enumerate() {
                println!(
                    "layer {l}: t=1 {:.3e}  t=T {:.3e}",
                    layer.first().copied().unwrap_or(0.0),
                    layer.last().copied().unwrap_or(0.0)
                );
            }
            Ok(true)
        })(),
        Command::ExportKernels { checkpoint, output } => (|| {
            let trace = export_kernels(&load_state(checkpoint)?, output)?;
            for row in &trace.rows {
                println!("layer {}: argmax lag {}", row.layer, row.argmax_lag);
            }
            Ok(true)
        })(),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

