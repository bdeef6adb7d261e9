use std::fs;
use std::str::FromStr;

use super::config::{ModeKind, RunConfig};
use super::train::{load_datasets, train_on};
use crate::diagnostics::{fmt_e12, write_lines};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    Lambda,
    TLambda,
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lambda" => Ok(SweepAxis::Lambda),
            "t_lambda" => Ok(SweepAxis::TLambda),
            other => Err(Error::Config(format!("unknown sweep axis '{other}' (expected lambda or t_lambda)"))),
        }
    }
}

impl SweepAxis {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepAxis::Lambda => "lambda",
            SweepAxis::TLambda => "t_lambda",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub value: usize,
    pub best_test_acc: f64,
}

/// One training run per value (ascending, duplicates dropped) with
/// everything else fixed. Each run writes into `<output_dir>/<axis>_<value>`
/// and the summary goes to `<output_dir>/sweep.csv`.
pub fn run_sweep(config: &RunConfig, axis: SweepAxis, values: &[usize]) -> Result<Vec<SweepRow>> {
    let expected = match axis {
        SweepAxis::Lambda => ModeKind::Src,
        SweepAxis::TLambda => ModeKind::Asrc,
    };
    if config.mode != expected {
        return Err(Error::Config(format!(
            "sweeping {} needs mode {}, config has {}",
            axis.as_str(),
            expected.as_str(),
            config.mode.as_str()
        )));
    }
    if values.is_empty() {
        return Err(Error::Config("sweep needs at least one value".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_unstable();
    sorted.dedup();

    config.validate()?;
    let (train_set, test_set) = load_datasets(config)?;
    fs::create_dir_all(&config.output_dir)?;
    let mut rows = Vec::with_capacity(sorted.len());
    for &value in &sorted {
        let mut run = config.clone();
        match axis {
            SweepAxis::Lambda => run.lambda = value,
            SweepAxis::TLambda => run.t_lambda = value,
        }
        run.output_dir = config.output_dir.join(format!("{}_{value}", axis.as_str()));
        let outcome = train_on(&run, &train_set, &test_set, Some(&run.output_dir))?;
        rows.push(SweepRow {
            value,
            best_test_acc: outcome.best_test_acc,
        });
        write_lines(
            &config.output_dir.join("sweep.csv"),
            &format!("{},best_test_acc", axis.as_str()),
            rows.iter().map(|r| format!("{},{}", r.value, fmt_e12(r.best_test_acc))),
        )?;
    }
    Ok(rows)
}
