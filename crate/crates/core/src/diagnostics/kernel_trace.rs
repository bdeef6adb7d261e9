use std::path::Path;

use super::csv::{fmt_e12, write_lines};
use crate::error::{Error, Result};
use crate::snn::{argmax, Network};

/// Lag weights of one adaptive layer at the start of an epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelRow {
    pub epoch: usize,
    pub layer: usize,
    pub weights: Vec<f64>,
    /// Lag in `1..=T_λ` holding the largest weight.
    pub argmax_lag: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct KernelTrace {
    pub rows: Vec<KernelRow>,
}

impl KernelTrace {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends the current training-mode lag weights of every adaptive
    /// layer. `layer` indexes the network's layers, counted from 0.
    pub fn record(&mut self, net: &Network, epoch: usize) -> Result<()> {
        if !net.has_adaptive_layers() {
            return Err(Error::invalid("kernel trace needs at least one adaptive layer"));
        }
        for (l, spec) in net.layers.iter().enumerate() {
            if spec.kernel.is_some() {
                let weights = spec.lag_weights(false);
                self.rows.push(KernelRow {
                    epoch,
                    layer: l,
                    argmax_lag: argmax(&weights).expect("non-empty kernel") + 1,
                    weights,
                });
            }
        }
        Ok(())
    }

    /// Rows of the most recent epoch recorded.
    pub fn last_epoch(&self) -> Vec<&KernelRow> {
        let Some(last) = self.rows.last().map(|r| r.epoch) else {
            return Vec::new();
        };
        self.rows.iter().filter(|r| r.epoch == last).collect()
    }

    /// Writes `kernel_trace.csv` (`epoch,layer,lag,weight`) and
    /// `kernel_argmax.csv` (`epoch,layer,lag`) into `dir`.
    pub fn write_csv(&self, dir: &Path) -> Result<()> {
        let weights = self.rows.iter().flat_map(|r| {
            r.weights
                .iter()
                .enumerate()
                .map(move |(d, &w)| format!("{},{},{},{}", r.epoch, r.layer, d + 1, fmt_e12(w)))
        });
        write_lines(&dir.join("kernel_trace.csv"), "epoch,layer,lag,weight", weights)?;
        let lags = self
            .rows
            .iter()
            .map(|r| format!("{},{},{}", r.epoch, r.layer, r.argmax_lag));
        write_lines(&dir.join("kernel_argmax.csv"), "epoch,layer,lag", lags)
    }
}
