//! Per-layer spike rates of a freshly initialised network on 64 training
//! sequences. Useful for choosing `ff_gain`.
//!
//! cargo run --release --example spike_rates -- configs/smnist_desk.conf ff_gain=4

use asnn_core::diagnostics::spike_rate;
use asnn_core::run::{build_network, load_datasets, RunConfig};
use asnn_core::snn::{network_forward, ForwardOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let path = args.next().ok_or("usage: spike_rates <config> [key=value ...]")?;
    let mut config = RunConfig::parse(&std::fs::read_to_string(path)?)?;
    for a in args {
        config.apply_override(&a)?;
    }
    let (train, _) = load_datasets(&config)?;
    let net = build_network(&config, train.dim, train.classes)?;
    let idx: Vec<usize> = (0..train.len().min(64)).collect();
    let (_, cache) = network_forward(&net, &train.input_refs(&idx), ForwardOptions::train(), None)?;
    for (l, rate) in spike_rate(&cache.expect("training mode records a cache")).iter().enumerate() {
        println!("layer {l}: {rate:.4}");
    }
    Ok(())
}
