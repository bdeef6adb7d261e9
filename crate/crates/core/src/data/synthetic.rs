use super::SequenceDataset;
use crate::error::{Error, Result};
use crate::ndcore::{Matrix, Rng};

/// Delayed recall: a one-hot class cue at step 0 followed by `delay` zero
/// steps; the label is the cued class. Labels cycle through the classes
/// before shuffling, so class counts differ by at most one.
pub fn delayed_recall(n_samples: usize, delay: usize, classes: usize, seed: u64) -> Result<SequenceDataset> {
    if classes < 2 {
        return Err(Error::invalid(format!("delayed recall needs at least 2 classes, got {classes}")));
    }
    if delay < 1 {
        return Err(Error::invalid("delayed recall needs a delay of at least 1"));
    }
    let mut labels: Vec<usize> = (0..n_samples).map(|i| i % classes).collect();
    Rng::new(seed).shuffle(&mut labels);
    let inputs = labels
        .iter()
        .map(|&l| {
            let mut x = Matrix::zeros(delay + 1, classes);
            x.set(0, l, 1.0);
            x
        })
        .collect();
    SequenceDataset::new(inputs, labels, classes)
}
