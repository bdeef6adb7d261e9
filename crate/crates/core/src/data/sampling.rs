use super::SequenceDataset;
use crate::error::{Error, Result};
use crate::ndcore::Rng;

/// Deterministic class-interleaved ordering of all samples: each class's
/// indices are shuffled with `seed`, then classes are visited round-robin.
/// Any prefix therefore has per-class counts differing by at most one while
/// every class still has samples left.
pub fn stratified_order(labels: &[usize], classes: usize, seed: u64) -> Vec<usize> {
    let mut rng = Rng::new(seed);
    let mut per_class: Vec<Vec<usize>> = vec![Vec::new(); classes];
    for (i, &l) in labels.iter().enumerate() {
        per_class[l].push(i);
    }
    for bucket in &mut per_class {
        rng.shuffle(bucket);
    }
    let mut order = Vec::with_capacity(labels.len());
    let longest = per_class.iter().map(Vec::len).max().unwrap_or(0);
    for round in 0..longest {
        for bucket in &per_class {
            if let Some(&i) = bucket.get(round) {
                order.push(i);
            }
        }
    }
    order
}

/// Class-stratified selection of `n` samples.
pub fn stratified_select(dataset: &SequenceDataset, n: usize, seed: u64) -> Result<SequenceDataset> {
    if n > dataset.len() {
        return Err(Error::invalid(format!("requested {n} samples from a pool of {}", dataset.len())));
    }
    let order = stratified_order(&dataset.labels, dataset.classes, seed);
    dataset.subset(&order[..n])
}

/// Disjoint class-stratified train and test subsets drawn from one pool.
pub fn subsample(
    dataset: &SequenceDataset,
    n_train: usize,
    n_test: usize,
    seed: u64,
) -> Result<(SequenceDataset, SequenceDataset)> {
    let need = n_train
        .checked_add(n_test)
        .ok_or_else(|| Error::invalid("subsample sizes overflow"))?;
    if need > dataset.len() {
        return Err(Error::invalid(format!(
            "requested {n_train} + {n_test} samples from a pool of {}",
            dataset.len()
        )));
    }
    let order = stratified_order(&dataset.labels, dataset.classes, seed);
    Ok((dataset.subset(&order[..n_train])?, dataset.subset(&order[n_train..need])?))
}

/// Shuffled index batches for one epoch; the last batch may be partial.
pub fn batches(n: usize, batch_size: usize, epoch_seed: u64) -> Result<Vec<Vec<usize>>> {
    if batch_size == 0 {
        return Err(Error::invalid("batch size must be at least 1"));
    }
    let mut order: Vec<usize> = (0..n).collect();
    Rng::new(epoch_seed).shuffle(&mut order);
    Ok(order.chunks(batch_size).map(<[usize]>::to_vec).collect())
}
