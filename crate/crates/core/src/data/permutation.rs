use super::SequenceDataset;
use crate::error::{Error, Result};
use crate::ndcore::{Matrix, Rng};

/// Sequence length of row-major MNIST.
pub const SEQ_MNIST_LEN: usize = 784;

/// Fixed reordering of timesteps: output step `t` reads input step
/// `order[t]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Permutation {
    pub seed: u64,
    pub order: Vec<usize>,
}

impl Permutation {
    pub fn inverse(&self) -> Permutation {
        let mut order = vec![0; self.order.len()];
        for (t, &src) in self.order.iter().enumerate() {
            order[src] = t;
        }
        Permutation { seed: self.seed, order }
    }

    pub fn is_bijection(&self) -> bool {
        let mut seen = vec![false; self.order.len()];
        self.order
            .iter()
            .all(|&i| i < seen.len() && !std::mem::replace(&mut seen[i], true))
    }
}

/// Fisher–Yates over `0..784` driven by the splitmix64 stream of `seed`.
pub fn make_permutation(seed: u64) -> Permutation {
    make_permutation_len(seed, SEQ_MNIST_LEN)
}

pub fn make_permutation_len(seed: u64, len: usize) -> Permutation {
    let mut order: Vec<usize> = (0..len).collect();
    Rng::new(seed).shuffle(&mut order);
    Permutation { seed, order }
}

/// Reorders the timesteps of every sample.
pub fn apply_permutation(dataset: &SequenceDataset, perm: &Permutation) -> Result<SequenceDataset> {
    if perm.order.len() != dataset.steps {
        return Err(Error::shape(format!(
            "permutation of length {} applied to {} timesteps",
            perm.order.len(),
            dataset.steps
        )));
    }
    let dim = dataset.dim;
    let inputs = dataset
        .inputs
        .iter()
        .map(|x| {
            let mut out = Matrix::zeros(dataset.steps, dim);
            for (t, &src) in perm.order.iter().enumerate() {
                out.row_mut(t).copy_from_slice(x.row(src));
            }
            out
        })
        .collect();
    Ok(SequenceDataset {
        inputs,
        ..dataset.clone_meta()
    })
}

impl SequenceDataset {
    fn clone_meta(&self) -> SequenceDataset {
        SequenceDataset {
            inputs: Vec::new(),
            labels: self.labels.clone(),
            steps: self.steps,
            dim: self.dim,
            classes: self.classes,
        }
    }
}
