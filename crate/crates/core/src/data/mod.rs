//! Dataset ingestion and synthesis: MNIST IDX files, sequential and
//! permuted-sequential views, stratified subsets, batching and the
//! delayed-recall task.

mod dataset;
mod idx;
mod permutation;
mod sampling;
mod synthetic;

pub use dataset::SequenceDataset;
pub use idx::{load_mnist_split, parse_idx, read_maybe_gzip, MNIST_CLASSES};
pub use permutation::{apply_permutation, make_permutation, make_permutation_len, Permutation, SEQ_MNIST_LEN};
pub use sampling::{batches, stratified_order, stratified_select, subsample};
pub use synthetic::delayed_recall;

/// Row-major flatten of every sample to one scalar per timestep.
pub fn sequentialize(dataset: &SequenceDataset) -> SequenceDataset {
    let inputs = dataset
        .inputs
        .iter()
        .map(|x| {
            crate::ndcore::Matrix::from_vec(x.rows() * x.cols(), 1, x.as_slice().to_vec())
                .expect("flatten preserves length")
        })
        .collect();
    SequenceDataset {
        inputs,
        labels: dataset.labels.clone(),
        steps: dataset.steps * dataset.dim,
        dim: 1,
        classes: dataset.classes,
    }
}
