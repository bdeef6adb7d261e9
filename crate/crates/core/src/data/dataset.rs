use crate::error::{Error, Result};
use crate::ndcore::Matrix;

/// Labelled sequences sharing a length `steps` and input width `dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceDataset {
    /// One `steps x dim` matrix per sample.
    pub inputs: Vec<Matrix>,
    pub labels: Vec<usize>,
    pub steps: usize,
    pub dim: usize,
    pub classes: usize,
}

impl SequenceDataset {
    pub fn new(inputs: Vec<Matrix>, labels: Vec<usize>, classes: usize) -> Result<Self> {
        if inputs.len() != labels.len() {
            return Err(Error::shape(format!("{} inputs but {} labels", inputs.len(), labels.len())));
        }
        let (steps, dim) = inputs.first().map(|x| x.shape()).unwrap_or((0, 0));
        let dataset = Self {
            inputs,
            labels,
            steps,
            dim,
            classes,
        };
        dataset.validate()?;
        Ok(dataset)
    }

    pub fn validate(&self) -> Result<()> {
        if self.inputs.len() != self.labels.len() {
            return Err(Error::shape(format!("{} inputs but {} labels", self.inputs.len(), self.labels.len())));
        }
        for (i, x) in self.inputs.iter().enumerate() {
            if x.shape() != (self.steps, self.dim) {
                return Err(Error::shape(format!(
                    "sample {i} is {}x{}, expected {}x{}",
                    x.rows(),
                    x.cols(),
                    self.steps,
                    self.dim
                )));
            }
        }
        if let Some((i, &l)) = self.labels.iter().enumerate().find(|(_, &l)| l >= self.classes) {
            return Err(Error::invalid(format!("sample {i} has label {l} but only {} classes", self.classes)));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// New dataset holding copies of the given samples, in that order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.len()) {
            return Err(Error::invalid(format!("index {bad} out of range for {} samples", self.len())));
        }
        Ok(Self {
            inputs: indices.iter().map(|&i| self.inputs[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            steps: self.steps,
            dim: self.dim,
            classes: self.classes,
        })
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.classes];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    pub fn input_refs(&self, indices: &[usize]) -> Vec<&Matrix> {
        indices.iter().map(|&i| &self.inputs[i]).collect()
    }
}
