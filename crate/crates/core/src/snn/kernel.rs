//! Temperature-scaled softmax kernel that weights the candidate skip lags
//! of an adaptive layer.

/// Trainable lag logits plus the (non-trainable) temperature.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftmaxKernel {
    pub w: Vec<f64>,
    pub tau: f64,
}

impl SoftmaxKernel {
    /// Zero logits (uniform weights) at temperature 1.
    pub fn new(len: usize) -> Self {
        Self {
            w: vec![0.0; len],
            tau: 1.0,
        }
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    /// Lag weights `p[0..T_λ]`, where index `d` weights lag `d + 1`.
    ///
    /// In test mode the kernel is a hardmax: one-hot at the largest logit,
    /// ties going to the smallest index.
    pub fn weights(&self, test_mode: bool) -> Vec<f64> {
        if test_mode {
            let mut p = vec![0.0; self.w.len()];
            if let Some(best) = argmax(&self.w) {
                p[best] = 1.0;
            }
            p
        } else {
            softmax_tau(&self.w, self.tau)
        }
    }

    /// Lag (1-based) selected by the hardmax.
    pub fn argmax_lag(&self) -> usize {
        argmax(&self.w).map_or(1, |i| i + 1)
    }

    /// Chain rule through the training-mode softmax: given `dL/dp`,
    /// returns `dL/dw = p ⊙ (g - <p, g>) / τ`.
    pub fn backward(&self, p: &[f64], grad_p: &[f64]) -> Vec<f64> {
        let dot: f64 = p.iter().zip(grad_p).map(|(a, b)| a * b).sum();
        p.iter()
            .zip(grad_p)
            .map(|(&pi, &gi)| pi * (gi - dot) / self.tau)
            .collect()
    }
}

/// First index of the maximum; `None` for an empty slice.
pub fn argmax(values: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &v) in values.iter().enumerate() {
        match best {
            Some(b) if values[b] >= v => {}
            _ => best = Some(i),
        }
    }
    best
}

/// Numerically stable `softmax(x / tau)`.
pub fn softmax_tau(x: &[f64], tau: f64) -> Vec<f64> {
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = x.iter().map(|&v| ((v - max) / tau).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}
