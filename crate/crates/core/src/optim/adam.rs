use crate::error::{Error, Result};
use crate::snn::{Network, ParamKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizerKind {
    /// Weight decay added to the gradient as an L2 term.
    Adam,
    /// Decoupled weight decay `θ -= lr·wd·θ` before the Adam delta.
    AdamW,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub kind: OptimizerKind,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn new(kind: OptimizerKind) -> Self {
        Self {
            kind,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self::new(OptimizerKind::AdamW)
    }
}

/// A set of parameter tensors (indices into the parameter list) sharing a
/// learning-rate multiplier and weight decay.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGroup {
    pub params: Vec<usize>,
    pub lr_multiplier: f64,
    pub weight_decay: f64,
}

/// Splits a network's parameters into the weight group and, if the network
/// has adaptive layers, the kernel-logit group (scaled lr, no decay).
pub fn network_groups(net: &Network, weight_decay: f64, kernel_lr_multiplier: f64) -> Vec<ParamGroup> {
    let mut weights = Vec::new();
    let mut kernels = Vec::new();
    for (i, (_, kind, _)) in net.params().iter().enumerate() {
        match kind {
            ParamKind::Weight => weights.push(i),
            ParamKind::KernelLogits => kernels.push(i),
        }
    }
    let mut groups = vec![ParamGroup {
        params: weights,
        lr_multiplier: 1.0,
        weight_decay,
    }];
    if !kernels.is_empty() {
        groups.push(ParamGroup {
            params: kernels,
            lr_multiplier: kernel_lr_multiplier,
            weight_decay: 0.0,
        });
    }
    groups
}

/// First and second moments per parameter tensor, plus the step count.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimState {
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub step: u64,
}

impl OptimState {
    pub fn new(sizes: &[usize]) -> Self {
        Self {
            m: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            v: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            step: 0,
        }
    }

    pub fn for_network(net: &Network) -> Self {
        let sizes: Vec<usize> = net.params().iter().map(|(_, _, p)| p.len()).collect();
        Self::new(&sizes)
    }
}

/// One bias-corrected Adam or AdamW step over all tensors. Each tensor must
/// belong to exactly one group; nothing is modified if validation fails.
pub fn adamw_step(
    params: &mut [&mut [f64]],
    grads: &[&[f64]],
    state: &mut OptimState,
    base_lr: f64,
    groups: &[ParamGroup],
    config: &AdamConfig,
) -> Result<()> {
    if !(base_lr > 0.0) || !base_lr.is_finite() {
        return Err(Error::invalid(format!("learning rate {base_lr} must be positive")));
    }
    let n = params.len();
    if grads.len() != n || state.m.len() != n || state.v.len() != n {
        return Err(Error::shape(format!(
            "{n} parameter tensors, {} gradients, {} moment tensors",
            grads.len(),
            state.m.len()
        )));
    }
    for i in 0..n {
        let len = params[i].len();
        if grads[i].len() != len || state.m[i].len() != len || state.v[i].len() != len {
            return Err(Error::shape(format!(
                "tensor {i}: parameter length {len}, gradient {}, moments {}/{}",
                grads[i].len(),
                state.m[i].len(),
                state.v[i].len()
            )));
        }
    }
    let mut owner = vec![None; n];
    for (g, group) in groups.iter().enumerate() {
        for &p in &group.params {
            match owner.get_mut(p) {
                None => return Err(Error::invalid(format!("group {g} names tensor {p} of {n}"))),
                Some(Some(_)) => return Err(Error::invalid(format!("tensor {p} is in two groups"))),
                Some(slot) => *slot = Some(g),
            }
        }
    }
    if let Some(p) = owner.iter().position(Option::is_none) {
        return Err(Error::invalid(format!("tensor {p} is not in any group")));
    }

    state.step += 1;
    let t = state.step as i32;
    let (b1, b2) = (config.beta1, config.beta2);
    let bc1 = 1.0 - b1.powi(t);
    let bc2 = 1.0 - b2.powi(t);

    for i in 0..n {
        let group = &groups[owner[i].unwrap()];
        let lr = base_lr * group.lr_multiplier;
        let wd = group.weight_decay;
        let (theta, g) = (&mut *params[i], grads[i]);
        let (m, v) = (&mut state.m[i], &mut state.v[i]);
        for k in 0..theta.len() {
            let mut gk = g[k];
            match config.kind {
                OptimizerKind::AdamW => theta[k] -= lr * wd * theta[k],
                OptimizerKind::Adam => gk += wd * theta[k],
            }
            m[k] = b1 * m[k] + (1.0 - b1) * gk;
            v[k] = b2 * v[k] + (1.0 - b2) * gk * gk;
            let m_hat = m[k] / bc1;
            let v_hat = v[k] / bc2;
            theta[k] -= lr * m_hat / (v_hat.sqrt() + config.eps);
        }
    }
    Ok(())
}
