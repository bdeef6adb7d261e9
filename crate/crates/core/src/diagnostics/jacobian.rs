use crate::error::{Error, Result};
use crate::ndcore::Matrix;
use crate::snn::{surrogate_grad, LayerSpec, LifParams, RecurrenceMode};

/// `∂u_pre[t+k] / ∂u_pre[t]` for a vanilla layer given its cached
/// pre-reset potentials (`T x h`, rows indexed from 0). Each factor is
/// `J[t'] = αI + (W2 − αV_th·I)·diag(σ'(u_pre[t']))` and the product is
/// `J[t+k−1]···J[t]`.
pub fn jacobian_chain(spec: &LayerSpec, u_pre: &Matrix, t: usize, k: usize) -> Result<Matrix> {
    if spec.mode != RecurrenceMode::Vanilla {
        return Err(Error::invalid(format!(
            "jacobian chain is defined for vanilla recurrence, layer is {:?}",
            spec.mode
        )));
    }
    let h = spec.hidden_dim;
    if u_pre.cols() != h {
        return Err(Error::shape(format!("u_pre has {} columns, layer has {h} neurons", u_pre.cols())));
    }
    if t + k > u_pre.rows() {
        return Err(Error::invalid(format!("t + k = {} exceeds {} steps", t + k, u_pre.rows())));
    }
    let lif = &spec.lif;
    let mut product = Matrix::identity(h);
    for step in t..t + k {
        let mut j = spec.w2.clone();
        for c in 0..h {
            let sg = surrogate_grad(u_pre.get(step, c), lif);
            for r in 0..h {
                let diag = if r == c { lif.alpha * (1.0 - lif.v_th * sg) } else { 0.0 };
                j.set(r, c, j.get(r, c) * sg + diag);
            }
        }
        product = j.matmul(&product)?;
    }
    Ok(product)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundCheck {
    pub product: f64,
    pub bound: f64,
    pub holds: bool,
}

/// Scalar Jacobian product `∏ (α + (w2 − αV_th)·σ'(u[t']))` over the first
/// `k` entries of `trajectory`, against `max(α^k, |w2/V_th|^k)`. The bound
/// only applies for `|w2| ≤ V_th`.
pub fn scalar_bound_check(alpha: f64, w2: f64, v_th: f64, trajectory: &[f64], k: usize) -> Result<BoundCheck> {
    if w2.abs() > v_th {
        return Err(Error::invalid(format!("|w2| = {} exceeds v_th = {v_th}; bound does not apply", w2.abs())));
    }
    if trajectory.len() < k {
        return Err(Error::invalid(format!("trajectory has {} entries, need {k}", trajectory.len())));
    }
    let lif = LifParams::new(alpha, v_th);
    lif.validate()?;
    let product: f64 = trajectory[..k]
        .iter()
        .map(|&u| alpha + (w2 - alpha * v_th) * surrogate_grad(u, &lif))
        .product();
    let k = k as i32;
    let bound = alpha.powi(k).max((w2 / v_th).abs().powi(k));
    Ok(BoundCheck {
        product,
        bound,
        holds: product.abs() <= bound + 1e-12,
    })
}
