//! Leaky integrate-and-fire dynamics with soft reset and the triangle
//! surrogate derivative.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LifParams {
    /// Membrane decay per step, in `[0, 1]`.
    pub alpha: f64,
    pub v_th: f64,
    /// Half-width of the triangle surrogate.
    pub gamma: f64,
}

impl Default for LifParams {
    fn default() -> Self {
        Self::new(0.5, 1.0)
    }
}

impl LifParams {
    /// Surrogate width defaults to the threshold.
    pub fn new(alpha: f64, v_th: f64) -> Self {
        Self {
            alpha,
            v_th,
            gamma: v_th,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::invalid(format!("alpha {} outside [0, 1]", self.alpha)));
        }
        if !(self.v_th > 0.0) {
            return Err(Error::invalid(format!("v_th {} must be positive", self.v_th)));
        }
        if !(self.gamma > 0.0) {
            return Err(Error::invalid(format!("gamma {} must be positive", self.gamma)));
        }
        Ok(())
    }
}

/// How a membrane potential is turned into a spike value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SpikeFn {
    /// Binary threshold crossing.
    #[default]
    Heaviside,
    /// Piecewise-quadratic ramp whose derivative is the surrogate. Used
    /// only for finite-difference verification.
    Smooth,
}

impl SpikeFn {
    #[inline]
    pub fn apply(self, u_pre: f64, lif: &LifParams) -> f64 {
        match self {
            SpikeFn::Heaviside => {
                if u_pre >= lif.v_th {
                    1.0
                } else {
                    0.0
                }
            }
            SpikeFn::Smooth => smooth_heaviside(u_pre, lif),
        }
    }
}

/// Triangle surrogate for dS/dU: `max(0, γ - |u - V_th|) / γ²`.
#[inline]
pub fn surrogate_grad(u_pre: f64, lif: &LifParams) -> f64 {
    let g = lif.gamma;
    (g - (u_pre - lif.v_th).abs()).max(0.0) / (g * g)
}

/// Antiderivative of [`surrogate_grad`], clamped to `[0, 1]`.
#[inline]
pub fn smooth_heaviside(u_pre: f64, lif: &LifParams) -> f64 {
    let g = lif.gamma;
    let d = u_pre - lif.v_th;
    if d <= -g {
        0.0
    } else if d <= 0.0 {
        (d + g) * (d + g) / (2.0 * g * g)
    } else if d <= g {
        1.0 - (g - d) * (g - d) / (2.0 * g * g)
    } else {
        1.0
    }
}

/// One LIF update. `u_prev`/`s_prev` are the carried pre-reset potential
/// and spikes; the soft reset is applied here, before integration.
/// Writes the new pre-reset potential into `u_pre` and spikes into `s`.
pub fn lif_step(
    u_prev: &[f64],
    s_prev: &[f64],
    input_current: &[f64],
    lif: &LifParams,
    spike_fn: SpikeFn,
    u_pre: &mut [f64],
    s: &mut [f64],
) -> Result<()> {
    let n = u_prev.len();
    if s_prev.len() != n || input_current.len() != n || u_pre.len() != n || s.len() != n {
        return Err(Error::shape(format!(
            "lif_step lengths differ: u_prev {n}, s_prev {}, input {}, outputs {}/{}",
            s_prev.len(),
            input_current.len(),
            u_pre.len(),
            s.len()
        )));
    }
    for i in 0..n {
        let u = lif.alpha * (u_prev[i] - lif.v_th * s_prev[i]) + input_current[i];
        u_pre[i] = u;
        s[i] = spike_fn.apply(u, lif);
    }
    Ok(())
}
