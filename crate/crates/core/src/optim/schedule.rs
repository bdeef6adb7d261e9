use std::f64::consts::PI;

/// Fraction of the run spent warming up.
pub const ONECYCLE_PCT: f64 = 0.3;
/// Start value is `max_lr / ONECYCLE_DIV`.
pub const ONECYCLE_DIV: f64 = 25.0;
/// End value is `max_lr / ONECYCLE_FINAL_DIV`.
pub const ONECYCLE_FINAL_DIV: f64 = 1e4;

fn cos_interp(from: f64, to: f64, frac: f64) -> f64 {
    to + 0.5 * (from - to) * (1.0 + (PI * frac).cos())
}

/// Cosine one-cycle schedule over steps `0..total_steps`: rises from
/// `max_lr/25` to `max_lr` at step `0.3·(total_steps−1)`, then falls to
/// `max_lr/1e4` on the last step. Steps past the end are clamped.
pub fn onecycle_lr(step: usize, total_steps: usize, max_lr: f64) -> f64 {
    let start = max_lr / ONECYCLE_DIV;
    let end = max_lr / ONECYCLE_FINAL_DIV;
    if total_steps <= 1 {
        return start;
    }
    let last = (total_steps - 1) as f64;
    let peak = ONECYCLE_PCT * last;
    let s = (step as f64).min(last);
    if s <= peak {
        if peak == 0.0 {
            return max_lr;
        }
        cos_interp(start, max_lr, s / peak)
    } else {
        cos_interp(max_lr, end, (s - peak) / (last - peak))
    }
}

/// `min_lr + ½(max_lr−min_lr)(1+cos(π·epoch/total_epochs))`.
pub fn cosine_lr(epoch: usize, total_epochs: usize, max_lr: f64, min_lr: f64) -> f64 {
    if total_epochs == 0 {
        return max_lr;
    }
    let frac = (epoch.min(total_epochs)) as f64 / total_epochs as f64;
    cos_interp(max_lr, min_lr, frac)
}

/// Per-epoch exponential temperature decay for the lag kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TemperatureSchedule {
    pub tau0: f64,
    pub decay: f64,
    /// Lower bound applied during training only.
    pub floor: f64,
}

impl Default for TemperatureSchedule {
    fn default() -> Self {
        Self {
            tau0: 1.0,
            decay: 0.96,
            floor: 1e-4,
        }
    }
}

impl TemperatureSchedule {
    /// Temperature used while training during `epoch`, floored so that
    /// `exp(w/τ)` stays finite.
    pub fn training(&self, epoch: usize) -> f64 {
        temperature_at(self, epoch).max(self.floor)
    }
}

/// `tau0 · decay^epoch`.
pub fn temperature_at(schedule: &TemperatureSchedule, epoch: usize) -> f64 {
    schedule.tau0 * schedule.decay.powi(epoch.min(i32::MAX as usize) as i32)
}
