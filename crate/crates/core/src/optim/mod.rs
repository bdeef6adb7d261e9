//! Adam/AdamW with per-group learning-rate multipliers, learning-rate
//! schedules and the lag-kernel temperature schedule.

mod adam;
mod schedule;

pub use adam::{adamw_step, network_groups, AdamConfig, OptimState, OptimizerKind, ParamGroup};
pub use schedule::{
    cosine_lr, onecycle_lr, temperature_at, TemperatureSchedule, ONECYCLE_DIV, ONECYCLE_FINAL_DIV,
    ONECYCLE_PCT,
};
