//! Temporal-gradient diagnostics: per-step gradient magnitudes, membrane
//! Jacobian products and their scalar bound, lag-kernel traces and firing
//! rates.

mod csv;
mod jacobian;
mod kernel_trace;
mod profile;

pub use csv::{fmt_e12, write_lines};
pub use jacobian::{scalar_bound_check, jacobian_chain, BoundCheck};
pub use kernel_trace::{KernelRow, KernelTrace};
pub use profile::{grad_profile, spike_rate, GradProfile};
