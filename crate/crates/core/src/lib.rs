//! Recurrent spiking neural networks with vanilla, fixed-skip and adaptive
//! skip recurrence, trained with surrogate-gradient backpropagation
//! through time.

pub mod error;
pub mod bptt;
pub mod data;
pub mod diagnostics;
pub mod ndcore;
pub mod optim;
pub mod run;
pub mod snn;

pub use error::{Error, Result};
