//! Backpropagation through time and the two independent gradient oracles
//! used to verify it.

mod backward;
mod finite_diff;
mod oracle;

pub use backward::{
    backward, backward_sample, batch_loss, batch_loss_and_grads, BatchGrad, Gradients, LayerGrads,
};
pub use finite_diff::{finite_diff_against, finite_diff_check, finite_diff_param, relative_error, FdReport};
pub use oracle::{scalar_oracle_backward, Tape, Var, MAX_ORACLE_PARAMS, MAX_ORACLE_STEPS};
