//! Dense linear algebra, deterministic random numbers and initialisers.

mod init;
mod matrix;
mod rng;

pub use init::{householder_qr, orthogonal_init, uniform_fanin_init};
pub use matrix::Matrix;
pub use rng::Rng;
