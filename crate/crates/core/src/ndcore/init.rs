//! Weight initialisers.

use super::{Matrix, Rng};
use crate::error::{Error, Result};

/// Householder QR of a square matrix. Returns `(Q, R)` with `A = Q R`.
pub fn householder_qr(a: &Matrix) -> Result<(Matrix, Matrix)> {
    let (n, m) = a.shape();
    if n != m {
        return Err(Error::shape(format!("QR expects a square matrix, got {n}x{m}")));
    }
    let mut r = a.clone();
    let mut q = Matrix::identity(n);
    let mut v = vec![0.0; n];

    for k in 0..n.saturating_sub(1) {
        let norm = (k..n).map(|i| r.get(i, k).powi(2)).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let x0 = r.get(k, k);
        let alpha = if x0 >= 0.0 { -norm } else { norm };
        for i in k..n {
            v[i] = r.get(i, k);
        }
        v[k] -= alpha;
        let v_norm_sq: f64 = (k..n).map(|i| v[i] * v[i]).sum();
        if v_norm_sq == 0.0 {
            continue;
        }
        let beta = 2.0 / v_norm_sq;

        // R <- (I - beta v vᵀ) R
        for j in k..n {
            let dot: f64 = (k..n).map(|i| v[i] * r.get(i, j)).sum();
            let f = beta * dot;
            for i in k..n {
                r.set(i, j, r.get(i, j) - f * v[i]);
            }
        }
        // Q <- Q (I - beta v vᵀ)
        for i in 0..n {
            let dot: f64 = (k..n).map(|j| q.get(i, j) * v[j]).sum();
            let f = beta * dot;
            for j in k..n {
                q.set(i, j, q.get(i, j) - f * v[j]);
            }
        }
        for i in k + 1..n {
            r.set(i, k, 0.0);
        }
    }
    Ok((q, r))
}

/// Orthogonal `n x n` matrix scaled by `gain`, from the QR factor of a
/// Gaussian matrix with columns sign-corrected so that `diag(R) > 0`.
pub fn orthogonal_init(n: usize, gain: f64, rng: &mut Rng) -> Result<Matrix> {
    if n == 0 {
        return Err(Error::invalid("orthogonal_init needs n >= 1"));
    }
    let data = (0..n * n).map(|_| rng.gauss()).collect();
    let gaussian = Matrix::from_vec(n, n, data)?;
    let (mut q, r) = householder_qr(&gaussian)?;
    for j in 0..n {
        if r.get(j, j) < 0.0 {
            for i in 0..n {
                q.set(i, j, -q.get(i, j));
            }
        }
    }
    q.scale(gain);
    Ok(q)
}

/// Entries i.i.d. uniform on `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`.
pub fn uniform_fanin_init(rows: usize, cols: usize, fan_in: usize, rng: &mut Rng) -> Result<Matrix> {
    if fan_in == 0 {
        return Err(Error::invalid("uniform_fanin_init needs fan_in >= 1"));
    }
    let bound = 1.0 / (fan_in as f64).sqrt();
    let data = (0..rows * cols)
        .map(|_| rng.uniform_range(-bound, bound))
        .collect();
    Matrix::from_vec(rows, cols, data)
}
