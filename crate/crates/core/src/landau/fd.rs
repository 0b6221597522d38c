//! Link-variable finite differences for `L = -Delta_A` on the normalized
//! square cell, used to cross-check the Landau spectrum.
//!
//! In the Landau gauge `A = (-n x2, 0)` fields are periodic in `x1` and pick
//! up `exp(-i n r x1)` under `x2 -> x2 + r`. A Fourier transform in the `x1`
//! index turns the `N^2 x N^2` operator into `gcd(n, N)` real symmetric
//! cyclic tridiagonal chains, whose eigenvalues are located by Sturm
//! bisection.

use std::f64::consts::PI;

use crate::{Error, Result};

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Diagonals of the cyclic chains, one vector per chain; the off-diagonal
/// (including the wrap-around entry) is `-1/h^2`.
pub fn chains(n: u32, grid: usize) -> Vec<Vec<f64>> {
    let nn = n as usize;
    let g = gcd(nn, grid);
    let len = grid * grid / g;
    let h2 = 2.0 * PI / (grid * grid) as f64;
    (0..g)
        .map(|p0| {
            (0..len)
                .map(|idx| {
                    let block = idx / grid;
                    let j2 = idx % grid;
                    let p = (p0 + nn * block) % grid;
                    let arg = 2.0 * PI * (p as f64 + (nn * j2) as f64 / grid as f64) / grid as f64;
                    (4.0 - 2.0 * arg.cos()) / h2
                })
                .collect()
        })
        .collect()
}

/// Number of eigenvalues below `lambda` of the cyclic tridiagonal matrix with
/// diagonal `diag` and constant off-diagonal `off`.
pub fn count_below(diag: &[f64], off: f64, lambda: f64) -> usize {
    let len = diag.len();
    let tiny = f64::MIN_POSITIVE.sqrt();
    let fix = |q: f64| if q.abs() < tiny { -tiny } else { q };
    if len == 1 {
        return usize::from(diag[0] + 2.0 * off - lambda < 0.0);
    }
    if len == 2 {
        // both couplings land on the same entry
        let a = diag[0] - lambda;
        let q = fix(a);
        let s = diag[1] - lambda - (2.0 * off) * (2.0 * off) / q;
        return usize::from(q < 0.0) + usize::from(s < 0.0);
    }
    // LDL^T of the leading (len-1) tridiagonal block
    let m = len - 1;
    let mut q = vec![0.0; m];
    let mut count = 0;
    q[0] = fix(diag[0] - lambda);
    for i in 1..m {
        q[i] = fix(diag[i] - lambda - off * off / q[i - 1]);
    }
    count += q.iter().filter(|v| **v < 0.0).count();
    // solve T' x = c with c = off (e_0 + e_{m-1})
    let mut y = vec![0.0; m];
    y[0] = off;
    for i in 1..m {
        let c = if i == m - 1 { off } else { 0.0 };
        y[i] = c - off / q[i - 1] * y[i - 1];
    }
    let mut x = vec![0.0; m];
    x[m - 1] = y[m - 1] / q[m - 1];
    for i in (0..m - 1).rev() {
        x[i] = y[i] / q[i] - off / q[i] * x[i + 1];
    }
    let schur = diag[m] - lambda - off * (x[0] + x[m - 1]);
    count + usize::from(schur < 0.0)
}

/// Lowest `count` eigenvalues of the discretized `L` for flux `n` on an
/// `N x N` grid of the square cell, in ascending order.
pub fn fd_spectrum(n: u32, grid: usize, count: usize) -> Result<Vec<f64>> {
    if n == 0 || grid < 4 {
        return Err(Error::InvalidParameter(format!("need n >= 1 and N >= 4, got n={n}, N={grid}")));
    }
    let chains = chains(n, grid);
    let h2 = 2.0 * PI / (grid * grid) as f64;
    let off = -1.0 / h2;
    let total = |lambda: f64| chains.iter().map(|d| count_below(d, off, lambda)).sum::<usize>();
    let upper = 8.0 / h2 + 1.0;
    (0..count)
        .map(|k| {
            let (mut lo, mut hi) = (-1.0, upper);
            while hi - lo > 1e-13 * hi.abs().max(1.0) {
                let mid = 0.5 * (lo + hi);
                if total(mid) > k {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            Ok(0.5 * (lo + hi))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    #[test]
    fn sturm_count_matches_dense_eigenvalues() {
        let diag = [3.0, -1.0, 2.5, 0.7, 4.2, 1.1];
        let off = -0.8;
        let len = diag.len();
        let mut a = DMatrix::<f64>::zeros(len, len);
        for i in 0..len {
            a[(i, i)] = diag[i];
            let j = (i + 1) % len;
            a[(i, j)] = off;
            a[(j, i)] = off;
        }
        let eig = a.symmetric_eigen().eigenvalues;
        for lambda in [-3.0, -0.5, 0.0, 1.0, 2.0, 3.3, 6.0] {
            let dense = eig.iter().filter(|v| **v < lambda).count();
            assert_eq!(count_below(&diag, off, lambda), dense, "lambda = {lambda}");
        }
    }
}
