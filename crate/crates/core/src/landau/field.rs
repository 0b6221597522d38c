use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::lattice::{Cell, LatticeShape};
use crate::{Error, Result, C64};

/// Complex samples of a field with magnetic boundary conditions.
///
/// `samples` holds the closed `(N+1) x (N+1)` logical grid, row-major with
/// `y1` fastest; the last row and column duplicate the first ones up to the
/// boundary phase. Quadratures use the `N x N` interior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuasiPeriodicField {
    pub n: u32,
    pub shape: LatticeShape,
    pub cell: Cell,
    pub grid: usize,
    pub samples: Vec<C64>,
    /// Constant boundary phases `(c1, c2)`; zero in the canonical gauge.
    pub cocycle: [f64; 2],
    /// Landau-basis coefficients, index `k * n + j`.
    pub coeffs: Option<Vec<C64>>,
}

/// Phase factor relating the wrapped edge to the first column/row.
#[inline]
fn edge_phase(n: u32, cocycle: [f64; 2], axis: usize, y_other: f64) -> C64 {
    let nf = n as f64;
    match axis {
        0 => C64::from_polar(1.0, PI * nf * y_other + cocycle[0]),
        _ => C64::from_polar(1.0, -PI * nf * y_other + cocycle[1]),
    }
}

impl QuasiPeriodicField {
    /// Builds the closed grid from `N x N` interior samples using the
    /// boundary condition.
    pub fn from_interior(
        n: u32,
        shape: LatticeShape,
        cell: Cell,
        grid: usize,
        cocycle: [f64; 2],
        interior: &[C64],
    ) -> Result<Self> {
        if interior.len() != grid * grid {
            return Err(Error::GridMismatch(format!(
                "expected {} interior samples, got {}",
                grid * grid,
                interior.len()
            )));
        }
        let side = grid + 1;
        let mut samples = vec![C64::new(0.0, 0.0); side * side];
        for j2 in 0..grid {
            samples[j2 * side..j2 * side + grid].copy_from_slice(&interior[j2 * grid..(j2 + 1) * grid]);
            let y2 = j2 as f64 / grid as f64;
            samples[j2 * side + grid] = interior[j2 * grid] * edge_phase(n, cocycle, 0, y2);
        }
        for j1 in 0..side {
            let y1 = j1 as f64 / grid as f64;
            samples[grid * side + j1] = samples[j1] * edge_phase(n, cocycle, 1, y1);
        }
        Ok(Self { n, shape, cell, grid, samples, cocycle, coeffs: None })
    }

    /// Same boundary data and cell, new interior samples, no coefficients.
    pub fn with_interior(&self, interior: Vec<C64>) -> Self {
        Self::from_interior(self.n, self.shape, self.cell, self.grid, self.cocycle, &interior)
            .expect("interior size matches the source field")
    }

    pub fn side(&self) -> usize {
        self.grid + 1
    }

    #[inline]
    pub fn at(&self, j1: usize, j2: usize) -> C64 {
        self.samples[j2 * self.side() + j1]
    }

    /// Interior `N x N` samples.
    pub fn interior(&self) -> Vec<C64> {
        let side = self.side();
        let mut out = Vec::with_capacity(self.grid * self.grid);
        for j2 in 0..self.grid {
            out.extend_from_slice(&self.samples[j2 * side..j2 * side + self.grid]);
        }
        out
    }

    /// Cell average of `|psi|^2`.
    pub fn mean_abs2(&self) -> f64 {
        self.interior().iter().map(|z| z.norm_sqr()).sum::<f64>() / (self.grid * self.grid) as f64
    }

    /// `<self, other>` = cell average of `conj(self) other`.
    pub fn inner(&self, other: &Self) -> C64 {
        let a = self.interior();
        let b = other.interior();
        a.iter().zip(&b).map(|(x, y)| x.conj() * y).sum::<C64>() / a.len() as f64
    }

    /// `(<|psi|^2>)^{1/2}`.
    pub fn norm(&self) -> f64 {
        self.mean_abs2().sqrt()
    }

    pub fn scale(&self, s: C64) -> Self {
        let mut out = self.clone();
        out.samples.iter_mut().for_each(|z| *z *= s);
        if let Some(c) = out.coeffs.as_mut() {
            c.iter_mut().for_each(|z| *z *= s);
        }
        out
    }

    /// `self + s * other`; coefficients are kept if both sides have them.
    pub fn axpy(&self, s: C64, other: &Self) -> Result<Self> {
        if self.grid != other.grid || self.n != other.n || self.cocycle != other.cocycle {
            return Err(Error::GridMismatch("fields live on different grids or gauges".into()));
        }
        let samples = self.samples.iter().zip(&other.samples).map(|(a, b)| *a + s * *b).collect();
        let coeffs = match (&self.coeffs, &other.coeffs) {
            (Some(a), Some(b)) => {
                let len = a.len().max(b.len());
                let mut c = vec![C64::new(0.0, 0.0); len];
                for (i, z) in a.iter().enumerate() {
                    c[i] += *z;
                }
                for (i, z) in b.iter().enumerate() {
                    c[i] += s * *z;
                }
                Some(c)
            }
            _ => None,
        };
        Ok(Self { samples, coeffs, ..self.clone() })
    }

    /// Closed-grid samples of `|psi|^2` (a periodic scalar).
    pub fn density(&self) -> Vec<f64> {
        self.samples.iter().map(|z| z.norm_sqr()).collect()
    }
}

/// Cell average of a scalar grid by the rectangle rule.
///
/// Accepts either `N x N` interior samples or a closed `(N+1) x (N+1)` grid;
/// a closed grid must be periodic (edges equal to the opposite edges).
pub fn cell_average(values: &[C64], grid: usize) -> Result<C64> {
    let side = grid + 1;
    if values.len() == grid * grid {
        return Ok(values.iter().sum::<C64>() / values.len() as f64);
    }
    if values.len() != side * side {
        return Err(Error::GridMismatch(format!(
            "{} samples fit neither a {grid}x{grid} nor a closed grid",
            values.len()
        )));
    }
    let scale = values.iter().fold(0.0f64, |m, z| m.max(z.norm())).max(1.0);
    let mut mismatch = 0.0f64;
    for j in 0..side {
        mismatch = mismatch.max((values[j * side + grid] - values[j * side]).norm());
        mismatch = mismatch.max((values[grid * side + j] - values[j]).norm());
    }
    if mismatch > 1e-8 * scale {
        return Err(Error::NotPeriodic(mismatch));
    }
    let mut acc = C64::new(0.0, 0.0);
    for j2 in 0..grid {
        for j1 in 0..grid {
            acc += values[j2 * side + j1];
        }
    }
    Ok(acc / (grid * grid) as f64)
}

/// Largest mismatch between the wrapped edge samples and the phase-multiplied
/// opposite edge.
pub fn quasi_periodicity_residual(f: &QuasiPeriodicField) -> f64 {
    let g = f.grid;
    let mut res = 0.0f64;
    for j in 0..=g {
        let y = j as f64 / g as f64;
        let r1 = (f.at(g, j) - f.at(0, j) * edge_phase(f.n, f.cocycle, 0, y)).norm();
        let r2 = (f.at(j, g) - f.at(j, 0) * edge_phase(f.n, f.cocycle, 1, y)).norm();
        res = res.max(r1).max(r2);
    }
    res
}
