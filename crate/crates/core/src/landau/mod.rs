//! The linear magnetic problem on a lattice cell.
//!
//! Fields live on the logical grid `y in [0,1]^2` of a cell and obey the
//! magnetic boundary condition
//! `psi(x + t) = exp(i (b/2) x.Jt + i c_t) psi(x)` for `t in {t1, t2}`,
//! which in logical coordinates reads
//! `psi(y1+1, y2) = exp(i pi n y2 + i c1) psi` and
//! `psi(y1, y2+1) = exp(-i pi n y1 + i c2) psi`.
//!
//! On the normalized cell (field `n`, area `2 pi`) the Landau levels of
//! `L = -Delta_{A0}` are spanned by
//!
//! `phi_{k,j}(x) = N (-i)^k sum_{m = j mod n} exp(i theta_m(x)) h_k(u_m(x))`
//!
//! where `h_k` are Hermite functions, `u_m = sqrt(n) (x2 + m nu / n)`,
//! `nu = (2 pi Im tau)^{1/2}` and `theta_m = (n/2) x1 x2 + pi Re(tau) m^2 / n + m nu x1`.
//! The level-0 functions are the theta series of the null space of `L - n`;
//! higher levels are generated by the raising operator.

mod field;
pub mod fd;
mod theta;

use std::f64::consts::PI;

pub use field::{cell_average, quasi_periodicity_residual, QuasiPeriodicField};
pub use theta::{LadderTerm, ThetaCoeffs};

use crate::lattice::{cell_geometry, in_fundamental_domain, Cell, LatticeShape};
use crate::spectral::SpectralGrid;
use crate::{Error, Result, C64};

/// Default number of Landau levels above the ground level.
pub const DEFAULT_LEVELS: usize = 32;

/// Accepted range of `Im tau`.
pub const TAU_IM_MIN: f64 = 0.2;
pub const TAU_IM_MAX: f64 = 20.0;

/// Extra Gaussian width (in units of `u`) kept beyond the classical turning
/// point of the highest level.
const TAIL_WIDTH: f64 = 12.0;

/// Fills `out[k] = H_k(u) exp(-u^2/2) / (2^k k!)^{1/2}` for all `k`.
pub fn hermite_functions(u: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    out[0] = (-0.5 * u * u).exp();
    if out.len() > 1 {
        out[1] = std::f64::consts::SQRT_2 * u * out[0];
    }
    for k in 1..out.len().saturating_sub(1) {
        let kf = k as f64;
        out[k + 1] = (2.0 / (kf + 1.0)).sqrt() * u * out[k] - (kf / (kf + 1.0)).sqrt() * out[k - 1];
    }
}

pub(crate) fn check_shape(shape: &LatticeShape) -> Result<()> {
    let tau = shape.tau();
    if !in_fundamental_domain(tau) {
        return Err(Error::InvalidShape(format!(
            "tau = {} + {}i is outside the fundamental domain; normalize it first",
            tau.re, tau.im
        )));
    }
    if !(TAU_IM_MIN..=TAU_IM_MAX).contains(&tau.im) {
        return Err(Error::ShapeOutOfRange { tau_im: tau.im, min: TAU_IM_MIN, max: TAU_IM_MAX });
    }
    Ok(())
}

/// Direction of a ladder operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ladder {
    /// `alpha = D1 + i D2`, maps level `k` to `k - 1`.
    Lower,
    /// `alpha^* = -D1 + i D2`, maps level `k` to `k + 1`.
    Raise,
}

/// Tabulated Landau basis `phi_{k,j}` on the closed `(N+1)^2` grid of the
/// normalized cell, orthonormal for the cell average.
///
/// Coefficient vectors are indexed `k * n + j`.
#[derive(Debug, Clone)]
pub struct LandauBasis {
    n: u32,
    shape: LatticeShape,
    cell: Cell,
    grid: usize,
    max_level: usize,
    nu: f64,
    norm: f64,
    table: Vec<Vec<C64>>,
}

impl LandauBasis {
    /// Tabulates levels `0..=max_level` on an `N x N` grid.
    pub fn new(n: u32, shape: LatticeShape, grid: usize, max_level: usize) -> Result<Self> {
        check_shape(&shape)?;
        Self::build(n, shape, grid, max_level)
    }

    /// Tabulates the basis for an arbitrary `tau` in the upper half plane,
    /// without reducing it to the fundamental domain.
    pub fn for_tau(n: u32, tau: C64, grid: usize, max_level: usize) -> Result<Self> {
        if !(TAU_IM_MIN..=TAU_IM_MAX).contains(&tau.im) {
            return Err(Error::ShapeOutOfRange { tau_im: tau.im, min: TAU_IM_MIN, max: TAU_IM_MAX });
        }
        Self::build(n, LatticeShape::unreduced(tau), grid, max_level)
    }

    fn build(n: u32, shape: LatticeShape, grid: usize, max_level: usize) -> Result<Self> {
        if grid < 4 {
            return Err(Error::InvalidParameter(format!("grid size {grid} is too small")));
        }
        let geom = cell_geometry(shape, n, n as f64)?;
        let cell = geom.normalized_cell();
        let nf = n as f64;
        let nu = (2.0 * PI * shape.im()).sqrt();
        let norm = (nu * nf.sqrt() / PI.sqrt()).sqrt();
        let mut basis = Self {
            n,
            shape,
            cell,
            grid,
            max_level,
            nu,
            norm,
            table: Vec::new(),
        };
        let nn = n as usize;
        let side = grid + 1;
        let mut table = vec![vec![C64::new(0.0, 0.0); side * side]; (max_level + 1) * nn];
        let mut buf = vec![C64::new(0.0, 0.0); (max_level + 1) * nn];
        for j2 in 0..side {
            for j1 in 0..side {
                let y = [j1 as f64 / grid as f64, j2 as f64 / grid as f64];
                basis.evaluate_into(y, max_level, &mut buf);
                for (idx, v) in buf.iter().enumerate() {
                    table[idx][j2 * side + j1] = *v;
                }
            }
        }
        basis.table = table;
        Ok(basis)
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn shape(&self) -> LatticeShape {
        self.shape
    }

    pub fn cell(&self) -> Cell {
        self.cell
    }

    pub fn grid(&self) -> usize {
        self.grid
    }

    pub fn max_level(&self) -> usize {
        self.max_level
    }

    /// Number of coefficients for levels `0..=levels`.
    pub fn coeff_len(&self, levels: usize) -> usize {
        (levels + 1) * self.n as usize
    }

    /// Closed-grid samples of `phi_{k,j}`.
    pub fn values(&self, k: usize, j: usize) -> &[C64] {
        &self.table[k * self.n as usize + j]
    }

    /// Evaluates `phi_{k,j}(y)` for `k <= levels` at an arbitrary logical point.
    pub fn evaluate(&self, y: [f64; 2], levels: usize) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); (levels + 1) * self.n as usize];
        self.evaluate_into(y, levels, &mut out);
        out
    }

    fn evaluate_into(&self, y: [f64; 2], levels: usize, out: &mut [C64]) {
        let n = self.n as i64;
        let nf = self.n as f64;
        let x = self.cell.point(y[0], y[1]);
        let tau1 = self.shape.re();
        out.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
        // u_m = (nu / sqrt(n)) (n y2 + m) relative to the normalized cell
        let scale = self.nu / nf.sqrt();
        let cutoff = (2.0 * levels as f64 + 1.0).sqrt() + TAIL_WIDTH;
        let center = -nf * x[1] / self.nu;
        let half = cutoff / scale;
        let lo = (center - half).floor() as i64;
        let hi = (center + half).ceil() as i64;
        let mut h = vec![0.0; levels + 1];
        let base = 0.5 * nf * x[0] * x[1];
        for m in lo..=hi {
            let u = scale * (nf * x[1] / self.nu + m as f64);
            if u.abs() > cutoff {
                continue;
            }
            hermite_functions(u, &mut h);
            let mf = m as f64;
            let phase = base + PI * tau1 * mf * mf / nf + mf * self.nu * x[0];
            let e = C64::from_polar(self.norm, phase);
            let j = m.rem_euclid(n) as usize;
            let mut rot = e;
            for (k, hk) in h.iter().enumerate() {
                out[k * self.n as usize + j] += rot * *hk;
                rot *= C64::new(0.0, -1.0);
            }
        }
    }

    /// Closed-grid samples of `sum d_{k,j} phi_{k,j}`.
    pub fn synthesize(&self, coeffs: &[C64]) -> Vec<C64> {
        let side = self.grid + 1;
        let mut out = vec![C64::new(0.0, 0.0); side * side];
        for (idx, d) in coeffs.iter().enumerate() {
            if *d == C64::new(0.0, 0.0) {
                continue;
            }
            for (o, v) in out.iter_mut().zip(&self.table[idx]) {
                *o += *d * *v;
            }
        }
        out
    }

    /// Projections `<phi_{k,j}, f>` for `k <= levels`, computed with the
    /// rectangle rule over the `N x N` interior samples.
    pub fn analyze_interior(&self, interior: &[C64], levels: usize) -> Vec<C64> {
        let n = self.grid;
        let side = n + 1;
        let inv = 1.0 / (n * n) as f64;
        (0..self.coeff_len(levels))
            .map(|idx| {
                let t = &self.table[idx];
                let mut acc = C64::new(0.0, 0.0);
                for j2 in 0..n {
                    let row_t = &t[j2 * side..j2 * side + n];
                    let row_f = &interior[j2 * n..j2 * n + n];
                    for (a, b) in row_t.iter().zip(row_f) {
                        acc += a.conj() * b;
                    }
                }
                acc * inv
            })
            .collect()
    }

    /// Field with the given coefficients.
    pub fn field(&self, coeffs: Vec<C64>) -> Result<QuasiPeriodicField> {
        let nn = self.n as usize;
        if coeffs.is_empty() || coeffs.len() % nn != 0 || coeffs.len() > self.coeff_len(self.max_level) {
            return Err(Error::InvalidParameter(format!(
                "coefficient vector of length {} does not fit the basis",
                coeffs.len()
            )));
        }
        let samples = self.synthesize(&coeffs);
        Ok(QuasiPeriodicField {
            n: self.n,
            shape: self.shape,
            cell: self.cell,
            grid: self.grid,
            samples,
            cocycle: [0.0, 0.0],
            coeffs: Some(coeffs),
        })
    }

    /// Projects an arbitrary field on the basis, keeping levels `<= levels`.
    pub fn project(&self, f: &QuasiPeriodicField, levels: usize) -> Result<QuasiPeriodicField> {
        self.check_field(f)?;
        let c = self.analyze_interior(&f.interior(), levels);
        self.field(c)
    }

    fn check_field(&self, f: &QuasiPeriodicField) -> Result<()> {
        if f.n != self.n || f.grid != self.grid {
            return Err(Error::GridMismatch(format!(
                "field (n={}, N={}) vs basis (n={}, N={})",
                f.n, f.grid, self.n, self.grid
            )));
        }
        if f.cocycle != [0.0, 0.0] {
            return Err(Error::GridMismatch("basis fields use the canonical boundary phase".into()));
        }
        Ok(())
    }
}

/// Coefficient action of the ladder operators.
pub fn ladder_coeffs(n: u32, coeffs: &[C64], dir: Ladder) -> Vec<C64> {
    let nn = n as usize;
    let levels = coeffs.len() / nn;
    let two_n = 2.0 * n as f64;
    match dir {
        Ladder::Lower => {
            let mut out = vec![C64::new(0.0, 0.0); coeffs.len()];
            for k in 0..levels.saturating_sub(1) {
                let f = (two_n * (k + 1) as f64).sqrt();
                for j in 0..nn {
                    out[k * nn + j] = coeffs[(k + 1) * nn + j] * f;
                }
            }
            out
        }
        Ladder::Raise => {
            let mut out = vec![C64::new(0.0, 0.0); coeffs.len() + nn];
            for k in 0..levels {
                let f = (two_n * (k + 1) as f64).sqrt();
                for j in 0..nn {
                    out[(k + 1) * nn + j] = coeffs[k * nn + j] * f;
                }
            }
            out
        }
    }
}

/// The `n` level-0 fields spanning the null space of `L - n`, built from the
/// theta series with `K` retained terms on either side of the Gaussian peak
/// and normalized to `<|psi|^2> = 1`.
pub fn theta_null_basis(n: u32, shape: LatticeShape, k: usize, grid: usize) -> Result<Vec<QuasiPeriodicField>> {
    check_shape(&shape)?;
    if n == 0 {
        return Err(Error::InvalidParameter("flux number n must be at least 1".into()));
    }
    let needed = ThetaCoeffs::truncation(n, shape.im());
    if (k as i64) < needed {
        return Err(Error::InvalidParameter(format!(
            "theta truncation K = {k} is below the required {needed}"
        )));
    }
    if grid < 4 * k {
        return Err(Error::InvalidParameter(format!("grid N = {grid} must be at least 4K = {}", 4 * k)));
    }
    let geom = cell_geometry(shape, n, n as f64)?;
    let cell = geom.normalized_cell();
    let nf = n as f64;
    let nu = (2.0 * PI * shape.im()).sqrt();
    let norm = (nu * nf.sqrt() / PI.sqrt()).sqrt();
    let tau = shape.tau();
    (0..n as usize)
        .map(|j| {
            let mut c = vec![C64::new(0.0, 0.0); n as usize];
            c[j] = C64::new(1.0, 0.0);
            let mut theta = ThetaCoeffs::new(shape, c)?;
            theta.k = k as i64;
            // c_j = exp(i pi tau j^2 / n) in the basis convention
            let scale = (C64::new(0.0, PI * j as f64 * j as f64 / nf) * tau).exp() * norm;
            let side = grid + 1;
            let mut samples = Vec::with_capacity(side * side);
            for j2 in 0..side {
                for j1 in 0..side {
                    let x = cell.point(j1 as f64 / grid as f64, j2 as f64 / grid as f64);
                    samples.push(theta.evaluate(x) * scale);
                }
            }
            let mut coeffs = vec![C64::new(0.0, 0.0); n as usize];
            coeffs[j] = C64::new(1.0, 0.0);
            Ok(QuasiPeriodicField {
                n,
                shape,
                cell,
                grid,
                samples,
                cocycle: [0.0, 0.0],
                coeffs: Some(coeffs),
            })
        })
        .collect()
}

/// Applies a ladder operator. Fields with coefficients use the exact
/// coefficient algebra; plain sample fields are differentiated spectrally.
pub fn ladder_apply(basis: &LandauBasis, f: &QuasiPeriodicField, dir: Ladder) -> Result<QuasiPeriodicField> {
    match &f.coeffs {
        Some(c) => {
            basis.check_field(f)?;
            let out = ladder_coeffs(f.n, c, dir);
            if out.len() > basis.coeff_len(basis.max_level) {
                return Err(Error::InvalidParameter(format!(
                    "raising beyond the tabulated level {}",
                    basis.max_level
                )));
            }
            basis.field(out)
        }
        None => {
            let [d1, d2] = covariant_samples(f);
            let i = C64::new(0.0, 1.0);
            let s = match dir {
                Ladder::Lower => 1.0,
                Ladder::Raise => -1.0,
            };
            let interior: Vec<C64> = d1.iter().zip(&d2).map(|(a, b)| *a * s + i * *b).collect();
            Ok(f.with_interior(interior))
        }
    }
}

/// Applies `L = -Delta_{A0}`.
pub fn landau_apply(basis: &LandauBasis, f: &QuasiPeriodicField) -> Result<QuasiPeriodicField> {
    match &f.coeffs {
        Some(c) => {
            basis.check_field(f)?;
            let nn = f.n as usize;
            let nf = f.n as f64;
            let out: Vec<C64> =
                c.iter().enumerate().map(|(idx, d)| *d * ((2 * (idx / nn) + 1) as f64 * nf)).collect();
            basis.field(out)
        }
        None => {
            let [d1, d2] = covariant_samples(f);
            let g1 = covariant_samples(&f.with_interior(d1));
            let g2 = covariant_samples(&f.with_interior(d2));
            let interior = g1[0].iter().zip(&g2[1]).map(|(a, b)| -(*a + *b)).collect();
            Ok(f.with_interior(interior))
        }
    }
}

/// Covariant gradient `(D1 f, D2 f)` with `D = grad - i A0`.
pub fn covariant_gradient(basis: Option<&LandauBasis>, f: &QuasiPeriodicField) -> Result<[QuasiPeriodicField; 2]> {
    match (&f.coeffs, basis) {
        (Some(c), Some(basis)) => {
            basis.check_field(f)?;
            let lo = ladder_coeffs(f.n, c, Ladder::Lower);
            let hi = ladder_coeffs(f.n, c, Ladder::Raise);
            if hi.len() > basis.coeff_len(basis.max_level) {
                return Err(Error::InvalidParameter(format!(
                    "gradient needs level {} beyond the tabulated {}",
                    hi.len() / f.n as usize - 1,
                    basis.max_level
                )));
            }
            let mut d1 = vec![C64::new(0.0, 0.0); hi.len()];
            let mut d2 = vec![C64::new(0.0, 0.0); hi.len()];
            let half_i = C64::new(0.0, -0.5);
            for idx in 0..hi.len() {
                let a = lo.get(idx).copied().unwrap_or_default();
                let b = hi[idx];
                d1[idx] = (a - b) * 0.5;
                d2[idx] = (a + b) * half_i;
            }
            Ok([basis.field(d1)?, basis.field(d2)?])
        }
        _ => {
            let [d1, d2] = covariant_samples(f);
            Ok([f.with_interior(d1), f.with_interior(d2)])
        }
    }
}

/// Logical derivatives `(d/dy1, d/dy2)` of a quasi-periodic field, from its
/// `N x N` interior samples. The magnetic phase is stripped along each axis
/// so that the remaining factor is periodic and can be differentiated by FFT.
pub fn logical_derivatives(sg: &SpectralGrid, n: u32, cocycle: [f64; 2], interior: &[C64]) -> [Vec<C64>; 2] {
    let g = sg.n;
    let nf = n as f64;
    let mut row = vec![C64::new(0.0, 0.0); g * g];
    let mut col = vec![C64::new(0.0, 0.0); g * g];
    for j2 in 0..g {
        let y2 = sg.y(j2);
        for j1 in 0..g {
            let y1 = sg.y(j1);
            let idx = j2 * g + j1;
            let p = PI * nf * y1 * y2;
            row[idx] = interior[idx] * C64::from_polar(1.0, -p - cocycle[0] * y1);
            col[idx] = interior[idx] * C64::from_polar(1.0, p - cocycle[1] * y2);
        }
    }
    sg.forward_rows(&mut row);
    sg.forward_cols(&mut col);
    for j2 in 0..g {
        for j1 in 0..g {
            let idx = j2 * g + j1;
            row[idx] *= C64::new(0.0, 2.0 * PI * crate::spectral::mode(j1, g));
            col[idx] *= C64::new(0.0, 2.0 * PI * crate::spectral::mode(j2, g));
        }
    }
    sg.inverse_rows(&mut row);
    sg.inverse_cols(&mut col);
    // undo the phases and add the derivative of the stripped factor
    let mut out1 = vec![C64::new(0.0, 0.0); g * g];
    let mut out2 = vec![C64::new(0.0, 0.0); g * g];
    for j2 in 0..g {
        let y2 = sg.y(j2);
        for j1 in 0..g {
            let y1 = sg.y(j1);
            let idx = j2 * g + j1;
            let p = PI * nf * y1 * y2;
            let i = C64::new(0.0, 1.0);
            out1[idx] = C64::from_polar(1.0, p + cocycle[0] * y1) * row[idx]
                + i * (PI * nf * y2 + cocycle[0]) * interior[idx];
            out2[idx] = C64::from_polar(1.0, -p + cocycle[1] * y2) * col[idx]
                + i * (-PI * nf * y1 + cocycle[1]) * interior[idx];
        }
    }
    [out1, out2]
}

/// Covariant derivatives of a field's interior samples on its own cell,
/// with the symmetric potential `A0 = (b/2) J x`.
pub fn covariant_samples(f: &QuasiPeriodicField) -> [Vec<C64>; 2] {
    let sg = SpectralGrid::new(f.cell, f.grid);
    covariant_samples_with(&sg, f.n, f.cocycle, &f.interior())
}

/// As [`covariant_samples`] with a cached spectral grid.
pub fn covariant_samples_with(sg: &SpectralGrid, n: u32, cocycle: [f64; 2], interior: &[C64]) -> [Vec<C64>; 2] {
    let [dy1, dy2] = logical_derivatives(sg, n, cocycle, interior);
    let cell = sg.cell;
    let b = 2.0 * PI * n as f64 / cell.area();
    let g = sg.n;
    let mut d1 = Vec::with_capacity(g * g);
    let mut d2 = Vec::with_capacity(g * g);
    let i = C64::new(0.0, 1.0);
    for j2 in 0..g {
        for j1 in 0..g {
            let idx = j2 * g + j1;
            let x = cell.point(sg.y(j1), sg.y(j2));
            let [g1, g2] = cell.gradient(dy1[idx], dy2[idx]);
            // A0 = (b/2)(-x2, x1)
            d1.push(g1 + i * (0.5 * b * x[1]) * interior[idx]);
            d2.push(g2 - i * (0.5 * b * x[0]) * interior[idx]);
        }
    }
    [d1, d2]
}

#[cfg(test)]
mod tests;
