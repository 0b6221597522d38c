//! Symmetries of lattice states and the constructive gauge fixing.
//!
//! A raw lattice state carries `Psi` with an arbitrary boundary cocycle
//! `Psi(y + e_i) = exp(i b/2 t_i ^ x + i c_i) Psi(y)` and a total potential
//! `A = (b/2) J x + a`, where the remainder `a` is periodic but otherwise
//! unconstrained (any mean, any divergence). Gauge functions are affine plus
//! periodic, `eta = C.x + p(y)`, which is the class that maps such states to
//! each other.
//!
//! [`fix_gauge`] brings a raw state to the normal form
//! `phi(x + t) = exp(i b/2 t ^ x) phi(x)`, `alpha` periodic, mean-zero and
//! divergence-free, via a gauge transformation followed by a magnetic
//! translation.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::glcore::{background_field, GLState, PeriodicVectorField};
use crate::landau::{covariant_samples_with, QuasiPeriodicField};
use crate::lattice::{apply_j, wedge, Cell};
use crate::spectral::{antiderivative_1d, max_abs, mean, SpectralGrid};
use crate::{Error, Result, C64};

/// `eta(x) = linear . x + periodic(y)`, the periodic part sampled on the
/// `N x N` grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaugeFunction {
    pub linear: [f64; 2],
    pub periodic: Vec<f64>,
}

impl GaugeFunction {
    pub fn zero(grid: usize) -> Self {
        Self { linear: [0.0, 0.0], periodic: vec![0.0; grid * grid] }
    }

    pub fn constant(grid: usize, c: f64) -> Self {
        Self { linear: [0.0, 0.0], periodic: vec![c; grid * grid] }
    }

    /// Samples of `eta` on the interior grid of `cell`.
    pub fn values(&self, cell: &Cell, grid: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(grid * grid);
        for j2 in 0..grid {
            for j1 in 0..grid {
                let x = cell.point(j1 as f64 / grid as f64, j2 as f64 / grid as f64);
                out.push(self.linear[0] * x[0] + self.linear[1] * x[1] + self.periodic[j2 * grid + j1]);
            }
        }
        out
    }

    pub fn gradient(&self, sg: &SpectralGrid) -> [Vec<f64>; 2] {
        let [g1, g2] = sg.gradient(&self.periodic);
        [g1.into_iter().map(|v| v + self.linear[0]).collect(), g2.into_iter().map(|v| v + self.linear[1]).collect()]
    }
}

/// A lattice state in an arbitrary gauge; see the module docs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawLatticeState {
    pub psi: QuasiPeriodicField,
    /// Periodic remainder `A - (b/2) J x`.
    pub a_rem: PeriodicVectorField,
}

/// Gauge-invariant fields of a state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observables {
    pub density: Vec<f64>,
    /// `curl A`.
    pub field: Vec<f64>,
    /// `Im(conj(Psi) (grad - i A) Psi)`.
    pub current: [Vec<f64>; 2],
}

fn wrap(phase: f64) -> f64 {
    let w = phase.rem_euclid(2.0 * PI);
    if w > PI {
        w - 2.0 * PI
    } else {
        w
    }
}

impl RawLatticeState {
    pub fn new(psi: QuasiPeriodicField, a_rem: PeriodicVectorField) -> Result<Self> {
        if psi.grid != a_rem.grid || psi.cell != a_rem.cell {
            return Err(Error::GridMismatch("order parameter and potential live on different grids".into()));
        }
        Ok(Self { psi, a_rem })
    }

    pub fn from_gl(state: &GLState) -> Self {
        Self { psi: state.psi.clone(), a_rem: state.alpha.clone() }
    }

    /// Reads a state from closed `(N+1) x (N+1)` samples of `Psi` and of the
    /// total potential `A`. The field is read off the boundary jumps of `A`,
    /// the flux must be a positive multiple of `2 pi`, and the cocycle of
    /// `Psi` is measured on the boundary.
    pub fn from_closed_samples(
        shape: crate::lattice::LatticeShape,
        cell: Cell,
        grid: usize,
        psi: &[C64],
        a: [&[f64]; 2],
    ) -> Result<Self> {
        let side = grid + 1;
        if psi.len() != side * side || a[0].len() != side * side || a[1].len() != side * side {
            return Err(Error::GridMismatch(format!("closed grids need {} samples", side * side)));
        }
        let at = |j1: usize, j2: usize| j2 * side + j1;
        // A(y + e_i) - A(y) = (b/2) J t_i
        let jt = [apply_j(cell.t1), apply_j(cell.t2)];
        let mut num = 0.0;
        let mut den = 0.0;
        for k in 0..grid {
            for (dir, j) in jt.iter().enumerate() {
                let (lo, hi) = if dir == 0 { (at(0, k), at(grid, k)) } else { (at(k, 0), at(k, grid)) };
                for c in 0..2 {
                    num += (a[c][hi] - a[c][lo]) * j[c];
                    den += 0.5 * j[c] * j[c];
                }
            }
        }
        let b_measured = num / den;
        let quanta = b_measured * cell.area() / (2.0 * PI);
        let n = quanta.round();
        if (quanta - n).abs() > 1e-6 || n < 1.0 {
            return Err(Error::FluxNotQuantized(quanta));
        }
        let n = n as u32;
        let b = background_field(&cell, n);
        let mut jump = 0.0f64;
        for k in 0..grid {
            for (dir, j) in jt.iter().enumerate() {
                let (lo, hi) = if dir == 0 { (at(0, k), at(grid, k)) } else { (at(k, 0), at(k, grid)) };
                for c in 0..2 {
                    jump = jump.max((a[c][hi] - a[c][lo] - 0.5 * b * j[c]).abs());
                }
            }
        }
        let scale = a.iter().flat_map(|v| v.iter()).fold(1.0f64, |m, v| m.max(v.abs()));
        if jump > 1e-8 * scale {
            return Err(Error::NotPeriodic(jump));
        }
        let nf = n as f64;
        let mut s1 = C64::new(0.0, 0.0);
        let mut s2 = C64::new(0.0, 0.0);
        for k in 0..grid {
            let y = k as f64 / grid as f64;
            s1 += psi[at(grid, k)] * psi[at(0, k)].conj() * C64::from_polar(1.0, -PI * nf * y);
            s2 += psi[at(k, grid)] * psi[at(k, 0)].conj() * C64::from_polar(1.0, PI * nf * y);
        }
        let cocycle = [if s1.norm() > 0.0 { s1.arg() } else { 0.0 }, if s2.norm() > 0.0 { s2.arg() } else { 0.0 }];
        let mut interior = Vec::with_capacity(grid * grid);
        let mut rem = [Vec::with_capacity(grid * grid), Vec::with_capacity(grid * grid)];
        for j2 in 0..grid {
            for j1 in 0..grid {
                interior.push(psi[at(j1, j2)]);
                let x = cell.point(j1 as f64 / grid as f64, j2 as f64 / grid as f64);
                let a0 = apply_j(x);
                rem[0].push(a[0][at(j1, j2)] - 0.5 * b * a0[0]);
                rem[1].push(a[1][at(j1, j2)] - 0.5 * b * a0[1]);
            }
        }
        let field = QuasiPeriodicField::from_interior(n, shape, cell, grid, cocycle, &interior)?;
        let mismatch = field.samples.iter().zip(psi).fold(0.0f64, |m, (u, v)| m.max((u - v).norm()));
        let pscale = psi.iter().fold(0.0f64, |m, v| m.max(v.norm()));
        if mismatch > 1e-8 * pscale.max(1e-300) && pscale > 0.0 {
            return Err(Error::NotPeriodic(mismatch));
        }
        Self::new(field, PeriodicVectorField::new(cell, grid, rem)?)
    }

    pub fn grid(&self) -> usize {
        self.psi.grid
    }

    pub fn cell(&self) -> Cell {
        self.psi.cell
    }

    /// Average field `b = 2 pi n / |cell|`.
    pub fn b(&self) -> f64 {
        background_field(&self.psi.cell, self.psi.n)
    }

    pub fn flux(&self) -> f64 {
        let sg = SpectralGrid::new(self.cell(), self.grid());
        self.cell().area() * (self.b() + mean(&sg.curl(&self.a_rem.comp)))
    }

    /// Closed samples of the total potential.
    pub fn total_potential(&self) -> [Vec<f64>; 2] {
        let grid = self.grid();
        let side = grid + 1;
        let cell = self.cell();
        let b = self.b();
        let mut out = [Vec::with_capacity(side * side), Vec::with_capacity(side * side)];
        for j2 in 0..side {
            for j1 in 0..side {
                let x = cell.point(j1 as f64 / grid as f64, j2 as f64 / grid as f64);
                let a0 = apply_j(x);
                let idx = (j2 % grid) * grid + j1 % grid;
                out[0].push(0.5 * b * a0[0] + self.a_rem.comp[0][idx]);
                out[1].push(0.5 * b * a0[1] + self.a_rem.comp[1][idx]);
            }
        }
        out
    }

    /// Interior samples of `(grad - i A) Psi`.
    fn covariant(&self, sg: &SpectralGrid) -> [Vec<C64>; 2] {
        let p = self.psi.interior();
        let [d1, d2] = covariant_samples_with(sg, self.psi.n, self.psi.cocycle, &p);
        let i = C64::new(0.0, 1.0);
        let f = |d: Vec<C64>, a: &[f64]| d.into_iter().zip(a).zip(&p).map(|((d, a), p)| d - i * a * p).collect();
        [f(d1, &self.a_rem.comp[0]), f(d2, &self.a_rem.comp[1])]
    }

    pub fn observables(&self) -> Observables {
        let sg = SpectralGrid::new(self.cell(), self.grid());
        let p = self.psi.interior();
        let d = self.covariant(&sg);
        let b = self.b();
        let cur = |c: usize| p.iter().zip(&d[c]).map(|(p, d)| (p.conj() * d).im).collect();
        Observables {
            density: p.iter().map(|z| z.norm_sqr()).collect(),
            field: sg.curl(&self.a_rem.comp).into_iter().map(|c| b + c).collect(),
            current: [cur(0), cur(1)],
        }
    }

    /// Energy per cell in the normalized form
    /// `(kappa^4/lambda^2) <|D_A Psi|^2 + (curl A)^2 + (kappa^2/2)(|Psi|^2 - lambda/kappa^2)^2>`.
    pub fn energy(&self, kappa: f64, lambda: f64) -> f64 {
        let sg = SpectralGrid::new(self.cell(), self.grid());
        let p = self.psi.interior();
        let d = self.covariant(&sg);
        let field = sg.curl(&self.a_rem.comp);
        let b = self.b();
        let k2 = kappa * kappa;
        let acc: f64 = (0..p.len())
            .map(|i| {
                let pot = p[i].norm_sqr() - lambda / k2;
                d[0][i].norm_sqr() + d[1][i].norm_sqr() + (b + field[i]).powi(2) + 0.5 * k2 * pot * pot
            })
            .sum();
        k2 * k2 / (lambda * lambda) * acc / p.len() as f64
    }
}

/// Largest pointwise difference between two sets of observables.
pub fn observable_distance(a: &Observables, b: &Observables) -> f64 {
    let d = |u: &[f64], v: &[f64]| u.iter().zip(v).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    d(&a.density, &b.density).max(d(&a.field, &b.field)).max(d(&a.current[0], &b.current[0])).max(d(&a.current[1], &b.current[1]))
}

/// `(e^{i eta} Psi, A + grad eta)`.
pub fn gauge_transform(state: &RawLatticeState, eta: &GaugeFunction) -> Result<RawLatticeState> {
    let grid = state.grid();
    if eta.periodic.len() != grid * grid {
        return Err(Error::GridMismatch("gauge function grid differs from the state".into()));
    }
    let cell = state.cell();
    let sg = SpectralGrid::new(cell, grid);
    let values = eta.values(&cell, grid);
    let p: Vec<C64> = state.psi.interior().iter().zip(&values).map(|(z, e)| z * C64::from_polar(1.0, *e)).collect();
    let lin = eta.linear;
    let c = state.psi.cocycle;
    let cocycle = [c[0] + lin[0] * cell.t1[0] + lin[1] * cell.t1[1], c[1] + lin[0] * cell.t2[0] + lin[1] * cell.t2[1]];
    let psi = QuasiPeriodicField::from_interior(state.psi.n, state.psi.shape, cell, grid, cocycle, &p)?;
    let g = eta.gradient(&sg);
    let comp = [
        state.a_rem.comp[0].iter().zip(&g[0]).map(|(a, b)| a + b).collect(),
        state.a_rem.comp[1].iter().zip(&g[1]).map(|(a, b)| a + b).collect(),
    ];
    RawLatticeState::new(psi, PeriodicVectorField::new(cell, grid, comp)?)
}

/// `Psi(y + d)` for a logical offset `d`, with the updated cocycle.
pub fn shift_field(psi: &QuasiPeriodicField, d: [f64; 2]) -> Result<QuasiPeriodicField> {
    let grid = psi.grid;
    let sg = SpectralGrid::new(psi.cell, grid);
    let nf = psi.n as f64;
    let c = psi.cocycle;
    let mut data = psi.interior();
    let y = |i: usize| i as f64 / grid as f64;
    // along y1: strip exp(i (pi n y2 + c1) y1) so the rows are periodic
    for j2 in 0..grid {
        let k = PI * nf * y(j2) + c[0];
        for j1 in 0..grid {
            data[j2 * grid + j1] *= C64::from_polar(1.0, -k * y(j1));
        }
    }
    sg.shift_rows(&mut data, d[0]);
    for j2 in 0..grid {
        let k = PI * nf * y(j2) + c[0];
        for j1 in 0..grid {
            data[j2 * grid + j1] *= C64::from_polar(1.0, k * (y(j1) + d[0]));
        }
    }
    let c2 = c[1] - PI * nf * d[0];
    // along y2 with the updated cocycle
    for j2 in 0..grid {
        for j1 in 0..grid {
            let k = -PI * nf * y(j1) + c2;
            data[j2 * grid + j1] *= C64::from_polar(1.0, -k * y(j2));
        }
    }
    sg.shift_cols(&mut data, d[1]);
    for j2 in 0..grid {
        for j1 in 0..grid {
            let k = -PI * nf * y(j1) + c2;
            data[j2 * grid + j1] *= C64::from_polar(1.0, k * (y(j2) + d[1]));
        }
    }
    let cocycle = [c[0] + PI * nf * d[1], c2];
    QuasiPeriodicField::from_interior(psi.n, psi.shape, psi.cell, grid, cocycle, &data)
}

/// Magnetic translation `exp(i (b/2) x ^ l) Psi(x + l)`: commutes with the
/// covariant derivative in the `(b/2) J x` gauge and shifts the boundary
/// constants by `(b/2) t_i ^ l` plus the shift of `Psi` itself.
pub fn magnetic_translation(psi: &QuasiPeriodicField, l: [f64; 2]) -> Result<QuasiPeriodicField> {
    let cell = psi.cell;
    let grid = psi.grid;
    let b = background_field(&cell, psi.n);
    let shifted = shift_field(psi, cell.logical(l))?;
    let mut data = shifted.interior();
    for j2 in 0..grid {
        for j1 in 0..grid {
            let x = cell.point(j1 as f64 / grid as f64, j2 as f64 / grid as f64);
            data[j2 * grid + j1] *= C64::from_polar(1.0, 0.5 * b * wedge(x, l));
        }
    }
    let c = shifted.cocycle;
    let cocycle = [c[0] + 0.5 * b * wedge(cell.t1, l), c[1] + 0.5 * b * wedge(cell.t2, l)];
    QuasiPeriodicField::from_interior(psi.n, psi.shape, cell, grid, cocycle, &data)
}

fn shift_vector(sg: &SpectralGrid, v: &PeriodicVectorField, d: [f64; 2]) -> Result<PeriodicVectorField> {
    PeriodicVectorField::new(v.cell, v.grid, [sg.shift(&v.comp[0], d), sg.shift(&v.comp[1], d)])
}

/// `(Psi(x + t), A(x + t))` for a physical offset `t`.
pub fn translate_state(state: &RawLatticeState, t: [f64; 2]) -> Result<RawLatticeState> {
    let cell = state.cell();
    let sg = SpectralGrid::new(cell, state.grid());
    let d = cell.logical(t);
    let psi = shift_field(&state.psi, d)?;
    let mut a = shift_vector(&sg, &state.a_rem, d)?;
    // A0(x + t) = A0(x) + (b/2) J t
    let jt = apply_j(t);
    let b = state.b();
    for c in 0..2 {
        a.comp[c].iter_mut().for_each(|v| *v += 0.5 * b * jt[c]);
    }
    RawLatticeState::new(psi, a)
}

/// Phase `Phi` with `Psi(y + m) = exp(i Phi) Psi(y)` for an integer shift `m`.
fn lattice_phase(n: u32, cocycle: [f64; 2], y: [f64; 2], m: [i64; 2]) -> f64 {
    let nf = n as f64;
    let (m1, m2) = (m[0] as f64, m[1] as f64);
    PI * nf * (m1 * y[1] - m2 * y[0]) - PI * nf * m1 * m2 + m1 * cocycle[0] + m2 * cocycle[1]
}

/// Result of [`rotate_state`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rotated {
    pub state: RawLatticeState,
    /// `true` when the rotation maps the lattice to itself and the state was
    /// resampled on the original cell; otherwise `state` lives on the
    /// rotated cell.
    pub same_lattice: bool,
}

/// `(Psi(R^{-1} x), R A(R^{-1} x))` for a rotation `R` (rows of the matrix).
pub fn rotate_state(state: &RawLatticeState, r: [[f64; 2]; 2]) -> Result<Rotated> {
    let det = r[0][0] * r[1][1] - r[0][1] * r[1][0];
    let orth = (r[0][0] * r[0][0] + r[1][0] * r[1][0] - 1.0).abs()
        + (r[0][1] * r[0][1] + r[1][1] * r[1][1] - 1.0).abs()
        + (r[0][0] * r[0][1] + r[1][0] * r[1][1]).abs();
    if orth > 1e-12 {
        return Err(Error::InvalidParameter("matrix is not orthogonal".into()));
    }
    if det < 0.0 {
        return Err(Error::Unsupported("reflections reverse the flux; compose with complex conjugation".into()));
    }
    let rot = |v: [f64; 2]| [r[0][0] * v[0] + r[0][1] * v[1], r[1][0] * v[0] + r[1][1] * v[1]];
    let grid = state.grid();
    let cell = state.cell();
    let rotated_a = [
        (0..grid * grid).map(|i| rot([state.a_rem.comp[0][i], state.a_rem.comp[1][i]])[0]).collect::<Vec<_>>(),
        (0..grid * grid).map(|i| rot([state.a_rem.comp[0][i], state.a_rem.comp[1][i]])[1]).collect::<Vec<_>>(),
    ];
    // logical action of R^{-1}: M = T^{-1} R^{-1} T
    let rinv = |v: [f64; 2]| [r[0][0] * v[0] + r[1][0] * v[1], r[0][1] * v[0] + r[1][1] * v[1]];
    let m1 = cell.logical(rinv(cell.t1));
    let m2 = cell.logical(rinv(cell.t2));
    let ints = [m1[0], m1[1], m2[0], m2[1]];
    let integral = ints.iter().all(|v| (v - v.round()).abs() < 1e-9);
    if !integral {
        let new_cell = Cell { t1: rot(cell.t1), t2: rot(cell.t2) };
        let mut psi = state.psi.clone();
        psi.cell = new_cell;
        psi.coeffs = None;
        let a = PeriodicVectorField::new(new_cell, grid, rotated_a)?;
        return Ok(Rotated { state: RawLatticeState::new(psi, a)?, same_lattice: false });
    }
    // columns M e1 = m1, M e2 = m2
    let m = [[m1[0].round() as i64, m2[0].round() as i64], [m1[1].round() as i64, m2[1].round() as i64]];
    let old = state.psi.interior();
    let g = grid as i64;
    let n = state.psi.n;
    let c = state.psi.cocycle;
    let mut p = Vec::with_capacity(grid * grid);
    let mut a = [Vec::with_capacity(grid * grid), Vec::with_capacity(grid * grid)];
    for j2 in 0..g {
        for j1 in 0..g {
            let k1 = m[0][0] * j1 + m[0][1] * j2;
            let k2 = m[1][0] * j1 + m[1][1] * j2;
            let (q1, r1) = (k1.div_euclid(g), k1.rem_euclid(g));
            let (q2, r2) = (k2.div_euclid(g), k2.rem_euclid(g));
            let idx = (r2 * g + r1) as usize;
            let y = [r1 as f64 / grid as f64, r2 as f64 / grid as f64];
            p.push(old[idx] * C64::from_polar(1.0, lattice_phase(n, c, y, [q1, q2])));
            a[0].push(rotated_a[0][idx]);
            a[1].push(rotated_a[1][idx]);
        }
    }
    let cocycle = [
        wrap(lattice_phase(n, c, [0.0, 0.0], [m[0][0], m[1][0]])),
        wrap(lattice_phase(n, c, [0.0, 0.0], [m[0][1], m[1][1]])),
    ];
    let psi = QuasiPeriodicField::from_interior(n, state.psi.shape, cell, grid, cocycle, &p)?;
    Ok(Rotated { state: RawLatticeState::new(psi, PeriodicVectorField::new(cell, grid, a)?)?, same_lattice: true })
}

/// Mean-zero periodic solution of `Delta u = rhs`.
pub fn poisson_periodic(sg: &SpectralGrid, rhs: &[f64]) -> Result<Vec<f64>> {
    let m = mean(rhs);
    let scale = max_abs(rhs).max(1.0);
    if m.abs() > 1e-12 * scale {
        return Err(Error::NonzeroMean(m));
    }
    Ok(sg.poisson(rhs))
}

/// Output of [`fix_gauge`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedGauge {
    /// Canonical boundary phase (zero cocycle).
    pub psi: QuasiPeriodicField,
    pub alpha: PeriodicVectorField,
    /// Gauge function applied before the translation.
    pub eta: GaugeFunction,
    /// Physical translation `l`: the output is `exp(i zeta) (e^{i eta} Psi)(x + l)`
    /// with `zeta = (b/2) x ^ l`.
    pub translation: [f64; 2],
    /// Constant phase applied last so that `phi(0) >= 0`.
    pub phase: f64,
    /// Largest deviation of the line-integral construction of the first gauge
    /// factor from its spectral evaluation, on a few probe points.
    pub path_residual: f64,
}

impl FixedGauge {
    pub fn to_state(&self, params: crate::glcore::GLParams) -> GLState {
        GLState { psi: self.psi.clone(), alpha: self.alpha.clone(), params }
    }

    pub fn raw(&self) -> RawLatticeState {
        RawLatticeState { psi: self.psi.clone(), a_rem: self.alpha.clone() }
    }
}

/// Nodes and weights of `m`-point Gauss-Legendre quadrature on `[0, 1]`.
fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    let jacobi = DMatrix::from_fn(m, m, |i, j| {
        if i + 1 == j || j + 1 == i {
            let k = i.max(j) as f64;
            k / (4.0 * k * k - 1.0).sqrt()
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::new(jacobi);
    let mut pairs: Vec<(f64, f64)> =
        (0..m).map(|i| (0.5 * (eig.eigenvalues[i] + 1.0), eig.eigenvectors[(0, i)].powi(2))).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

/// Brings a raw state to the canonical gauge.
///
/// Steps: row averages `B` of `curl A`; the periodic field `P`; the first
/// gauge factor `eta'` with `grad eta' = -A + A0 + P`; the periodic
/// correction `Delta eta'' = -div P`; the affine part `C = -<P>`; finally a
/// magnetic translation that removes the boundary constants.
///
/// The first basis vector of the cell must point along `x1`.
pub fn fix_gauge(state: &RawLatticeState) -> Result<FixedGauge> {
    let cell = state.cell();
    let grid = state.grid();
    if cell.t1[0] <= 0.0 || cell.t1[1].abs() > 1e-12 * cell.t1[0] {
        return Err(Error::Unsupported("gauge fixing expects the first basis vector along +x1; rotate the state first".into()));
    }
    let sg = SpectralGrid::new(cell, grid);
    let n = state.psi.n;
    let b = state.b();
    let r = cell.t1[0];
    let h = cell.t2[1];
    let curl_a: Vec<f64> = sg.curl(&state.a_rem.comp).into_iter().map(|c| b + c).collect();

    // (1) row averages at fixed x2
    let row_b: Vec<f64> = (0..grid).map(|j2| mean(&curl_a[j2 * grid..(j2 + 1) * grid])).collect();

    // (2) P1 = h int_0^{y2} (b - B), P2 = r int_0^{y1} (curl A - B)
    let col: Vec<C64> = row_b.iter().map(|v| C64::new(b - v, 0.0)).collect();
    let (m_col, int_col) = antiderivative_1d(&col, &sg);
    if m_col.norm() > 1e-10 * b.abs().max(1.0) {
        return Err(Error::FluxNotQuantized((b - m_col.re) * cell.area() / (2.0 * PI)));
    }
    let mut p1 = vec![0.0; grid * grid];
    let mut p2 = vec![0.0; grid * grid];
    for j2 in 0..grid {
        let row: Vec<C64> = (0..grid).map(|j1| C64::new(curl_a[j2 * grid + j1] - row_b[j2], 0.0)).collect();
        let (_, int_row) = antiderivative_1d(&row, &sg);
        for j1 in 0..grid {
            p1[j2 * grid + j1] = h * int_col[j2].re;
            p2[j2 * grid + j1] = r * int_row[j1].re;
        }
    }
    let p = [p1, p2];

    // (3) eta' from its periodic gradient G = -a + P
    let g = [
        p[0].iter().zip(&state.a_rem.comp[0]).map(|(p, a)| p - a).collect::<Vec<_>>(),
        p[1].iter().zip(&state.a_rem.comp[1]).map(|(p, a)| p - a).collect::<Vec<_>>(),
    ];
    let g_mean = [mean(&g[0]), mean(&g[1])];
    let chi = sg.poisson(&sg.divergence(&g));
    let chi0 = chi[0];

    // (4) periodic correction
    let div_p = sg.divergence(&p);
    let eta2 = poisson_periodic(&sg, &div_p.iter().map(|v| -v).collect::<Vec<_>>())?;

    // (5) affine part
    let c = [-mean(&p[0]), -mean(&p[1])];

    let eta = GaugeFunction {
        linear: [g_mean[0] + c[0], g_mean[1] + c[1]],
        periodic: chi.iter().zip(&eta2).map(|(u, v)| u - chi0 + v).collect(),
    };
    let path_residual = path_check(state, &sg, &p, g_mean, &chi, chi0);
    let gauged = gauge_transform(state, &eta)?;

    // (6) magnetic translation removing the boundary constants:
    // t1 ^ l = -c1 / b, t2 ^ l = -c2 / b
    let cc = [wrap(gauged.psi.cocycle[0]), wrap(gauged.psi.cocycle[1])];
    let nf = n as f64;
    let d = [cc[1] / (2.0 * PI * nf), -cc[0] / (2.0 * PI * nf)];
    let l = cell.point(d[0], d[1]);
    let shifted = magnetic_translation(&gauged.psi, l)?;
    let alpha = shift_vector(&sg, &gauged.a_rem, d)?;
    let left = [wrap(shifted.cocycle[0]), wrap(shifted.cocycle[1])];
    if left[0].abs().max(left[1].abs()) > 1e-9 {
        return Err(Error::NoConvergence { what: "boundary constant removal", iterations: 1, residual: left[0].abs().max(left[1].abs()) });
    }
    let mut data = shifted.interior();
    let phase = match data.first() {
        Some(z) if z.norm() > 1e-8 => -z.arg(),
        _ => 0.0,
    };
    let rot = C64::from_polar(1.0, phase);
    data.iter_mut().for_each(|z| *z *= rot);
    let psi = QuasiPeriodicField::from_interior(n, state.psi.shape, cell, grid, [0.0, 0.0], &data)?;
    Ok(FixedGauge { psi, alpha, eta, translation: l, phase, path_residual })
}

/// Compares the spectral `eta'` with the literal line integrals
/// `eta'(x) = (b/2) x1 x2 - int_0^{x1} A1(s, 0) ds - int_0^{x2} (A2 - P2)(x1, s) ds`
/// (the vertical segment is oblique on the logical grid and is evaluated by
/// trigonometric interpolation).
fn path_check(state: &RawLatticeState, sg: &SpectralGrid, p: &[Vec<f64>; 2], g_mean: [f64; 2], chi: &[f64], chi0: f64) -> f64 {
    let cell = state.cell();
    let grid = state.grid();
    let b = state.b();
    let a1 = sg.spectrum(&state.a_rem.comp[0]);
    let a2 = sg.spectrum(&state.a_rem.comp[1]);
    let p2 = sg.spectrum(&p[1]);
    let (nodes, weights) = gauss_legendre(grid + 16);
    let probes = [(grid / 3, grid / 5), (grid / 2, grid / 2), (3 * grid / 4, grid / 8), (grid / 7, 5 * grid / 6)];
    let mut worst = 0.0f64;
    for (j1, j2) in probes {
        let x = cell.point(j1 as f64 / grid as f64, j2 as f64 / grid as f64);
        let mut first = 0.0;
        let mut second = 0.0;
        for (s, w) in nodes.iter().zip(&weights) {
            // along x2 = 0, A0_1 = 0
            let y = cell.logical([s * x[0], 0.0]);
            first += w * x[0] * sg.interpolate(&a1, y);
            let pt = [x[0], s * x[1]];
            let y = cell.logical(pt);
            let a0_2 = 0.5 * b * pt[0];
            second += w * x[1] * (a0_2 + sg.interpolate(&a2, y) - sg.interpolate(&p2, y));
        }
        let literal = 0.5 * b * x[0] * x[1] - first - second;
        let idx = j2 * grid + j1;
        let spectral = g_mean[0] * x[0] + g_mean[1] * x[1] + chi[idx] - chi0;
        worst = worst.max((literal - spectral).abs());
    }
    worst
}
