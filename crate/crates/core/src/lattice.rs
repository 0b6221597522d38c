//! Lattice shapes, cell geometry and the rescaling between physical and
//! normalized variables.
//!
//! Every cell is parameterized by logical coordinates `y in [0,1)^2` through
//! `x = y1 * t1 + y2 * t2`, so grids of the same size are shared between all
//! shapes and all field strengths.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::{Error, Result, C64};

/// Symplectic matrix `J = [[0, -1], [1, 0]]`.
pub const SYMPLECTIC: [[f64; 2]; 2] = [[0.0, -1.0], [1.0, 0.0]];

/// Tolerance used for the boundary conventions of the fundamental domain.
const EDGE_EPS: f64 = 1e-12;

/// Move budget for Gauss reduction.
pub const REDUCTION_BUDGET: usize = 10_000;

/// `J x`.
#[inline]
pub fn apply_j(x: [f64; 2]) -> [f64; 2] {
    [-x[1], x[0]]
}

/// `a ∧ b = a1 b2 - a2 b1`, so that `x · J t = t ∧ x`.
#[inline]
pub fn wedge(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

/// Shape parameter of a lattice, reduced to the modular fundamental domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeShape {
    tau: C64,
}

impl LatticeShape {
    /// Square lattice, `tau = i`.
    pub fn square() -> Self {
        Self { tau: C64::new(0.0, 1.0) }
    }

    /// Triangular lattice, `tau = e^{i pi/3}`.
    pub fn triangular() -> Self {
        Self { tau: C64::new(0.5, (3.0f64).sqrt() / 2.0) }
    }

    /// Accepts `tau` only if it already lies in the fundamental domain.
    pub fn new(tau: C64) -> Result<Self> {
        if !in_fundamental_domain(tau) {
            return Err(Error::InvalidShape(format!(
                "{tau} is not in the fundamental domain; normalize it first"
            )));
        }
        Ok(Self { tau })
    }

    /// Wraps a point of the upper half plane without reduction. Only used
    /// where a construction is meaningful for any shape, e.g. checking
    /// modular invariance.
    pub(crate) fn unreduced(tau: C64) -> Self {
        Self { tau }
    }

    /// Reduces an arbitrary upper-half-plane point.
    pub fn normalized(tau: C64) -> Result<Self> {
        normalize_tau(tau).map(|(s, _)| s)
    }

    pub fn tau(&self) -> C64 {
        self.tau
    }

    pub fn re(&self) -> f64 {
        self.tau.re
    }

    pub fn im(&self) -> f64 {
        self.tau.im
    }

    /// Normalized cell scale `r^tau = (2 pi / Im tau)^{1/2}`.
    pub fn r_tau(&self) -> f64 {
        (2.0 * PI / self.tau.im).sqrt()
    }
}

/// Checks the three fundamental-domain conditions with a small tolerance on
/// the boundary.
pub fn in_fundamental_domain(tau: C64) -> bool {
    let (t1, t2) = (tau.re, tau.im);
    if !(t2 > 0.0) || !t1.is_finite() {
        return false;
    }
    let norm2 = tau.norm_sqr();
    if norm2 < 1.0 - EDGE_EPS {
        return false;
    }
    if t1 < -0.5 + EDGE_EPS {
        return false;
    }
    if t1 > 0.5 + EDGE_EPS {
        return false;
    }
    if (norm2 - 1.0).abs() <= EDGE_EPS && t1 < -EDGE_EPS {
        return false;
    }
    true
}

/// One generator move of the modular group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModularMove {
    /// `tau -> tau + k`.
    Translate(i64),
    /// `tau -> -1/tau`.
    Invert,
}

/// Unimodular map `tau -> (a tau + b) / (c tau + d)` with the moves that
/// produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModularMap {
    pub a: i64,
    pub b: i64,
    pub c: i64,
    pub d: i64,
    pub moves: Vec<ModularMove>,
}

impl ModularMap {
    pub fn identity() -> Self {
        Self { a: 1, b: 0, c: 0, d: 1, moves: Vec::new() }
    }

    pub fn determinant(&self) -> i64 {
        self.a * self.d - self.b * self.c
    }

    pub fn apply(&self, tau: C64) -> C64 {
        let num = tau * self.a as f64 + self.b as f64;
        let den = tau * self.c as f64 + self.d as f64;
        num / den
    }

    fn push(&mut self, mv: ModularMove) {
        // left-multiply by the generator matrix
        let (a, b, c, d) = (self.a, self.b, self.c, self.d);
        match mv {
            ModularMove::Translate(k) => {
                self.a = a + k * c;
                self.b = b + k * d;
            }
            ModularMove::Invert => {
                self.a = -c;
                self.b = -d;
                self.c = a;
                self.d = b;
            }
        }
        self.moves.push(mv);
    }
}

/// Gauss reduction of `tau` into the fundamental domain
/// `|tau| >= 1, -1/2 < Re tau <= 1/2, Re tau >= 0 if |tau| = 1`.
pub fn normalize_tau(tau_raw: C64) -> Result<(LatticeShape, ModularMap)> {
    if !(tau_raw.im > 0.0) || !tau_raw.re.is_finite() || !tau_raw.im.is_finite() {
        return Err(Error::InvalidShape(format!(
            "{tau_raw} must have positive finite imaginary part"
        )));
    }
    let mut tau = tau_raw;
    let mut map = ModularMap::identity();
    for _ in 0..REDUCTION_BUDGET {
        if !(tau.im > f64::MIN_POSITIVE) {
            return Err(Error::InvalidShape(format!("imaginary part underflow at {tau}")));
        }
        // T-move into (-1/2, 1/2]
        let mut k = (tau.re + 0.5).floor();
        if tau.re - k < -0.5 + EDGE_EPS {
            k -= 1.0;
        }
        if k != 0.0 {
            tau = C64::new(tau.re - k, tau.im);
            map.push(ModularMove::Translate(-(k as i64)));
        }
        // snap before the circle test so the returned point passes it
        if (tau.re - 0.5).abs() < EDGE_EPS {
            tau.re = 0.5;
        }
        let norm2 = tau.norm_sqr();
        let on_circle = (norm2 - 1.0).abs() <= EDGE_EPS;
        if norm2 < 1.0 - EDGE_EPS || (on_circle && tau.re < -EDGE_EPS) {
            tau = -1.0 / tau;
            map.push(ModularMove::Invert);
            continue;
        }
        return Ok((LatticeShape { tau }, map));
    }
    Err(Error::ReductionBudget(REDUCTION_BUDGET))
}

/// A cell spanned by two basis vectors, with the logical-to-physical map
/// `x = basis * y`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    /// Columns `t1`, `t2`.
    pub t1: [f64; 2],
    pub t2: [f64; 2],
}

impl Cell {
    pub fn area(&self) -> f64 {
        wedge(self.t1, self.t2)
    }

    #[inline]
    pub fn point(&self, y1: f64, y2: f64) -> [f64; 2] {
        [
            y1 * self.t1[0] + y2 * self.t2[0],
            y1 * self.t1[1] + y2 * self.t2[1],
        ]
    }

    /// Logical coordinates of a physical point.
    pub fn logical(&self, x: [f64; 2]) -> [f64; 2] {
        let det = self.area();
        [wedge(x, self.t2) / det, wedge(self.t1, x) / det]
    }

    /// Physical wavevector of the mode `exp(2 pi i p . y)`:
    /// `G = 2 pi M^{-T} p`.
    #[inline]
    pub fn wavevector(&self, p1: f64, p2: f64) -> [f64; 2] {
        let det = self.area();
        // M^{-T} = (1/det) [[t2y, -t1y], [-t2x, t1x]]
        let s = 2.0 * PI / det;
        [
            s * (self.t2[1] * p1 - self.t1[1] * p2),
            s * (-self.t2[0] * p1 + self.t1[0] * p2),
        ]
    }

    /// Converts logical partial derivatives `(d/dy1, d/dy2)` into physical
    /// gradient components.
    #[inline]
    pub fn gradient<T>(&self, dy1: T, dy2: T) -> [T; 2]
    where
        T: Copy + std::ops::Mul<f64, Output = T> + std::ops::Add<Output = T>,
    {
        let det = self.area();
        [
            dy1 * (self.t2[1] / det) + dy2 * (-self.t1[1] / det),
            dy1 * (-self.t2[0] / det) + dy2 * (self.t1[0] / det),
        ]
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            t1: [self.t1[0] * factor, self.t1[1] * factor],
            t2: [self.t2[0] * factor, self.t2[1] * factor],
        }
    }
}

/// Geometry of a lattice cell carrying `n` flux quanta at average field `b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellGeometry {
    pub shape: LatticeShape,
    pub n: u32,
    pub b: f64,
    /// Physical cell scale, `r = sigma * r_tau`.
    pub r: f64,
    pub r_tau: f64,
    /// `sigma = (n / b)^{1/2}`.
    pub sigma: f64,
    /// Normalized basis `r_tau e1`, `r_tau tau`.
    pub t1: [f64; 2],
    pub t2: [f64; 2],
    /// Unit square to normalized cell, columns `t1`, `t2`.
    pub m_tau: [[f64; 2]; 2],
}

impl CellGeometry {
    /// Normalized cell: area `2 pi`, field `n`.
    pub fn normalized_cell(&self) -> Cell {
        Cell { t1: self.t1, t2: self.t2 }
    }

    /// Physical cell: area `2 pi n / b`, field `b`.
    pub fn physical_cell(&self) -> Cell {
        self.normalized_cell().scaled(self.sigma)
    }

    /// Spectral parameter `lambda = kappa^2 n / b`.
    pub fn lambda(&self, kappa: f64) -> f64 {
        kappa * kappa * self.n as f64 / self.b
    }
}

pub fn cell_geometry(shape: LatticeShape, n: u32, b: f64) -> Result<CellGeometry> {
    if n == 0 {
        return Err(Error::InvalidParameter("flux number n must be at least 1".into()));
    }
    if !(b > 0.0) || !b.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "average field b must be positive, got {b}"
        )));
    }
    let r_tau = shape.r_tau();
    let sigma = (n as f64 / b).sqrt();
    let tau = shape.tau();
    let t1 = [r_tau, 0.0];
    let t2 = [r_tau * tau.re, r_tau * tau.im];
    Ok(CellGeometry {
        shape,
        n,
        b,
        r: sigma * r_tau,
        r_tau,
        sigma,
        t1,
        t2,
        m_tau: [[t1[0], t2[0]], [t1[1], t2[1]]],
    })
}

/// Direction of [`rescale_state`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RescaleDirection {
    ToNormalized,
    ToPhysical,
}

/// Samples of an order parameter and total vector potential on the logical
/// `N x N` grid of a cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledState {
    pub grid: usize,
    pub psi: Vec<C64>,
    pub a: [Vec<f64>; 2],
}

impl SampledState {
    pub fn zeros(grid: usize) -> Self {
        let len = grid * grid;
        Self { grid, psi: vec![C64::new(0.0, 0.0); len], a: [vec![0.0; len], vec![0.0; len]] }
    }

    fn check(&self) -> Result<()> {
        let len = self.grid * self.grid;
        if self.psi.len() != len || self.a[0].len() != len || self.a[1].len() != len {
            return Err(Error::GridMismatch(format!(
                "expected {len} samples per component, got psi {} a1 {} a2 {}",
                self.psi.len(),
                self.a[0].len(),
                self.a[1].len()
            )));
        }
        Ok(())
    }
}

/// `(psi(x), a(x)) = (sigma Psi(sigma x), sigma A(sigma x))` and its inverse.
///
/// Both cells are parameterized by the same logical grid, so the map is a
/// pointwise scaling of the samples.
pub fn rescale_state(
    state: &SampledState,
    geometry: &CellGeometry,
    direction: RescaleDirection,
) -> Result<SampledState> {
    state.check()?;
    let factor = match direction {
        RescaleDirection::ToNormalized => geometry.sigma,
        RescaleDirection::ToPhysical => 1.0 / geometry.sigma,
    };
    Ok(SampledState {
        grid: state.grid,
        psi: state.psi.iter().map(|z| z * factor).collect(),
        a: [
            state.a[0].iter().map(|v| v * factor).collect(),
            state.a[1].iter().map(|v| v * factor).collect(),
        ],
    })
}

/// Symmetric-gauge potential `A_0(x) = (b/2) J x` sampled on a cell grid.
pub fn symmetric_potential(cell: &Cell, field: f64, grid: usize) -> [Vec<f64>; 2] {
    let mut a1 = Vec::with_capacity(grid * grid);
    let mut a2 = Vec::with_capacity(grid * grid);
    for j in 0..grid {
        for i in 0..grid {
            let x = cell.point(i as f64 / grid as f64, j as f64 / grid as f64);
            let v = apply_j(x);
            a1.push(0.5 * field * v[0]);
            a2.push(0.5 * field * v[1]);
        }
    }
    [a1, a2]
}
