//! FFT machinery for periodic fields on the logical `N x N` grid of a cell.
//!
//! Samples are stored row-major with the `y1` index fastest:
//! `idx = j * N + i` for `y = (i/N, j/N)`.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::{Fft, FftPlanner};

use crate::lattice::Cell;
use crate::C64;

/// Signed mode number of FFT bin `i`; the Nyquist bin maps to 0 for odd
/// derivatives.
#[inline]
pub fn mode(i: usize, n: usize) -> f64 {
    if 2 * i < n {
        i as f64
    } else if 2 * i == n {
        0.0
    } else {
        i as f64 - n as f64
    }
}

/// Signed mode number keeping the Nyquist bin (used for translations).
#[inline]
fn mode_full(i: usize, n: usize) -> f64 {
    if 2 * i <= n {
        i as f64
    } else {
        i as f64 - n as f64
    }
}

/// Per-axis translation factor; the Nyquist bin uses the real (cosine)
/// interpolant.
#[inline]
fn shift_factor(i: usize, n: usize, d: f64) -> C64 {
    let ph = 2.0 * PI * mode_full(i, n) * d;
    if 2 * i == n {
        C64::new(ph.cos(), 0.0)
    } else {
        C64::from_polar(1.0, ph)
    }
}

/// FFT plans plus per-mode wavevectors of a cell.
#[derive(Clone)]
pub struct SpectralGrid {
    pub n: usize,
    pub cell: Cell,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    /// Physical wavevector of each bin, Nyquist components zeroed.
    pub g: Vec<[f64; 2]>,
    pub g2: Vec<f64>,
}

impl std::fmt::Debug for SpectralGrid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectralGrid").field("n", &self.n).field("cell", &self.cell).finish()
    }
}

impl SpectralGrid {
    pub fn new(cell: Cell, n: usize) -> Self {
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        let mut g = Vec::with_capacity(n * n);
        let mut g2 = Vec::with_capacity(n * n);
        for j in 0..n {
            for i in 0..n {
                let v = cell.wavevector(mode(i, n), mode(j, n));
                g2.push(v[0] * v[0] + v[1] * v[1]);
                g.push(v);
            }
        }
        Self { n, cell, fwd, inv, g, g2 }
    }

    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn y(&self, i: usize) -> f64 {
        i as f64 / self.n as f64
    }

    fn transpose(&self, data: &mut [C64]) {
        let n = self.n;
        for j in 0..n {
            for i in (j + 1)..n {
                data.swap(j * n + i, i * n + j);
            }
        }
    }

    /// Unnormalized forward 2-D DFT in place.
    pub fn forward(&self, data: &mut [C64]) {
        self.fwd.process(data);
        self.transpose(data);
        self.fwd.process(data);
        self.transpose(data);
    }

    /// Inverse 2-D DFT in place, including the `1/N^2` factor.
    pub fn inverse(&self, data: &mut [C64]) {
        self.inv.process(data);
        self.transpose(data);
        self.inv.process(data);
        self.transpose(data);
        let s = 1.0 / (self.n * self.n) as f64;
        data.iter_mut().for_each(|z| *z *= s);
    }

    /// DFT along `y1` only (each row).
    pub fn forward_rows(&self, data: &mut [C64]) {
        self.fwd.process(data);
    }

    pub fn inverse_rows(&self, data: &mut [C64]) {
        self.inv.process(data);
        let s = 1.0 / self.n as f64;
        data.iter_mut().for_each(|z| *z *= s);
    }

    /// DFT along `y2` only (each column).
    pub fn forward_cols(&self, data: &mut [C64]) {
        self.transpose(data);
        self.fwd.process(data);
        self.transpose(data);
    }

    pub fn inverse_cols(&self, data: &mut [C64]) {
        self.transpose(data);
        self.inverse_rows(data);
        self.transpose(data);
    }

    pub fn spectrum(&self, f: &[f64]) -> Vec<C64> {
        let mut d: Vec<C64> = f.iter().map(|&v| C64::new(v, 0.0)).collect();
        self.forward(&mut d);
        d
    }

    pub fn real_field(&self, mut d: Vec<C64>) -> Vec<f64> {
        self.inverse(&mut d);
        d.into_iter().map(|z| z.re).collect()
    }

    /// Physical gradient of a periodic scalar.
    pub fn gradient(&self, f: &[f64]) -> [Vec<f64>; 2] {
        let s = self.spectrum(f);
        let mut d1 = s.clone();
        let mut d2 = s;
        for (k, g) in self.g.iter().enumerate() {
            d1[k] *= C64::new(0.0, g[0]);
            d2[k] *= C64::new(0.0, g[1]);
        }
        [self.real_field(d1), self.real_field(d2)]
    }

    /// `curl v = d1 v2 - d2 v1`.
    pub fn curl(&self, v: &[Vec<f64>; 2]) -> Vec<f64> {
        let s1 = self.spectrum(&v[0]);
        let s2 = self.spectrum(&v[1]);
        let out = self
            .g
            .iter()
            .enumerate()
            .map(|(k, g)| C64::new(0.0, 1.0) * (s2[k] * g[0] - s1[k] * g[1]))
            .collect();
        self.real_field(out)
    }

    pub fn divergence(&self, v: &[Vec<f64>; 2]) -> Vec<f64> {
        let s1 = self.spectrum(&v[0]);
        let s2 = self.spectrum(&v[1]);
        let out = self
            .g
            .iter()
            .enumerate()
            .map(|(k, g)| C64::new(0.0, 1.0) * (s1[k] * g[0] + s2[k] * g[1]))
            .collect();
        self.real_field(out)
    }

    /// `curl^* f = (d2 f, -d1 f)`.
    pub fn curl_star(&self, f: &[f64]) -> [Vec<f64>; 2] {
        let [d1, d2] = self.gradient(f);
        [d2, d1.into_iter().map(|v| -v).collect()]
    }

    pub fn laplacian(&self, f: &[f64]) -> Vec<f64> {
        let mut s = self.spectrum(f);
        for (k, z) in s.iter_mut().enumerate() {
            *z *= -self.g2[k];
        }
        self.real_field(s)
    }

    /// Projection of vector spectra onto divergence-free, mean-zero fields.
    pub fn project_spectra(&self, s1: &mut [C64], s2: &mut [C64]) {
        for k in 0..self.len() {
            let g = self.g[k];
            let g2 = self.g2[k];
            if g2 == 0.0 {
                s1[k] = C64::new(0.0, 0.0);
                s2[k] = C64::new(0.0, 0.0);
                continue;
            }
            let dot = (s1[k] * g[0] + s2[k] * g[1]) / g2;
            s1[k] -= dot * g[0];
            s2[k] -= dot * g[1];
        }
    }

    /// Helmholtz projection onto divergence-free, mean-zero fields.
    pub fn helmholtz_project(&self, v: &[Vec<f64>; 2]) -> [Vec<f64>; 2] {
        let mut s1 = self.spectrum(&v[0]);
        let mut s2 = self.spectrum(&v[1]);
        self.project_spectra(&mut s1, &mut s2);
        [self.real_field(s1), self.real_field(s2)]
    }

    /// Mean-zero solution of `Delta u = rhs`; the mean of `rhs` is dropped.
    pub fn poisson(&self, rhs: &[f64]) -> Vec<f64> {
        let mut s = self.spectrum(rhs);
        for (k, z) in s.iter_mut().enumerate() {
            if self.g2[k] == 0.0 {
                *z = C64::new(0.0, 0.0);
            } else {
                *z /= -self.g2[k];
            }
        }
        self.real_field(s)
    }

    /// Translates a periodic field by a logical offset: `f(y + dy)`.
    pub fn shift(&self, f: &[f64], dy: [f64; 2]) -> Vec<f64> {
        let mut s = self.spectrum(f);
        let n = self.n;
        for j in 0..n {
            for i in 0..n {
                s[j * n + i] *= shift_factor(i, n, dy[0]) * shift_factor(j, n, dy[1]);
            }
        }
        self.real_field(s)
    }

    /// `f(y1 + d, y2)` for data periodic in `y1`.
    pub fn shift_rows(&self, data: &mut [C64], d: f64) {
        let n = self.n;
        self.forward_rows(data);
        let f: Vec<C64> = (0..n).map(|i| shift_factor(i, n, d)).collect();
        for row in data.chunks_mut(n) {
            row.iter_mut().zip(&f).for_each(|(z, s)| *z *= s);
        }
        self.inverse_rows(data);
    }

    /// `f(y1, y2 + d)` for data periodic in `y2`.
    pub fn shift_cols(&self, data: &mut [C64], d: f64) {
        let n = self.n;
        self.forward_cols(data);
        for (j, row) in data.chunks_mut(n).enumerate() {
            let s = shift_factor(j, n, d);
            row.iter_mut().for_each(|z| *z *= s);
        }
        self.inverse_cols(data);
    }

    /// Evaluates the trigonometric interpolant of a periodic field at an
    /// arbitrary logical point.
    pub fn interpolate(&self, spectrum: &[C64], y: [f64; 2]) -> f64 {
        let n = self.n;
        let e1: Vec<C64> = (0..n)
            .map(|i| C64::from_polar(1.0, 2.0 * PI * mode_full(i, n) * y[0]))
            .collect();
        let mut acc = 0.0;
        for j in 0..n {
            let e2 = C64::from_polar(1.0, 2.0 * PI * mode_full(j, n) * y[1]);
            let mut row = C64::new(0.0, 0.0);
            for i in 0..n {
                let mut w = 1.0;
                if 2 * i == n {
                    w *= 0.5;
                }
                row += spectrum[j * n + i] * e1[i] * w;
                if 2 * i == n {
                    row += spectrum[j * n + i] * e1[i].conj() * w;
                }
            }
            let wj = if 2 * j == n { 0.5 } else { 1.0 };
            acc += (row * e2 * wj).re;
            if 2 * j == n {
                acc += (row * e2.conj() * wj).re;
            }
        }
        acc / (n * n) as f64
    }
}

/// Mean of samples.
pub fn mean(f: &[f64]) -> f64 {
    f.iter().sum::<f64>() / f.len() as f64
}

pub fn mean_c(f: &[C64]) -> C64 {
    f.iter().sum::<C64>() / f.len() as f64
}

/// Root mean square.
pub fn rms(f: &[f64]) -> f64 {
    (f.iter().map(|v| v * v).sum::<f64>() / f.len() as f64).sqrt()
}

pub fn rms_c(f: &[C64]) -> f64 {
    (f.iter().map(|v| v.norm_sqr()).sum::<f64>() / f.len() as f64).sqrt()
}

pub fn max_abs(f: &[f64]) -> f64 {
    f.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Spectral antiderivative of a periodic 1-D sequence on `[0,1)`:
/// returns the mean `m` and samples of `F(y) = int_0^y (f - m)`.
pub fn antiderivative_1d(f: &[C64], fft: &SpectralGrid) -> (C64, Vec<C64>) {
    let n = f.len();
    debug_assert_eq!(n, fft.n);
    let mut s = f.to_vec();
    fft.forward_rows(&mut s[..]);
    let m = s[0] / n as f64;
    s[0] = C64::new(0.0, 0.0);
    let mut offset = C64::new(0.0, 0.0);
    for (i, z) in s.iter_mut().enumerate() {
        let p = mode(i, n);
        if p == 0.0 {
            *z = C64::new(0.0, 0.0);
            continue;
        }
        *z /= C64::new(0.0, 2.0 * PI * p);
        offset += *z;
    }
    fft.inverse_rows(&mut s[..]);
    // F(0) = 0
    let f0 = offset / n as f64;
    for z in s.iter_mut() {
        *z -= f0;
    }
    (m, s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{cell_geometry, LatticeShape};

    fn grid(n: usize) -> SpectralGrid {
        let g = cell_geometry(LatticeShape::triangular(), 1, 1.0).unwrap();
        SpectralGrid::new(g.normalized_cell(), n)
    }

    fn sample(sg: &SpectralGrid, f: impl Fn([f64; 2]) -> f64) -> Vec<f64> {
        let n = sg.n;
        let mut out = Vec::with_capacity(n * n);
        for j in 0..n {
            for i in 0..n {
                out.push(f(sg.cell.point(sg.y(i), sg.y(j))));
            }
        }
        out
    }

    #[test]
    fn fft_round_trip() {
        let sg = grid(16);
        let f: Vec<f64> = (0..256).map(|k| ((k * 37 % 101) as f64).sin()).collect();
        let back = sg.real_field(sg.spectrum(&f));
        for (a, b) in f.iter().zip(&back) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn gradient_of_plane_wave() {
        let sg = grid(16);
        let gv = sg.cell.wavevector(2.0, -1.0);
        let f = sample(&sg, |x| (gv[0] * x[0] + gv[1] * x[1]).sin());
        let df = sample(&sg, |x| gv[0] * (gv[0] * x[0] + gv[1] * x[1]).cos());
        let [d1, _] = sg.gradient(&f);
        for (a, b) in d1.iter().zip(&df) {
            assert!((a - b).abs() < 1e-11);
        }
    }

    #[test]
    fn poisson_single_mode() {
        let sg = grid(16);
        let gv = sg.cell.wavevector(1.0, 2.0);
        let g2 = gv[0] * gv[0] + gv[1] * gv[1];
        let rhs = sample(&sg, |x| (gv[0] * x[0] + gv[1] * x[1]).cos());
        let u = sg.poisson(&rhs);
        for (a, b) in u.iter().zip(&rhs) {
            assert!((a + b / g2).abs() < 1e-13);
        }
    }

    #[test]
    fn shift_matches_resampling() {
        let sg = grid(16);
        let gv = sg.cell.wavevector(1.0, -2.0);
        let f = sample(&sg, |x| (gv[0] * x[0] + gv[1] * x[1]).sin());
        let dy = [0.13, -0.41];
        let dx = sg.cell.point(dy[0], dy[1]);
        let g = sample(&sg, |x| (gv[0] * (x[0] + dx[0]) + gv[1] * (x[1] + dx[1])).sin());
        let s = sg.shift(&f, dy);
        for (a, b) in s.iter().zip(&g) {
            assert!((a - b).abs() < 1e-12);
        }
        let spec = sg.spectrum(&f);
        let v = sg.interpolate(&spec, [0.37, 0.71]);
        let x = sg.cell.point(0.37, 0.71);
        assert!((v - (gv[0] * x[0] + gv[1] * x[1]).sin()).abs() < 1e-12);
    }

    #[test]
    fn antiderivative_of_cosine() {
        let sg = grid(32);
        let f: Vec<C64> = (0..32)
            .map(|i| C64::new(1.5 + (2.0 * PI * 3.0 * sg.y(i)).cos(), 0.0))
            .collect();
        let (m, a) = antiderivative_1d(&f, &sg);
        assert!((m.re - 1.5).abs() < 1e-14);
        for (i, z) in a.iter().enumerate() {
            let exact = (2.0 * PI * 3.0 * sg.y(i)).sin() / (2.0 * PI * 3.0);
            assert!((z.re - exact).abs() < 1e-14);
        }
    }
}
