use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::lattice::LatticeShape;
use crate::{Error, Result, C64};

/// Theta series `exp((in/2) x2 z) sum_k c_k exp(i k nu z)`, `z = x1 + i x2`,
/// with free coefficients `c_0..c_{n-1}` extended by
/// `c_{k+n} = exp(i n pi tau) exp(2 i k pi tau) c_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaCoeffs {
    pub n: u32,
    pub tau: C64,
    pub c: Vec<C64>,
    /// Terms kept on either side of the Gaussian peak.
    pub k: i64,
    /// `(2 pi Im tau)^{1/2}`.
    pub nu: f64,
}

impl ThetaCoeffs {
    pub fn new(shape: LatticeShape, c: Vec<C64>) -> Result<Self> {
        let n = c.len() as u32;
        if n == 0 {
            return Err(Error::InvalidParameter("need at least one free coefficient".into()));
        }
        Ok(Self {
            n,
            tau: shape.tau(),
            c,
            k: Self::truncation(n, shape.im()),
            nu: (2.0 * PI * shape.im()).sqrt(),
        })
    }

    /// Smallest `K` with `exp(-pi Im(tau) K^2 / n) < 1e-14`.
    pub fn truncation(n: u32, tau_im: f64) -> i64 {
        let k = (14.0 * std::f64::consts::LN_10 * n as f64 / (PI * tau_im)).sqrt();
        k.floor() as i64 + 1
    }

    /// Extended coefficient `c_k` for any integer `k`.
    pub fn coefficient(&self, k: i64) -> C64 {
        let n = self.n as i64;
        let j = k.rem_euclid(n);
        let steps = (k - j) / n;
        let i_pi_tau = C64::new(0.0, PI) * self.tau;
        let mut c = self.c[j as usize];
        let mut idx = j;
        if steps >= 0 {
            for _ in 0..steps {
                c *= (i_pi_tau * n as f64 + i_pi_tau * (2 * idx) as f64).exp();
                idx += n;
            }
        } else {
            for _ in 0..(-steps) {
                idx -= n;
                c /= (i_pi_tau * n as f64 + i_pi_tau * (2 * idx) as f64).exp();
            }
        }
        c
    }

    /// Evaluates the series at a physical point of the normalized cell.
    pub fn evaluate(&self, x: [f64; 2]) -> C64 {
        let nf = self.n as f64;
        let z = C64::new(x[0], x[1]);
        let center = (-nf * x[1] / self.nu).round() as i64;
        let mut acc = C64::new(0.0, 0.0);
        for k in (center - self.k - 1)..=(center + self.k + 1) {
            let c = self.coefficient(k);
            if c == C64::new(0.0, 0.0) {
                continue;
            }
            // prefactor folded into the exponent to avoid overflow
            let e = (C64::new(0.0, 0.5 * nf * x[1]) * z + C64::new(0.0, k as f64 * self.nu) * z).exp();
            acc += c * e;
        }
        acc
    }
}

/// One theta term acted on by creation operators:
/// `coeff * q(X) * exp((in/2) x2 z + i m nu z)` with `X = x2 + m nu / n`.
///
/// `alpha^*` acts by `q -> -i (2 n X q - q')` and `alpha` by `q -> i q'`.
#[derive(Debug, Clone, PartialEq)]
pub struct LadderTerm {
    pub n: u32,
    pub m: i64,
    pub nu: f64,
    pub level: usize,
    pub coeff: C64,
    /// Polynomial coefficients in `X`, lowest degree first.
    pub poly: Vec<C64>,
}

impl LadderTerm {
    /// Level-0 term `exp(i pi tau m^2 / n) exp((in/2) x2 z + i m nu z)`.
    pub fn ground(n: u32, shape: LatticeShape, m: i64) -> Self {
        let coeff = (C64::new(0.0, PI * (m * m) as f64 / n as f64) * shape.tau()).exp();
        Self {
            n,
            m,
            nu: (2.0 * PI * shape.im()).sqrt(),
            level: 0,
            coeff,
            poly: vec![C64::new(1.0, 0.0)],
        }
    }

    pub fn degree(&self) -> usize {
        self.poly.iter().rposition(|c| *c != C64::new(0.0, 0.0)).unwrap_or(0)
    }

    fn derivative(&self) -> Vec<C64> {
        self.poly.iter().enumerate().skip(1).map(|(p, c)| *c * p as f64).collect()
    }

    pub fn raise(&self) -> Self {
        let two_n = 2.0 * self.n as f64;
        let d = self.derivative();
        let mut q = vec![C64::new(0.0, 0.0); self.poly.len() + 1];
        for (p, c) in self.poly.iter().enumerate() {
            q[p + 1] += *c * two_n;
        }
        for (p, c) in d.iter().enumerate() {
            q[p] -= *c;
        }
        let minus_i = C64::new(0.0, -1.0);
        Self {
            level: self.level + 1,
            poly: q.into_iter().map(|c| c * minus_i).collect(),
            ..self.clone()
        }
    }

    pub fn lower(&self) -> Self {
        let mut d: Vec<C64> = self.derivative().into_iter().map(|c| c * C64::new(0.0, 1.0)).collect();
        if d.is_empty() {
            d.push(C64::new(0.0, 0.0));
        }
        Self { level: self.level.saturating_sub(1), poly: d, ..self.clone() }
    }

    pub fn evaluate(&self, x: [f64; 2]) -> C64 {
        let nf = self.n as f64;
        let z = C64::new(x[0], x[1]);
        let big_x = x[1] + self.m as f64 * self.nu / nf;
        let q = self.poly.iter().rev().fold(C64::new(0.0, 0.0), |acc, c| acc * big_x + *c);
        let e = (C64::new(0.0, 0.5 * nf * x[1]) * z + C64::new(0.0, self.m as f64 * self.nu) * z).exp();
        self.coeff * q * e
    }
}
