use super::*;
use crate::spectral::SpectralGrid;

fn tri() -> LatticeShape {
    LatticeShape::triangular()
}

fn max_diff(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).norm()))
}

#[test]
fn hermite_functions_match_explicit_polynomials() {
    let mut h = [0.0; 4];
    for &u in &[-1.3, 0.0, 0.4, 2.2] {
        hermite_functions(u, &mut h);
        let g = (-0.5 * u * u).exp();
        assert!((h[2] - (4.0 * u * u - 2.0) * g / 8.0f64.sqrt()).abs() < 1e-14);
        assert!((h[3] - (8.0 * u * u * u - 12.0 * u) * g / 48.0f64.sqrt()).abs() < 1e-14);
    }
}

#[test]
fn table_matches_theta_series() {
    for (n, shape) in [(1, LatticeShape::square()), (2, tri()), (3, LatticeShape::square())] {
        let basis = LandauBasis::new(n, shape, 24, 2).unwrap();
        let fields = theta_null_basis(n, shape, 6, 24).unwrap();
        for (j, f) in fields.iter().enumerate() {
            assert!(max_diff(&f.samples, basis.values(0, j)) < 1e-12, "n={n} j={j}");
        }
    }
}

#[test]
fn ground_state_is_annihilated() {
    for (n, shape) in [(1, LatticeShape::square()), (1, tri()), (2, tri())] {
        let basis = LandauBasis::new(n, shape, 48, 1).unwrap();
        for j in 0..n as usize {
            let mut f = basis.field(unit(n, 0, j, 0)).unwrap();
            f.coeffs = None;
            let low = ladder_apply(&basis, &f, Ladder::Lower).unwrap();
            assert!(low.norm() / f.norm() < 1e-10, "n={n}: {}", low.norm());
        }
    }
}

fn unit(n: u32, k: usize, j: usize, levels: usize) -> Vec<C64> {
    let mut c = vec![C64::new(0.0, 0.0); (levels.max(k) + 1) * n as usize];
    c[k * n as usize + j] = C64::new(1.0, 0.0);
    c
}

#[test]
fn sampled_raise_matches_table() {
    let n = 2;
    let basis = LandauBasis::new(n, tri(), 64, 6).unwrap();
    for k in 0..5 {
        for j in 0..2 {
            let mut f = basis.field(unit(n, k, j, 0)).unwrap();
            f.coeffs = None;
            let up = ladder_apply(&basis, &f, Ladder::Raise).unwrap();
            let want = (2.0 * n as f64 * (k + 1) as f64).sqrt();
            let expected: Vec<C64> = basis.values(k + 1, j).iter().map(|z| z * want).collect();
            assert!(max_diff(&up.interior(), &interior_of(&basis, &expected)) < 1e-9, "k={k}");
        }
    }
}

fn interior_of(basis: &LandauBasis, closed: &[C64]) -> Vec<C64> {
    let g = basis.grid();
    let mut out = Vec::new();
    for j2 in 0..g {
        out.extend_from_slice(&closed[j2 * (g + 1)..j2 * (g + 1) + g]);
    }
    out
}

#[test]
fn ladder_terms_reproduce_table() {
    let n = 1;
    let shape = LatticeShape::square();
    let basis = LandauBasis::new(n, shape, 16, 5).unwrap();
    let norm = basis.norm;
    let grid = 16;
    for k in 0..=5usize {
        let mut terms: Vec<LadderTerm> = (-12..=12).map(|m| LadderTerm::ground(n, shape, m)).collect();
        for _ in 0..k {
            terms = terms.iter().map(LadderTerm::raise).collect();
        }
        assert!(terms.iter().all(|t| t.degree() == k && t.level == k));
        let fact: f64 = (1..=k).map(|i| i as f64).product();
        let scale = norm / ((2.0 * n as f64).powi(k as i32) * fact).sqrt();
        for (j2, j1) in [(0, 0), (3, 5), (9, 14), (16, 16), (7, 2)] {
            let y = [j1 as f64 / grid as f64, j2 as f64 / grid as f64];
            let x = basis.cell().point(y[0], y[1]);
            let v: C64 = terms.iter().map(|t| t.evaluate(x)).sum::<C64>() * scale;
            let t = basis.values(k, 0)[j2 * (grid + 1) + j1];
            assert!((v - t).norm() < 1e-10, "k={k}: {v} vs {t}");
        }
        if k > 0 {
            let low = terms[12].lower();
            assert_eq!(low.degree(), k - 1);
        }
    }
}

#[test]
fn theta_coefficients_obey_recursion() {
    let shape = tri();
    let c = vec![C64::new(0.3, -0.2), C64::new(1.0, 0.5)];
    let theta = ThetaCoeffs::new(shape, c).unwrap();
    let tau = shape.tau();
    let ipi = C64::new(0.0, std::f64::consts::PI);
    for k in -5..5 {
        let lhs = theta.coefficient(k + 2);
        let rhs = (ipi * 2.0 * tau).exp() * (ipi * 2.0 * k as f64 * tau).exp() * theta.coefficient(k);
        assert!((lhs - rhs).norm() < 1e-12 * rhs.norm().max(1e-300));
    }
}

#[test]
fn basis_is_orthonormal() {
    let n = 2;
    let basis = LandauBasis::new(n, tri(), 64, 8).unwrap();
    let len = basis.coeff_len(8);
    for a in 0..len {
        let fa = basis.field({
            let mut c = vec![C64::new(0.0, 0.0); len];
            c[a] = C64::new(1.0, 0.0);
            c
        })
        .unwrap();
        let proj = basis.analyze_interior(&fa.interior(), 8);
        for (b, p) in proj.iter().enumerate() {
            let want = if a == b { 1.0 } else { 0.0 };
            assert!((p - want).norm() < 1e-12, "({a},{b}) -> {p}");
        }
    }
}

#[test]
fn coefficient_ladder_algebra() {
    let n = 3;
    let basis = LandauBasis::new(n, LatticeShape::square(), 32, 6).unwrap();
    let coeffs: Vec<C64> = (0..basis.coeff_len(4)).map(|i| C64::new(i as f64 * 0.1, 1.0 - i as f64 * 0.05)).collect();
    let f = basis.field(coeffs.clone()).unwrap();
    let up = ladder_apply(&basis, &f, Ladder::Raise).unwrap();
    let down_up = ladder_apply(&basis, &up, Ladder::Lower).unwrap();
    let l = landau_apply(&basis, &f).unwrap();
    let c_du = down_up.coeffs.unwrap();
    let c_l = l.coeffs.unwrap();
    let nn = n as usize;
    for (idx, c) in coeffs.iter().enumerate() {
        let k = idx / nn;
        assert!((c_du[idx] - c * (2.0 * n as f64 * (k + 1) as f64)).norm() < 1e-12);
        assert!((c_l[idx] - c * ((2 * k + 1) as f64 * n as f64)).norm() < 1e-12);
    }
}

#[test]
fn landau_operator_agrees_with_sampled_laplacian() {
    let n = 1;
    let basis = LandauBasis::new(n, tri(), 64, 4).unwrap();
    let coeffs = vec![C64::new(1.0, 0.0), C64::new(0.0, 0.5), C64::new(0.2, 0.1)];
    let f = basis.field(coeffs).unwrap();
    let exact = landau_apply(&basis, &f).unwrap();
    let mut plain = f.clone();
    plain.coeffs = None;
    let sampled = landau_apply(&basis, &plain).unwrap();
    assert!(max_diff(&exact.interior(), &sampled.interior()) < 1e-9);
}

#[test]
fn covariant_gradient_identities() {
    let basis = LandauBasis::new(1, tri(), 48, 3).unwrap();
    let psi = basis.field(vec![C64::new(1.0, 0.0)]).unwrap();
    let [d1, d2] = covariant_gradient(Some(&basis), &psi).unwrap();
    let combo = d1.axpy(C64::new(0.0, 1.0), &d2).unwrap();
    assert!(combo.norm() < 1e-12);

    // Im(conj(psi) D psi) = -(1/2) curl^* |psi|^2
    let sg = SpectralGrid::new(basis.cell(), 48);
    let rho: Vec<f64> = psi.interior().iter().map(|z| z.norm_sqr()).collect();
    let cs = sg.curl_star(&rho);
    let p = psi.interior();
    let (a1, a2) = (d1.interior(), d2.interior());
    for i in 0..p.len() {
        let j1 = (p[i].conj() * a1[i]).im;
        let j2 = (p[i].conj() * a2[i]).im;
        assert!((j1 + 0.5 * cs[0][i]).abs() < 1e-10);
        assert!((j2 + 0.5 * cs[1][i]).abs() < 1e-10);
    }

    // <f, L f> = |D1 f|^2 + |D2 f|^2
    let f = basis.field(vec![C64::new(0.4, 0.0), C64::new(0.0, 1.0), C64::new(-0.3, 0.2)]).unwrap();
    let lf = landau_apply(&basis, &f).unwrap();
    let [g1, g2] = covariant_gradient(Some(&basis), &f).unwrap();
    let lhs = f.inner(&lf);
    assert!((lhs.re - g1.mean_abs2() - g2.mean_abs2()).abs() < 1e-12);
    assert!(lhs.im.abs() < 1e-12);
}

#[test]
fn abrikosov_ratio_square() {
    let f = &theta_null_basis(1, LatticeShape::square(), 5, 32).unwrap()[0];
    let rho: Vec<C64> = f.samples.iter().map(|z| C64::new(z.norm_sqr(), 0.0)).collect();
    let m2 = cell_average(&rho, 32).unwrap().re;
    let rho2: Vec<C64> = rho.iter().map(|z| z * z).collect();
    let m4 = cell_average(&rho2, 32).unwrap().re;
    assert!((m2 - 1.0).abs() < 1e-12);
    assert!((m4 / (m2 * m2) - 1.180_340_599_016_1).abs() < 1e-9);
}

#[test]
fn boundary_residuals() {
    let basis = LandauBasis::new(2, tri(), 32, 3).unwrap();
    let f = basis.field(vec![C64::new(1.0, 0.0), C64::new(0.5, 0.5), C64::new(0.0, 0.2), C64::new(0.1, 0.0)]).unwrap();
    assert!(quasi_periodicity_residual(&f) < 1e-12);
    let mut wrong = f.clone();
    wrong.n = 1;
    assert!(quasi_periodicity_residual(&wrong) > 0.1);
    let rebuilt = QuasiPeriodicField::from_interior(2, f.shape, f.cell, 32, [0.0, 0.0], &f.interior()).unwrap();
    assert!(max_diff(&rebuilt.samples, &f.samples) < 1e-12);
}

#[test]
fn cell_average_rejects_nonperiodic_grid() {
    let basis = LandauBasis::new(1, tri(), 16, 0).unwrap();
    let psi = basis.field(vec![C64::new(1.0, 0.0)]).unwrap();
    assert!(cell_average(&psi.samples, 16).is_err());
    let c = vec![C64::new(2.5, -1.0); 17 * 17];
    assert!((cell_average(&c, 16).unwrap() - C64::new(2.5, -1.0)).norm() < 1e-15);
}

#[test]
fn fd_spectrum_levels() {
    let ev = fd::fd_spectrum(1, 32, 4).unwrap();
    for (k, v) in ev.iter().enumerate() {
        assert!((v - (2 * k + 1) as f64).abs() < 0.1, "{ev:?}");
    }
}

#[test]
fn rejects_bad_inputs() {
    let far = LatticeShape::new(C64::new(0.0, 25.0)).unwrap();
    assert!(matches!(LandauBasis::new(1, far, 16, 1), Err(Error::ShapeOutOfRange { .. })));
    assert!(theta_null_basis(1, tri(), 1, 64).is_err());
    assert!(theta_null_basis(1, tri(), 5, 16).is_err());
}
