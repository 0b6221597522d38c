use std::f64::consts::PI;

use abrikosov_core::bifurcation::{solve_branch, ReductionOptions, ReductionSetup};
use abrikosov_core::gauge::*;
use abrikosov_core::lattice::LatticeShape;
use abrikosov_core::spectral::{max_abs, mean, SpectralGrid};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn branch_state(shape: LatticeShape) -> RawLatticeState {
    let opts = ReductionOptions { grid: 48, levels: 16, ..Default::default() };
    let setup = ReductionSetup::new(2f64.sqrt(), shape, opts).unwrap();
    let br = solve_branch(&setup, &[0.1, 0.2], 0.0).unwrap();
    RawLatticeState::from_gl(&br.points[1].state)
}

/// Smooth random gauge function built from a few low modes.
fn random_gauge(rng: &mut ChaCha8Rng, grid: usize) -> GaugeFunction {
    let mut periodic = vec![0.0; grid * grid];
    let modes: Vec<(f64, f64, f64, f64)> =
        (0..4).map(|_| (rng.gen_range(-2..=2) as f64, rng.gen_range(-2..=2) as f64, rng.gen_range(-0.25..0.25), rng.gen_range(0.0..6.0))).collect();
    for j2 in 0..grid {
        for j1 in 0..grid {
            let y = [j1 as f64 / grid as f64, j2 as f64 / grid as f64];
            periodic[j2 * grid + j1] = modes.iter().map(|(p, q, a, ph)| a * (2.0 * PI * (p * y[0] + q * y[1]) + ph).cos()).sum();
        }
    }
    GaugeFunction { linear: [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)], periodic }
}

fn check_normal_form(fixed: &FixedGauge) {
    let sg = SpectralGrid::new(fixed.alpha.cell, fixed.alpha.grid);
    assert!(fixed.psi.cocycle[0].abs() < 1e-12 && fixed.psi.cocycle[1].abs() < 1e-12);
    assert!(max_abs(&sg.divergence(&fixed.alpha.comp)) < 1e-10, "divergence");
    assert!(mean(&fixed.alpha.comp[0]).abs() < 1e-10 && mean(&fixed.alpha.comp[1]).abs() < 1e-10, "mean");
    let p0 = fixed.psi.interior()[0];
    assert!(p0.im.abs() < 1e-12 && p0.re >= 0.0);
}

#[test]
fn gauge_and_translation_leave_observables_invariant() {
    let state = branch_state(LatticeShape::square());
    let reference = state.observables();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..3 {
        let eta = random_gauge(&mut rng, state.grid());
        let g = gauge_transform(&state, &eta).unwrap();
        assert!(observable_distance(&g.observables(), &reference) < 1e-8);
        let t = state.cell().point(rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0));
        let moved = translate_state(&g, t).unwrap();
        let back = translate_state(&moved, [-t[0], -t[1]]).unwrap();
        assert!(observable_distance(&back.observables(), &reference) < 1e-8);
        let e0 = state.energy(2f64.sqrt(), 1.0);
        assert!((moved.energy(2f64.sqrt(), 1.0) - e0).abs() < 1e-9 * e0.abs().max(1.0));
    }
}

#[test]
fn fixing_recovers_the_canonical_state() {
    let state = branch_state(LatticeShape::triangular());
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let canonical = fix_gauge(&state).unwrap();
    check_normal_form(&canonical);
    for _ in 0..3 {
        let eta = random_gauge(&mut rng, state.grid());
        let t = state.cell().point(rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0));
        let scrambled = translate_state(&gauge_transform(&state, &eta).unwrap(), t).unwrap();
        let fixed = fix_gauge(&scrambled).unwrap();
        check_normal_form(&fixed);
        assert!(fixed.path_residual < 1e-8, "path {}", fixed.path_residual);
        // observables of the fixed state equal the scrambled ones translated by l
        let expect = translate_state(&scrambled, fixed.translation).unwrap().observables();
        assert!(observable_distance(&fixed.raw().observables(), &expect) < 1e-8);
        // idempotent up to a constant phase
        let again = fix_gauge(&fixed.raw()).unwrap();
        let d = again.psi.samples.iter().zip(&fixed.psi.samples).fold(0.0f64, |m, (a, b)| m.max((a - b).norm()));
        assert!(d < 1e-8, "idempotence {d}");
    }
}

#[test]
fn pure_gauge_potential_is_removed() {
    let state = branch_state(LatticeShape::square());
    let canonical = fix_gauge(&state).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let eta = random_gauge(&mut rng, state.grid());
    let normal = RawLatticeState::new(
        canonical.psi.scale(abrikosov_core::C64::new(0.0, 0.0)),
        abrikosov_core::glcore::PeriodicVectorField::zeros(state.cell(), state.grid()),
    )
    .unwrap();
    let fixed = fix_gauge(&gauge_transform(&normal, &eta).unwrap()).unwrap();
    assert!(fixed.alpha.norm() < 1e-10);
}

#[test]
fn closed_samples_round_trip() {
    let state = branch_state(LatticeShape::square());
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let g = gauge_transform(&state, &random_gauge(&mut rng, state.grid())).unwrap();
    let a = g.total_potential();
    let back = RawLatticeState::from_closed_samples(g.psi.shape, g.cell(), g.grid(), &g.psi.samples, [&a[0], &a[1]]).unwrap();
    assert!(observable_distance(&back.observables(), &g.observables()) < 1e-10);
    let mut bad = a[0].clone();
    bad.iter_mut().for_each(|v| *v *= 1.1);
    assert!(matches!(
        RawLatticeState::from_closed_samples(g.psi.shape, g.cell(), g.grid(), &g.psi.samples, [&bad, &a[1]]),
        Err(abrikosov_core::Error::FluxNotQuantized(_))
    ));
}

#[test]
fn lattice_rotations() {
    let state = branch_state(LatticeShape::square());
    let quarter = [[0.0, -1.0], [1.0, 0.0]];
    let rot = rotate_state(&state, quarter).unwrap();
    assert!(rot.same_lattice);
    // the square lattice state is invariant up to gauge and translation
    let f1 = fix_gauge(&state).unwrap();
    let f2 = fix_gauge(&rot.state).unwrap();
    let d1 = f1.raw().observables();
    let e = (f2.raw().energy(2f64.sqrt(), 1.0) - f1.raw().energy(2f64.sqrt(), 1.0)).abs();
    assert!(e < 1e-10);
    assert!((max_abs(&d1.density) - max_abs(&f2.raw().observables().density)).abs() < 1e-10);
    let a = 0.3f64;
    let generic = rotate_state(&state, [[a.cos(), -a.sin()], [a.sin(), a.cos()]]).unwrap();
    assert!(!generic.same_lattice);
    assert!(matches!(rotate_state(&state, [[1.0, 0.0], [0.0, -1.0]]), Err(abrikosov_core::Error::Unsupported(_))));
}
