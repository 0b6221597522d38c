use abrikosov_core::bifurcation::{branch_by_field, solve_branch, solve_branch_partial, ReductionOptions, ReductionSetup};
use abrikosov_core::lattice::LatticeShape;
use abrikosov_core::C64;

fn setup(shape: LatticeShape) -> ReductionSetup {
    ReductionSetup::new(2f64.sqrt(), shape, ReductionOptions { grid: 48, levels: 24, ..Default::default() }).unwrap()
}

#[test]
fn branch_lowers_the_energy_below_the_normal_state() {
    let setup = setup(LatticeShape::triangular());
    let branch = solve_branch(&setup, &[0.05, 0.1, 0.15, 0.2], 0.0).unwrap();
    let k2 = 2.0;
    let mut last = 1.0;
    for p in &branch.points {
        assert!(p.lambda > last, "lambda increases along the branch");
        last = p.lambda;
        assert!((p.b - k2 / p.lambda).abs() < 1e-14);
        // normal state at the same average field
        assert!(p.energy < 0.5 * k2 + p.b * p.b, "s = {}", p.s);
        // truncation-limited at 24 levels
        assert!(p.residual_psi < 1e-5, "s = {}: {}", p.s, p.residual_psi);
    }
}

#[test]
fn gamma_is_odd_under_sign_flip_of_the_amplitude() {
    let setup = setup(LatticeShape::square());
    let lambda = 1.0 + setup.slope_prediction() * 0.01;
    let plus = setup.solve_w(lambda, C64::new(0.1, 0.0), None).unwrap();
    let minus = setup.solve_w(lambda, C64::new(-0.1, 0.0), None).unwrap();
    // psi -> -psi maps s -> -s, w -> -w
    for (a, b) in plus.w.iter().zip(&minus.w) {
        assert!((a + b).norm() < 1e-12);
    }
    assert!((plus.gamma + minus.gamma).norm() < 1e-12 * plus.gamma.norm().max(1e-300));
}

#[test]
fn field_parameterized_point_matches_the_amplitude_branch() {
    let setup = setup(LatticeShape::square());
    let p = branch_by_field(&setup, 1.9, 0.0).unwrap();
    assert!((p.b - 1.9).abs() < 1e-10);
    let q = solve_branch(&setup, &[p.s], 0.0).unwrap().points.remove(0);
    assert!((q.lambda - p.lambda).abs() < 1e-9, "{} vs {}", q.lambda, p.lambda);
    assert!((q.energy - p.energy).abs() < 1e-9);
}

#[test]
fn partial_branch_keeps_the_converged_prefix() {
    let setup = setup(LatticeShape::square());
    let (branch, err) = solve_branch_partial(&setup, &[0.05, 0.1, 3.0], 0.0).unwrap();
    assert!(err.is_some());
    assert_eq!(branch.points.iter().map(|p| p.s).collect::<Vec<_>>(), vec![0.05, 0.1]);
}
