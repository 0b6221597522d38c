use abrikosov_cli::config::parse_tau;
use abrikosov_cli::{Overrides, RunConfig};

#[test]
fn shapes_parse_by_name_and_coordinates() {
    assert_eq!(parse_tau("square").unwrap(), parse_tau("0,1").unwrap());
    let t = parse_tau("triangular").unwrap();
    assert!((t.re - 0.5).abs() < 1e-15 && (t.im - 0.75f64.sqrt()).abs() < 1e-15);
    assert!(parse_tau("0.2,-1").is_err());
    assert!(parse_tau("rhombic").is_err());
}

#[test]
fn amplitude_grid_is_evenly_spaced_and_clean() {
    let c = RunConfig { s_max: 0.1, s_count: 5, ..Default::default() };
    assert_eq!(c.s_values(), vec![0.02, 0.04, 0.06, 0.08, 0.1]);
    let c = RunConfig { s_grid: vec![0.3, 0.1], ..c };
    assert_eq!(c.s_values(), vec![0.3, 0.1]);
}

#[test]
fn fields_follow_mu_unless_b_is_given() {
    let c = RunConfig { kappa2: 2.0, mu: vec![0.5, 0.25], ..Default::default() };
    assert_eq!(c.fields(), vec![1.5, 1.75]);
    let c = RunConfig { b: Some(1.9), ..c };
    assert_eq!(c.fields(), vec![1.9]);
}

#[test]
fn shape_grids_land_in_the_fundamental_domain() {
    for grid in ["fundamental:6x5", "half:4x4:1.3", "0.7,0.8; -0.3,2"] {
        let c = RunConfig { tau_grid: grid.into(), ..Default::default() };
        for t in c.tau_points().unwrap() {
            assert!(t.re >= -0.5 - 1e-12 && t.re <= 0.5 + 1e-12, "{grid}: {t}");
            assert!(t.norm() >= 1.0 - 1e-12, "{grid}: {t}");
        }
    }
    let bad = RunConfig { tau_grid: "half:3".into(), ..Default::default() };
    assert!(bad.validate().is_err());
}

#[test]
fn hash_ignores_the_output_directory() {
    let a = RunConfig::default();
    let b = RunConfig { out_dir: Some("/elsewhere".into()), ..a.clone() };
    assert_eq!(a.hash(), b.hash());
    let c = RunConfig { seed: 1, ..a.clone() };
    assert_ne!(a.hash(), c.hash());
}

#[test]
fn defaults_validate_and_overrides_apply() {
    let c = RunConfig::resolve(&Overrides { grid: Some(64), jobs: Some(3), ..Default::default() }).unwrap();
    assert_eq!((c.grid, c.jobs, c.levels), (64, 3, RunConfig::default().levels));
    assert!(RunConfig::resolve(&Overrides { grid: Some(4), ..Default::default() }).is_err());
}
