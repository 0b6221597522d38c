use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const SMALL: [&str; 4] = ["-n", "32", "-k", "8"];

fn abrikosov(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_abrikosov"))
        .args(args)
        .arg("-o")
        .arg(out)
        .env_remove("ABRIKOSOV_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn header(path: &Path) -> Value {
    let text = std::fs::read_to_string(path).unwrap();
    let json: String = text.lines().take_while(|l| l.starts_with('#')).map(|l| &l[1..]).collect::<Vec<_>>().join("\n");
    serde_json::from_str(&json).unwrap()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn beta_scan_is_stamped_and_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let args = ["beta", "--tau-grid", "half:3x3"];
    let first = abrikosov(&args, &a);
    assert_eq!(code(&first), 0, "{}", String::from_utf8_lossy(&first.stderr));
    assert_eq!(code(&abrikosov(&args, &b)), 0);
    let x = std::fs::read(a.join("beta_scan.csv")).unwrap();
    let y = std::fs::read(b.join("beta_scan.csv")).unwrap();
    assert_eq!(x, y, "reruns must be byte-identical");

    let prov = header(&a.join("beta_scan.csv"));
    for key in ["program", "version", "command", "config_hash", "config", "truncations", "status"] {
        assert!(prov.get(key).is_some(), "missing {key}");
    }
    assert_eq!(prov["command"], "beta");
    assert_eq!(prov["status"], "ok");

    let table = abrikosov_core::io::read_table(&a.join("beta_scan.csv")).unwrap();
    assert_eq!(table.rows.len(), 9);
    let beta = table.column("beta").unwrap();
    assert!(beta.iter().all(|b| *b >= 1.159 && *b < 1.5));
}

#[test]
fn branch_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["branch", "--s-count", "2", "--s-max", "0.05"];
    args.extend(SMALL);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(code(&abrikosov(&args, &a)), 0);
    assert_eq!(code(&abrikosov(&args, &b)), 0);
    for name in ["branch.csv", "state.csv", "expansion.json"] {
        assert_eq!(std::fs::read(a.join(name)).unwrap(), std::fs::read(b.join(name)).unwrap(), "{name}");
    }
    let table = abrikosov_core::io::read_table(&a.join("branch.csv")).unwrap();
    assert_eq!(table.column("s").unwrap(), vec![0.025, 0.05]);
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{ "kappa2": 3.0, "tau_grid": "half:2x2", "seed": 7 }"#).unwrap();
    let cfg = cfg.to_str().unwrap();

    let plain = dir.path().join("plain");
    assert_eq!(code(&abrikosov(&["beta", "--config", cfg], &plain)), 0);
    let p = header(&plain.join("beta_scan.csv"));
    assert_eq!(p["config"]["kappa2"], 3.0);
    assert_eq!(p["config"]["seed"], 7);

    let over = dir.path().join("over");
    assert_eq!(code(&abrikosov(&["beta", "--config", cfg, "--kappa2", "2.5"], &over)), 0);
    let q = header(&over.join("beta_scan.csv"));
    assert_eq!(q["config"]["kappa2"], 2.5);
    assert_eq!(q["config"]["seed"], 7);
    assert_ne!(p["config_hash"], q["config_hash"]);
}

#[test]
fn output_dir_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("from_env");
    let o = Command::new(env!("CARGO_BIN_EXE_abrikosov"))
        .args(["beta", "--tau-grid", "1,1"])
        .env("ABRIKOSOV_OUT_DIR", &target)
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    assert!(target.join("beta_scan.csv").exists());
    assert!(!dir.path().join("beta_scan.csv").exists());
}

#[test]
fn bad_input_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    assert_eq!(code(&abrikosov(&["no-such-command"], out)), 2);
    assert_eq!(code(&abrikosov(&["branch", "--kappa2", "-1"], out)), 2);
    assert_eq!(code(&abrikosov(&["beta", "--tau", "0.3,-1"], out)), 2);
    assert_eq!(code(&abrikosov(&["beta", "--tau-grid", "half:0x3"], out)), 2);

    let cfg = out.join("bad.json");
    std::fs::write(&cfg, r#"{ "kappa": 2.0 }"#).unwrap();
    let o = abrikosov(&["beta", "--config", cfg.to_str().unwrap()], out);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown field"));

    // for very small kappa the branch bends to b > kappa^2
    let mut args = vec!["field-landscape", "--kappa2", "0.05", "--b", "0.04", "--tau-grid", "square"];
    args.extend(SMALL);
    assert_eq!(code(&abrikosov(&args, out)), 2);
    assert!(!out.join("FAILED.json").exists());

    let gauge = out.join("missing.csv");
    assert_eq!(code(&abrikosov(&["gauge-fix", "--input", gauge.to_str().unwrap()], out)), 2);
}

#[test]
fn solver_failure_exits_with_three_and_leaves_a_marker() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["branch", "--s-grid", "0.05,2.5"];
    args.extend(SMALL);
    let o = abrikosov(&args, dir.path());
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
    let marker = read_json(&dir.path().join("FAILED.json"));
    assert_eq!(marker["exit_code"], 3);
    assert_eq!(marker["provenance"]["status"], "failed");
    // the converged prefix is kept
    let partial = abrikosov_core::io::read_table(&dir.path().join("branch.csv")).unwrap();
    assert_eq!(partial.column("s").unwrap(), vec![0.05]);

    // a later successful run clears the marker
    let mut ok = vec!["branch", "--s-grid", "0.05"];
    ok.extend(SMALL);
    assert_eq!(code(&abrikosov(&ok, dir.path())), 0);
    assert!(!dir.path().join("FAILED.json").exists());
}

#[test]
fn verify_reports_have_a_stable_shape() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["verify", "gauge", "--samples", "2"];
    args.extend(SMALL);
    let o = abrikosov(&args, dir.path());
    assert_eq!(code(&o), 0);
    let doc = read_json(&dir.path().join("verify_gauge.json"));
    assert_eq!(doc["provenance"]["command"], "verify-gauge");
    let result = &doc["result"];
    assert_eq!(result["suite"], "gauge");
    let checks = result["checks"].as_array().unwrap();
    assert!(!checks.is_empty());
    for c in checks {
        for key in ["name", "measured", "tolerance", "upper", "pass"] {
            assert!(c.get(key).is_some(), "check lacks {key}");
        }
    }
    let all = checks.iter().all(|c| c["pass"].as_bool().unwrap());
    assert_eq!(result["pass"].as_bool().unwrap(), all);
    assert!(all, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn gauge_fix_round_trips_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["gauge-fix", "--s-grid", "0.1"];
    args.extend(SMALL);
    assert_eq!(code(&abrikosov(&args, dir.path())), 0);
    let input = dir.path().join("input_closed.csv");
    assert!(input.exists());
    let first = read_json(&dir.path().join("gauge_fix.json"));

    let again = dir.path().join("again");
    let mut args = vec!["gauge-fix", "--input", input.to_str().unwrap()];
    args.extend(SMALL);
    let o = abrikosov(&args, &again);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let a = abrikosov_core::io::read_table(&dir.path().join("fixed_state.csv")).unwrap();
    let b = abrikosov_core::io::read_table(&again.join("fixed_state.csv")).unwrap();
    let gap = a.rows.iter().flatten().zip(b.rows.iter().flatten()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    assert!(gap < 1e-9, "gap {gap}");
    assert!(first["result"].is_object());
}
