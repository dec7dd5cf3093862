use std::fs;
use std::path::Path;
use std::process::Command;

use sigmak_cli::config::{parse_config_with, Mode, Overrides};
use sigmak_cli::run::{read_solution, run, EXIT_BOUNDS, EXIT_CONFIG, EXIT_OK, EXIT_SOLVER};

fn config(text: &str, mode: Mode, out: &Path) -> sigmak_cli::config::RunConfig {
    let ov = Overrides { mode: Some(mode), out_dir: Some(out.to_path_buf()), ..Default::default() };
    parse_config_with(text, &ov).unwrap()
}

#[test]
fn eigen_round_data_gives_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("problem.psi = constant:1\n", Mode::Eigen, dir.path());
    let out = run(&cfg).unwrap();
    assert_eq!(out.exit_code, EXIT_OK, "{}", out.summary);
    let lambda0 = out.report["result"]["lambda0"].as_f64().unwrap();
    assert!((lambda0 - 2.0).abs() < 1e-3, "{lambda0}");
    for f in ["report.json", "bounds.json", "lambda_table.csv", "shape.obj", "solution.json"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let table = fs::read_to_string(dir.path().join("lambda_table.csv")).unwrap();
    assert_eq!(table.lines().count(), 9);
    assert!(table.starts_with("p,lambda_p,V,"));
    let header = &out.report["header"];
    assert_eq!(header["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(header["config"]["problem.psi"], "constant:1");
    assert_eq!(header["resolution"]["kind"], "sphere");
}

#[test]
fn identical_config_and_seed_give_identical_report() {
    let text = "problem.f = harmonic_even:1,0.2,x\nproblem.p = 3.5\ngrid.n_theta = 16\nsolver.perturbation = 0.1\nseed = 11\n";
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert_eq!(run(&config(text, Mode::Solve, a.path())).unwrap().exit_code, EXIT_OK);
    assert_eq!(run(&config(text, Mode::Solve, b.path())).unwrap().exit_code, EXIT_OK);
    for f in ["report.json", "bounds.json", "solution.json", "shape.obj"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
    let c = tempfile::tempdir().unwrap();
    run(&config(&text.replace("seed = 11", "seed = 12"), Mode::Solve, c.path())).unwrap();
    let path_a = fs::read_to_string(a.path().join("report.json")).unwrap();
    let path_c = fs::read_to_string(c.path().join("report.json")).unwrap();
    assert_ne!(path_a, path_c);
}

#[test]
fn validate_replays_stored_solution() {
    let dir = tempfile::tempdir().unwrap();
    let solve_dir = dir.path().join("solve");
    let cfg = config("problem.f = band:1,0.1,2\nproblem.p = 3\ngrid.n_theta = 16\n", Mode::Solve, &solve_dir);
    assert_eq!(run(&cfg).unwrap().exit_code, EXIT_OK);
    let sol_path = solve_dir.join("solution.json");

    let vdir = dir.path().join("validate");
    let vcfg = config(&format!("validate.solution = {}\n", sol_path.display()), Mode::Validate, &vdir);
    let out = run(&vcfg).unwrap();
    assert_eq!(out.exit_code, EXIT_OK, "{:#?}", out.checks);
    let bounds: serde_json::Value = serde_json::from_str(&fs::read_to_string(vdir.join("bounds.json")).unwrap()).unwrap();
    let arr = bounds.as_array().unwrap();
    assert!(arr.len() >= 10);
    assert!(arr.iter().all(|b| b["satisfied"] == true));

    // a dilated copy no longer solves the equation
    let mut stored = read_solution(&sol_path).unwrap();
    for v in &mut stored.values {
        *v *= 1.1;
    }
    let bad = dir.path().join("bad.json");
    fs::write(&bad, serde_json::to_string(&stored).unwrap()).unwrap();
    let bcfg = config(&format!("validate.solution = {}\n", bad.display()), Mode::Validate, &dir.path().join("v2"));
    let out = run(&bcfg).unwrap();
    assert_eq!(out.exit_code, EXIT_BOUNDS);
    assert!(out.checks.iter().any(|c| c.name == "equation_residual" && !c.satisfied));
}

#[test]
fn flow_with_zero_time_reports_immediately() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("problem.p = 3\ngrid.n_theta = 8\nflow.t_max = 0\n", Mode::Flow, dir.path());
    let out = run(&cfg).unwrap();
    assert_eq!(out.exit_code, EXIT_SOLVER);
    assert_eq!(out.report["result"]["converged"], false);
    assert_eq!(out.report["result"]["steps"], 0);
    assert!(dir.path().join("trajectory.csv").exists());
}

#[test]
fn flow_from_round_start_is_already_steady() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("problem.p = 3\ngrid.n_theta = 8\nflow.t_max = 0\nflow.perturbation = 0\n", Mode::Flow, dir.path());
    let out = run(&cfg).unwrap();
    assert_eq!(out.exit_code, EXIT_OK, "{:#?}", out.checks);
    assert_eq!(out.report["result"]["converged"], true);
}

#[test]
fn circle_solve_writes_polyline() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("problem.n = 1\nproblem.f = harmonic_odd:1,0.3,x\nproblem.p = 4\n", Mode::Solve, dir.path());
    let out = run(&cfg).unwrap();
    assert_eq!(out.exit_code, EXIT_OK, "{:#?}", out.checks);
    let csv = fs::read_to_string(dir.path().join("shape.csv")).unwrap();
    assert_eq!(csv.lines().count(), 65);
}

#[test]
fn obj_mesh_format() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("problem.p = 3\ngrid.n_theta = 8\n", Mode::Solve, dir.path());
    run(&cfg).unwrap();
    let obj = fs::read_to_string(dir.path().join("shape.obj")).unwrap();
    let verts = obj.lines().filter(|l| l.starts_with("v ")).count();
    assert_eq!(verts, 8 * 16);
    for l in obj.lines().filter(|l| l.starts_with("f ")) {
        let idx: Vec<usize> = l[2..].split(' ').map(|s| s.parse().unwrap()).collect();
        assert_eq!(idx.len(), 3);
        assert!(idx.iter().all(|&i| (1..=verts).contains(&i)));
    }
}

fn binary(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_sigmak")).args(args).output().unwrap();
    (
        out.status.code().unwrap(),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

#[test]
fn binary_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.cfg");
    fs::write(&bad, "problem.n = 2\nproblem.k = 2\n").unwrap();
    let (code, _, err) = binary(&["eigen", "--config", bad.to_str().unwrap()]);
    assert_eq!(code, EXIT_CONFIG);
    assert!(err.contains("k < n"), "{err}");

    let odd = dir.path().join("odd.cfg");
    fs::write(&odd, "problem.psi = harmonic_odd:1,0.2,z\ngrid.n_theta = 8\n").unwrap();
    let (code, _, err) = binary(&["eigen", "--config", odd.to_str().unwrap()]);
    assert_eq!(code, EXIT_CONFIG);
    assert!(err.contains("--allow-non-even"), "{err}");

    let unknown = dir.path().join("unknown.cfg");
    fs::write(&unknown, "# header\nsolver.tolerance = 1e-8\n").unwrap();
    let (code, _, err) = binary(&["solve", "--config", unknown.to_str().unwrap()]);
    assert_eq!(code, EXIT_CONFIG);
    assert!(err.contains("line 2"), "{err}");

    let good = dir.path().join("good.cfg");
    fs::write(&good, "problem.p = 3\ngrid.n_theta = 8\n").unwrap();
    let out = dir.path().join("out");
    let (code, stdout, _) = binary(&["solve", "--config", good.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code, EXIT_OK, "{stdout}");
    assert!(out.join("report.json").exists());
}
