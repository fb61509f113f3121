use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn kahler(args: &[&str], out_dir: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_kahler"));
    cmd.args(args).env_remove("KAHLER_OUT_DIR");
    if let Some(d) = out_dir {
        cmd.env("KAHLER_OUT_DIR", d);
    }
    cmd.output().unwrap()
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn obstruction_violated_example() {
    let out = kahler(&["check-obstruction", "--omega", "1", "--p", "0", "--q", "3"], None);
    let v = json(&out);
    assert_eq!(v["satisfied"], false);
    assert_eq!(v["margin"], -1.0);
    assert_eq!(v["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(v["config"]["q"], 3.0);
}

#[test]
fn obstruction_matrix_input_and_sampler() {
    let out = kahler(
        &[
            "check-obstruction",
            "--omega",
            "[[1,0],[0,1]]",
            "--p",
            "[[0,0],[0,0]]",
            "--q",
            "[[[0,3],0],[0,0]]",
            "--sampled",
            "--samples",
            "20000",
            "--seed",
            "7",
        ],
        None,
    );
    let v = json(&out);
    assert_eq!(v["m"], 2);
    assert_eq!(v["satisfied"], false);
    let exact = v["margin"].as_f64().unwrap();
    let sampled = v["sampled"]["margin"].as_f64().unwrap();
    assert!((exact + 1.0).abs() < 1e-12 && (sampled - exact).abs() < 1e-3);
    assert_eq!(v["config"]["seed"], 7);
}

#[test]
fn obstruction_rejects_bad_input() {
    let out = kahler(&["check-obstruction", "--omega", "1", "--p", "-2", "--q", "0"], None);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("positive definite"));
    let out = kahler(&["check-obstruction", "--omega", "1", "--p", "x", "--q", "0"], None);
    assert_eq!(out.status.code(), Some(1));
    let out = kahler(
        &["check-obstruction", "--omega", "1", "--p", "0", "--q", "0", "--bogus"],
        None,
    );
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn strip_csv_has_shrinking_relative_error() {
    let out = kahler(
        &[
            "strip-asymptotics",
            "--lambdas",
            "5,10,20,40",
            "--tol",
            "1e-10",
            "--out",
            "csv",
        ],
        None,
    );
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().any(|l| l.starts_with("# version: ")));
    let body: String = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| format!("{l}\n"))
        .collect();
    let mut rdr = csv::Reader::from_reader(body.as_bytes());
    let col = rdr.headers().unwrap().iter().position(|h| h == "j_rel_error").unwrap();
    let errs: Vec<f64> = rdr.records().map(|r| r.unwrap()[col].parse().unwrap()).collect();
    assert_eq!(errs.len(), 4);
    assert!(errs.windows(2).all(|w| w[1] < w[0]), "{errs:?}");
}

#[test]
fn strip_rejects_non_positive_lambda() {
    let out = kahler(&["strip-asymptotics", "--lambdas", "5,-1"], None);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn out_dir_and_atomic_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = kahler(
        &["strip-asymptotics", "--lambdas", "5", "--out", "json"],
        Some(dir.path()),
    );
    assert!(out.status.success() && out.stdout.is_empty());
    let v: Value = serde_json::from_slice(&std::fs::read(dir.path().join("strip-asymptotics.json")).unwrap()).unwrap();
    assert_eq!(v["rows"].as_array().unwrap().len(), 1);
    assert_eq!(v["config"]["quadrature"]["tolerance"], 1e-10);
    let explicit = dir.path().join("sub/verdict.json");
    let out = kahler(
        &[
            "check-obstruction",
            "--omega",
            "1",
            "--p",
            "0",
            "--q",
            "0",
            "--out",
            explicit.to_str().unwrap(),
        ],
        None,
    );
    assert!(out.status.success());
    let v: Value = serde_json::from_slice(&std::fs::read(&explicit).unwrap()).unwrap();
    assert_eq!(v["margin"], 2.0);
    assert_eq!(std::fs::read_dir(explicit.parent().unwrap()).unwrap().count(), 1);
}

#[test]
fn sharp_family_report() {
    let v = json(&kahler(
        &[
            "verify-sharp-family",
            "--epsilon",
            "1.0",
            "--grid",
            "16",
            "--out",
            "json",
        ],
        None,
    ));
    assert_eq!(v["check"]["boundary_t0"], 0.0);
    assert_eq!(v["check"]["boundary_axis"], 0.0);
    let rows = v["sharpness"].as_array().unwrap();
    let margins: Vec<f64> = rows.iter().map(|r| r["margin"].as_f64().unwrap()).collect();
    assert_eq!(margins[0], 1.0);
    assert!(margins.windows(2).all(|w| w[1] < w[0]));
    let out = kahler(&["verify-sharp-family", "--epsilon", "0"], None);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn solve_constant_potential_and_write_grid() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "p.json",
        r#"{"n": 8, "v": {"kind": "constant", "value": 0.5}, "uniqueness_probe": true}"#,
    );
    let grid = dir.path().join("u.csv");
    let result = dir.path().join("r.json");
    let out = kahler(
        &[
            "solve-geodesic",
            "--config",
            &cfg,
            "--out",
            result.to_str().unwrap(),
            "--grid-out",
            grid.to_str().unwrap(),
        ],
        None,
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&std::fs::read(&result).unwrap()).unwrap();
    assert_eq!(v["config"]["nt"], 9);
    assert!(v["config"]["tol_sweep"].as_f64().unwrap() > 0.0);
    assert!(v["trace"]["linear_residual"].as_f64().unwrap() < 1e-12);
    assert!(v["uniqueness_difference"].as_f64().unwrap() < 1e-8);
    let (u, header) = kahler_core::io::read_grid_function(std::fs::File::open(&grid).unwrap()).unwrap();
    assert_eq!(header.nt, 9);
    assert!((u.get(8, 3, 3) - 0.5).abs() < 1e-12);
}

#[test]
fn solve_rejects_two_slices_and_unknown_keys() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "p.json",
        r#"{"n": 8, "nt": 2, "v": {"kind": "constant", "value": 0}}"#,
    );
    let out = kahler(&["solve-geodesic", "--config", &cfg], None);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("time slices"));
    let cfg = write(
        dir.path(),
        "q.json",
        r#"{"n": 8, "v": {"kind": "constant", "value": 0}, "tolerance": 1}"#,
    );
    let out = kahler(&["solve-geodesic", "--config", &cfg], None);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn solve_reports_non_convergence_as_numerical_failure() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "p.json",
        r#"{"n": 32, "v": {"kind": "symmetric", "p": 0, "q": 3, "radius": 0.15, "plateau": 0.35}, "max_sweeps": 2, "nested": false}"#,
    );
    let out = kahler(&["solve-geodesic", "--config", &cfg], None);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("did not converge"));
    // the same profile cannot be drawn on an 8-torus: an input error
    let coarse = write(
        dir.path(),
        "c.json",
        r#"{"n": 8, "v": {"kind": "symmetric", "p": 0, "q": 3, "radius": 0.15, "plateau": 0.35}}"#,
    );
    assert_eq!(
        kahler(&["solve-geodesic", "--config", &coarse], None).status.code(),
        Some(1)
    );
}

#[test]
fn solve_sharp_family_patch() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "p.json",
        r#"{"n": 8, "v": {"kind": "sharp-family", "epsilon": 1.0}}"#,
    );
    let v = json(&kahler(&["solve-geodesic", "--config", &cfg], None));
    assert!(v["dirichlet_error"].as_f64().unwrap() < 1e-3);
}

#[test]
fn solve_reads_csv_potential_relative_to_config() {
    let dir = tempfile::tempdir().unwrap();
    let g = kahler_core::Grid::torus(8).unwrap();
    let v = kahler_core::GridSlice::from_fn(g, |z| 0.01 * (std::f64::consts::TAU * z.re).cos()).unwrap();
    let mut bytes = Vec::new();
    kahler_core::io::write_grid_slice(&mut bytes, &v, None, &[]).unwrap();
    std::fs::write(dir.path().join("v.csv"), bytes).unwrap();
    let cfg = write(
        dir.path(),
        "p.json",
        r#"{"n": 8, "v": {"kind": "csv", "path": "v.csv"}}"#,
    );
    let out = json(&kahler(&["solve-geodesic", "--config", &cfg], None));
    assert!(out["barrier_violation"].as_f64().unwrap() < 1e-8);
    let bad = write(
        dir.path(),
        "b.json",
        r#"{"n": 16, "v": {"kind": "csv", "path": "v.csv"}}"#,
    );
    assert_eq!(
        kahler(&["solve-geodesic", "--config", &bad], None).status.code(),
        Some(1)
    );
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "p.json",
        r#"{"n": 32, "v": {"kind": "symmetric", "p": -0.5, "q": -0.5, "radius": 0.15, "plateau": 0.35}}"#,
    );
    let a = kahler(&["solve-geodesic", "--config", &cfg], None);
    let b = kahler(&["solve-geodesic", "--config", &cfg], None);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let args = [
        "check-obstruction",
        "--omega",
        "2",
        "--p",
        "[0.5, 0]",
        "--q",
        "[1, 1]",
        "--sampled",
        "--samples",
        "10000",
        "--seed",
        "3",
    ];
    assert_eq!(kahler(&args, None).stdout, kahler(&args, None).stdout);
}

#[test]
fn probe_regularity_from_a_result_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "p.json",
        r#"{"n": 8, "v": {"kind": "constant", "value": -0.3}}"#,
    );
    let result = dir.path().join("r.json");
    assert!(kahler(
        &["solve-geodesic", "--config", &cfg, "--out", result.to_str().unwrap()],
        None
    )
    .status
    .success());
    let out = kahler(
        &[
            "probe-regularity",
            "--solution",
            result.to_str().unwrap(),
            "--levels",
            "8,16",
            "--radii",
            "0,0.2",
            "--out",
            "json",
        ],
        None,
    );
    let v = json(&out);
    let rows = v["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[2]["level"], 16);
    assert!(rows.iter().all(|r| r["max_abs"].as_f64().unwrap() < 1e-9));
    let levels = v["levels"].as_array().unwrap();
    assert_eq!(levels.len(), 2);
    assert!((levels[1]["trace"]["a_fit"].as_f64().unwrap() + 0.3).abs() < 1e-12);
    assert_eq!(v["config"]["solution"]["n"], 8);
}

#[test]
fn probe_regularity_on_a_builder_potential_as_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "p.json",
        r#"{"n": 32, "v": {"kind": "symmetric", "p": -0.5, "q": -0.5, "radius": 0.15, "plateau": 0.35}}"#,
    );
    let out = kahler(
        &[
            "probe-regularity",
            "--solution",
            &cfg,
            "--levels",
            "32",
            "--radii",
            "0,0.1",
        ],
        None,
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("level,h,radius,max_abs,oscillation,sweeps"));
    assert_eq!(text.lines().filter(|l| l.starts_with("32,")).count(), 2);
}

#[test]
fn probe_rejects_csv_potentials_at_other_levels() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "p.json",
        r#"{"n": 8, "v": {"kind": "csv", "path": "missing.csv"}}"#,
    );
    let out = kahler(&["probe-regularity", "--solution", &cfg, "--levels", "8,16"], None);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("cannot be probed"));
}

#[test]
fn help_documents_every_subcommand() {
    let out = kahler(&["--help"], None);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    for sub in [
        "strip-asymptotics",
        "check-obstruction",
        "verify-sharp-family",
        "solve-geodesic",
        "probe-regularity",
    ] {
        assert!(text.contains(sub), "{sub}");
    }
    let out = kahler(&["solve-geodesic", "--help"], None);
    assert!(String::from_utf8(out.stdout).unwrap().contains("nt (≥ 3"));
}
