use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_eigenbounds"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn table1_first_row() {
    let o = bin(&["run", "--preset", "table1"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    let mut lines = out.lines();
    assert!(lines
        .next()
        .unwrap()
        .starts_with("h,lambda_CR,GLB_CR,lambda_GCR,GLB_GCR,lambda_P1,"));
    let first = lines.next().unwrap();
    assert!(
        first.starts_with("0.707107,24,11.6092,21.4979,19.9542,,"),
        "{first}"
    );
    assert_eq!(out.lines().count(), 6);
}

#[test]
fn table4_finest_row() {
    let o = bin(&["run", "--preset", "table4"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    let header: Vec<&str> = out.lines().next().unwrap().split(',').collect();
    let row: Vec<&str> = out.lines().last().unwrap().split(',').collect();
    let col = |name: &str| -> f64 {
        row[header.iter().position(|h| *h == name).unwrap()]
            .parse()
            .unwrap()
    };
    assert_eq!(col("h"), 0.0441942);
    assert_eq!(format!("{:.4}", col("h2")), "0.0156");
    assert!((col("GLB") / 367.1308 - 1.0).abs() < 1e-2);
}

#[test]
fn zero_ell_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "bad.conf",
        "[problem]\ndomain = l-shape\n[solve]\nell = 0\n",
    );
    let o = bin(&["run", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("ℓ must be ≥ 1"), "{}", stderr(&o));
}

#[test]
fn missing_config_exits_1() {
    let o = bin(&["run", "--config", "/nonexistent/x.conf"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("cannot load"));
}

#[test]
fn bad_arguments_exit_1() {
    assert_eq!(bin(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(bin(&["verify", "nothing"]).status.code(), Some(1));
    assert_eq!(
        bin(&["run", "--preset", "table1", "--format", "xml"])
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn output_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "sq.conf",
        "[problem]\ndomain = unit-square\nlevels = 1..3\ncoefficient = variable-square\n[solve]\nell = 3\nspaces = gcr, p1\nbackend = sparse\nseed = 7\n",
    );
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for out in [&a, &b] {
        let o = bin(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    let (a, b) = (fs::read(a).unwrap(), fs::read(b).unwrap());
    assert!(!a.is_empty());
    assert_eq!(a, b);
}

#[test]
fn failed_certification_exits_2_and_still_writes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "req.conf",
        "[problem]\ndomain = unit-square\nlevels = 0\n[solve]\nspaces = gcr, p1\n[bounds]\nrequire = upper\n",
    );
    let o = bin(&["run", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(stdout(&o).lines().count(), 2);
    assert!(stderr(&o).contains("not certified"));
}

#[test]
fn markdown_output() {
    let o = bin(&["run", "--preset", "table1", "--format", "md"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.lines().all(|l| l.starts_with('|') && l.ends_with('|')));
    assert!(out.contains("—"));
}

#[test]
fn verify_suites() {
    for suite in ["bubble", "quadrature", "orthogonality"] {
        let o = bin(&["verify", suite, "--seed", "3"]);
        assert_eq!(o.status.code(), Some(0), "{suite}: {}", stdout(&o));
        assert!(stdout(&o).contains("PASS"));
        assert!(!stdout(&o).contains("FAIL"));
    }
}

#[test]
fn generated_mesh_runs_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = dir.path().join("l.mesh");
    let o = bin(&[
        "mesh",
        "gen",
        "l-shape",
        "--levels",
        "1",
        "--out",
        mesh.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = fs::read_to_string(&mesh).unwrap();
    assert!(text.starts_with("2 "));
    let cfg = write_config(
        dir.path(),
        "file.conf",
        "[problem]\ndomain = file:l.mesh\nlevels = 0\n[solve]\nspaces = cr, gcr, p1\n[output]\nlayout = laplace\n",
    );
    let o = bin(&["run", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let row = stdout(&o).lines().nth(1).unwrap().to_string();
    assert!(
        row.starts_with("0.353553,32.7371,24.0013,31.1326,30.7063,56.317,"),
        "{row}"
    );
}
