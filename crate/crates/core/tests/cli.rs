use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn escapelab(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_escapelab"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

#[test]
fn validate_accepts_the_sample_files() {
    let dir = tempfile::tempdir().unwrap();
    for f in ["heisenberg.json", "filiform3.json"] {
        let o = escapelab(&["validate", data(f).to_str().unwrap()], dir.path());
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    }
    assert_eq!(code(&escapelab(&["validate", "filiform5"], dir.path())), 0);
}

#[test]
fn validate_flags_broken_algebras() {
    let dir = tempfile::tempdir().unwrap();
    // [X1,X2] lands in the first stratum.
    let path = dir.path().join("bad.json");
    std::fs::write(&path, r#"{"strata":[2,1],"brackets":{"1,2":[[1,1.0]]}}"#).unwrap();
    let o = escapelab(&["validate", path.to_str().unwrap(), "--out-dir", "v"], dir.path());
    assert_eq!(code(&o), 1);
    let csv = std::fs::read_to_string(dir.path().join("v/validation.csv")).unwrap();
    assert!(csv.starts_with("invariant,passed,i,j,k\n"));
    assert!(csv.contains("false"));

    std::fs::write(&path, r#"{"strata":[2,1],"brackets":{"2,1":[[3,1.0]]}}"#).unwrap();
    assert_eq!(code(&escapelab(&["validate", path.to_str().unwrap()], dir.path())), 2);
    assert_eq!(code(&escapelab(&["validate", "missing.json"], dir.path())), 2);
}

#[test]
fn usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        vec![],
        vec!["bogus"],
        vec!["escape", "--frobnicate"],
        vec!["example", "torus"],
        vec!["escape", "--algebra", "filiform3", "--covectors", "3"],
        vec!["integrate", "--algebra", "heisenberg", "--covector", "1,2"],
        vec![
            "integrate",
            "--algebra",
            "heisenberg",
            "--covector",
            "1,0,0",
            "--T",
            "-1",
        ],
    ] {
        let o = escapelab(&args, dir.path());
        assert_eq!(code(&o), 2, "{args:?}");
    }
    assert_eq!(code(&escapelab(&["--help"], dir.path())), 0);
}

#[test]
fn heisenberg_example() {
    let dir = tempfile::tempdir().unwrap();
    let o = escapelab(
        &["example", "heisenberg", "--N", "1", "--h", "1e-4", "--out-dir", "."],
        dir.path(),
    );
    assert_eq!(code(&o), 0);
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("[PASS]"));
    let csv = std::fs::read_to_string(dir.path().join("heisenberg_N1.csv")).unwrap();
    assert!(csv.starts_with("t,x,y,z,x_exact,y_exact,z_exact\n"));
}

#[test]
fn escape_run_writes_slope_table_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "escape",
        "--algebra",
        "filiform3",
        "--covectors",
        "20",
        "--seed",
        "7",
        "--T",
        "100",
    ];
    let run = |sub: &str| {
        let mut a: Vec<&str> = args.to_vec();
        a.extend(["--out-dir", sub]);
        let o = escapelab(&a, dir.path());
        let slopes = std::fs::read(dir.path().join(sub).join("escape_slopes.csv")).unwrap();
        let series = std::fs::read(dir.path().join(sub).join("escape.csv")).unwrap();
        (code(&o), slopes, series)
    };
    let (c1, slopes, series) = run("a");
    let (c2, slopes2, series2) = run("b");
    assert_eq!((c1, c2), (0, 0));
    assert_eq!(slopes, slopes2);
    assert_eq!(series, series2);

    let text = String::from_utf8(slopes).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 20);
    for row in rows {
        let cols: Vec<&str> = row.split(',').collect();
        if let Ok(k) = cols[3].parse::<f64>() {
            assert!(k >= 1.0 / 3.0 - 0.05, "{row}");
        }
    }
    let series = String::from_utf8(series).unwrap();
    assert!(series.starts_with("cov_idx,t,D,bound_rhs\n"));
}

#[test]
fn config_file_with_flag_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = data("escape_filiform3.json");
    let o = escapelab(
        &[
            "escape",
            "--config",
            cfg.to_str().unwrap(),
            "--T",
            "30",
            "--out-dir",
            "x",
        ],
        dir.path(),
    );
    assert!(code(&o) <= 1, "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("T = 30"));
    assert!(stdout.contains("20 co-vectors"));
    assert!(dir.path().join("x/escape.csv").exists());
}

#[test]
fn integrate_and_pmp_check() {
    let dir = tempfile::tempdir().unwrap();
    let o = escapelab(
        &[
            "integrate",
            "--algebra",
            "heisenberg",
            "--covector",
            "0,1,6.283185307179586",
            "--covector",
            "-0.5,0.25,0.25",
            "--T",
            "1",
            "--h",
            "0.001",
        ],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let trace = std::fs::read_to_string(dir.path().join("trace_1.csv")).unwrap();
    assert_eq!(trace.lines().next().unwrap(), "t,g_1,g_2,g_3,u_1,u_2,quasinorm,speed");
    assert_eq!(trace.lines().count(), 1002);

    let o = escapelab(
        &[
            "pmp-check",
            "--algebra",
            "filiform4",
            "--norm",
            "l1",
            "--covectors",
            "5",
            "--seed",
            "3",
        ],
        dir.path(),
    );
    assert_eq!(code(&o), 0);
    let pmp = std::fs::read_to_string(dir.path().join("pmp.csv")).unwrap();
    assert_eq!(pmp.lines().count(), 6);
}

#[test]
fn growth_bound_table() {
    let dir = tempfile::tempdir().unwrap();
    let o = escapelab(
        &[
            "growth-bound",
            "--algebra",
            "heisenberg",
            "--covector",
            "0,1,6.283185307179586",
            "--T",
            "50",
        ],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let csv = std::fs::read_to_string(dir.path().join("growth.csv")).unwrap();
    assert!(csv.starts_with("cov_idx,t,ratio\n"));
}

#[test]
fn filiform_example() {
    let dir = tempfile::tempdir().unwrap();
    let o = escapelab(
        &["example", "filiform", "--s", "3", "--m-max", "2", "--T", "20"],
        dir.path(),
    );
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("max residual"));
    assert!(code(&o) <= 1);
}
