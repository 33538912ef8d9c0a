use std::fs;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_powerlaw-fem"))
}

#[test]
fn solve_writes_outputs_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["solve", "--levels", "2", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("converged in"), "{stdout}");
    let log = fs::read_to_string(dir.path().join("iterations.csv")).unwrap();
    assert_eq!(
        log.lines().next(),
        Some("iter,residual,nu_min,nu_max,s_php")
    );
    let vtk = fs::read_to_string(dir.path().join("solution.vtk")).unwrap();
    // levels = 2 on the default n = 2 grid: a 4x4 macro mesh
    assert!(vtk.contains("POINTS 81 double"));
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "# shear thickening\nr = 2\nlevels = 3\nn = 1\n").unwrap();
    let out = bin()
        .args(["convergence", "--r", "2.5", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(matches!(out.status.code(), Some(0 | 1)));
    let csv = fs::read_to_string(dir.path().join("convergence.csv")).unwrap();
    assert!(csv.contains("# r = 2.5000000000000000e0"), "{csv}");
    let header = csv.lines().find(|l| !l.starts_with('#')).unwrap();
    assert_eq!(
        header,
        "level,h,err_u_w1r,err_u_l2rt,err_p_lrt,s_php,max_div_l,order_u_w1r,order_u_l2rt,order_p_lrt,status"
    );
    assert_eq!(csv.lines().filter(|l| !l.starts_with('#')).count(), 4);
}

#[test]
fn inadmissible_exponent_is_a_usage_error() {
    let out = bin().args(["solve", "--r", "1.0"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("r must exceed 2d/(d+2) = 1"));
}

#[test]
fn bad_usage_exits_two() {
    assert_eq!(bin().output().unwrap().status.code(), Some(2));
    assert_eq!(bin().arg("plot").output().unwrap().status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "r = 2\nmesh = fine\n").unwrap();
    let out = bin()
        .arg("verify")
        .arg("--config")
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 2") && err.contains("mesh"), "{err}");
    let out = bin()
        .args(["verify", "--config", "/nonexistent/run.cfg"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/nonexistent/run.cfg"));
}

#[test]
fn verify_reports_every_check() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "n = 4\nlevels = 2\n").unwrap();
    let out = bin()
        .arg("verify")
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    let stdout = String::from_utf8_lossy(&out.stdout);
    let failed = stdout.lines().filter(|l| l.starts_with("FAIL")).count();
    assert_eq!(
        out.status.code(),
        Some(if failed == 0 { 0 } else { 1 }),
        "{stdout}"
    );
    let csv = fs::read_to_string(dir.path().join("checks.csv")).unwrap();
    assert_eq!(
        csv.lines().next(),
        Some("check,value,threshold,passed,detail")
    );
    assert_eq!(
        csv.lines().count() - 1,
        stdout
            .lines()
            .filter(|l| l.starts_with("PASS") || l.starts_with("FAIL"))
            .count()
    );
}
