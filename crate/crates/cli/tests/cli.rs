use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn config(name: &str) -> PathBuf {
    [env!("CARGO_MANIFEST_DIR"), "..", "..", "configs", name]
        .iter()
        .collect()
}

fn netdiff(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_netdiff"))
        .args(args)
        .env("NETDIFF_THREADS", "1")
        .output()
        .expect("spawn netdiff")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn field<'a>(out: &'a str, key: &str) -> &'a str {
    out.lines()
        .find_map(|l| l.strip_prefix(key).and_then(|r| r.strip_prefix(": ")))
        .unwrap_or_else(|| panic!("no '{key}' in\n{out}"))
}

fn run_into(cfg: &Path, dir: &Path, extra: &[&str]) -> Output {
    let mut args = vec![
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    netdiff(&args)
}

#[test]
fn check_reports_counts() {
    let o = netdiff(&[
        "check",
        "--config",
        config("figure1.json").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{o:?}");
    let out = stdout(&o);
    assert_eq!(field(&out, "subdomains"), "3");
    assert_eq!(field(&out, "edges"), "9");
    assert_eq!(field(&out, "vertices"), "7");
    assert!(out.contains("all assumptions pass"));
}

#[test]
fn run_is_deterministic_and_writes_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for d in [&a, &b] {
        let o = run_into(&config("figure1.json"), d, &[]);
        assert_eq!(o.status.code(), Some(0), "{o:?}");
    }
    let ca = std::fs::read(a.join("diagnostics.csv")).unwrap();
    let cb = std::fs::read(b.join("diagnostics.csv")).unwrap();
    assert_eq!(ca, cb);
    let text = String::from_utf8(ca).unwrap();
    let mut lines = text.lines();
    assert!(lines
        .next()
        .unwrap()
        .starts_with("time,total_mass,X,sup_u,sup_w,energy,z_0"));
    // t_end 0.2 with dt 0.01: the initial row plus 20 steps
    assert_eq!(lines.count(), 21);
    assert!(a.join("summary.json").is_file());
    assert!(a.join("vtk").join("subdomain_0_000000.vtk").is_file());
    assert!(!a.join("PARTIAL_OUTPUT").exists());
}

#[test]
fn override_changes_step_count() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run_into(
        &config("figure1.json"),
        tmp.path(),
        &[
            "--override",
            "discretization.t_end=0.05",
            "--override",
            "outputs.vtk=false",
        ],
    );
    assert_eq!(o.status.code(), Some(0), "{o:?}");
    assert_eq!(field(&stdout(&o), "steps"), "5");
    assert!(!tmp
        .path()
        .join("vtk")
        .join("subdomain_0_000000.vtk")
        .exists());
}

#[test]
fn invalid_config_exits_with_one() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.json");
    let text = std::fs::read_to_string(config("figure1.json")).unwrap();
    std::fs::write(
        &bad,
        text.replacen(
            "\"discretization\": {",
            "\"discretization\": {\"dtt\": 1, ",
            1,
        ),
    )
    .unwrap();
    let o = netdiff(&["check", "--config", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1), "{o:?}");
    assert!(String::from_utf8_lossy(&o.stderr).contains("dtt"));

    let o = netdiff(&[
        "run",
        "--config",
        config("figure1.json").to_str().unwrap(),
        "--override",
        "discretization.dt=-1",
    ]);
    assert_eq!(o.status.code(), Some(1), "{o:?}");

    let o = netdiff(&[
        "check",
        "--config",
        tmp.path().join("missing.json").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1), "{o:?}");
}

#[test]
fn solver_failure_exits_with_two_and_marks_partial() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run_into(
        &config("figure1.json"),
        tmp.path(),
        &[
            "--override",
            "discretization.newton_max_iter=1",
            "--override",
            "discretization.newton_tol=1e-300",
        ],
    );
    assert_eq!(o.status.code(), Some(2), "{o:?}");
    assert!(tmp.path().join("PARTIAL_OUTPUT").is_file());
}

#[test]
fn extinction_report() {
    let tmp = tempfile::tempdir().unwrap();
    let o = netdiff(&[
        "extinction",
        "--config",
        config("extinction.json").to_str().unwrap(),
        "--out",
        tmp.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{o:?}");
    let out = stdout(&o);
    let t: f64 = field(&out, "t_extinct").parse().unwrap();
    assert!(t.is_finite() && t < 10.0);
    let r2: f64 = field(&out, "fit_r_squared").parse().unwrap();
    assert!(r2 >= 0.99);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("extinction.json")).unwrap())
            .unwrap();
    assert_eq!(report["extinct"], serde_json::Value::Bool(true));
}

#[test]
fn mass_report_after_run() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config("mass.json");
    let o = run_into(&cfg, tmp.path(), &["--override", "outputs.vtk=false"]);
    assert_eq!(o.status.code(), Some(0), "{o:?}");
    let o = netdiff(&[
        "mass-report",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        tmp.path().to_str().unwrap(),
        "--override",
        "outputs.vtk=false",
    ]);
    assert_eq!(o.status.code(), Some(0), "{o:?}");
    let out = stdout(&o);
    assert_eq!(field(&out, "rows"), "101");
    assert_eq!(field(&out, "conserved"), "true");
    let drift: f64 = field(&out, "max_rel_drift").parse().unwrap();
    assert!(drift <= 1e-8);
}

#[test]
fn vertex_limit_writes_table() {
    let tmp = tempfile::tempdir().unwrap();
    let o = netdiff(&[
        "vertex-limit",
        "--config",
        config("vertex_limit.json").to_str().unwrap(),
        "--out",
        tmp.path().to_str().unwrap(),
        "--override",
        "deltas=[0.2, 0.1]",
    ]);
    assert_eq!(o.status.code(), Some(0), "{o:?}");
    assert_eq!(field(&stdout(&o), "strictly_decreasing"), "true");
    let csv = std::fs::read_to_string(tmp.path().join("vertex_limit.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
}
