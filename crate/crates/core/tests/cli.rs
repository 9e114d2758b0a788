use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use chemotaxis::cli::RunConfig;
use chemotaxis::grid::Grid;
use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_chemotaxis"));
    c.env("CHEMO_THREADS", "1");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// A canonical-shaped config small enough for debug-speed runs.
fn small_config(dir: &Path) -> PathBuf {
    let mut cfg = RunConfig::canonical();
    cfg.grid = Grid::rect(16, 16, 1.0, 1.0).unwrap();
    cfg.t_end = 0.2;
    cfg.solver.max_dt = 4e-3;
    cfg.output_times = vec![0.1];
    cfg.quadrature_every = 0.05;
    cfg.test_functions = 5;
    cfg.levels = 2;
    cfg.probe_trials = 20;
    cfg.sweep_eps = vec![0.5, 0.25];
    let path = dir.join("small.cfg");
    fs::write(&path, cfg.to_text()).unwrap();
    path
}

#[test]
fn simulate_manifest_reruns_identically() {
    let tmp = TempDir::new().unwrap();
    let cfg = small_config(tmp.path());
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let first = run(&["simulate", "--config", path_str(&cfg), "--out", path_str(&a)]);
    assert_eq!(
        first.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&first.stdout)
    );
    for f in [
        "manifest.cfg",
        "diagnostics.csv",
        "estimates.csv",
        "fields_0.csv",
        "fields_0.1.csv",
        "fields_0.2.csv",
    ] {
        assert!(a.join(f).exists(), "missing {f}");
    }
    let manifest = a.join("manifest.cfg");
    let second = run(&["simulate", "--config", path_str(&manifest), "--out", path_str(&b)]);
    assert_eq!(second.status.code(), Some(0));
    for f in ["diagnostics.csv", "estimates.csv", "fields_0.1.csv", "fields_0.2.csv"] {
        assert_eq!(
            fs::read(a.join(f)).unwrap(),
            fs::read(b.join(f)).unwrap(),
            "{f} differs"
        );
    }
    let header = fs::read_to_string(a.join("estimates.csv")).unwrap();
    assert!(header.starts_with("name,case,value,bound,slack,tol,pass,note"));
}

#[test]
fn invalid_config_exits_with_the_field_named() {
    let tmp = TempDir::new().unwrap();
    let cfg = small_config(tmp.path());
    let text = fs::read_to_string(&cfg)
        .unwrap()
        .replace("model.theta = 2", "model.theta = 0.9");
    fs::write(&cfg, text).unwrap();
    let out = run(&["simulate", "--config", path_str(&cfg), "--out", path_str(tmp.path())]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("model.theta"));

    let missing = run(&["simulate", "--config", path_str(&tmp.path().join("nope.cfg"))]);
    assert_eq!(missing.status.code(), Some(2));
    let levels = run(&[
        "certify",
        "--config",
        path_str(&small_config(tmp.path())),
        "--levels",
        "1",
    ]);
    assert_eq!(levels.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&levels.stderr).contains("levels"));
}

#[test]
fn verify_identities_passes_and_writes_rows() {
    let tmp = TempDir::new().unwrap();
    let out = run(&["verify-identities", "--out", path_str(tmp.path())]);
    assert_eq!(out.status.code(), Some(0));
    let csv = fs::read_to_string(tmp.path().join("identities.csv")).unwrap();
    assert!(csv.contains("cross_gradient_coefficient_printed"));

    let single = run(&["verify-identities", "--p", "1", "--k", "2", "--samples", "10"]);
    assert_eq!(single.status.code(), Some(0));
    let below = run(&["verify-identities", "--p", "1", "--k", "0.1"]);
    assert_eq!(below.status.code(), Some(2));
    let zero = run(&["verify-identities", "--samples", "0"]);
    assert_eq!(zero.status.code(), Some(2));
}

#[test]
fn sweep_certify_and_refine_write_their_tables() {
    let tmp = TempDir::new().unwrap();
    let cfg = small_config(tmp.path());
    let dir = tmp.path().join("sweep");
    let sweep = run(&["sweep", "--config", path_str(&cfg), "--out", path_str(&dir)]);
    assert!(matches!(sweep.status.code(), Some(0 | 1)));
    let table = fs::read_to_string(dir.join("sweep.csv")).unwrap();
    assert_eq!(table.lines().count(), 3);
    assert!(table.starts_with("eps,gap_u,gap_v,gap_w"));
    assert!(dir.join("estimates.csv").exists());

    let dir = tmp.path().join("certify");
    let certify = run(&["certify", "--config", path_str(&cfg), "--out", path_str(&dir)]);
    assert!(matches!(certify.status.code(), Some(0 | 1)));
    let table = fs::read_to_string(dir.join("certificates.csv")).unwrap();
    assert!(table.contains("weak_form_w_order"));

    let dir = tmp.path().join("refine");
    let refine = run(&["refine", "--config", path_str(&cfg), "--out", path_str(&dir)]);
    assert!(matches!(refine.status.code(), Some(0 | 1)));
    let table = fs::read_to_string(dir.join("refine.csv")).unwrap();
    assert!(table.starts_with("level,cells,h,dt,quantity,value,note"));
    assert!(table.contains("order_u"));
}

#[test]
fn seed_override_changes_only_seeded_output() {
    let tmp = TempDir::new().unwrap();
    let cfg = small_config(tmp.path());
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(run(&["simulate", "--config", path_str(&cfg), "--out", path_str(&a)])
        .status
        .success());
    assert!(run(&[
        "simulate",
        "--config",
        path_str(&cfg),
        "--out",
        path_str(&b),
        "--seed",
        "9"
    ])
    .status
    .success());
    assert_eq!(
        fs::read(a.join("diagnostics.csv")).unwrap(),
        fs::read(b.join("diagnostics.csv")).unwrap()
    );
    assert!(fs::read_to_string(b.join("manifest.cfg"))
        .unwrap()
        .contains("run.seed = 9"));
}
