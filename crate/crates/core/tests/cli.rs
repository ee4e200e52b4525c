use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_phia");

fn fig1_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios/fig1.toml")
}

fn phia(args: &[&str]) -> Output {
    Command::new(BIN).args(args).env("PHIA_LOG", "off").output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn validate_bundled_scenario() {
    let path = fig1_path();
    let a = phia(&["validate", path.to_str().unwrap()]);
    assert_eq!(a.status.code(), Some(0), "{}", stderr(&a));
    assert!(stdout(&a).contains("valid"));
    assert!(stdout(&a).contains("selected V_d variant: tan"));
    let b = phia(&["validate", path.to_str().unwrap()]);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn validate_reports_parse_and_semantic_errors() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(fig1_path()).unwrap();

    let truncated = dir.path().join("truncated.toml");
    fs::write(&truncated, &text[..text.find("[controller]").unwrap() + 5]).unwrap();
    assert_eq!(phia(&["validate", truncated.to_str().unwrap()]).status.code(), Some(2));

    let path = fig1_path();
    let wrong = phia(&["validate", path.to_str().unwrap(), "--set", "controller.k_i=[[1.0, 0.0], [0.0, 1.0]]"]);
    assert_eq!(wrong.status.code(), Some(3));
    assert!(stderr(&wrong).contains("controller.k_i"), "{}", stderr(&wrong));

    let short_q = phia(&["validate", path.to_str().unwrap(), "--set", "initial_state.q=[0.0]"]);
    assert_eq!(short_q.status.code(), Some(3));
    assert!(stderr(&short_q).contains("initial_state.q"));

    let missing = dir.path().join("absent.toml");
    assert_eq!(phia(&["validate", missing.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn run_writes_full_grid_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let path = fig1_path();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = phia(&["run", path.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        assert!(stdout(&o).contains("samples: 60001"));
    }
    let csv_a = fs::read(a.join("fig1.csv")).unwrap();
    assert_eq!(csv_a.iter().filter(|&&c| c == b'\n').count(), 60002);
    assert_eq!(csv_a, fs::read(b.join("fig1.csv")).unwrap());
    assert_eq!(fs::read(a.join("fig1.gp")).unwrap(), fs::read(b.join("fig1.gp")).unwrap());
}

#[test]
fn undisturbed_run_settles_and_stays() {
    let dir = tempfile::tempdir().unwrap();
    let path = fig1_path();
    let o = phia(&["run", path.to_str().unwrap(), "--set", "disturbance=none", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    let line = text.lines().find(|l| l.starts_with("segment [0, 60]")).expect("single segment summary");
    assert!(line.contains("no later deviation"), "{line}");
    let settled: f64 = line.split("settled at t = ").nth(1).unwrap().split(',').next().unwrap().parse().unwrap();
    assert!(settled < 30.0);
}

#[test]
fn failed_output_leaves_no_partial_files() {
    let dir = tempfile::tempdir().unwrap();
    let path = fig1_path();
    let o = phia(&[
        "run",
        path.to_str().unwrap(),
        "--set",
        "integrator.t_final=1.0",
        "--set",
        "outputs.gnuplot=\"missing-dir/fig1.gp\"",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_ne!(o.status.code(), Some(0));
    assert!(!dir.path().join("fig1.csv").exists());
}

#[test]
fn verify_suites() {
    let o = phia(&["verify", "transform", "--seed", "7"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("push-forward"));
    let m = phia(&["verify", "matching"]);
    assert_eq!(m.status.code(), Some(0));
    assert!(stdout(&m).contains("closed-loop-matching"));
    let all = phia(&["verify", "all", "--seed", "3"]);
    assert_eq!(all.status.code(), Some(0));
    assert_eq!(all.stdout, phia(&["verify", "all", "--seed", "3"]).stdout);
    for name in ["push-forward", "closed-loop-matching", "W-monotone-along-rk4"] {
        assert!(stdout(&all).contains(name));
    }
    assert_ne!(phia(&["verify", "bogus"]).status.code(), Some(0));
}
