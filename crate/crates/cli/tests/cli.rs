use std::path::Path;
use std::process::{Command, Output};

fn hiso(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hiso"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn lemma1_command_exits_zero_with_statistics() {
    let out = hiso(&["lemma1", "--instances", "1000"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("1000 instances"), "{text}");
    assert!(text.contains("violations 0"), "{text}");
}

#[test]
fn graph_print_shows_fig1_laplacian() {
    let out = hiso(&["graph", "--name", "fig1", "--print"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    for row in [
        "[   4   -1   -1   -1   -1 ]",
        "[  -1    2   -1    0    0 ]",
        "[  -1   -1    3    0   -1 ]",
        "[  -1    0    0    2   -1 ]",
        "[  -1    0   -1   -1    3 ]",
    ] {
        assert!(text.contains(row), "missing {row} in\n{text}");
    }
}

#[test]
fn missing_config_exits_two() {
    let out = hiso(&["run", "--config", "missing.cfg"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn malformed_config_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.cfg");
    std::fs::write(&path, "[solver]\nstep = fast\n").unwrap();
    let out = hiso(&["run", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
}

#[test]
fn unknown_graph_exits_two() {
    assert_eq!(hiso(&["graph", "--name", "hypercube"]).status.code(), Some(2));
}

#[test]
fn failed_assertion_exits_one() {
    // Stepsize large enough that HISO and the high-gain GD both diverge.
    let out = hiso(&["quartic", "--step", "0.5"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout(&out).contains("[FAIL]"));
}

#[test]
fn identity_quadratic_config_runs_and_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("id.cfg");
    std::fs::write(
        &cfg,
        "name = identity\nhorizon = 20\n[graph]\nname = fig1\n[cost]\nfamily = quadratic\n\
         centers = 0, 1; 1, 0; 2, 2; -1, 3; 0, 0\n[solver]\nstep = 0.01\ntarget_gap = 1e-3\n",
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let out = hiso(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    let text = stdout(&out);
    assert!(text.contains("experiment identity"), "{text}");
    for file in ["dhiso.csv", "dgd2.csv", "summary.txt", "gap.svg"] {
        assert!(Path::new(&out_dir).join(file).exists(), "{file} not written");
    }
    // Identical dynamics: the strict ordering cannot hold, so the run reports a failure.
    let dhiso = std::fs::read(out_dir.join("dhiso.csv")).unwrap();
    let dgd2 = std::fs::read(out_dir.join("dgd2.csv")).unwrap();
    assert_eq!(dhiso, dgd2);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn shipped_example_config_parses() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/logreg.cfg");
    let text = std::fs::read_to_string(&path).unwrap();
    let cfg = hiso_core::io::parse_config(&text).expect("example config parses");
    let mut expected = hiso_core::experiments::ExperimentConfig::logreg_default();
    expected.out_dir = Some("out/logreg".into());
    assert_eq!(cfg, expected);
}

#[test]
fn shipped_quartic_config_matches_defaults() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/quartic.cfg");
    let cfg = hiso_core::io::read_config(&path).expect("example config parses");
    assert_eq!(cfg, hiso_core::experiments::ExperimentConfig::quartic_default());
}
