use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const ORIGIN: &str = r#"
[domain]
half_width = 1.0
n_interior = 65

[operator]
s = 0.4

[nonlinearity]
family = "origin-oscillatory"
alpha = 0.5
beta = 1.0
a = 0.5

[construction]
kind = "origin-power"
lambda = 0.0
p = 0.5
lambda0 = 0.1

[ladder]
depth = 3
search_range = [1e-3, 0.3]
"#;

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn fraclad(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fraclad")).args(args).output().unwrap()
}

fn run(cmd: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![cmd, "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    fraclad(&args)
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn assemble_check_passes_and_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "run.toml", ORIGIN);
    let out = dir.path().join("out");
    let o = run("assemble-check", &cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report = std::fs::read_to_string(out.join("assemble_check.json")).unwrap();
    assert!(report.contains("\"passed\": true"));
}

#[test]
fn order_out_of_range_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "run.toml", &ORIGIN.replace("s = 0.4", "s = 1.5"));
    let out = dir.path().join("out");
    let o = run("assemble-check", &cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("config error"), "{}", stderr(&o));
    assert!(!out.exists());
}

#[test]
fn unknown_keys_and_missing_files_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "run.toml", &ORIGIN.replace("depth = 3", "depth = 3\ndepht = 3"));
    let out = dir.path().join("out");
    assert_eq!(run("ladder", &cfg, &out, &[]).status.code(), Some(2));
    let missing = dir.path().join("nope.toml");
    assert_eq!(run("ladder", &missing, &out, &[]).status.code(), Some(2));
    assert_eq!(fraclad(&["ladder"]).status.code(), Some(2));
}

#[test]
fn ladder_writes_artifacts_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "run.toml", ORIGIN);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let o = run("ladder", &cfg, &a, &["--seed", "7"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(run("ladder", &cfg, &b, &["--seed", "7"]).status.code(), Some(0));

    let summary = std::fs::read(a.join("summary.csv")).unwrap();
    assert_eq!(summary, std::fs::read(b.join("summary.csv")).unwrap());
    let text = String::from_utf8(summary).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 4);
    assert!(lines[0].starts_with("k,delta,eta,energy,"));

    let energies: Vec<f64> = lines[1..]
        .iter()
        .map(|l| l.split(',').nth(3).unwrap().parse().unwrap())
        .collect();
    assert!(energies[0] < energies[1] && energies[1] < energies[2] && energies[2] < 0.0);

    for k in 1..=3 {
        let sol = std::fs::read_to_string(a.join(format!("solution_k{k}.csv"))).unwrap();
        let rows: Vec<&str> = sol.lines().collect();
        assert_eq!(rows[0], "x,u");
        assert_eq!(rows.len(), 1 + 67);
        assert_eq!(rows[1], "-1.0,0.0");
        assert_eq!(rows[67], "1.0,0.0");
    }
    assert!(std::fs::read_to_string(a.join("result.json")).unwrap().contains("\"verdicts\""));
}

#[test]
fn exhausted_ladder_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "run.toml", &ORIGIN.replace("a = 0.5", "a = 1.5"));
    let o = run("ladder", &cfg, &dir.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("ladder exhausted: found 0 of 3"), "{}", stderr(&o));
}

#[test]
fn sweep_flags_points_outside_the_window_without_failing() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "run.toml", ORIGIN);
    let out = dir.path().join("out");
    let o = run("sweep", &cfg, &out, &["--lambda-list", "-1w,0,0.5w,0.05"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    let rows: Vec<Vec<&str>> = csv.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[1][0], "0.0");
    for r in &rows[..3] {
        assert_eq!((r[1], r[2], r[5]), ("3", "true", "true"));
    }
    assert_eq!(rows[3][5], "false");
    let window = std::fs::read_to_string(out.join("window.json")).unwrap();
    assert!(window.contains("\"lambda_tilde\""));
}

#[test]
fn bad_lambda_list_is_an_argument_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "run.toml", ORIGIN);
    let o = run("sweep", &cfg, &dir.path().join("out"), &["--lambda-list", "0,x"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn verify_passes_with_loosened_tolerance() {
    let dir = tempfile::tempdir().unwrap();
    for (name, text) in [
        ("default.toml", ORIGIN.to_string()),
        ("loose.toml", format!("{ORIGIN}\n[solver]\ntol = 1e-2\n")),
    ] {
        let cfg = write_config(dir.path(), name, &text);
        let out = dir.path().join(format!("{name}.out"));
        let o = run("verify", &cfg, &out, &[]);
        assert_eq!(
            o.status.code(),
            Some(0),
            "{name}: {}",
            String::from_utf8_lossy(&o.stdout)
        );
        let report = std::fs::read_to_string(out.join("verify.json")).unwrap();
        assert!(report.contains("\"passed\": true"));
    }
}
