use std::path::Path;
use std::process::{Command, Output};

fn ecfnorm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ecfnorm"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn write_csv(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.display().to_string()
}

#[test]
fn help_and_version_succeed() {
    for args in [&["--help"][..], &["--version"], &["power", "--help"]] {
        let o = ecfnorm(args);
        assert_eq!(o.status.code(), Some(0), "{args:?}");
        assert!(!stdout(&o).is_empty());
    }
}

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(ecfnorm(&[]).status.code(), Some(1));
    assert_eq!(ecfnorm(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(
        ecfnorm(&["critvals", "--d", "1", "--n", "x", "--a", "1"])
            .status
            .code(),
        Some(1)
    );
    let o = ecfnorm(&["test", "--input", "/no/such/file.csv"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("/no/such/file.csv"));
}

#[test]
fn data_errors_exit_with_one_and_name_the_cell() {
    let dir = tempfile::tempdir().unwrap();
    let ragged = write_csv(dir.path(), "r.csv", "1,2\n3,4\n5\n");
    let o = ecfnorm(&["test", "--input", &ragged]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("row 3"), "{}", stderr(&o));
    let small = write_csv(dir.path(), "s.csv", "1,2\n3,4\n");
    let o = ecfnorm(&["test", "--input", &small]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("n must exceed d"));
}

#[test]
fn singular_covariance_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_csv(dir.path(), "c.csv", "1,2\n2,4\n3,6\n4,8\n");
    let o = ecfnorm(&["test", "--input", &path, "--reps", "1000"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("singular"));
}

#[test]
fn test_command_reports_json_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let rows: String = (0..30)
        .map(|i| format!("{},{}\n", (i as f64).sin(), (i as f64 * 0.37).cos()))
        .collect();
    let path = write_csv(dir.path(), "x.csv", &format!("x,y\n{rows}"));
    let o = ecfnorm(&["test", "--input", &path, "--reps", "1000", "--seed", "5"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    for key in [
        "input",
        "n",
        "d",
        "a",
        "alpha",
        "reps",
        "seed",
        "u",
        "u_scaled",
        "critical_value",
        "p_value",
        "decision",
    ] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    assert_eq!(v["n"], 30);
    let o = ecfnorm(&[
        "test", "--input", &path, "--reps", "1000", "--format", "csv",
    ]);
    assert_eq!(stdout(&o).lines().count(), 2);
}

#[test]
fn output_flag_writes_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("crit.csv");
    let o = ecfnorm(&[
        "critvals",
        "--d",
        "2",
        "--n",
        "12",
        "--a",
        "0.5,1",
        "--reps",
        "1000",
        "--format",
        "csv",
        "-o",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).is_empty());
    let text = std::fs::read_to_string(out).unwrap();
    assert_eq!(text.lines().next(), Some("d,n,a,alpha,reps,seed,quantile"));
    assert_eq!(text.lines().count(), 3);
}

#[test]
fn power_command_checks_the_alternative() {
    let o = ecfnorm(&[
        "power", "--alt", "Nope(1)", "--d", "1", "--n", "20", "--a", "1",
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("supported labels"));
    let o = ecfnorm(&["power", "--alt", "t3", "--d", "2", "--n", "20", "--a", "1"]);
    assert_eq!(o.status.code(), Some(1));
    let o = ecfnorm(&[
        "power",
        "--alt",
        "NMix(0.5,1,4)",
        "--d",
        "1",
        "--n",
        "20",
        "--a",
        "0.5,1",
        "--reps",
        "1000",
        "--critval-reps",
        "1000",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.starts_with("family,params,d,n,a,alpha,reps,seed,power,se\n"));
    assert_eq!(out.lines().count(), 3);
}

#[test]
fn power_command_uses_a_critical_value_cache() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("crit.json");
    let args = [
        "power",
        "--alt",
        "L1(0,1)",
        "--d",
        "1",
        "--n",
        "20",
        "--a",
        "1",
        "--reps",
        "1000",
        "--critval-reps",
        "1000",
        "--critvals",
        cache.to_str().unwrap(),
    ];
    let first = ecfnorm(&args);
    assert_eq!(first.status.code(), Some(0), "{}", stderr(&first));
    assert!(cache.exists());
    let second = ecfnorm(&args);
    assert_eq!(stdout(&first), stdout(&second));
}

#[test]
fn limit_and_oracle_commands() {
    let o = ecfnorm(&[
        "limit",
        "--d",
        "1",
        "--a",
        "1",
        "--m",
        "200",
        "--sims",
        "10000",
        "--nodes",
        "gauss-hermite",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["nodes"], "gauss-hermite");
    assert_eq!(v["quantiles"].as_array().unwrap().len(), 3);
    assert_eq!(
        ecfnorm(&["limit", "--d", "1", "--a", "1", "--m", "100"])
            .status
            .code(),
        Some(1)
    );

    let o = ecfnorm(&[
        "oracle-check",
        "--d",
        "2",
        "--n",
        "8",
        "--a",
        "0.5,1,2",
        "--format",
        "csv",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(stdout(&o).lines().count(), 4);
    assert_eq!(
        ecfnorm(&["oracle-check", "--d", "5", "--n", "8", "--a", "1"])
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn worker_count_does_not_change_output() {
    let args = |w: &'static str| {
        [
            "--workers",
            w,
            "critvals",
            "--d",
            "1",
            "--n",
            "10",
            "--a",
            "0.25,1,4",
            "--reps",
            "2000",
            "--seed",
            "9",
        ]
    };
    assert_eq!(stdout(&ecfnorm(&args("1"))), stdout(&ecfnorm(&args("4"))));
}
