use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_superliouville"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn census_genus_two() {
    let o = run(&["census", "--genus", "2"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("total") && text.contains("16"), "{text}");
    assert!(text.contains("even 10, odd 6"), "{text}");

    let o = run(&["census", "--genus", "4", "--class", "non_hyperelliptic_g4_typeI", "--format", "csv"]);
    assert!(o.status.success());
    let counts: Vec<u64> = stdout(&o).lines().skip(1).map(|l| l.split(',').nth(4).unwrap().parse().unwrap()).collect();
    assert_eq!(counts, vec![120, 1, 135]);

    assert_eq!(run(&["census", "--genus", "17"]).status.code(), Some(2));
    assert_eq!(run(&["census", "--genus", "5", "--class", "non_hyperelliptic_g3"]).status.code(), Some(2));
}

#[test]
fn spectrum_csv_export() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("spectrum.csv");
    let o = run(&["spectrum", "--grid", "8", "--out", path.to_str().unwrap()]);
    assert!(o.status.success());
    let csv = std::fs::read_to_string(&path).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "j,lambda,k1,k2");
    assert_eq!(lines.len() - 1, 2 * 64);
    let mut lambdas: Vec<f64> = lines[1..].iter().map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    let sum: f64 = lambdas.iter().sum();
    assert!(sum.abs() < 1e-9);
    lambdas.sort_by(f64::total_cmp);
    assert_eq!(lambdas[64], 0.5);
}

#[test]
fn mt_probe_prints_json() {
    let o = run(&["mt-probe", "--grid", "16", "--samples", "100"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v["fitted_c"].as_f64().unwrap().is_finite());
}

fn solve_into(dir: &Path, rho: &str) -> Output {
    run(&[
        "solve",
        "--rho",
        rho,
        "--grid",
        "16",
        "--out",
        dir.to_str().unwrap(),
        "--set",
        "theta_samples=100",
    ])
}

#[test]
fn solve_below_first_eigenvalue_is_deterministic_and_checkable() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("run");
    let o = solve_into(&dir, "0.25");
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let first = std::fs::read(dir.join("report.json")).unwrap();
    let report: serde_json::Value = serde_json::from_slice(&first).unwrap();
    let sol = &report["solution"];
    assert!(sol["level"].as_f64().unwrap() > sol["vol"].as_f64().unwrap());
    assert!(sol["residual"].as_f64().unwrap() < 1e-8);
    assert_eq!(report["manifest"]["rho"], "0.25");
    assert!(report["version"].as_str().unwrap().starts_with("superliouville "));
    for f in ["u.slfd", "psi.slfd", "trace.jsonl"] {
        assert!(dir.join(f).exists(), "{f}");
    }
    let trace = std::fs::read_to_string(dir.join("trace.jsonl")).unwrap();
    for line in trace.lines() {
        let _: serde_json::Value = serde_json::from_str(line).unwrap();
    }

    let o = solve_into(&dir, "0.25");
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(std::fs::read(dir.join("report.json")).unwrap(), first);

    let o = run(&["nehari-check", dir.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let check: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(check["certified"], true);
    assert!(check["residual_u"].as_f64().unwrap() < 1e-8);
}

#[test]
fn infeasible_and_bad_input_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let o = solve_into(&tmp.path().join("res"), "0.5");
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("gap_tol"));

    let o = run(&["solve", "--rho", "0.25", "--regime", "link", "--grid", "16", "--out", tmp.path().join("reg").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));

    let cfg = tmp.path().join("bad.cfg");
    std::fs::write(&cfg, "rho=0.3\nN1=7\n").unwrap();
    let o = run(&["solve", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));
}

#[test]
fn print_config_round_trips() {
    let o = run(&["solve", "--rho", "0.3", "--grid", "16", "--print-config"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let cfg = superliouville::runner::parse_config(&text).unwrap();
    assert_eq!(superliouville::runner::emit_config(&cfg), text);
    assert_eq!(cfg.n1, 16);
}
