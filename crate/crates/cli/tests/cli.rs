use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn spintau(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spintau"))
        .args(args)
        .env("SPINTAU_OUTPUT_DIR", dir)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn listing(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = fs::read_dir(dir)
        .map(|it| it.map(|e| e.unwrap().file_name().to_string_lossy().into_owned()).collect())
        .unwrap_or_default();
    names.sort();
    names
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn tau_prints_zero_for_odd_forms() {
    let tmp = tempfile::tempdir().unwrap();
    let o = spintau(tmp.path(), &["tau", "--genus", "1", "--form", "1,1"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).trim(), "0");
    let o = spintau(tmp.path(), &["tau", "--genus", "2", "--form", "1,1,1,1"]);
    assert_eq!(stdout(&o).trim(), "3.54491");
    assert!(listing(tmp.path()).is_empty());
}

#[test]
fn enumerate_writes_one_row_per_form() {
    let tmp = tempfile::tempdir().unwrap();
    let o = spintau(tmp.path(), &["enumerate", "--genus", "2"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(listing(tmp.path()), vec!["forms.csv"]);
    let text = fs::read_to_string(tmp.path().join("forms.csv")).unwrap();
    let mut lines = text.lines();
    let meta = lines.next().unwrap();
    assert!(meta.starts_with("# spintau ") && meta.contains("config_sha256="));
    assert_eq!(lines.next().unwrap(), "genus,basis_values,arf,alpha");
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 16);
    assert_eq!(rows.iter().filter(|r| r.ends_with(",-1,1")).count(), 6);
}

#[test]
fn sphere_spectrum_from_the_command_line() {
    let tmp = tempfile::tempdir().unwrap();
    let o = spintau(tmp.path(), &["revolution-spectrum", "--profile", "sphere", "--N", "2048"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(listing(tmp.path()), vec!["estimate.json", "revolution_spectrum.csv"]);
    let e = json(&tmp.path().join("estimate.json"));
    assert!((e["lambda1"].as_f64().unwrap() - 1.0).abs() < 1e-3);
    assert_eq!(e["N"], 2048);
    for key in ["area", "product", "k_max", "flags"] {
        assert!(e.get(key).is_some(), "{key}");
    }
}

#[test]
fn outputs_are_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["flat-spectrum", "--lattice", "1,0,0.3,1.2", "--delta", "0.5,0", "--cutoff", "15"];
    assert!(spintau(a.path(), &args).status.success());
    assert!(spintau(b.path(), &args).status.success());
    for f in ["flat_spectrum.csv", "flat_summary.json"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap());
    }
}

#[test]
fn run_configs_match_direct_flags() {
    let direct = tempfile::tempdir().unwrap();
    let via = tempfile::tempdir().unwrap();
    assert!(spintau(direct.path(), &["enumerate", "--genus", "1"]).status.success());
    let cfg = via.path().join("run.json");
    let out = via.path().join("out");
    fs::write(
        &cfg,
        format!(
            r#"{{"command": "enumerate", "params": {{"genus": 1}}, "output_dir": {:?}}}"#,
            out.to_str().unwrap()
        ),
    )
    .unwrap();
    let o = spintau(via.path(), &["run", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(
        fs::read(direct.path().join("forms.csv")).unwrap(),
        fs::read(out.join("forms.csv")).unwrap()
    );
}

#[test]
fn usage_errors_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.json");
    fs::write(&bad, "{ not json").unwrap();
    let o = spintau(tmp.path(), &["run", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["error"], "usage");

    fs::write(&bad, r#"{"command": "tau", "params": {"form": "1,1", "extra": 1}}"#).unwrap();
    assert_eq!(spintau(tmp.path(), &["run", bad.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(spintau(tmp.path(), &["tau", "--form", "1,0,1"]).status.code(), Some(2));
    assert_eq!(spintau(tmp.path(), &["flat-spectrum", "--delta", "0.25,0"]).status.code(), Some(2));
    assert_eq!(spintau(tmp.path(), &["no-such-command"]).status.code(), Some(2));
}

#[test]
fn numeric_failures_exit_with_one() {
    let tmp = tempfile::tempdir().unwrap();
    let o = spintau(tmp.path(), &["flat-spectrum", "--lattice", "1,2,2,4"]);
    assert_eq!(o.status.code(), Some(1));
    let err: serde_json::Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["error"], "numeric");
    let o = spintau(tmp.path(), &["minimize-lamin", "--delta", "0,0"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn flagged_results_fail_unless_allowed() {
    let tmp = tempfile::tempdir().unwrap();
    let solver = tmp.path().join("solver.json");
    fs::write(&solver, r#"{"max_iters": 2, "N": 256}"#).unwrap();
    let s = solver.to_str().unwrap();
    let out = tmp.path().join("out");
    let o = out.to_str().unwrap();
    let run = spintau(tmp.path(), &["minimize-lamin", "--base", "dumbbell:0.2,1", "--solver", s, "--output-dir", o]);
    assert_eq!(run.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&run.stderr).contains("not_converged"));
    assert_eq!(listing(&out), vec!["factor.csv", "lamin.json", "trajectory.csv"]);
    let allowed = spintau(
        tmp.path(),
        &["minimize-lamin", "--base", "dumbbell:0.2,1", "--solver", s, "--output-dir", o, "--allow-flags"],
    );
    assert_eq!(allowed.status.code(), Some(0));
}

#[test]
fn surgery_demo_writes_table_and_plot() {
    let tmp = tempfile::tempdir().unwrap();
    let o = spintau(tmp.path(), &["surgery-demo", "--necks", "0.3,0.1", "--svg", "--seed", "5"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(listing(tmp.path()), vec!["convergence.csv", "convergence.json", "convergence.svg"]);
    let csv = fs::read_to_string(tmp.path().join("convergence.csv")).unwrap();
    assert_eq!(
        csv.lines().nth(1).unwrap(),
        "neck_param,lambda1,area,product,residual,converged,gap,flagged"
    );
    assert_eq!(csv.lines().count(), 4);
    let table = json(&tmp.path().join("convergence.json"));
    let last = table["rows"][1]["product"].as_f64().unwrap();
    assert!((last - 2.0 * std::f64::consts::PI.sqrt()).abs() < 1e-3);
}

#[test]
fn surgery_algebra_reports_normal_forms() {
    let tmp = tempfile::tempdir().unwrap();
    let o = spintau(tmp.path(), &["surgery-algebra", "--form", "1,1", "--core", "1"]);
    assert_eq!(o.status.code(), Some(0));
    let r = json(&tmp.path().join("surgery.json"));
    assert_eq!(r["operation"], "surgery_0d");
    assert_eq!(r["result"]["genus"], 2);
    assert_eq!(r["result"]["alpha"], 1);
    assert_eq!(r["standard"]["basis_values"], serde_json::json!([0, 0, 1, 1]));
    let o = spintau(tmp.path(), &["arf", "--form", "0,1"]);
    assert_eq!(stdout(&o).lines().next(), Some("arf +1"));
}
