use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_wdro"))
}

fn bundled() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/ref1d.toml")
}

fn tiny(radius: f64, extra: &str) -> String {
    format!(
        r#"
[experiment]
horizon = 12
radius = {radius}

[[loss.pieces]]
kind = "separable"
decision = {{ kind = "abs_deviation", scale = 1.0, center = [0.5] }}
sample = {{ kind = "cone", height = 0.0, slope = 1.0, center = [1.0] }}

[[loss.pieces]]
kind = "separable"
decision = {{ kind = "affine", slope = [0.5], offset = 0.0 }}
sample = {{ kind = "hyperbolic", height = 0.0, slope = 1.0, center = [-1.0] }}

[space]
kind = "box"
lower = [-1.0]
upper = [1.0]

[tolerance]
delta = 0.001

[stream]
family = "uniform"
seed = 11
lower = [-1.5]
upper = [1.5]

[comparator]
kind = "fixed"
x = [0.0]
{extra}
"#
    )
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("exp.toml");
    fs::write(&p, text).unwrap();
    p
}

fn run_ok(out: Output) -> Output {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn error_record(out: &Output) -> serde_json::Value {
    let text = String::from_utf8_lossy(&out.stderr);
    serde_json::from_str(text.lines().last().unwrap()).unwrap()
}

#[test]
fn bundled_config_writes_full_trace() {
    let tmp = tempfile::tempdir().unwrap();
    run_ok(bin().args(["run", "--quiet", "--out"]).arg(tmp.path()).arg("--config").arg(bundled()).output().unwrap());
    let trace = fs::read_to_string(tmp.path().join("trace.csv")).unwrap();
    let mut lines = trace.lines();
    assert!(lines.next().unwrap().starts_with("t,x_0,loss_value,comparator_value,oracle_value,budget_total"));
    assert_eq!(lines.count(), 200);
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["rounds"], 200);
    assert!(summary["gap"]["gap"].is_f64());
}

#[test]
fn identical_seed_gives_identical_trace() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &tiny(0.3, ""));
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for d in [&a, &b] {
        run_ok(bin().args(["run", "--quiet", "--seed", "5", "--config"]).arg(&cfg).arg("--out").arg(d).output().unwrap());
    }
    let ta = fs::read(a.join("trace.csv")).unwrap();
    assert_eq!(ta, fs::read(b.join("trace.csv")).unwrap());
    let c = tmp.path().join("c");
    run_ok(bin().args(["run", "--quiet", "--seed", "6", "--config"]).arg(&cfg).arg("--out").arg(&c).output().unwrap());
    assert_ne!(ta, fs::read(c.join("trace.csv")).unwrap());
}

#[test]
fn budget_stays_within_radius() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &tiny(0.3, ""));
    run_ok(bin().args(["run", "--quiet", "--config"]).arg(&cfg).arg("--out").arg(tmp.path()).output().unwrap());
    let trace = fs::read_to_string(tmp.path().join("trace.csv")).unwrap();
    // η_b = δ_eval / lip = 5e-4.
    for line in trace.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let t: f64 = f[0].parse().unwrap();
        let b: f64 = f[5].parse().unwrap();
        assert!(b <= 0.3 * t + t * 5e-4, "{line}");
    }
}

#[test]
fn negative_radius_exits_with_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &tiny(-0.1, ""));
    let out = bin().args(["run", "--config"]).arg(&cfg).arg("--out").arg(tmp.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let rec = error_record(&out);
    assert_eq!(rec["error"], "config");
    assert_eq!(rec["exit_code"], 2);
}

#[test]
fn validation_report_is_within_bound() {
    let tmp = tempfile::tempdir().unwrap();
    let extra = "[validation]\nenabled = true\nrounds = 4\ngrid = { alpha = 200, budget = 200, angles = 200 }\n";
    let cfg = write_config(tmp.path(), &tiny(0.5, extra));
    run_ok(bin().args(["validate", "--quiet", "--config"]).arg(&cfg).arg("--out").arg(tmp.path()).output().unwrap());
    let rep: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("validation.json")).unwrap()).unwrap();
    let rows = rep["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 4);
    for r in rows {
        assert!(r["deviation"].as_f64().unwrap() <= r["bound"].as_f64().unwrap(), "{r}");
    }
    assert_eq!(rep["all_within_bound"], true);
}

#[test]
fn scale_guard_exits_with_code_three() {
    let tmp = tempfile::tempdir().unwrap();
    let text = tiny(0.5, "[validation]\nenabled = true\nrounds = 4\n")
        .replace("center = [1.0]", "center = [1.0, 0.0, 0.0]")
        .replace("center = [-1.0]", "center = [-1.0, 0.0, 0.0]")
        .replace("lower = [-1.5]\nupper = [1.5]", "lower = [-1.5, -1.5, -1.5]\nupper = [1.5, 1.5, 1.5]");
    let cfg = write_config(tmp.path(), &text);
    let out = bin().args(["validate", "--config"]).arg(&cfg).arg("--out").arg(tmp.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(error_record(&out)["error"], "scale");
}

#[test]
fn w1_and_oracle_verbs() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a.txt");
    let b = tmp.path().join("b.txt");
    fs::write(&a, "0\n1\n").unwrap();
    fs::write(&b, "# weighted\n0.5 1.0\n").unwrap();
    let out = run_ok(bin().arg("w1").arg(&a).arg(&b).output().unwrap());
    let d: f64 = String::from_utf8_lossy(&out.stdout).trim().parse().unwrap();
    assert!((d - 0.5).abs() < 1e-12);

    let cfg = write_config(tmp.path(), &tiny(0.0, ""));
    let out = run_ok(
        bin().args(["oracle", "--config"]).arg(&cfg).arg("--samples").arg(&a).args(["--x", "0.5"]).output().unwrap(),
    );
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    // Zero radius: the empirical mean of max(|x − 0.5| − |ξ − 1|, 0.5x − √(1 + (ξ + 1)²)).
    let l0 = f64::max(-1.0, 0.25 - 2f64.sqrt());
    let l1 = f64::max(0.0, 0.25 - 5f64.sqrt());
    assert!((doc["value"].as_f64().unwrap() - 0.5 * (l0 + l1)).abs() < 1e-12, "{doc}");

    let missing = bin().args(["w1"]).arg(tmp.path().join("nope")).arg(&b).output().unwrap();
    assert_eq!(missing.status.code(), Some(2));
}
