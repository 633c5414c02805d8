use std::path::Path;
use std::process::{Command, Output};

use ringheat::dump::write_dump;
use ringheat::geometry::{make_ring, ConvexBody};
use ringheat::solver::{solve_heat, GridSpec};

const BIN: &str = env!("CARGO_BIN_EXE_ringheat");

fn ringheat(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().unwrap()
}

fn small_config(dir: &Path, checks: &str) -> std::path::PathBuf {
    let text = format!(
        r#"
name = "small"
seed = 7
output = "{}"

[ring]
outer = {{ kind = "ellipse", semi_axes = [1.2, 0.8] }}
inner = {{ kind = "disk", center = [0.1, 0.05], radius = 0.3 }}

[grid]
h = 0.05
dt = 0.005
t_final = 0.3

{checks}
"#,
        dir.join("out").display()
    );
    let path = dir.join("config.toml");
    std::fs::write(&path, text).unwrap();
    path
}

const PASSING: &str = r#"
[[checks]]
check = "monotonicity"
budget = 2000

[[checks]]
check = "borell"
budget = 2000

[[checks]]
check = "parabolic_convexity"
levels = [0.5]
budget = 500
"#;

#[test]
fn passing_run_writes_reports_plots_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), PASSING);
    let out = ringheat(&["run", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let o = dir.path().join("out");
    for f in ["monotonicity.json", "borell.json", "parabolic_convexity.json", "summary.json", "levels_t0.svg"] {
        assert!(o.join(f).exists(), "{f} missing");
    }
    let csv = std::fs::read_to_string(o.join("parabolic_convexity_worst.csv")).unwrap();
    assert_eq!(csv.lines().count(), 101);
    let svg = std::fs::read_to_string(o.join("levels_t1.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains("<line") && svg.contains("<circle"));
    let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(o.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["exit_code"], 0);
    assert_eq!(summary["checks"].as_array().unwrap().len(), 3);

    let report = ringheat(&["report", o.to_str().unwrap()]);
    assert_eq!(report.status.code(), Some(0));
    let text = String::from_utf8_lossy(&report.stdout);
    assert!(text.contains("parabolic_convexity") && text.contains("overall: PASS"), "{text}");
}

#[test]
fn failing_assert_check_sets_the_exit_code_but_exploratory_does_not() {
    let dir = tempfile::tempdir().unwrap();
    let negated = "[[checks]]\ncheck = \"parabolic_convexity\"\nlevels = [0.5]\nbudget = 400\nnegate = true\n";
    let cfg = small_config(dir.path(), negated);
    let out = ringheat(&["run", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/parabolic_convexity.json")).unwrap()).unwrap();
    assert_eq!(report["pass"], false);
    assert_eq!(report["asserted"], true);

    let cfg = small_config(dir.path(), &format!("{negated}mode = \"exploratory\"\n"));
    let out = ringheat(&["run", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn p3_search_in_assert_mode_follows_the_search_outcome() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "[[checks]]\ncheck = \"p_violation\"\np = 3.0\nbudget = 300\n");
    let out = ringheat(&["run", cfg.to_str().unwrap()]);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/p_violation.json")).unwrap()).unwrap();
    let found = report["details"]["violation_found"].as_bool().unwrap();
    assert_eq!(report["pass"].as_bool().unwrap(), !found);
    assert_eq!(out.status.code(), Some(if found { 1 } else { 0 }));
}

#[test]
fn check_errors_are_reported_with_their_kind() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "[[checks]]\ncheck = \"strong_convexity\"\npatch = { level = 0.5, window = [0.0, 0.3] }\n");
    let out = ringheat(&["run", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/strong_convexity.json")).unwrap()).unwrap();
    assert_eq!(report["error"]["kind"], "InvalidArgument");
}

#[test]
fn malformed_configs_exit_nonzero_with_a_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    for text in [
        "seed = [\n",
        "[ring]\nouter = { kind = \"disk\", radius = 1.0 }\n",
        "seed = 1\n[ring]\nouter = { kind = \"disk\", radius = 1.0 }\ninner = { kind = \"disk\", radius = 0.3 }\n\
         [grid]\nh = 0.05\ndt = 0.01\nt_final = 0.2\n[[checks]]\ncheck = \"monotonicity\"\nbudgets = 5\n",
    ] {
        std::fs::write(&path, text).unwrap();
        let out = ringheat(&["run", path.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(2));
        let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
        assert_eq!(doc["error"]["kind"], "Config");
        assert!(!String::from_utf8_lossy(&out.stderr).is_empty());
    }
    assert_eq!(ringheat(&["run", dir.path().join("missing.toml").to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(ringheat(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn compare_dumps() {
    let dir = tempfile::tempdir().unwrap();
    let disks = make_ring(ConvexBody::disk([0.0, 0.0], 1.0).unwrap(), ConvexBody::disk([0.0, 0.0], 0.3).unwrap()).unwrap();
    let shifted = make_ring(ConvexBody::disk([0.0, 0.0], 1.0).unwrap(), ConvexBody::disk([0.1, 0.0], 0.3).unwrap()).unwrap();
    let grid = GridSpec::new(0.05, 0.01, 0.2);
    let a = dir.path().join("a.rhsnap");
    let b = dir.path().join("b.rhsnap");
    let c = dir.path().join("c.rhsnap");
    write_dump(&a, &solve_heat(&disks, &grid, None).unwrap()).unwrap();
    write_dump(&b, &solve_heat(&shifted, &grid, None).unwrap()).unwrap();
    write_dump(&c, &solve_heat(&disks, &GridSpec::new(0.025, 0.01, 0.2), None).unwrap()).unwrap();
    let same = ringheat(&["compare", a.to_str().unwrap(), a.to_str().unwrap()]);
    assert_eq!(same.status.code(), Some(0));
    let r: serde_json::Value = serde_json::from_slice(&same.stdout).unwrap();
    assert_eq!(r["linf"], 0.0);
    assert_eq!(r["l2_final"], 0.0);

    let nested = ringheat(&["compare", a.to_str().unwrap(), c.to_str().unwrap(), "--from", "0.05"]);
    assert_eq!(nested.status.code(), Some(0));
    let r: serde_json::Value = serde_json::from_slice(&nested.stdout).unwrap();
    assert!(r["linf"].as_f64().unwrap() > 0.0 && r["linf"].as_f64().unwrap() < 0.1, "{r}");

    let bad = ringheat(&["compare", a.to_str().unwrap(), b.to_str().unwrap()]);
    assert_eq!(bad.status.code(), Some(2));
    let doc: serde_json::Value = serde_json::from_slice(&bad.stdout).unwrap();
    assert_eq!(doc["error"]["kind"], "IncompatibleRuns");
}
