use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use plap_lab::formats::read_grid_function;
use plap_lab::ExperimentConfig;
use serde_json::Value;
use tempfile::TempDir;

fn plap(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_plap"));
    cmd.args(args).env_remove("PLAP_THREADS");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("plap runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn run(sub: &str, config: &Path, out: &Path) -> Output {
    plap(&[sub, config.to_str().unwrap(), "--out", out.to_str().unwrap()], &[])
}

fn summary(out: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn files_of(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    out.sort();
    out
}

const EXPONENT: &str = r#"{"scenario": "heat-2d", "params": {"p": 2.0, "n": 2, "q": 8, "r": 8}}"#;

const ZERO_SOURCE: &str = r#"{
  "scenario": "zero-source",
  "params": {"p": 2.0, "n": 1, "q": "inf", "r": "inf"},
  "grid": {"dim": 1, "half_width": [1.0], "h": 0.00390625, "dt": 0.0078125, "t_end": 0.25},
  "solve": {"initial": {"kind": "constant", "value": 0.7}},
  "source": {"kind": "zero"},
  "probe": {"centers": {"rule": "points", "points": [{"x": [0.0]}, {"x": [-0.3]}]}}
}"#;

const HEAT: &str = r#"{
  "scenario": "heat-cosine",
  "params": {"p": 2.0, "n": 1, "q": "inf", "r": "inf"},
  "grid": {"dim": 1, "half_width": [0.5], "h": 0.00390625, "dt": 0.000244140625, "t_end": 0.25},
  "solve": {"initial": {"kind": "cosine", "amplitude": 1.0}},
  "source": {"kind": "zero"},
  "probe": {"mode": "affine", "centers": {"rule": "critical_extrema"}}
}"#;

#[test]
fn exponent_scenario_reports_alpha() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.json", EXPONENT);
    let out = tmp.path().join("out");
    let o = run("exponent", &cfg, &out);
    assert!(o.status.success(), "{}", stderr(&o));
    let s = summary(&out);
    assert_eq!(s["subcommand"], "exponent");
    assert!((s["predicted"]["exponents"]["alpha"].as_f64().unwrap() - 0.5).abs() < 1e-12);
    assert_eq!(s["predicted"]["compatibility"]["admissible"], true);
    assert_eq!(files_of(&out).len(), 1, "exponent writes only the summary");
}

#[test]
fn zero_source_constant_probe_is_unfittable() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.json", ZERO_SOURCE);
    let out = tmp.path().join("out");
    let o = run("probe", &cfg, &out);
    assert!(o.status.success(), "{}", stderr(&o));
    let s = summary(&out);
    let centers = s["measured"]["centers"].as_array().unwrap();
    assert_eq!(centers.len(), 2);
    for c in centers {
        assert_eq!(c["fit"]["status"], "unfittable");
        for e in c["profile"]["entries"].as_array().unwrap() {
            assert_eq!(e["sup_osc"].as_f64().unwrap(), 0.0);
        }
    }
    let csv = fs::read_to_string(out.join("profile.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 2 * 6);
    assert!(csv.lines().skip(1).all(|l| l.split(',').nth(4) == Some("0")));
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.json", ZERO_SOURCE);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(run("probe", &cfg, &a).status.success());
    assert!(run("probe", &cfg, &b).status.success());
    let (fa, fb) = (files_of(&a), files_of(&b));
    let names: Vec<&str> = fa.iter().map(|(n, _)| n.as_str()).collect();
    assert_eq!(names, ["final_slice.csv", "profile.csv", "solution.bin", "summary.json"]);
    assert_eq!(fa, fb);
}

#[test]
fn sampled_centres_do_not_depend_on_thread_count() {
    let tmp = TempDir::new().unwrap();
    let text = HEAT.replace(r#"{"rule": "critical_extrema"}"#, r#"{"rule": "sampled", "count": 3}"#);
    let text = text.replace("\"scenario\"", "\"seed\": 11, \"scenario\"");
    let cfg = write_config(tmp.path(), "c.json", &text);
    let mut outs = Vec::new();
    for threads in ["1", "3"] {
        let out = tmp.path().join(threads);
        let o = plap(
            &["probe", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()],
            &[("PLAP_THREADS", threads)],
        );
        assert!(o.status.success(), "{}", stderr(&o));
        outs.push(files_of(&out));
    }
    assert_eq!(outs[0], outs[1]);
}

#[test]
fn region_csv_has_fixed_header() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.json",
        r#"{"scenario": "r", "params": {"p": 1.5, "n": 2, "q": 4, "r": 4, "alpha_h": 0.5}, "region": {"resolution": 12}}"#,
    );
    let out = tmp.path().join("out");
    assert!(run("region", &cfg, &out).status.success());
    let csv = fs::read_to_string(out.join("region.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("q,r,n_over_q_plus_2_over_r,admissible,violations"));
    assert_eq!(lines.count(), 12 * 12);
    assert!(csv.contains(",true,"));
    assert!(csv.contains(",false,"));
    assert!(out.join("region_curves.csv").exists());
    assert!(!out.join("solution.bin").exists());
}

#[test]
fn probe_reports_predicted_alpha_and_fitted_slope() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.json", HEAT);
    let out = tmp.path().join("out");
    let o = run("probe", &cfg, &out);
    assert!(o.status.success(), "{}", stderr(&o));
    let s = summary(&out);
    let alpha = s["predicted"]["alpha"].as_f64().unwrap();
    assert!((alpha - 1.0).abs() < 1e-12);
    assert_eq!(s["predicted"]["predicted_slope"].as_f64().unwrap(), 2.0);
    let slopes = s["measured"]["fitted_slopes"].as_array().unwrap();
    assert_eq!(slopes.len(), 1, "cos has one interior extremum");
    assert!(slopes[0].as_f64().unwrap() > 1.5);
    let c = &s["measured"]["centers"][0]["center"];
    assert_eq!(c["x"][0].as_f64().unwrap(), 0.0);
}

#[test]
fn summary_embeds_config_hash() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.json", EXPONENT);
    let out = tmp.path().join("out");
    assert!(run("exponent", &cfg, &out).status.success());
    let expected = ExperimentConfig::parse(EXPONENT).unwrap().hash();
    assert_eq!(summary(&out)["config_hash"], expected.as_str());
    let reformatted = write_config(tmp.path(), "d.json", &EXPONENT.replace(", ", ",\n    "));
    let out2 = tmp.path().join("out2");
    assert!(run("exponent", &reformatted, &out2).status.success());
    assert_eq!(summary(&out2)["config_hash"], expected.as_str());
}

#[test]
fn solve_writes_a_readable_solution() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.json", HEAT);
    let out = tmp.path().join("out");
    assert!(run("solve", &cfg, &out).status.success());
    let u = read_grid_function(fs::File::open(out.join("solution.bin")).unwrap()).unwrap();
    assert_eq!(u.grid().counts()[0], 257);
    assert_eq!(u.grid().time_nodes(), 1025);
    assert!((u.max_abs() - 1.0).abs() < 1e-12);
    let s = summary(&out);
    assert_eq!(s["measured"]["time_nodes"], 1025);
    assert!(!out.join("profile.csv").exists());
}

#[test]
fn batch_runs_every_scenario() {
    let tmp = TempDir::new().unwrap();
    let text = format!("[{EXPONENT}, {}]", EXPONENT.replace("heat-2d", "degenerate").replace("2.0", "3.0").replace("\"r\": 8", "\"r\": 8, \"alpha_h\": 0.5"));
    let cfg = write_config(tmp.path(), "batch.json", &text);
    let out = tmp.path().join("out");
    let o = run("exponent", &cfg, &out);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(summary(&out.join("heat-2d"))["scenario"], "heat-2d");
    let deg = summary(&out.join("degenerate"));
    assert!(deg["predicted"]["exponents"]["alpha"].as_f64().unwrap() < 0.5);
    let dup = write_config(tmp.path(), "dup.json", &format!("[{EXPONENT}, {EXPONENT}]"));
    assert_eq!(run("exponent", &dup, &out).status.code(), Some(3));
}

#[test]
fn validate_passes() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.json", r#"{"scenario": "oracles"}"#);
    let out = tmp.path().join("out");
    let o = run("validate", &cfg, &out);
    assert!(o.status.success(), "{}", stderr(&o));
    let s = summary(&out);
    assert_eq!(s["measured"]["passed"], true);
    assert_eq!(s["measured"]["checks"].as_array().unwrap().len(), 6);
}

#[test]
fn config_errors_exit_3_with_field_paths() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let cases = [
        ("unknown", EXPONENT.replace("\"r\": 8", "\"r\": 8, \"alpah_h\": 1"), "params"),
        ("type", EXPONENT.replace("\"p\": 2.0", "\"p\": \"two\""), "params.p"),
        ("range", EXPONENT.replace("\"q\": 8", "\"q\": 1"), "q"),
        ("json", "{\"scenario\": ".to_string(), "JSON"),
    ];
    for (name, text, needle) in cases {
        let cfg = write_config(tmp.path(), &format!("{name}.json"), &text);
        let o = run("exponent", &cfg, &out);
        assert_eq!(o.status.code(), Some(3), "{name}: {}", stderr(&o));
        assert!(stderr(&o).contains(needle), "{name}: {}", stderr(&o));
    }
    let cfg = write_config(tmp.path(), "c.json", EXPONENT);
    let o = run("probe", &cfg, &out);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("`probe` block is required"), "{}", stderr(&o));
    let missing = tmp.path().join("nope.json");
    assert_eq!(run("exponent", &missing, &out).status.code(), Some(3));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(plap(&[], &[]).status.code(), Some(2));
    assert_eq!(plap(&["frobnicate", "x.json"], &[]).status.code(), Some(2));
    assert_eq!(plap(&["exponent"], &[]).status.code(), Some(2));
}

#[test]
fn solver_and_probe_failures_have_distinct_codes() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let unstable = ZERO_SOURCE
        .replace("\"kind\": \"constant\", \"value\": 0.7}", "\"kind\": \"cosine\", \"amplitude\": 1.0}, \"scheme\": \"explicit\"");
    let cfg = write_config(tmp.path(), "solver.json", &unstable);
    let o = run("solve", &cfg, &out);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));

    let edge = ZERO_SOURCE.replace("{\"x\": [-0.3]}", "{\"x\": [0.9]}");
    let cfg = write_config(tmp.path(), "probe.json", &edge);
    let o = run("probe", &cfg, &out);
    assert_eq!(o.status.code(), Some(5), "{}", stderr(&o));
}

#[test]
fn unwritable_output_exits_6() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.json", EXPONENT);
    let blocker = tmp.path().join("file");
    fs::write(&blocker, b"x").unwrap();
    let o = run("exponent", &cfg, &blocker.join("sub"));
    assert_eq!(o.status.code(), Some(6), "{}", stderr(&o));
}
