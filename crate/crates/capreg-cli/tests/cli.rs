use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn capreg(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_capreg"))
        .args(args)
        .current_dir(dir)
        .env_remove("CAPREG_THREADS")
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn data_rows(path: &Path) -> usize {
    let text = fs::read_to_string(path).unwrap();
    text.lines().filter(|l| !l.starts_with('#')).count() - 1
}

fn header(path: &Path) -> String {
    let text = fs::read_to_string(path).unwrap();
    text.lines()
        .find(|l| !l.starts_with('#'))
        .unwrap()
        .to_string()
}

#[test]
fn single_scenario_writes_all_outputs() {
    let tmp = TempDir::new().unwrap();
    let o = capreg(&["--scenario", "M-SB-DVC", "--paths", "50"], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let dir = tmp.path().join("out/M-SB-DVC");
    for f in ["payments.csv", "controls.csv", "prices.csv", "paths.csv"] {
        assert_eq!(data_rows(&dir.join(f)), 521, "{f}");
    }
    assert_eq!(
        header(&dir.join("payments.csv")),
        "t,z1_1,z1_2,gamma_1,gamma_2"
    );
    assert_eq!(header(&dir.join("controls.csv")), "t,a_1,a_2,b_1,b_2");
    let prices = fs::read_to_string(dir.join("prices.csv")).unwrap();
    assert!(prices.starts_with("# energy_scale = 168\n"));
    assert!(prices.contains("# fixed_1 = "));
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["scenario"], "M-SB-DVC");
    assert_eq!(summary["n_paths"], 50);
    assert_eq!(summary["seed"], 42);
    assert!(summary["contract"]["total"]["mean"].as_f64().unwrap() > 0.0);
    // one scenario, no table
    assert!(!tmp.path().join("out/report.txt").exists());
}

#[test]
fn business_as_usual_has_revenue_columns_and_no_contract() {
    let tmp = TempDir::new().unwrap();
    let o = capreg(&["--scenario", "c-bu-dc", "--paths", "20"], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let dir = tmp.path().join("out/C-BU-DC");
    assert_eq!(header(&dir.join("payments.csv")), "t,wA_1,wA_2");
    let prices = fs::read_to_string(dir.join("prices.csv")).unwrap();
    assert!(prices.contains("# contract = none"));
    assert_eq!(header(&dir.join("prices.csv")), "t");
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap();
    assert!(summary["contract"].is_null());
}

#[test]
fn short_parameter_array_is_a_config_error() {
    let tmp = TempDir::new().unwrap();
    fs::write(
        tmp.path().join("bad.toml"),
        "scenario = \"M-SB-DC\"\nquadratic_cost = [1.0]\n",
    )
    .unwrap();
    let o = capreg(&["--config", "bad.toml"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("quadratic_cost"), "{err}");
    assert!(err.contains("found 1"), "{err}");
    assert!(!tmp.path().join("out").exists());
}

#[test]
fn unknown_key_and_bad_values_are_rejected() {
    let tmp = TempDir::new().unwrap();
    for (text, field) in [
        (
            "scenario = \"M-SB-DC\"\nquadratc_cost = [1, 2]\n",
            "quadratc_cost",
        ),
        ("scenario = \"X-SB-DC\"\n", "scenario"),
        ("scenario = \"M-SB-DC\"\nn_paths = -3\n", "n_paths"),
        (
            "scenario = \"M-SB-DC\"\nqv_mode = \"sometimes\"\n",
            "qv_mode",
        ),
    ] {
        fs::write(tmp.path().join("c.toml"), text).unwrap();
        let o = capreg(&["--config", "c.toml"], tmp.path());
        assert_eq!(o.status.code(), Some(2), "{text}");
        assert!(stderr(&o).contains(field), "{text}: {}", stderr(&o));
    }
    let o = capreg(&["--config", "missing.toml"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn outputs_are_deterministic_across_runs_and_thread_counts() {
    let tmp = TempDir::new().unwrap();
    let args = ["--scenario", "C-SB-DVC", "--paths", "64", "--seed", "9"];
    let a = capreg(&[&args[..], &["--out", "a"]].concat(), tmp.path());
    assert!(a.status.success(), "{}", stderr(&a));
    let b = capreg(&[&args[..], &["--out", "b"]].concat(), tmp.path());
    assert!(b.status.success());
    let c = Command::new(env!("CARGO_BIN_EXE_capreg"))
        .args([&args[..], &["--out", "c"]].concat())
        .current_dir(tmp.path())
        .env("CAPREG_THREADS", "1")
        .output()
        .unwrap();
    assert!(c.status.success(), "{}", stderr(&c));
    for f in [
        "payments.csv",
        "controls.csv",
        "prices.csv",
        "paths.csv",
        "summary.json",
    ] {
        let read = |d: &str| fs::read(tmp.path().join(d).join("C-SB-DVC").join(f)).unwrap();
        assert_eq!(read("a"), read("b"), "{f}");
        assert_eq!(read("a"), read("c"), "{f}");
    }
}

#[test]
fn batch_writes_a_report_that_the_report_mode_reproduces() {
    let tmp = TempDir::new().unwrap();
    fs::write(
        tmp.path().join("batch.toml"),
        "scenarios = [\"M-SB-DC\", \"C-SB-DC\", \"M-SB-DVC\", \"C-SB-DVC\"]\nn_paths = 40\n",
    )
    .unwrap();
    let o = capreg(&["--config", "batch.toml"], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let written = fs::read_to_string(tmp.path().join("out/report.txt")).unwrap();
    assert!(written.contains("ordering M-SB-DC > C-SB-DC > M-SB-DVC > C-SB-DVC: TRUE"));
    let r = capreg(&["--report"], tmp.path());
    assert!(r.status.success(), "{}", stderr(&r));
    assert_eq!(String::from_utf8(r.stdout).unwrap(), written);
}

#[test]
fn report_lists_missing_outputs() {
    let tmp = TempDir::new().unwrap();
    let r = capreg(&["--report", "--out", "nowhere"], tmp.path());
    assert_eq!(r.status.code(), Some(1));
    let err = stderr(&r);
    for name in ["M-SB-DC", "C-SB-DC", "M-SB-DVC", "C-SB-DVC"] {
        assert!(err.contains(name), "{err}");
    }

    let o = capreg(&["--scenario", "M-SB-DC", "--paths", "10"], tmp.path());
    assert!(o.status.success());
    let r = capreg(&["--report"], tmp.path());
    assert_eq!(r.status.code(), Some(1));
    let err = stderr(&r);
    assert!(
        err.contains("C-SB-DVC") && !err.contains("M-SB-DC,"),
        "{err}"
    );

    fs::write(
        tmp.path().join("batch.toml"),
        "scenarios = [\"M-SB-DC\", \"C-BU-DC\"]\n",
    )
    .unwrap();
    let r = capreg(&["--report", "--config", "batch.toml"], tmp.path());
    assert_eq!(r.status.code(), Some(1));
    assert!(stderr(&r).contains("C-BU-DC"), "{}", stderr(&r));
}

#[test]
fn renamed_copies_of_a_scenario_agree() {
    let tmp = TempDir::new().unwrap();
    fs::write(
        tmp.path().join("a.toml"),
        "scenario = \"M-SB-DC\"\nname = \"first\"\n",
    )
    .unwrap();
    fs::write(
        tmp.path().join("b.toml"),
        "scenario = \"M-SB-DC\"\nname = \"second\"\n",
    )
    .unwrap();
    fs::write(
        tmp.path().join("batch.toml"),
        "include = [\"a.toml\", \"b.toml\"]\nn_paths = 30\n",
    )
    .unwrap();
    let o = capreg(&["--config", "batch.toml"], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["payments.csv", "controls.csv", "prices.csv", "paths.csv"] {
        let read = |d: &str| fs::read(tmp.path().join("out").join(d).join(f)).unwrap();
        assert_eq!(read("first"), read("second"), "{f}");
    }
    let report = fs::read_to_string(tmp.path().join("out/report.txt")).unwrap();
    let row = |name: &str| {
        report
            .lines()
            .find(|l| l.starts_with(name))
            .unwrap()
            .trim_start_matches(name)
            .trim()
            .to_string()
    };
    assert_eq!(row("first"), row("second"));
}

#[test]
fn duplicate_output_names_are_rejected() {
    let tmp = TempDir::new().unwrap();
    fs::write(
        tmp.path().join("batch.toml"),
        "scenarios = [\"M-SB-DC\", \"M-SB-DC\"]\n",
    )
    .unwrap();
    let o = capreg(&["--config", "batch.toml"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("same directory"), "{}", stderr(&o));
}
