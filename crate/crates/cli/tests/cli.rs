use std::path::Path;
use std::process::{Command, Output};

use roughpath::signature::{TensorFunc, TwoParamSeries};
use serde_json::Value;

fn roughpath(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_roughpath"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove(roughpath_cli::OUT_DIR_ENV)
        .output()
        .expect("binary runs")
}

fn summary(dir: &Path, name: &str) -> Value {
    let text = std::fs::read_to_string(dir.join(format!("{name}.json"))).unwrap();
    serde_json::from_str(&text).unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

#[test]
fn young_rate_example() {
    let dir = tempfile::tempdir().unwrap();
    let o = roughpath(
        &[
            "young-rate",
            "--gamma",
            "0.75",
            "--rho",
            "0.75",
            "--levels",
            "6",
        ],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let s = summary(dir.path(), "young-rate");
    assert_eq!(s["pass"], true);
    assert_eq!(s["params"]["levels"], 6);
    assert!(s["metrics"]["order"].as_f64().unwrap() >= 0.35);
    let csv = std::fs::read_to_string(dir.path().join("young-rate.csv")).unwrap();
    assert!(csv.starts_with("level,mesh,value,diff_to_finest\n"));
}

#[test]
fn ito_strat_linear_example() {
    let dir = tempfile::tempdir().unwrap();
    let o = roughpath(&["ito-strat", "--phi", "linear", "--seed", "7"], dir.path());
    assert_eq!(code(&o), 0);
    let s = summary(dir.path(), "ito-strat");
    assert!(s["metrics"]["gap"].as_f64().unwrap() <= 1e-12);
}

#[test]
fn sig_extend_line_example() {
    let dir = tempfile::tempdir().unwrap();
    let o = roughpath(
        &["sig-extend", "--path", "line", "--level", "3"],
        dir.path(),
    );
    assert_eq!(code(&o), 0);
    let s = summary(dir.path(), "sig-extend");
    assert!(s["metrics"]["max_abs_err"].as_f64().unwrap() <= 1e-10);
    let tensor = std::fs::read_to_string(dir.path().join("sig-extend.tensor.json")).unwrap();
    let func = TensorFunc::from_json(&tensor).unwrap();
    assert_eq!(func.level(), 3);
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let args = ["bm-gen", "--dim", "2", "--n", "128", "--seed", "11"];
    assert_eq!(code(&roughpath(&args, a.path())), 0);
    assert_eq!(code(&roughpath(&args, b.path())), 0);
    for file in ["bm-gen.csv", "bm-gen.json"] {
        let x = std::fs::read(a.path().join(file)).unwrap();
        let y = std::fs::read(b.path().join(file)).unwrap();
        assert_eq!(x, y, "{file} differs");
    }
}

#[test]
fn every_subcommand_passes_on_small_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let runs: [&[&str]; 10] = [
        &["young-rate", "--n", "1024", "--levels", "5"],
        &["rough-rate"],
        &["sew-bound", "--n", "128", "--samples", "3"],
        &["rde-solve", "--n", "256"],
        &["rde-order", "--n", "2048", "--levels", "5"],
        &["ito-map", "--n", "256"],
        &["bm-gen", "--n", "64"],
        &["ito-strat", "--phi", "sine", "--n", "256", "--levels", "4"],
        &["sig-extend", "--path", "smooth", "--n", "128"],
        &["grr-diag", "--n", "64"],
    ];
    for args in runs {
        let o = roughpath(args, dir.path());
        assert_eq!(
            code(&o),
            0,
            "{args:?}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
        let s = summary(dir.path(), args[0]);
        assert_eq!(s["name"], args[0]);
        assert_eq!(s["pass"], true, "{args:?}");
        assert!(dir.path().join(format!("{}.csv", args[0])).exists());
    }
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(
        &cfg,
        r#"{"command": "bm-gen", "n": 64, "seed": 3, "dim": 1}"#,
    )
    .unwrap();
    let o = roughpath(
        &["bm-gen", "--config", cfg.to_str().unwrap(), "--n", "32"],
        dir.path(),
    );
    assert_eq!(code(&o), 0);
    let s = summary(dir.path(), "bm-gen");
    assert_eq!(s["params"]["n"], 32);
    assert_eq!(s["params"]["seed"], 3);
    assert_eq!(s["params"]["dim"], 1);
    let csv = std::fs::read_to_string(dir.path().join("bm-gen.csv")).unwrap();
    assert_eq!(csv.lines().count(), 34);
}

#[test]
fn invalid_configs_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cases: [&[&str]; 5] = [
        &["young-rate", "--seed", "3"],
        &["young-rate", "--gamma", "0.4", "--rho", "0.5"],
        &["young-rate", "--n", "1000"],
        &["sig-extend", "--level", "6"],
        &["bm-gen", "--no-such-flag"],
    ];
    for args in cases {
        let o = roughpath(args, dir.path());
        assert_eq!(code(&o), 2, "{args:?}");
        assert!(!o.stderr.is_empty());
    }
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"gamma": 0.7, "colour": "red"}"#).unwrap();
    let o = roughpath(
        &["young-rate", "--config", cfg.to_str().unwrap()],
        dir.path(),
    );
    assert_eq!(code(&o), 2);
    std::fs::write(&cfg, r#"{"command": "bm-gen"}"#).unwrap();
    let o = roughpath(
        &["young-rate", "--config", cfg.to_str().unwrap()],
        dir.path(),
    );
    assert_eq!(code(&o), 2);
}

#[test]
fn numerical_failure_exits_with_three_and_leaves_a_summary() {
    let dir = tempfile::tempdir().unwrap();
    let o = roughpath(&["rde-solve", "--y0", "1e308"], dir.path());
    assert_eq!(code(&o), 3);
    let s = summary(dir.path(), "rde-solve");
    assert_eq!(s["pass"], false);
    assert!(s["error"].as_str().unwrap().contains("non-finite"));
    assert_eq!(s["params"]["y0"][0], 1e308);
}

#[test]
fn failed_check_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    // on 64 cells the step solver misses the exact solution by more than 1e-5
    let o = roughpath(&["rde-order", "--n", "64", "--levels", "3"], dir.path());
    assert_eq!(code(&o), 1);
    let s = summary(dir.path(), "rde-order");
    assert_eq!(s["pass"], false);
    assert!(s["metrics"]["finest_error"].as_f64().unwrap() > 1e-5);
}

#[test]
fn output_directory_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("nested");
    let o = Command::new(env!("CARGO_BIN_EXE_roughpath"))
        .args(["bm-gen", "--n", "16", "--name", "sample"])
        .env(roughpath_cli::OUT_DIR_ENV, &target)
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    assert!(target.join("sample.csv").exists());
    assert_eq!(summary(&target, "sample")["command"], "bm-gen");
}
