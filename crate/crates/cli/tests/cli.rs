use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use cgpt_core::io::{read_cgpt_json, read_msr_csv, read_table};

fn cgpt(dir: &Path, args: &[&str]) -> Output {
    let out = Command::new(env!("CARGO_BIN_EXE_cgpt")).args(args).current_dir(dir).output().expect("runs");
    assert!(out.status.success(), "cgpt {args:?} failed:\n{}", String::from_utf8_lossy(&out.stderr));
    out
}

fn cgpt_fails(dir: &Path, args: &[&str]) -> String {
    let out = Command::new(env!("CARGO_BIN_EXE_cgpt")).args(args).current_dir(dir).output().expect("runs");
    assert!(!out.status.success(), "cgpt {args:?} should fail");
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

const FLOWER: &str = r#"{"shape": "flower:5,0.3", "array": {"n": 51, "epsilon": 0.5, "z0": [15, -45.5]},
  "transform": {"z": [16.3, -46.7], "s": 7.5, "theta": 2.69}}"#;

#[test]
fn simulate_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    cgpt(d, &["simulate", "--out", "a.csv"]);
    cgpt(d, &["simulate", "--out", "b.csv"]);
    let a = fs::read(d.join("a.csv")).unwrap();
    assert_eq!(a, fs::read(d.join("b.csv")).unwrap());

    let (v, h) = read_msr_csv(a.as_slice()).unwrap();
    assert_eq!((v.values.nrows(), v.values.ncols()), (51, 51));
    assert_eq!(h.shape, "ellipse:1,0.5");
    assert!(v.asymmetry() <= 1e-8 * v.values.amax());
}

#[test]
fn noisy_trials_get_distinct_seeded_files() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let args = ["simulate", "--sigma0", "0.1", "--trials", "3", "--seed", "9", "--out", "n.csv"];
    cgpt(d, &args);
    let first: Vec<Vec<u8>> = (0..3).map(|t| fs::read(d.join(format!("n_t00{t}.csv"))).unwrap()).collect();
    assert_ne!(first[0], first[1]);
    assert_ne!(first[1], first[2]);
    cgpt(d, &args);
    for (t, bytes) in first.iter().enumerate() {
        assert_eq!(bytes, &fs::read(d.join(format!("n_t00{t}.csv"))).unwrap());
    }
    let (_, h) = read_msr_csv(first[0].as_slice()).unwrap();
    assert_eq!(h.sigma0, 0.1);
    assert!(h.noise_sigma > 0.0);
}

#[test]
fn noiseless_reconstruction_reports_small_errors() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    cgpt(d, &["simulate", "--out", "v.csv"]);
    cgpt(d, &["reconstruct", "--msr", "v.csv", "--out", "c.json", "--table", "e.csv"]);
    let (columns, rows) = read_table(fs::File::open(d.join("e.csv")).unwrap()).unwrap();
    assert_eq!(columns, ["m", "mean_error", "trial_error", "resolved"]);
    // 2K < N caps the reconstruction at order 25
    assert_eq!(rows.len(), 25);
    for row in &rows[..6] {
        assert!(row[1].parse::<f64>().unwrap() < 1e-8, "{row:?}");
    }
    let pair = read_cgpt_json(fs::File::open(d.join("c.json")).unwrap()).unwrap();
    assert_eq!(pair.order(), 25);
    assert!((pair.lambda - 3.5).abs() < 1e-12);
}

#[test]
fn noisy_reconstruction_keeps_resolving_order() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    cgpt(d, &["simulate", "--sigma0", "0.1", "--trials", "4", "--out", "n.csv"]);
    let files: Vec<String> = (0..4).map(|t| format!("n_t00{t}.csv")).collect();
    let mut args = vec!["reconstruct", "--out", "c.json", "--table", "e.csv", "--msr"];
    args.extend(files.iter().map(String::as_str));
    cgpt(d, &args);
    let (_, rows) = read_table(fs::File::open(d.join("e.csv")).unwrap()).unwrap();
    let resolved = rows.iter().filter(|r| r[3] == "true").count();
    let pair = read_cgpt_json(fs::File::open(d.join("c.json")).unwrap()).unwrap();
    assert_eq!(pair.order(), resolved);
    assert!(resolved >= 1 && resolved < rows.len());
}

#[test]
fn dictionary_build_is_deterministic_and_matches_itself() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let build = ["build-dict", "--shape", "ellipse:1,0.5", "--shape", "flower:3,0.3", "--shape", "flower:5,0.3"];
    cgpt(d, &[&build[..], &["--out", "a.json"]].concat());
    cgpt(d, &[&build[..], &["--out", "b.json"]].concat());
    assert_eq!(fs::read(d.join("a.json")).unwrap(), fs::read(d.join("b.json")).unwrap());

    // a moved copy of the 5-petal flower, reconstructed from clean data
    write(d, "flower.json", FLOWER);
    cgpt(d, &["simulate", "--config", "flower.json", "--out", "q.csv"]);
    for algo in ["1", "2"] {
        let out = cgpt(d, &["match", "--dict", "a.json", "--query", "q.csv", "--algo", algo, "--order", "3"]);
        let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
        let level = &report["queries"][0]["levels"][0];
        assert_eq!(level["mean_winner"], "flower5", "algorithm {algo}");
        assert_eq!(level["success_rate"], 1.0);
    }
}

#[test]
fn match_with_noise_is_reproducible_and_writes_confusion() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    cgpt(d, &["build-dict", "--shape", "ellipse:1,0.5", "--shape", "ellipse:1,0.8", "--out", "d.json"]);
    cgpt(d, &["simulate", "--out", "q.csv"]);
    let args = [
        "match",
        "--dict",
        "d.json",
        "--query",
        "q.csv",
        "--algo",
        "2",
        "--order",
        "2",
        "--sigma0",
        "0.01,0.1",
        "--trials",
        "10",
        "--seed",
        "3",
        "--confusion",
        "conf.csv",
    ];
    let a = cgpt(d, &args).stdout;
    let conf = fs::read(d.join("conf.csv")).unwrap();
    assert_eq!(a, cgpt(d, &args).stdout);
    assert_eq!(conf, fs::read(d.join("conf.csv")).unwrap());

    let report: serde_json::Value = serde_json::from_slice(&a).unwrap();
    let levels = report["queries"][0]["levels"].as_array().unwrap();
    assert_eq!(levels.len(), 2);
    assert_eq!(levels[0]["trials"], 10);
    assert_eq!(levels[0]["mean_winner"], "ellipse");
    let (columns, rows) = read_table(conf.as_slice()).unwrap();
    assert_eq!(columns, ["query", "ellipse", "ellipse"]);
    assert_eq!(rows.len(), 1);
}

#[test]
fn match_rejects_order_beyond_dictionary() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    cgpt(d, &["build-dict", "--shape", "ellipse:1,0.5", "--order", "3", "--out", "d.json"]);
    cgpt(d, &["simulate", "--out", "q.csv"]);
    let err = cgpt_fails(d, &["match", "--dict", "d.json", "--query", "q.csv", "--order", "4"]);
    assert!(err.contains("exceeds the dictionary order"), "{err}");
}

#[test]
fn petal_finds_five_petals() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write(d, "flower.json", FLOWER);
    let args = [
        "petal",
        "--config",
        "flower.json",
        "--sigma0",
        "0.001",
        "--trials",
        "10",
        "--out",
        "m.csv",
        "--detections",
        "det.csv",
    ];
    cgpt(d, &args);
    let means = fs::read(d.join("m.csv")).unwrap();
    let (_, det) = read_table(fs::File::open(d.join("det.csv")).unwrap()).unwrap();
    assert_eq!(det, [["0.001", "7", "5", "10"]]);
    cgpt(d, &args);
    assert_eq!(means, fs::read(d.join("m.csv")).unwrap());

    // exact-CGPT path: clean data reconstructed to a CGPT file
    cgpt(d, &["simulate", "--config", "flower.json", "--out", "v.csv"]);
    cgpt(d, &["reconstruct", "--msr", "v.csv", "--order", "12", "--out", "c.json"]);
    cgpt(d, &["petal", "--query", "c.json", "--out", "m2.csv", "--detections", "det2.csv"]);
    let (_, det) = read_table(fs::File::open(d.join("det2.csv")).unwrap()).unwrap();
    assert_eq!(det[0][2], "5");
}

#[test]
fn sweep_table_has_one_row_per_level_and_order() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = cgpt(d, &["sweep", "--sigma0", "0.01,0.1", "--trials", "5", "--order", "3"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("# cgpt-core"));
    assert!(text.contains("# config: {"));
    let (columns, rows) = read_table(text.as_bytes()).unwrap();
    assert_eq!(columns[0], "sigma0");
    assert_eq!(rows.len(), 6);
    let err = |i: usize| rows[i][5].parse::<f64>().unwrap();
    assert!(err(3) > err(0), "order-1 error should grow with the noise level");
}

#[test]
fn config_errors_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write(d, "outside.json", r#"{"shape": "ellipse:1,0.5", "array": {"n": 51, "radius": 2, "z0": [3, 0]}}"#);
    let err = cgpt_fails(d, &["simulate", "--config", "outside.json", "--out", "v.csv"]);
    assert!(err.contains("not inside"), "{err}");

    write(d, "typo.json", r#"{"shape": "ellipse:1,0.5", "array": {"n": 51, "radius": 2}, "sigma": [0.1]}"#);
    let err = cgpt_fails(d, &["simulate", "--config", "typo.json", "--out", "v.csv"]);
    assert!(err.contains("unknown field"), "{err}");

    let err = cgpt_fails(d, &["simulate", "--sigma0=-0.1", "--out", "v.csv"]);
    assert!(err.contains("non-negative"), "{err}");
}
