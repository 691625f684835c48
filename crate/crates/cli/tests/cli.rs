use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use sha2::{Digest, Sha256};
use tempfile::TempDir;

const SUBCOMMANDS: [&str; 7] = ["simulate", "hrv-pp", "residual-tail", "monitor", "cond-law", "dist", "replay"];

fn bigjump(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bigjump"))
        .args(args)
        .env_remove("BIGJUMP_THREADS")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!("stdout is not JSON ({e}): {}", String::from_utf8_lossy(&out.stdout))
    })
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn sha256(path: &Path) -> String {
    hex::encode(Sha256::digest(fs::read(path).unwrap()))
}

fn schema() -> Value {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../schemas/summary.schema.json");
    read_json(&path)
}

fn assert_valid(schema: &Value, instance: &Value) {
    let validator = jsonschema::validator_for(schema).expect("schema compiles");
    let errors: Vec<String> = validator.iter_errors(instance).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{errors:?} in {instance:#}");
}

const HRV: [&str; 16] = [
    "hrv-pp", "--model", "poisson", "--rate", "0.5", "--T", "10", "--k", "1", "--r", "1", "--n-grid", "10,30",
    "--samples", "100000", "--seed",
];

fn hrv(seed: &str, extra: &[&str]) -> Output {
    let mut args: Vec<&str> = HRV.to_vec();
    args.push(seed);
    args.extend_from_slice(extra);
    bigjump(&args)
}

#[test]
fn dist_of_toy_path() {
    let out = bigjump(&["dist", "--jumps", "2,9,5", "--k", "1"]);
    assert_eq!(code(&out), 0);
    let v = stdout_json(&out);
    assert_eq!(v["d_Dk"].as_f64(), Some(2.5));
    assert_eq!(v["d_Jk"].as_f64(), Some(7.0));
}

#[test]
fn simulate_grid_is_deterministic() {
    let args = ["simulate", "--model", "grid", "--n", "4", "--T", "1", "--alpha", "1", "--seed", "7"];
    let first = bigjump(&args);
    let second = bigjump(&args);
    assert_eq!(code(&first), 0);
    assert_eq!(first.stdout, second.stdout);
    let text = String::from_utf8(first.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "time,mark");
    assert_eq!(lines.len(), 5);
    for (i, line) in lines[1..].iter().enumerate() {
        let (time, mark) = line.split_once(',').unwrap();
        assert_eq!(time.parse::<f64>().unwrap(), (i + 1) as f64 / 4.0);
        assert!(mark.parse::<f64>().unwrap() >= 1.0);
    }
}

#[test]
fn simulate_files_have_fixed_digests() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    for dir in [&a, &b] {
        let out = bigjump(&[
            "simulate", "--model", "poisson", "--rate", "0.5", "--T", "10", "--alpha", "1", "--seed", "11", "--out",
            dir.path().to_str().unwrap(),
        ]);
        assert_eq!(code(&out), 0);
    }
    let pattern = fs::read_to_string(a.path().join("pattern.csv")).unwrap();
    assert!(pattern.starts_with("time,mark\n"));
    assert!(!pattern.contains('\r'));
    for name in ["pattern.csv", "risk.csv", "summary.json"] {
        assert_eq!(sha256(&a.path().join(name)), sha256(&b.path().join(name)), "{name}");
    }
}

#[test]
fn residual_tail_oracle() {
    let out = bigjump(&[
        "residual-tail", "--model", "poisson", "--rate", "0.5", "--T", "10", "--alpha", "1", "--k", "1", "--x", "200",
        "--oracle",
    ]);
    assert_eq!(code(&out), 0);
    let v = stdout_json(&out);
    let asymptote = v["asymptote"].as_f64().unwrap();
    assert!((asymptote - 3.125e-4).abs() < 1e-15);
    let exact = v["estimate"].as_f64().unwrap();
    assert!(exact > 3.0e-4 && exact < asymptote, "{exact}");
    assert!((v["ratio"].as_f64().unwrap() - exact / asymptote).abs() < 1e-12);
}

#[test]
fn violated_assertion_exits_one() {
    let base = [
        "residual-tail", "--model", "poisson", "--rate", "0.5", "--T", "10", "--k", "1", "--x", "200", "--oracle",
        "--assert",
    ];
    let mut strict = base.to_vec();
    strict.push("0.001");
    let out = bigjump(&strict);
    assert_eq!(code(&out), 1);
    assert_eq!(stdout_json(&out)["pass"], Value::Bool(false));
    let mut loose = base.to_vec();
    loose.push("0.05");
    let out = bigjump(&loose);
    assert_eq!(code(&out), 0);
    assert_eq!(stdout_json(&out)["pass"], Value::Bool(true));
}

#[test]
fn usage_errors_exit_two() {
    let cases: [&[&str]; 6] = [
        &["simulate", "--model", "grid", "--T", "1"],
        &["simulate", "--model", "grid", "--n", "4", "--T", "1", "--rate", "2"],
        &["simulate", "--model", "poisson", "--rate", "-1", "--T", "1"],
        &["dist", "--jumps", "2,9", "--times", "1"],
        &["hrv-pp", "--model", "poisson", "--rate", "1", "--T", "1", "--samples", "0"],
        &["no-such-command"],
    ];
    for args in cases {
        let out = bigjump(args);
        assert_eq!(code(&out), 2, "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(!out.stderr.is_empty());
    }
}

#[test]
fn unwritable_output_exits_three() {
    let dir = TempDir::new().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let out = bigjump(&["dist", "--jumps", "1,2", "--out", blocker.to_str().unwrap()]);
    assert_eq!(code(&out), 3);
}

#[test]
fn help_lists_flags_with_units() {
    for sub in SUBCOMMANDS {
        let out = bigjump(&[sub, "--help"]);
        assert_eq!(code(&out), 0, "{sub}");
        let text = String::from_utf8(out.stdout).unwrap();
        assert!(text.contains("--"), "{sub}");
    }
    let text = String::from_utf8(bigjump(&["hrv-pp", "--help"]).stdout).unwrap();
    for flag in ["--model", "--rate", "--T", "--n", "--alpha", "--k", "--r", "--n-grid", "--samples", "--seed", "--threads"] {
        assert!(text.contains(flag), "{flag}");
    }
    assert!(text.contains("time units"));
    assert!(text.contains("count"));
}

#[test]
fn config_file_overrides_flags() {
    let dir = TempDir::new().unwrap();
    let config = dir.path().join("config.json");
    fs::write(&config, r#"{"jumps": [2, 9, 5], "k": 2}"#).unwrap();
    let out = bigjump(&["dist", "--jumps", "1", "--config", config.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let v = stdout_json(&out);
    assert_eq!(v["d_Dk"].as_f64(), Some(1.0));
    assert_eq!(v["d_Jk"].as_f64(), Some(2.0));

    fs::write(&config, r#"{"bogus": 1}"#).unwrap();
    let out = bigjump(&["dist", "--jumps", "1", "--config", config.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
}

#[test]
fn results_ignore_thread_count() {
    let one = hrv("5", &["--threads", "1"]);
    let four = hrv("5", &["--threads", "4"]);
    assert_eq!(code(&one), 0);
    assert_eq!(one.stdout, four.stdout);
}

#[test]
fn replay_reproduces_digests() {
    let first = TempDir::new().unwrap();
    let again = TempDir::new().unwrap();
    let out = hrv("9", &["--out", first.path().to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let manifest_path = first.path().join("manifest.json");
    let manifest = read_json(&manifest_path);
    assert_eq!(manifest["subcommand"], "hrv-pp");
    assert_eq!(manifest["seed"], 9);
    for (name, digest) in manifest["outputs"].as_object().unwrap() {
        assert_eq!(digest.as_str().unwrap(), sha256(&first.path().join(name)), "{name}");
    }
    let out = bigjump(&[
        "replay", "--manifest", manifest_path.to_str().unwrap(), "--out", again.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    assert_eq!(stdout_json(&out)["identical"], Value::Bool(true));
    assert_eq!(
        fs::read(first.path().join("convergence.csv")).unwrap(),
        fs::read(again.path().join("convergence.csv")).unwrap()
    );
}

#[test]
fn replay_flags_tampered_digest() {
    let first = TempDir::new().unwrap();
    let again = TempDir::new().unwrap();
    let out = bigjump(&["dist", "--jumps", "2,9,5", "--out", first.path().to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let manifest_path = first.path().join("manifest.json");
    let mut manifest = read_json(&manifest_path);
    manifest["outputs"]["dist.csv"] = Value::String("0".repeat(64));
    fs::write(&manifest_path, serde_json::to_vec(&manifest).unwrap()).unwrap();
    let out = bigjump(&[
        "replay", "--manifest", manifest_path.to_str().unwrap(), "--out", again.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 1);
    let report = stdout_json(&out);
    assert_eq!(report["identical"], Value::Bool(false));
    assert_eq!(report["mismatched"][0], "dist.csv");
}

#[test]
fn outputs_validate_against_schema() {
    let schema = schema();
    let manifest_schema = schema["$defs"]["manifest"].clone();
    let validator = jsonschema::validator_for(&schema).unwrap();
    assert!(!validator.is_valid(&serde_json::json!({ "command": "dist", "estimate": 1.0 })));
    assert!(!validator.is_valid(&serde_json::json!({
        "command": "dist", "estimate": 1.0, "asymptote": null, "ratio": null, "ci": [1.0], "pass": null, "details": {}
    })));
    let runs: [&[&str]; 6] = [
        &["simulate", "--model", "binomial", "--n", "20", "--T", "2", "--seed", "1"],
        &HRV[..],
        &["residual-tail", "--model", "gamma-renewal", "--T", "5", "--k", "1", "--x", "5,10", "--samples", "50000"],
        &[
            "monitor", "--model", "poisson", "--rate", "0.5", "--T", "10", "--x", "3", "--t0", "1", "--t1", "2",
            "--u", "1.5", "--eps", "0.4,0.2", "--samples", "100000",
        ],
        &["cond-law", "--model", "poisson", "--rate", "0.5", "--T", "10", "--x", "20", "--samples", "100000", "--limit-samples", "2000"],
        &["dist", "--jumps", "3,1,4,1,5", "--k", "2"],
    ];
    for args in runs {
        let dir = TempDir::new().unwrap();
        let mut full = args.to_vec();
        if full[0] == "hrv-pp" {
            full.push("2");
        }
        full.extend_from_slice(&["--out", dir.path().to_str().unwrap()]);
        let out = bigjump(&full);
        assert_eq!(code(&out), 0, "{full:?}: {}", String::from_utf8_lossy(&out.stderr));
        let summary = read_json(&dir.path().join("summary.json"));
        assert_eq!(summary["command"], full[0]);
        assert_valid(&schema, &summary);
        assert_valid(&manifest_schema, &read_json(&dir.path().join("manifest.json")));
        if full[0] != "simulate" && full[0] != "dist" {
            assert_valid(&schema, &stdout_json(&out));
        }
    }
}

#[test]
fn gamma_monitoring_uses_small_t0_factor() {
    let out = bigjump(&[
        "monitor", "--model", "gamma-renewal", "--T", "5", "--x", "5", "--t0", "0.01", "--t1", "1", "--u", "1.5",
        "--t0-zero", "--samples", "10000",
    ]);
    assert_eq!(code(&out), 0);
    let v = stdout_json(&out);
    let t1: f64 = 1.0;
    let ratio = 0.25 * ((-2.0 * t1).exp() + 2.0 * t1 - 1.0);
    assert!((v["details"]["measure_ratio"].as_f64().unwrap() - ratio).abs() < 1e-12);
    assert!((v["asymptote"].as_f64().unwrap() - 2.0 * ratio).abs() < 1e-12);

    let out = bigjump(&[
        "monitor", "--model", "poisson", "--rate", "1", "--T", "5", "--x", "5", "--t0", "0.01", "--t1", "1", "--u",
        "1.5", "--t0-zero",
    ]);
    assert_eq!(code(&out), 2);
}
