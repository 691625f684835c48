//! Summaries, manifests, output files and the exit-code contract.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, Context};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::commands::{CommonArgs, CondLawArgs, DistArgs, HrvPpArgs, MonitorArgs, ResidualTailArgs, SimulateArgs};

/// A failed run, classified by exit code.
#[derive(Debug)]
pub enum Failure {
    /// Bad flags, configs or parameter combinations (exit 2).
    Usage(anyhow::Error),
    /// Simulation or I/O failure (exit 3).
    Runtime(anyhow::Error),
}

impl Failure {
    pub fn usage(msg: impl Into<String>) -> Self {
        Failure::Usage(anyhow!(msg.into()))
    }

    pub fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Runtime(_) => 3,
        }
    }

    pub fn error(&self) -> &anyhow::Error {
        match self {
            Failure::Usage(e) | Failure::Runtime(e) => e,
        }
    }
}

impl From<bigjump::Error> for Failure {
    fn from(e: bigjump::Error) -> Self {
        use bigjump::Error::*;
        match e {
            InvalidParameter { .. } | OutsideWindow { .. } | InvalidEvent(_) | Unsupported(_) | NotPureJump(_) => {
                Failure::Usage(e.into())
            }
            RejectionCap { .. } | EventFailed { .. } | WorkerPool(_) => Failure::Runtime(e.into()),
        }
    }
}

fn runtime(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Runtime(e.into())
}

/// JSON summary printed by every experiment subcommand.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Summary {
    pub command: String,
    pub estimate: Option<f64>,
    pub asymptote: Option<f64>,
    pub ratio: Option<f64>,
    pub ci: Option<[f64; 2]>,
    /// `None` unless an `--assert` tolerance was given.
    pub pass: Option<bool>,
    pub details: Value,
}

/// Finite numbers only; NaN and infinities become `None`.
pub fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

/// Files and summary produced by one command.
pub struct Outputs {
    pub files: Vec<(String, Vec<u8>)>,
    pub summary: Summary,
    /// Replaces the pretty summary on stdout.
    pub stdout: Option<String>,
}

pub trait Experiment: Serialize + DeserializeOwned {
    fn run(&self) -> Result<Outputs, Failure>;
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub subcommand: String,
    pub config: Value,
    pub seed: Option<u64>,
    pub version: String,
    pub wall_time_seconds: f64,
    /// sha256 of every output file, keyed by file name.
    pub outputs: BTreeMap<String, String>,
}

fn digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Flags serialised to JSON, then overridden key by key from `--config`.
fn resolve<A: Experiment>(args: &A, config: Option<&Path>) -> Result<A, Failure> {
    let mut value = serde_json::to_value(args).map_err(runtime)?;
    if let Some(path) = config {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))
            .map_err(Failure::Usage)?;
        let overrides: Value = serde_json::from_str(&text)
            .with_context(|| format!("parsing config {}", path.display()))
            .map_err(Failure::Usage)?;
        let Value::Object(overrides) = overrides else {
            return Err(Failure::usage("config file must hold a JSON object"));
        };
        let target = value.as_object_mut().expect("flag structs serialise to objects");
        for (key, v) in overrides {
            if !target.contains_key(&key) {
                return Err(Failure::usage(format!("unknown config key `{key}`")));
            }
            target.insert(key, v);
        }
    }
    serde_json::from_value(value)
        .context("invalid config values")
        .map_err(Failure::Usage)
}

fn write_outputs(dir: &Path, command: &str, config: Value, wall: f64, outputs: &Outputs) -> Result<(), Failure> {
    fs::create_dir_all(dir)
        .with_context(|| format!("creating {}", dir.display()))
        .map_err(Failure::Runtime)?;
    let mut files = outputs.files.clone();
    let mut summary = serde_json::to_vec_pretty(&outputs.summary).map_err(runtime)?;
    summary.push(b'\n');
    files.push(("summary.json".into(), summary));
    let mut digests = BTreeMap::new();
    for (name, bytes) in &files {
        fs::write(dir.join(name), bytes)
            .with_context(|| format!("writing {name}"))
            .map_err(Failure::Runtime)?;
        digests.insert(name.clone(), digest(bytes));
    }
    let manifest = Manifest {
        subcommand: command.to_string(),
        seed: config.get("seed").and_then(Value::as_u64),
        config,
        version: env!("CARGO_PKG_VERSION").to_string(),
        wall_time_seconds: wall,
        outputs: digests,
    };
    let mut bytes = serde_json::to_vec_pretty(&manifest).map_err(runtime)?;
    bytes.push(b'\n');
    fs::write(dir.join("manifest.json"), bytes)
        .context("writing manifest.json")
        .map_err(Failure::Runtime)
}

/// Runs a resolved experiment; returns `false` when an assertion failed.
fn perform<A: Experiment>(command: &str, args: &A, out: Option<&Path>) -> Result<(Outputs, Value), Failure> {
    let config = serde_json::to_value(args).map_err(runtime)?;
    let start = Instant::now();
    let outputs = args.run()?;
    if let Some(dir) = out {
        write_outputs(dir, command, config.clone(), start.elapsed().as_secs_f64(), &outputs)?;
    }
    Ok((outputs, config))
}

pub fn execute<A: Experiment>(common: CommonArgs, command: &str, args: A) -> Result<bool, Failure> {
    let args = resolve(&args, common.config.as_deref())?;
    let (outputs, _) = perform(command, &args, common.out.as_deref())?;
    match &outputs.stdout {
        Some(text) => print!("{text}"),
        None => println!("{}", serde_json::to_string_pretty(&outputs.summary).map_err(runtime)?),
    }
    Ok(outputs.summary.pass != Some(false))
}

fn replay_as<A: Experiment>(command: &str, config: Value, out: &Path) -> Result<(), Failure> {
    let args: A = serde_json::from_value(config)
        .context("manifest config does not match the subcommand")
        .map_err(Failure::Usage)?;
    perform(command, &args, Some(out)).map(|_| ())
}

/// Re-runs `manifest` into `out` and compares digests.
pub fn replay(manifest: &Path, out: &Path) -> Result<bool, Failure> {
    let text = fs::read_to_string(manifest)
        .with_context(|| format!("reading {}", manifest.display()))
        .map_err(Failure::Usage)?;
    let original: Manifest = serde_json::from_str(&text).context("parsing manifest").map_err(Failure::Usage)?;
    let config = original.config.clone();
    match original.subcommand.as_str() {
        "simulate" => replay_as::<SimulateArgs>("simulate", config, out)?,
        "hrv-pp" => replay_as::<HrvPpArgs>("hrv-pp", config, out)?,
        "residual-tail" => replay_as::<ResidualTailArgs>("residual-tail", config, out)?,
        "monitor" => replay_as::<MonitorArgs>("monitor", config, out)?,
        "cond-law" => replay_as::<CondLawArgs>("cond-law", config, out)?,
        "dist" => replay_as::<DistArgs>("dist", config, out)?,
        other => return Err(Failure::usage(format!("unknown subcommand `{other}` in manifest"))),
    }
    let fresh: Manifest = serde_json::from_str(
        &fs::read_to_string(out.join("manifest.json")).map_err(runtime)?,
    )
    .map_err(runtime)?;
    let mismatched: Vec<&String> = original
        .outputs
        .iter()
        .filter(|(name, d)| fresh.outputs.get(*name) != Some(d))
        .map(|(name, _)| name)
        .collect();
    let identical = mismatched.is_empty() && fresh.outputs.len() == original.outputs.len();
    let report = serde_json::json!({
        "replayed": original.subcommand,
        "out": PathBuf::from(out),
        "identical": identical,
        "mismatched": mismatched,
    });
    println!("{}", serde_json::to_string_pretty(&report).map_err(runtime)?);
    Ok(identical)
}
