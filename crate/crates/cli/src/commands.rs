//! Flags, resolved configs and runners of the experiment subcommands.

use std::fmt::Write as _;
use std::path::PathBuf;

use bigjump::montecarlo::{
    conditional_diagnostics, exact_orderstat_tail, hrv_pp_convergence, monitoring_mc_family,
    residual_tail_convergence, substream, ConvergenceRow, MonitoringEvent, RunConfig,
};
use bigjump::{
    build_centered_risk, build_risk, monitoring_factor_two_term, monitoring_limit_t0zero_gamma,
    BaseProcessModel, ExperimentConfig, Jump, MarkedPattern, ParetoLaw, RiskPath,
};
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::output::{finite, Experiment, Failure, Outputs, Summary};

/// Output and config handling shared by every subcommand. Not part of the
/// resolved config.
#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// Directory receiving CSV files, summary.json and manifest.json.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// JSON object whose keys override the corresponding flags.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelName {
    Poisson,
    GammaRenewal,
    Grid,
    Binomial,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ModelArgs {
    /// Base arrival process.
    #[arg(long, value_enum)]
    pub model: ModelName,
    /// Poisson intensity (arrivals per unit time).
    #[arg(long, value_name = "PER_TIME")]
    pub rate: Option<f64>,
    /// Observation horizon T (time units).
    #[arg(long = "T", value_name = "TIME")]
    #[serde(rename = "T")]
    pub horizon: f64,
    /// Number of points of the grid or binomial model (count).
    #[arg(long, value_name = "COUNT")]
    pub n: Option<u64>,
    /// Pareto tail index of the claim sizes (dimensionless, > 0).
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
}

impl ModelArgs {
    fn build(&self) -> Result<BaseProcessModel<f64>, Failure> {
        let need_n = |name: &str| self.n.ok_or_else(|| Failure::usage(format!("--model {name} needs --n")));
        let model = match self.model {
            ModelName::Poisson => {
                let rate = self.rate.ok_or_else(|| Failure::usage("--model poisson needs --rate"))?;
                BaseProcessModel::poisson(rate, self.horizon)?
            }
            ModelName::GammaRenewal => BaseProcessModel::gamma_renewal(self.horizon)?,
            ModelName::Grid => BaseProcessModel::grid(need_n("grid")?, self.horizon)?,
            ModelName::Binomial => BaseProcessModel::binomial(need_n("binomial")?, self.horizon)?,
        };
        if self.rate.is_some() && self.model != ModelName::Poisson {
            return Err(Failure::usage("--rate only applies to --model poisson"));
        }
        ParetoLaw::new(self.alpha)?;
        Ok(model)
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct RunArgs {
    /// Simulated paths (count).
    #[arg(long, default_value_t = 1_000_000)]
    pub samples: u64,
    /// Master seed of the random streams.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Paths per random substream (count).
    #[arg(long, default_value_t = bigjump::montecarlo::DEFAULT_CHUNK_SIZE)]
    pub chunk_size: u64,
    /// Worker threads, 0 for all cores; results do not depend on it.
    #[arg(long, env = "BIGJUMP_THREADS", default_value_t = 0)]
    pub threads: usize,
}

impl RunArgs {
    fn config(&self) -> RunConfig {
        RunConfig {
            samples: self.samples,
            seed: self.seed,
            chunk_size: self.chunk_size,
            workers: self.threads,
        }
    }
}

fn experiment(model: &ModelArgs, k: usize, run: &RunArgs) -> Result<ExperimentConfig, Failure> {
    Ok(ExperimentConfig::new(model.build()?, model.alpha, k, run.config())?)
}

fn check_tolerance(tol: Option<f64>) -> Result<(), Failure> {
    match tol {
        Some(t) if !(t >= 0.0) => Err(Failure::usage("--assert tolerance must be nonnegative")),
        _ => Ok(()),
    }
}

fn ratio_pass(tol: Option<f64>, ratio: f64) -> Option<bool> {
    tol.map(|t| (ratio - 1.0).abs() <= t)
}

fn csv(header: &str, rows: impl IntoIterator<Item = String>) -> Vec<u8> {
    let mut text = format!("{header}\n");
    for row in rows {
        text.push_str(&row);
        text.push('\n');
    }
    text.into_bytes()
}

fn convergence_csv(first: &str, rows: &[ConvergenceRow]) -> Vec<u8> {
    csv(
        &format!("{first},scaled_estimate,ci_low,ci_high,asymptote,ratio"),
        rows.iter().map(|r| {
            format!(
                "{},{},{},{},{},{}",
                r.point, r.scaled_estimate, r.ci_low, r.ci_high, r.asymptote, r.ratio
            )
        }),
    )
}

fn convergence_summary(command: &str, rows: &[ConvergenceRow], tol: Option<f64>) -> Summary {
    let last = rows.last().expect("grids are nonempty");
    Summary {
        command: command.into(),
        estimate: finite(last.scaled_estimate),
        asymptote: finite(last.asymptote),
        ratio: finite(last.ratio),
        ci: Some([last.ci_low, last.ci_high]),
        pass: ratio_pass(tol, last.ratio),
        details: json!({
            "rows": rows,
            "zero_hit_points": rows.iter().filter(|r| r.zero_hits).map(|r| r.point).collect::<Vec<_>>(),
        }),
    }
}

// ---------------------------------------------------------------- simulate

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SimulateArgs {
    #[command(flatten)]
    #[serde(skip)]
    pub common: CommonArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    /// Seed of the random stream.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Subtract this constant from every claim in the risk path (claim units).
    #[arg(long, value_name = "CLAIM")]
    pub center: Option<f64>,
}

impl Experiment for SimulateArgs {
    fn run(&self) -> Result<Outputs, Failure> {
        let model = self.model.build()?;
        let law = ParetoLaw::new(self.model.alpha)?;
        let mut rng = substream(self.seed, 0);
        let times = model.sample(&mut rng);
        let pattern = MarkedPattern::mark(&times, &law, &mut rng);
        let path = match self.center {
            Some(c) => build_centered_risk(&pattern, c),
            None => build_risk(&pattern),
        };
        let pattern_csv = csv("time,mark", pattern.points().iter().map(|p| format!("{},{}", p.time, p.mark)));
        let mut risk_csv = Vec::new();
        path.write_csv(&mut risk_csv).map_err(|e| Failure::Runtime(e.into()))?;
        let total = path.evaluate(model.horizon);
        let summary = Summary {
            command: "simulate".into(),
            estimate: finite(total),
            asymptote: None,
            ratio: None,
            ci: None,
            pass: None,
            details: json!({ "points": pattern.len(), "total_claims": total }),
        };
        let stdout = self.common.out.is_none().then(|| String::from_utf8(pattern_csv.clone()).expect("ascii"));
        Ok(Outputs {
            files: vec![("pattern.csv".into(), pattern_csv), ("risk.csv".into(), risk_csv)],
            summary,
            stdout,
        })
    }
}

// ------------------------------------------------------------------ hrv-pp

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct HrvPpArgs {
    #[command(flatten)]
    #[serde(skip)]
    pub common: CommonArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub run: RunArgs,
    /// Order: k+1 rescaled marks must exceed r.
    #[arg(long, default_value_t = 1)]
    pub k: usize,
    /// Exceedance level on the rescaled mark axis (claim units / a_n).
    #[arg(long, default_value_t = 1.0)]
    pub r: f64,
    /// Comma-separated scaling indices n (counts).
    #[arg(long, value_delimiter = ',', default_value = "10,30,100,300")]
    pub n_grid: Vec<u64>,
    /// Fail (exit 1) when |ratio - 1| at the last grid point exceeds this.
    #[arg(long = "assert", value_name = "TOL")]
    pub assert_tol: Option<f64>,
}

impl Experiment for HrvPpArgs {
    fn run(&self) -> Result<Outputs, Failure> {
        check_tolerance(self.assert_tol)?;
        let cfg = experiment(&self.model, self.k, &self.run)?;
        let rows = hrv_pp_convergence(&cfg, self.r, &self.n_grid)?;
        Ok(Outputs {
            files: vec![("convergence.csv".into(), convergence_csv("n", &rows))],
            summary: convergence_summary("hrv-pp", &rows, self.assert_tol),
            stdout: None,
        })
    }
}

// ----------------------------------------------------------- residual-tail

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ResidualTailArgs {
    #[command(flatten)]
    #[serde(skip)]
    pub common: CommonArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub run: RunArgs,
    /// Number of ceded largest claims.
    #[arg(long, default_value_t = 1)]
    pub k: usize,
    /// Comma-separated claim levels x > 1 (claim units).
    #[arg(long, value_delimiter = ',', required = true)]
    pub x: Vec<f64>,
    /// Evaluate the exact order-statistic tail instead of simulating.
    #[arg(long)]
    pub oracle: bool,
    /// Fail (exit 1) when |ratio - 1| at the last level exceeds this.
    #[arg(long = "assert", value_name = "TOL")]
    pub assert_tol: Option<f64>,
}

impl Experiment for ResidualTailArgs {
    fn run(&self) -> Result<Outputs, Failure> {
        check_tolerance(self.assert_tol)?;
        let cfg = experiment(&self.model, self.k, &self.run)?;
        if !self.oracle {
            let rows = residual_tail_convergence(&cfg, &self.x)?;
            return Ok(Outputs {
                files: vec![("convergence.csv".into(), convergence_csv("x", &rows))],
                summary: convergence_summary("residual-tail", &rows, self.assert_tol),
                stdout: None,
            });
        }
        let ctx = cfg.context()?;
        let mut rows = Vec::new();
        for &x in &self.x {
            let exact = exact_orderstat_tail(&cfg.model, cfg.alpha, cfg.k, x)?;
            let asymptote = ctx.residual_tail(x)?;
            rows.push((x, exact, asymptote));
        }
        let (_, last, asymptote) = *rows.last().ok_or_else(|| Failure::usage("--x needs at least one level"))?;
        let ratio = last.value / asymptote;
        let table = csv(
            "x,exact,asymptote,ratio,truncation_bound",
            rows.iter()
                .map(|(x, e, a)| format!("{x},{},{a},{},{}", e.value, e.value / a, e.truncation_bound)),
        );
        let summary = Summary {
            command: "residual-tail".into(),
            estimate: finite(last.value),
            asymptote: finite(asymptote),
            ratio: finite(ratio),
            ci: None,
            pass: ratio_pass(self.assert_tol, ratio),
            details: json!({
                "event": "X_{N-k:N} > x",
                "exact": rows.iter().map(|(x, e, a)| json!({
                    "x": x, "exact": e.value, "asymptote": a, "truncation_bound": e.truncation_bound,
                })).collect::<Vec<_>>(),
            }),
        };
        Ok(Outputs {
            files: vec![("oracle.csv".into(), table)],
            summary,
            stdout: None,
        })
    }
}

// ----------------------------------------------------------------- monitor

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct MonitorArgs {
    #[command(flatten)]
    #[serde(skip)]
    pub common: CommonArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub run: RunArgs,
    /// Number of ceded largest claims.
    #[arg(long, default_value_t = 1)]
    pub k: usize,
    /// Conditioning level of the residual risk at t0 (claim units).
    #[arg(long)]
    pub x: f64,
    /// First monitoring time (time units).
    #[arg(long)]
    pub t0: f64,
    /// Second monitoring time (time units).
    #[arg(long)]
    pub t1: f64,
    /// Growth ratio u > 1 of the residual risk.
    #[arg(long)]
    pub u: f64,
    /// Comma-separated relative widths of the conditioning band.
    #[arg(long, value_delimiter = ',', default_value = "0.1")]
    pub eps: Vec<f64>,
    /// Compare against the t0 -> 0 limit of the gamma renewal model.
    #[arg(long)]
    pub t0_zero: bool,
    /// Fail (exit 1) when |ratio - 1| at the last eps exceeds this.
    #[arg(long = "assert", value_name = "TOL")]
    pub assert_tol: Option<f64>,
}

impl Experiment for MonitorArgs {
    fn run(&self) -> Result<Outputs, Failure> {
        check_tolerance(self.assert_tol)?;
        if self.eps.is_empty() {
            return Err(Failure::usage("--eps needs at least one value"));
        }
        let cfg = experiment(&self.model, self.k, &self.run)?;
        let ctx = cfg.context()?;
        let (limit, ratio_term) = if self.t0_zero {
            if self.model.model != ModelName::GammaRenewal {
                return Err(Failure::usage("--t0-zero applies to --model gamma-renewal only"));
            }
            let limit = monitoring_limit_t0zero_gamma(self.t1, self.u, cfg.alpha, cfg.k)?;
            (limit, bigjump::gamma_monitoring_ratio_t0zero(self.t1)?)
        } else {
            (ctx.monitoring_limit(self.u, self.t0, self.t1)?, ctx.monitoring_ratio(self.t0, self.t1)?)
        };
        let two_term = ratio_term * monitoring_factor_two_term(self.u, cfg.alpha, cfg.k)?;
        let events: Vec<MonitoringEvent> = self
            .eps
            .iter()
            .map(|&eps| MonitoringEvent {
                x: self.x,
                t0: self.t0,
                t1: self.t1,
                u: self.u,
                eps,
            })
            .collect();
        let estimates = monitoring_mc_family(&cfg, &events)?;
        let table = csv(
            "eps,estimate,ci_low,ci_high,conditioned,joint,limit,ratio",
            estimates.iter().map(|e| {
                let (lo, hi) = e.conditional.scaled_ci();
                format!(
                    "{},{},{lo},{hi},{},{},{limit},{}",
                    e.event.eps,
                    e.value(),
                    e.conditioning.hits,
                    e.conditional.hits,
                    e.value() / limit
                )
            }),
        );
        let last = estimates.last().expect("nonempty eps grid");
        let ratio = last.value() / limit;
        let (lo, hi) = last.conditional.scaled_ci();
        let summary = Summary {
            command: "monitor".into(),
            estimate: finite(last.value()),
            asymptote: finite(limit),
            ratio: finite(ratio),
            ci: Some([lo, hi]),
            pass: ratio_pass(self.assert_tol, ratio),
            details: json!({
                "measure_ratio": ratio_term,
                "two_term_limit": two_term,
                "t0_zero": self.t0_zero,
                "rows": estimates.iter().map(|e| json!({
                    "eps": e.event.eps,
                    "estimate": finite(e.value()),
                    "conditioning_probability": e.conditioning.p_hat,
                    "conditioned": e.conditioning.hits,
                    "joint": e.conditional.hits,
                    "rare": e.rare,
                })).collect::<Vec<_>>(),
            }),
        };
        Ok(Outputs {
            files: vec![("monitor.csv".into(), table)],
            summary,
            stdout: None,
        })
    }
}

// ---------------------------------------------------------------- cond-law

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct CondLawArgs {
    #[command(flatten)]
    #[serde(skip)]
    pub common: CommonArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub run: RunArgs,
    /// Number of ceded largest claims.
    #[arg(long, default_value_t = 1)]
    pub k: usize,
    /// Residual-risk level x > 1 (claim units).
    #[arg(long)]
    pub x: f64,
    /// Draws from the limit law (count).
    #[arg(long, default_value_t = 20_000)]
    pub limit_samples: usize,
    /// Significance level of the KS critical values.
    #[arg(long, default_value_t = 0.01)]
    pub level: f64,
    /// Fail (exit 1) unless 1 - (exactly k+1 big claims frequency) <= TOL
    /// and both KS distances are below their critical values.
    #[arg(long = "assert", value_name = "TOL")]
    pub assert_tol: Option<f64>,
}

impl Experiment for CondLawArgs {
    fn run(&self) -> Result<Outputs, Failure> {
        check_tolerance(self.assert_tol)?;
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Failure::usage("--level must lie in (0, 1)"));
        }
        let cfg = experiment(&self.model, self.k, &self.run)?;
        let s = conditional_diagnostics(&cfg, self.x, self.limit_samples, self.level)?;
        let mut table = String::from("metric,value,critical\n");
        let _ = writeln!(table, "conditioned,{},{}", s.conditioned, bigjump::montecarlo::MIN_CONDITIONED);
        let _ = writeln!(table, "exact_big_claims,{},", s.exact_big_claims);
        let _ = writeln!(table, "time_ks,{},{}", s.time_ks, s.time_critical);
        let _ = writeln!(table, "time_ks_limit,{},{}", s.time_ks_limit, s.time_critical_limit);
        let _ = writeln!(table, "size_ks,{},{}", s.size_ks, s.size_critical);
        let pass = self
            .assert_tol
            .map(|t| 1.0 - s.exact_big_claims <= t && s.time_uniform_ok() && s.size_ok());
        let summary = Summary {
            command: "cond-law".into(),
            estimate: finite(s.exact_big_claims),
            asymptote: Some(1.0),
            ratio: finite(s.exact_big_claims),
            ci: None,
            pass,
            details: serde_json::to_value(&s).map_err(|e| Failure::Runtime(e.into()))?,
        };
        Ok(Outputs {
            files: vec![("conditional.csv".into(), table.into_bytes())],
            summary,
            stdout: None,
        })
    }
}

// -------------------------------------------------------------------- dist

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct DistArgs {
    #[command(flatten)]
    #[serde(skip)]
    pub common: CommonArgs,
    /// Comma-separated positive jump sizes (claim units).
    #[arg(long, value_delimiter = ',', required = true)]
    pub jumps: Vec<f64>,
    /// Comma-separated jump times (time units); defaults to 1, 2, ...
    #[arg(long, value_delimiter = ',')]
    pub times: Option<Vec<f64>>,
    /// Number of jumps allowed in the cones.
    #[arg(long, default_value_t = 1)]
    pub k: usize,
}

impl Experiment for DistArgs {
    fn run(&self) -> Result<Outputs, Failure> {
        let times: Vec<f64> = match &self.times {
            Some(t) if t.len() != self.jumps.len() => {
                return Err(Failure::usage("--times and --jumps need the same length"));
            }
            Some(t) => t.clone(),
            None => (1..=self.jumps.len()).map(|i| i as f64).collect(),
        };
        let horizon = times.iter().copied().fold(1.0, f64::max);
        let jumps = times
            .iter()
            .zip(&self.jumps)
            .map(|(&time, &size)| Jump { time, size })
            .collect();
        let path = RiskPath::from_jumps(horizon, jumps)?;
        let d_dk = path.dist_to_dk(self.k);
        let d_jk = path.dist_to_jk(self.k)?;
        let summary = Summary {
            command: "dist".into(),
            estimate: Some(d_dk),
            asymptote: None,
            ratio: None,
            ci: None,
            pass: None,
            details: json!({ "d_Dk": d_dk, "d_Jk": d_jk, "k": self.k }),
        };
        Ok(Outputs {
            files: vec![("dist.csv".into(), csv("k,d_Dk,d_Jk", [format!("{},{d_dk},{d_jk}", self.k)]))],
            summary,
            stdout: Some(format!("{}\n", json!({ "d_Dk": d_dk, "d_Jk": d_jk }))),
        })
    }
}
