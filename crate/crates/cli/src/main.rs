//! `rmt`: command-line driver for sampling, spectra, experiments and the
//! exact moment oracle.
//!
//! Exit codes: 0 when every check passes, 1 when an acceptance check fails,
//! 2 for configuration errors.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use rmt_core::ensembles::{EnsembleSpec, KindSpec, Provenance};
use rmt_core::experiments::{emit_all, run_expected_density, run_moment_track, run_opnorm, run_semicircle, ExperimentConfig, Metric};
use rmt_core::mixtures::ComponentLaw;
use rmt_core::oracle::oracle_report;
use rmt_core::perturb::run_suite;
use rmt_core::rng::{derive_seed, stream_from_seed};
use rmt_core::spectra::eigenvalues;
use rmt_core::BandSpec;

#[derive(Parser)]
#[command(name = "rmt", version, about = "Random matrix ensembles with exchangeable entries")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Overrides the seed in the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (defaults to all cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Draw one matrix and write its entries.
    Sample(Common),
    /// Eigenvalues and histogram of one matrix.
    Spectrum(Common),
    /// KS distance to the semicircle (or moment tracking) over a size grid.
    Semicircle(Common),
    /// Pooled spectral density against the expected limit.
    Density(Common),
    /// Operator-norm and second-singular-value scaling.
    Opnorm(Common),
    /// Exact expected trace against Monte Carlo, plus path bounds.
    Oracle(Common),
    /// Randomized perturbation-bound suite.
    Perturb(Common),
}

enum Failure {
    Config(String),
    Run(String),
}

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Run(e.to_string())
    }
}

#[derive(Deserialize)]
struct SampleConfig {
    #[serde(flatten)]
    ensemble: EnsembleSpec,
    #[serde(default)]
    seed: u64,
    /// Divisor applied before solving; defaults to `√w`.
    #[serde(default)]
    scale: Option<f64>,
    #[serde(default = "default_bins")]
    bins: usize,
}

fn default_bins() -> usize {
    50
}

#[derive(Serialize)]
struct SampleOutput<'a> {
    n: usize,
    spec: BandSpec,
    provenance: &'a Provenance,
    entries: Vec<Vec<f64>>,
}

#[derive(Serialize)]
struct SpectrumOutput {
    scale: f64,
    operator_norm: f64,
    eigenvalues: Vec<f64>,
}

#[derive(Deserialize)]
struct OracleConfig {
    n: usize,
    #[serde(default)]
    half_width: Option<usize>,
    kind: KindSpec,
    entries: ComponentLaw,
    k: u32,
    #[serde(default = "default_mc_trials")]
    trials: usize,
    #[serde(default)]
    seed: u64,
}

fn default_mc_trials() -> usize {
    100_000
}

#[derive(Deserialize)]
struct PerturbConfig {
    #[serde(default = "default_instances")]
    instances: usize,
    #[serde(default)]
    seed: u64,
}

fn default_instances() -> usize {
    1000
}

fn read_config<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn sample_matrix(c: &Common) -> Result<(SampleConfig, rmt_core::MatrixSample), Failure> {
    let mut cfg: SampleConfig = read_config(&c.config)?;
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    let spec = cfg.ensemble.band_spec().map_err(|e| Failure::Config(e.to_string()))?;
    let seed = derive_seed(cfg.seed, &[spec.n as u64]);
    let sample = cfg.ensemble.entries.build(&spec, &mut stream_from_seed(seed)).with_seed(seed);
    Ok((cfg, sample))
}

fn cmd_sample(c: &Common) -> Result<bool, Failure> {
    let (_, sample) = sample_matrix(c)?;
    let n = sample.spec.n;
    let out = SampleOutput {
        n,
        spec: sample.spec,
        provenance: &sample.provenance,
        entries: (0..n).map(|i| sample.entries.row(i).to_vec()).collect(),
    };
    write_json(&c.out.join("sample.json"), &out)?;
    Ok(true)
}

fn cmd_spectrum(c: &Common) -> Result<bool, Failure> {
    let (cfg, sample) = sample_matrix(c)?;
    let scale = cfg.scale.unwrap_or_else(|| (sample.spec.bandwidth() as f64).sqrt());
    let summary = eigenvalues(&sample.entries, scale)?;
    let norm = summary.operator_norm()?;
    let edge = norm.max(f64::MIN_POSITIVE);
    let hist = summary.esd_histogram(cfg.bins, -edge, edge).map_err(|e| Failure::Config(e.to_string()))?;
    fs::write(c.out.join("histogram.csv"), hist.to_csv())?;
    write_json(&c.out.join("spectrum.json"), &SpectrumOutput { scale, operator_norm: norm, eigenvalues: summary.eigenvalues })?;
    Ok(true)
}

fn cmd_experiment(c: &Common, allowed: &[&str]) -> Result<bool, Failure> {
    let mut cfg: ExperimentConfig = read_config(&c.config)?;
    if let Some(s) = c.seed {
        cfg.master_seed = s;
    }
    let kind = match cfg.metric {
        Metric::KsVsTarget => "ks_vs_target",
        Metric::MomentTrack(_) => "moment_track",
        Metric::AggregateHistogram => "aggregate_histogram",
        Metric::OpnormRatio => "opnorm_ratio",
        Metric::SecondSingularRatio => "second_singular_ratio",
    };
    if !allowed.contains(&kind) {
        return Err(Failure::Config(format!("metric {kind} is not handled by this command")));
    }
    for w in cfg.validate().map_err(|e| Failure::Config(e.to_string()))? {
        eprintln!("warning: {w}");
    }
    let result = match cfg.metric {
        Metric::KsVsTarget => run_semicircle(&cfg),
        Metric::MomentTrack(_) => run_moment_track(&cfg),
        Metric::AggregateHistogram => run_expected_density(&cfg),
        Metric::OpnormRatio | Metric::SecondSingularRatio => run_opnorm(&cfg),
    }
    .map_err(|e| if e.is_config_error() { Failure::Config(e.to_string()) } else { Failure::Run(e.to_string()) })?;
    emit_all(&result, &c.out)?;
    let outcomes = result.check(&cfg.accept);
    write_json(&c.out.join(format!("{}_accept.json", result.name)), &outcomes)?;
    for o in &outcomes {
        println!("{} {} {:?}", if o.pass { "PASS" } else { "FAIL" }, o.rule.metric, o.observed);
    }
    Ok(outcomes.iter().all(|o| o.pass))
}

fn cmd_oracle(c: &Common) -> Result<bool, Failure> {
    let mut cfg: OracleConfig = read_config(&c.config)?;
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    cfg.entries.validate().map_err(|e| Failure::Config(e.to_string()))?;
    let spec = cfg.kind.band_spec(cfg.n, cfg.half_width).map_err(|e| Failure::Config(e.to_string()))?;
    let mut rng = stream_from_seed(derive_seed(cfg.seed, &[cfg.n as u64, u64::from(cfg.k)]));
    let report = oracle_report(&spec, &cfg.entries, cfg.k, cfg.trials, &mut rng).map_err(|e| Failure::Config(e.to_string()))?;
    write_json(&c.out.join("oracle.json"), &report)?;
    Ok(report.pass())
}

fn cmd_perturb(c: &Common) -> Result<bool, Failure> {
    let mut cfg: PerturbConfig = read_config(&c.config)?;
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    let report = run_suite(cfg.instances, cfg.seed)?;
    write_json(&c.out.join("perturb.json"), &report)?;
    Ok(report.pass)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let common = match &cli.command {
        Command::Sample(c)
        | Command::Spectrum(c)
        | Command::Semicircle(c)
        | Command::Density(c)
        | Command::Opnorm(c)
        | Command::Oracle(c)
        | Command::Perturb(c) => c.clone(),
    };
    if let Some(t) = common.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    if let Err(e) = fs::create_dir_all(&common.out) {
        eprintln!("error: {}: {e}", common.out.display());
        return ExitCode::from(2);
    }
    let outcome = match &cli.command {
        Command::Sample(c) => cmd_sample(c),
        Command::Spectrum(c) => cmd_spectrum(c),
        Command::Semicircle(c) => cmd_experiment(c, &["ks_vs_target", "moment_track"]),
        Command::Density(c) => cmd_experiment(c, &["aggregate_histogram"]),
        Command::Opnorm(c) => cmd_experiment(c, &["opnorm_ratio", "second_singular_ratio"]),
        Command::Oracle(c) => cmd_oracle(c),
        Command::Perturb(c) => cmd_perturb(c),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Run(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
