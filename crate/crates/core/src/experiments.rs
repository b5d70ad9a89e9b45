//! Seeded experiment runner: convergence of spectral distributions and
//! operator-norm scaling over a grid of sizes, with CSV/JSON emission.
//!
//! Every trial draws from its own stream derived from
//! `(master_seed, N, trial)`, so results do not depend on thread count or
//! completion order.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ensembles::{half_width_rule, BandSpec, EnsembleError, EntryModel, KindSpec, MatrixSample};
use crate::limits::{ks_distance, semicircle_moment, LimitsError, TargetLaw};
use crate::mixtures::{empirical_mean, empirical_variance, pushforward_nu, ComponentLaw, MixtureError};
use crate::rng::{derive_seed, stream_from_seed};
use crate::spectra::{eigenvalues, EmpiricalCdf, Histogram, SpectraError, SpectralSummary};
use crate::stats::quantile_sorted;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error(transparent)]
    Ensemble(#[from] EnsembleError),
    #[error(transparent)]
    Mixture(#[from] MixtureError),
    #[error(transparent)]
    Spectra(#[from] SpectraError),
    #[error(transparent)]
    Limits(#[from] LimitsError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl ExperimentError {
    /// Errors that stem from the configuration rather than the run.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            ExperimentError::Config(_)
                | ExperimentError::Ensemble(_)
                | ExperimentError::Mixture(_)
                | ExperimentError::Limits(_)
                | ExperimentError::Json(_)
        )
    }
}

/// Band kind plus either a fixed half-width or the rule
/// `b_N = max(1, ⌊c·N^q⌋)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleRule {
    pub kind: KindSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub half_width: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
}

impl EnsembleRule {
    pub fn full() -> Self {
        EnsembleRule { kind: KindSpec::Full, half_width: None, c: None, q: None }
    }

    pub fn growth(kind: KindSpec, c: f64, q: f64) -> Self {
        EnsembleRule { kind, half_width: None, c: Some(c), q: Some(q) }
    }

    pub fn band_spec(&self, n: usize) -> Result<BandSpec, ExperimentError> {
        let half_width = match (self.half_width, self.c, self.q) {
            (Some(b), _, _) => Some(b),
            (None, Some(c), Some(q)) => Some(half_width_rule(n, c, q)?),
            (None, None, None) => None,
            _ => return Err(ExperimentError::Config("growth rule needs both c and q".into())),
        };
        Ok(self.kind.band_spec(n, half_width)?)
    }
}

/// Per-trial statistic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    KsVsTarget,
    OpnormRatio,
    SecondSingularRatio,
    MomentTrack(u32),
    AggregateHistogram,
}

impl Metric {
    pub fn label(&self) -> String {
        match self {
            Metric::KsVsTarget => "ks_vs_target".into(),
            Metric::OpnormRatio => "opnorm_ratio".into(),
            Metric::SecondSingularRatio => "second_singular_ratio".into(),
            Metric::MomentTrack(k) => format!("moment_{k}"),
            Metric::AggregateHistogram => "ks_vs_expected".into(),
        }
    }
}

/// Which summary of the results a rule constrains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    /// Every row.
    #[default]
    Every,
    /// The per-N median.
    Median,
    /// A pooled summary (`l1` or `ks`) of an aggregate-histogram run.
    Pooled,
}

/// `min ≤ statistic ≤ max` for the row metric or an auxiliary key.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcceptRule {
    pub metric: String,
    #[serde(default)]
    pub statistic: Statistic,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max: Option<f64>,
    /// Restrict to one size.
    #[serde(default, rename = "N", skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub name: String,
    pub ensemble: EnsembleRule,
    pub entries: EntryModel,
    pub sizes: Vec<usize>,
    pub trials: usize,
    pub master_seed: u64,
    pub metric: Metric,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<TargetLaw>,
    #[serde(default = "default_bins")]
    pub bins: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub accept: Vec<AcceptRule>,
}

fn default_bins() -> usize {
    50
}

impl ExperimentConfig {
    /// Checks the config and returns warnings that do not stop a run.
    pub fn validate(&self) -> Result<Vec<String>, ExperimentError> {
        let mut warnings = Vec::new();
        if self.sizes.is_empty() {
            return Err(ExperimentError::Config("sizes must not be empty".into()));
        }
        if self.sizes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(ExperimentError::Config("sizes must be strictly ascending".into()));
        }
        if self.trials == 0 {
            return Err(ExperimentError::Config("trials must be at least 1".into()));
        }
        if self.bins == 0 {
            return Err(ExperimentError::Config("bins must be at least 1".into()));
        }
        if let Some(q) = self.ensemble.q {
            if q == 0.0 {
                warnings.push("q = 0 gives a bandwidth that does not grow with N".into());
            } else if !(q > 0.0 && q <= 1.0) {
                return Err(ExperimentError::Config(format!("q must lie in (0, 1], got {q}")));
            } else if q < 0.5 {
                warnings.push(format!("q = {q} < 0.5: no calibrated tolerance applies"));
            }
        }
        self.entries.validate()?;
        if let Some(t) = &self.target {
            t.validate()?;
        }
        for &n in &self.sizes {
            self.ensemble.band_spec(n)?;
        }
        Ok(warnings)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    #[serde(rename = "N")]
    pub n: usize,
    pub trial: usize,
    pub tau_tag: String,
    pub metric: String,
    pub value: f64,
    pub aux: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    #[serde(rename = "N")]
    pub n: usize,
    pub metric: String,
    pub trials: usize,
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
}

/// Pooled-spectrum comparison for one size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PooledSummary {
    #[serde(rename = "N")]
    pub n: usize,
    /// L¹ distance between histogram and target densities.
    pub l1: f64,
    /// KS distance between the pooled spectrum and the target.
    pub ks: f64,
    /// Bin left out because it holds the atom at zero.
    pub excluded_bin: Option<usize>,
    pub histogram: Histogram,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub name: String,
    pub metric: String,
    pub rows: Vec<ResultRow>,
    pub aggregates: Vec<Aggregate>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub pooled: Vec<PooledSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcceptOutcome {
    pub rule: AcceptRule,
    pub observed: Vec<f64>,
    pub pass: bool,
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v
}

/// Median and quartiles of the row metric for every size.
pub fn aggregate_rows(rows: &[ResultRow]) -> Vec<Aggregate> {
    let mut by_n: BTreeMap<(usize, String), Vec<f64>> = BTreeMap::new();
    for r in rows {
        by_n.entry((r.n, r.metric.clone())).or_default().push(r.value);
    }
    by_n.into_iter()
        .map(|((n, metric), v)| {
            let v = sorted(v);
            Aggregate {
                n,
                metric,
                trials: v.len(),
                median: quantile_sorted(&v, 0.5).unwrap(),
                q25: quantile_sorted(&v, 0.25).unwrap(),
                q75: quantile_sorted(&v, 0.75).unwrap(),
            }
        })
        .collect()
}

impl ExperimentResult {
    /// Values of the row metric, or of an auxiliary key, for one size or all.
    pub fn values(&self, key: &str, n: Option<usize>) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| n.map_or(true, |m| r.n == m))
            .filter_map(|r| if r.metric == key { Some(r.value) } else { r.aux.get(key).copied() })
            .collect()
    }

    pub fn medians(&self, key: &str) -> Vec<(usize, f64)> {
        let mut sizes: Vec<usize> = self.rows.iter().map(|r| r.n).collect();
        sizes.dedup();
        sizes.into_iter().map(|n| (n, quantile_sorted(&sorted(self.values(key, Some(n))), 0.5).unwrap_or(f64::NAN))).collect()
    }

    pub fn check(&self, rules: &[AcceptRule]) -> Vec<AcceptOutcome> {
        rules
            .iter()
            .map(|rule| {
                let observed: Vec<f64> = match rule.statistic {
                    Statistic::Every => self.values(&rule.metric, rule.n),
                    Statistic::Median => self
                        .medians(&rule.metric)
                        .into_iter()
                        .filter(|(n, _)| rule.n.map_or(true, |m| *n == m))
                        .map(|x| x.1)
                        .collect(),
                    Statistic::Pooled => self
                        .pooled
                        .iter()
                        .filter(|p| rule.n.map_or(true, |m| p.n == m))
                        .filter_map(|p| match rule.metric.as_str() {
                            "l1" => Some(p.l1),
                            "ks" => Some(p.ks),
                            _ => None,
                        })
                        .collect(),
                };
                let pass = !observed.is_empty()
                    && observed
                        .iter()
                        .all(|&x| rule.min.map_or(true, |lo| x >= lo) && rule.max.map_or(true, |hi| x <= hi));
                AcceptOutcome { rule: rule.clone(), observed, pass }
            })
            .collect()
    }
}

/// One realised matrix of a run.
struct Draw {
    sample: MatrixSample,
    law: ComponentLaw,
    tag: String,
    aux: BTreeMap<String, f64>,
}

fn draw(config: &ExperimentConfig, spec: &BandSpec, n: usize, trial: usize) -> Result<Draw, ExperimentError> {
    let seed = derive_seed(config.master_seed, &[n as u64, trial as u64]);
    let mut rng = stream_from_seed(seed);
    let sample = config.entries.build(spec, &mut rng).with_seed(seed);
    let law = sample.provenance.law.clone();
    let tag = sample.provenance.source.to_string();
    let drawn = sample.drawn_entries();
    let mut aux = BTreeMap::new();
    aux.insert("entry_mean".to_string(), empirical_mean(&drawn)?);
    aux.insert("entry_variance".to_string(), empirical_variance(&drawn)?);
    Ok(Draw { sample, law, tag, aux })
}

fn run_trials<F>(config: &ExperimentConfig, f: F) -> Result<Vec<ResultRow>, ExperimentError>
where
    F: Fn(&BandSpec, Draw) -> Result<(f64, BTreeMap<String, f64>, Vec<f64>), ExperimentError> + Sync,
{
    Ok(run_trials_with_spectra(config, f)?.into_iter().map(|x| x.0).collect())
}

/// Runs every `(N, trial)` cell; rows come back in `(N, trial)` order with
/// the (scaled) spectrum each trial chose to keep.
fn run_trials_with_spectra<F>(config: &ExperimentConfig, f: F) -> Result<Vec<(ResultRow, Vec<f64>)>, ExperimentError>
where
    F: Fn(&BandSpec, Draw) -> Result<(f64, BTreeMap<String, f64>, Vec<f64>), ExperimentError> + Sync,
{
    config.validate()?;
    let label = config.metric.label();
    let mut out = Vec::with_capacity(config.sizes.len() * config.trials);
    for &n in &config.sizes {
        let spec = config.ensemble.band_spec(n)?;
        let cells: Vec<Result<(ResultRow, Vec<f64>), ExperimentError>> = (0..config.trials)
            .into_par_iter()
            .map(|trial| {
                let d = draw(config, &spec, n, trial)?;
                let tag = d.tag.clone();
                let mut aux = d.aux.clone();
                let (value, extra, kept) = f(&spec, d)?;
                aux.extend(extra);
                Ok((ResultRow { n, trial, tau_tag: tag, metric: label.clone(), value, aux }, kept))
            })
            .collect();
        for c in cells {
            out.push(c?);
        }
    }
    Ok(out)
}

fn scaled_spectrum(d: &Draw, spec: &BandSpec) -> Result<SpectralSummary, ExperimentError> {
    Ok(eigenvalues(&d.sample.entries, (spec.bandwidth() as f64).sqrt())?)
}

fn finish(config: &ExperimentConfig, rows: Vec<ResultRow>, pooled: Vec<PooledSummary>) -> ExperimentResult {
    ExperimentResult { name: config.name.clone(), metric: config.metric.label(), aggregates: aggregate_rows(&rows), rows, pooled }
}

/// KS distance of each spectrum (scale `√w_N`) from `σ_v`; for exchangeable
/// entries `v = v(τ)` of the drawn component, read from the tau tag.
pub fn run_semicircle(config: &ExperimentConfig) -> Result<ExperimentResult, ExperimentError> {
    if config.metric != Metric::KsVsTarget {
        return Err(ExperimentError::Config("run_semicircle needs metric ks_vs_target".into()));
    }
    let wigner = matches!(config.entries, EntryModel::Law(_));
    let rows = run_trials(config, |spec, d| {
        let target = match (&config.target, wigner) {
            (Some(t), true) => t.clone(),
            _ => TargetLaw::semicircle(d.law.variance()),
        };
        let summary = scaled_spectrum(&d, spec)?;
        let ks = ks_distance(&summary.esd_cdf(), &target);
        let mut aux = BTreeMap::new();
        aux.insert("reference_variance".to_string(), d.law.variance());
        Ok((ks, aux, Vec::new()))
    })?;
    Ok(finish(config, rows, Vec::new()))
}

/// Target of an aggregate run: the configured law or `σ_μ` of the mixture.
pub fn expected_target(config: &ExperimentConfig) -> TargetLaw {
    config.target.clone().unwrap_or_else(|| TargetLaw::from_pushforward(&pushforward_nu(&config.entries.as_mixture()).nu))
}

/// L¹ distance between a histogram's density and a target density, using
/// the exact target mass of each bin. The bin holding 0 is skipped when
/// the target has an atom there.
pub fn histogram_l1(hist: &Histogram, target: &TargetLaw) -> (f64, Option<usize>) {
    let atom = target.atom_weight();
    let mut excluded = None;
    let mut l1 = 0.0;
    for i in 0..hist.bins() {
        let (a, b) = hist.bin_edges(i);
        let holds_zero = a <= 0.0 && 0.0 < b || (i + 1 == hist.bins() && b == 0.0);
        if atom > 0.0 && holds_zero {
            excluded = Some(i);
            continue;
        }
        let mass = target.cdf_left(b) - target.cdf(a);
        l1 += (hist.counts[i] as f64 / hist.total as f64 - mass).abs();
    }
    (l1, excluded)
}

/// Pools the spectra (scale `√w_N`) of all trials at each size into one
/// histogram on `[−2√v_max, 2√v_max]` and compares it with the expected law.
pub fn run_expected_density(config: &ExperimentConfig) -> Result<ExperimentResult, ExperimentError> {
    if config.metric != Metric::AggregateHistogram {
        return Err(ExperimentError::Config("run_expected_density needs metric aggregate_histogram".into()));
    }
    let target = expected_target(config);
    let radius = target.support_radius();
    if radius <= 0.0 {
        return Err(ExperimentError::Config("target has no continuous part".into()));
    }
    let cells = run_trials_with_spectra(config, |spec, d| {
        let summary = scaled_spectrum(&d, spec)?;
        let ks = ks_distance(&summary.esd_cdf(), &target);
        Ok((ks, BTreeMap::new(), summary.eigenvalues))
    })?;
    let mut rows = Vec::with_capacity(cells.len());
    let mut pooled = Vec::new();
    for &n in &config.sizes {
        let mut hist = Histogram::new(config.bins, -radius, radius)?;
        let mut all = Vec::new();
        for (row, values) in cells.iter().filter(|c| c.0.n == n) {
            hist.add_all(values);
            all.extend_from_slice(values);
            rows.push(row.clone());
        }
        let (l1, excluded_bin) = histogram_l1(&hist, &target);
        let ks = ks_distance(&EmpiricalCdf::from_points(all), &target);
        pooled.push(PooledSummary { n, l1, ks, excluded_bin, histogram: hist });
    }
    Ok(finish(config, rows, pooled))
}

/// Operator-norm scaling. Rows carry `‖X‖/√w_N`, `‖X‖/w_N` and, for full
/// matrices, `s_{N−1}/√N`; the row value is `‖X‖/√w_N` for centred entries
/// and `‖X‖/w_N` otherwise (`opnorm_ratio`), or `s_{N−1}/√w_N`
/// (`second_singular_ratio`).
pub fn run_opnorm(config: &ExperimentConfig) -> Result<ExperimentResult, ExperimentError> {
    if !matches!(config.metric, Metric::OpnormRatio | Metric::SecondSingularRatio) {
        return Err(ExperimentError::Config("run_opnorm needs metric opnorm_ratio or second_singular_ratio".into()));
    }
    let rows = run_trials(config, |spec, d| {
        let w = spec.bandwidth() as f64;
        let summary = eigenvalues(&d.sample.entries, 1.0)?;
        let norm = summary.operator_norm()?;
        let second = if summary.len() > 1 { summary.kth_largest_singular(1)? } else { 0.0 };
        let m = d.law.mean();
        let centred = m.abs() <= 1e-12;
        let mut aux = BTreeMap::new();
        aux.insert("opnorm_sqrt_w".to_string(), norm / w.sqrt());
        aux.insert("opnorm_w".to_string(), norm / w);
        aux.insert("second_singular_sqrt_w".to_string(), second / w.sqrt());
        if spec.is_full() {
            aux.insert("second_singular_sqrt_n".to_string(), second / (spec.n as f64).sqrt());
        }
        aux.insert("reference".to_string(), if centred { 2.0 * d.law.variance().sqrt() } else { m.abs() });
        let value = match config.metric {
            Metric::SecondSingularRatio => second / w.sqrt(),
            _ if centred => norm / w.sqrt(),
            _ => norm / w,
        };
        Ok((value, aux, Vec::new()))
    })?;
    Ok(finish(config, rows, Vec::new()))
}

/// `∫x^k dμ_N` at scale `√w_N`, with the `σ_v` moment as reference.
pub fn run_moment_track(config: &ExperimentConfig) -> Result<ExperimentResult, ExperimentError> {
    let Metric::MomentTrack(k) = config.metric else {
        return Err(ExperimentError::Config("run_moment_track needs metric moment_track".into()));
    };
    let rows = run_trials(config, |spec, d| {
        let summary = scaled_spectrum(&d, spec)?;
        let mut aux = BTreeMap::new();
        aux.insert("reference".to_string(), semicircle_moment(d.law.variance(), k));
        aux.insert("bandwidth".to_string(), spec.bandwidth() as f64);
        Ok((summary.esd_moment(k), aux, Vec::new()))
    })?;
    Ok(finish(config, rows, Vec::new()))
}

/// Dispatches on the configured metric.
pub fn run(config: &ExperimentConfig) -> Result<ExperimentResult, ExperimentError> {
    match config.metric {
        Metric::KsVsTarget => run_semicircle(config),
        Metric::AggregateHistogram => run_expected_density(config),
        Metric::OpnormRatio | Metric::SecondSingularRatio => run_opnorm(config),
        Metric::MomentTrack(_) => run_moment_track(config),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
struct CsvRow {
    #[serde(rename = "N")]
    n: usize,
    trial: usize,
    tau_tag: String,
    metric: String,
    value: f64,
}

/// Writes the rows as CSV (`N,trial,tau_tag,metric,value`) or the whole
/// result as JSON.
pub fn emit(result: &ExperimentResult, path: &Path, format: Format) -> Result<(), ExperimentError> {
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_path(path)?;
            if result.rows.is_empty() {
                w.write_record(["N", "trial", "tau_tag", "metric", "value"])?;
            }
            for r in &result.rows {
                w.serialize(CsvRow {
                    n: r.n,
                    trial: r.trial,
                    tau_tag: r.tau_tag.clone(),
                    metric: r.metric.clone(),
                    value: r.value,
                })?;
            }
            w.flush()?;
        }
        Format::Json => {
            let mut text = serde_json::to_string_pretty(result)?;
            text.push('\n');
            fs::write(path, text)?;
        }
    }
    Ok(())
}

/// Writes `<name>.csv`, `<name>.json` and one `<name>_hist_N<n>.csv` per
/// pooled histogram into `dir`.
pub fn emit_all(result: &ExperimentResult, dir: &Path) -> Result<(), ExperimentError> {
    fs::create_dir_all(dir)?;
    emit(result, &dir.join(format!("{}.csv", result.name)), Format::Csv)?;
    emit(result, &dir.join(format!("{}.json", result.name)), Format::Json)?;
    for p in &result.pooled {
        fs::write(dir.join(format!("{}_hist_N{}.csv", result.name, p.n)), p.histogram.to_csv())?;
    }
    Ok(())
}

/// Reads back the rows of a CSV written by [`emit`] as
/// `(N, trial, tau_tag, metric, value)`.
pub fn read_rows_csv(path: &Path) -> Result<Vec<(usize, usize, String, String, f64)>, ExperimentError> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for rec in r.deserialize() {
        let row: CsvRow = rec?;
        out.push((row.n, row.trial, row.tau_tag, row.metric, row.value));
    }
    Ok(out)
}
