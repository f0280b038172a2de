//! Monte Carlo experiments and log-log rate fits.
//!
//! Every trial is a job keyed by its sample size (or scale), trial index and
//! a seed derived from the configured base seed. Jobs run in parallel and
//! are assembled in key order, so reports do not depend on scheduling.

use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, TauRule};
use crate::error::{Error, Result};
use crate::frame::default_tau;
use crate::kernels::{Domain, Point};
use crate::operator::{draw_samples, hs_distance_from_samples, SampleSet};
use crate::reference::{reference_operator_with_quadrature, ReferenceOperator};
use crate::rng::{derive_seed, stream_tag, GENERATOR};
use crate::signals::{
    approximation_error, make_sobolev_signal, reconstruction_error_compressed, SignalSpec,
    DEFAULT_BUDGET,
};

/// Version of the CSV/JSON report layout.
pub const SCHEMA_VERSION: u32 = 1;

/// Ordinary least squares fit of `log y = intercept + slope · log x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn fit_rate(points: &[(f64, f64)]) -> Result<RateFit> {
    if points.len() < 2 {
        return Err(Error::DegenerateFit(format!(
            "need at least 2 points, got {}",
            points.len()
        )));
    }
    if let Some(p) = points.iter().find(|(x, y)| !(*x > 0.0 && *y > 0.0)) {
        return Err(Error::DegenerateFit(format!(
            "nonpositive value in ({}, {})",
            p.0, p.1
        )));
    }
    let n = points.len() as f64;
    let lx: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ly.iter().map(|y| (y - my) * (y - my)).sum();
    if sxx <= 1e-300 {
        return Err(Error::DegenerateFit("all abscissae coincide".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        (sxy * sxy / (sxx * syy)).min(1.0)
    };
    Ok(RateFit {
        slope,
        intercept,
        r_squared,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Concentration,
    ApproximationDecay,
    EndToEnd,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Concentration => "concentration",
            ExperimentKind::ApproximationDecay => "approximation-decay",
            ExperimentKind::EndToEnd => "end-to-end",
        }
    }

    /// Name of the abscissa column.
    pub fn x_label(self) -> &'static str {
        match self {
            ExperimentKind::ApproximationDecay => "tau",
            _ => "n",
        }
    }
}

/// One Monte Carlo trial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    /// Sample size, or the scale cutoff for approximation decay.
    pub x: u64,
    pub trial: usize,
    pub seed: u64,
    pub error: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub x: u64,
    pub count: usize,
    pub mean: f64,
    pub median: f64,
    pub q10: f64,
    pub q90: f64,
    /// Scale cutoff used at this sample size (end-to-end only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coverage {
    pub t: f64,
    /// Trials with `‖T − T̂‖_HS ≤ 2√2 κ² √t / √N`.
    pub covered: usize,
    pub total: usize,
    pub fraction: f64,
    /// `1 − 2e^{−t}`.
    pub required: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contract {
    pub description: String,
    pub expected_exponent: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema_version: u32,
    pub experiment: ExperimentKind,
    pub x_label: String,
    pub generator: String,
    pub seed: u64,
    pub kernel: String,
    pub filter: Option<String>,
    pub beta: Option<f64>,
    pub summary: Vec<SummaryRow>,
    pub fit: RateFit,
    pub coverage: Vec<Coverage>,
    pub contract: Contract,
    pub config: serde_json::Value,
    /// Per-trial rows; written to the CSV file rather than the JSON summary.
    #[serde(skip)]
    pub rows: Vec<TrialRow>,
}

impl ExperimentReport {
    /// `x,trial,seed,error` rows, with `x` named `n` or `tau`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{},trial,seed,error", self.x_label)?;
        for r in &self.rows {
            writeln!(w, "{},{},{},{:?}", r.x, r.trial, r.seed, r.error)?;
        }
        Ok(())
    }

    pub fn csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is ascii")
    }

    pub fn json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    /// Write `<stem>.csv` and `<stem>.json` into `dir`.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<(PathBuf, PathBuf)> {
        std::fs::create_dir_all(dir)?;
        let csv = dir.join(format!("{stem}.csv"));
        let json = dir.join(format!("{stem}.json"));
        std::fs::write(&csv, self.csv())?;
        std::fs::write(&json, self.json()?)?;
        Ok((csv, json))
    }

    /// Read a report written by [`ExperimentReport::write`].
    pub fn read(dir: &Path, stem: &str) -> Result<Self> {
        let json = std::fs::read_to_string(dir.join(format!("{stem}.json")))?;
        let mut report: Self = serde_json::from_str(&json)?;
        if report.schema_version != SCHEMA_VERSION {
            return Err(Error::Parse(format!(
                "report schema version {} is not {}",
                report.schema_version, SCHEMA_VERSION
            )));
        }
        let csv = std::fs::read_to_string(dir.join(format!("{stem}.csv")))?;
        report.rows = parse_rows(&csv, &report.x_label)?;
        Ok(report)
    }
}

fn parse_rows(text: &str, x_label: &str) -> Result<Vec<TrialRow>> {
    let mut lines = text.lines();
    let header = format!("{x_label},trial,seed,error");
    if lines.next() != Some(header.as_str()) {
        return Err(Error::Parse(format!("expected CSV header {header:?}")));
    }
    lines
        .map(|line| {
            let bad = || Error::Parse(format!("bad report row {line:?}"));
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 4 {
                return Err(bad());
            }
            Ok(TrialRow {
                x: f[0].parse().map_err(|_| bad())?,
                trial: f[1].parse().map_err(|_| bad())?,
                seed: f[2].parse().map_err(|_| bad())?,
                error: f[3].parse().map_err(|_| bad())?,
            })
        })
        .collect()
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Per-abscissa statistics of `rows`, in increasing `x`.
pub fn summarize(rows: &[TrialRow]) -> Vec<SummaryRow> {
    let mut xs: Vec<u64> = rows.iter().map(|r| r.x).collect();
    xs.sort_unstable();
    xs.dedup();
    xs.into_iter()
        .map(|x| {
            let mut e: Vec<f64> = rows.iter().filter(|r| r.x == x).map(|r| r.error).collect();
            e.sort_by(f64::total_cmp);
            SummaryRow {
                x,
                count: e.len(),
                mean: e.iter().sum::<f64>() / e.len() as f64,
                median: quantile(&e, 0.5),
                q10: quantile(&e, 0.1),
                q90: quantile(&e, 0.9),
                tau: None,
            }
        })
        .collect()
}

fn fit_medians(summary: &[SummaryRow]) -> Result<RateFit> {
    let pts: Vec<(f64, f64)> = summary.iter().map(|s| (s.x as f64, s.median)).collect();
    fit_rate(&pts)
}

/// Domain and reference operator described by `cfg`. Box domains need an
/// explicit quadrature size.
pub fn reference_for(cfg: &ExperimentConfig, require_exact: bool) -> Result<(Domain, ReferenceOperator)> {
    let (domain, kernel, _) = cfg.build()?;
    let quadrature = match (&domain, cfg.quadrature) {
        (Domain::EuclideanBox { .. }, None) => {
            return Err(Error::InvalidParameter(
                "box domains need an explicit `quadrature` size".into(),
            ))
        }
        (_, q) => q.unwrap_or(crate::reference::DEFAULT_QUADRATURE),
    };
    let reference = reference_operator_with_quadrature(&kernel, &domain, quadrature)?;
    if require_exact && !reference.is_exact() {
        return Err(Error::InvalidParameter(
            "this experiment needs an exact reference operator".into(),
        ));
    }
    Ok((domain, reference))
}

fn require_sizes(cfg: &ExperimentConfig) -> Result<()> {
    if cfg.n_list.len() < 2 {
        return Err(Error::InvalidParameter(
            "n_list needs at least 2 sample sizes".into(),
        ));
    }
    Ok(())
}

fn config_echo(cfg: &ExperimentConfig) -> Result<serde_json::Value> {
    Ok(serde_json::to_value(cfg)?)
}

/// `2√2 κ² √t / √N`.
pub fn concentration_bound(kappa_sq: f64, t: f64, n: usize) -> f64 {
    2.0 * 2f64.sqrt() * kappa_sq * t.sqrt() / (n as f64).sqrt()
}

/// Seed for one trial of the named stream at abscissa `x`.
pub fn trial_seed(base: u64, stream: &str, x: u64, trial: usize) -> u64 {
    derive_seed(base, &[stream_tag(stream), x, trial as u64])
}

/// `‖T − T̂‖_HS` per trial, coverage of the concentration bound for every
/// configured `t`, and the fitted rate of the median distance.
pub fn run_concentration(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    require_sizes(cfg)?;
    let (domain, reference) = reference_for(cfg, false)?;
    let kappa_sq = reference.kernel().kappa_bound();
    let jobs: Vec<(usize, usize)> = cfg
        .n_list
        .iter()
        .flat_map(|&n| (0..cfg.trials).map(move |t| (n, t)))
        .collect();
    let rows: Vec<TrialRow> = jobs
        .par_iter()
        .map(|&(n, trial)| {
            let seed = trial_seed(cfg.seed, "concentration", n as u64, trial);
            let samples = draw_samples(&domain, n, seed)?;
            let d = hs_distance_from_samples(&reference, &samples)?;
            Ok(TrialRow {
                x: n as u64,
                trial,
                seed,
                error: d.value,
            })
        })
        .collect::<Result<_>>()?;
    let coverage = cfg
        .t
        .iter()
        .map(|&t| {
            let covered = rows
                .iter()
                .filter(|r| r.error <= concentration_bound(kappa_sq, t, r.x as usize))
                .count();
            let fraction = covered as f64 / rows.len() as f64;
            let required = 1.0 - 2.0 * (-t).exp();
            Coverage {
                t,
                covered,
                total: rows.len(),
                fraction,
                required,
                passed: fraction >= required,
            }
        })
        .collect::<Vec<_>>();
    let summary = summarize(&rows);
    let fit = fit_medians(&summary)?;
    let passed = (fit.slope + 0.5).abs() <= 0.1 && coverage.iter().all(|c| c.passed);
    Ok(ExperimentReport {
        schema_version: SCHEMA_VERSION,
        experiment: ExperimentKind::Concentration,
        x_label: ExperimentKind::Concentration.x_label().into(),
        generator: GENERATOR.into(),
        seed: cfg.seed,
        kernel: reference.kernel().descriptor(),
        filter: None,
        beta: None,
        summary,
        fit,
        coverage,
        contract: Contract {
            description: "slope within -0.5 ± 0.1 and coverage ≥ 1 − 2e^{−t}".into(),
            expected_exponent: -0.5,
            passed,
        },
        config: config_echo(cfg)?,
        rows,
    })
}

/// Default scale grid for approximation decay: 16 geometric points on
/// `[2, 256]`, rounded and deduplicated.
pub fn default_taus() -> Vec<u64> {
    let mut v: Vec<u64> = (0..16)
        .map(|i| (2f64.ln() + (256f64.ln() - 2f64.ln()) * i as f64 / 15.0).exp().round() as u64)
        .collect();
    v.dedup();
    v
}

/// Signal for trial `trial`, shared across sample sizes.
pub fn signal_for(
    cfg: &ExperimentConfig,
    reference: &ReferenceOperator,
    trial: usize,
) -> Result<SignalSpec> {
    let available = reference.positive_modes()?;
    let budget = cfg.signal.budget.unwrap_or(DEFAULT_BUDGET.min(available));
    let seed = derive_seed(cfg.seed, &[stream_tag("signal"), trial as u64]);
    make_sobolev_signal(reference, cfg.alpha, budget, seed, cfg.signal.h_norm)
}

/// `‖f − T g_τ(T) f‖_H` against `τ` on the exact operator.
pub fn run_approximation_decay(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let (_, reference) = reference_for(cfg, true)?;
    let family = cfg.filter.build(reference.kernel().kappa_bound())?;
    let beta = family.qualification().cap(cfg.alpha);
    let taus = if cfg.taus.is_empty() {
        default_taus()
    } else {
        cfg.taus.clone()
    };
    if taus.len() < 2 {
        return Err(Error::InvalidParameter("taus needs at least 2 scales".into()));
    }
    let signals: Vec<SignalSpec> = (0..cfg.trials)
        .map(|t| signal_for(cfg, &reference, t))
        .collect::<Result<_>>()?;
    let mut rows = Vec::with_capacity(taus.len() * cfg.trials);
    for &tau in &taus {
        for (trial, s) in signals.iter().enumerate() {
            rows.push(TrialRow {
                x: tau,
                trial,
                seed: s.seed,
                error: approximation_error(s, &family, tau),
            });
        }
    }
    let summary = summarize(&rows);
    let fit = fit_medians(&summary)?;
    Ok(ExperimentReport {
        schema_version: SCHEMA_VERSION,
        experiment: ExperimentKind::ApproximationDecay,
        x_label: ExperimentKind::ApproximationDecay.x_label().into(),
        generator: GENERATOR.into(),
        seed: cfg.seed,
        kernel: reference.kernel().descriptor(),
        filter: Some(family.descriptor()),
        beta: Some(beta),
        summary,
        fit,
        coverage: Vec::new(),
        contract: Contract {
            description: "slope ≤ −β + 0.1".into(),
            expected_exponent: -beta,
            passed: fit.slope <= -beta + 0.1,
        },
        config: config_echo(cfg)?,
        rows,
    })
}

/// Scale cutoff for `n` samples under `rule`.
pub fn tau_for(rule: TauRule, n: usize, beta: f64) -> u64 {
    match rule {
        TauRule::Auto => default_tau(n, beta),
        TauRule::Fixed(t) => t,
    }
}

/// `‖f − T̂ g_τ(T̂) f‖_H` with `τ` set by the configured rule, per trial.
/// Signals are drawn once per trial index and shared across sample sizes.
pub fn run_end_to_end(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    require_sizes(cfg)?;
    let (domain, reference) = reference_for(cfg, true)?;
    let family = cfg.filter.build(reference.kernel().kappa_bound())?;
    let beta = family.qualification().cap(cfg.alpha);
    let signals: Vec<SignalSpec> = (0..cfg.trials)
        .map(|t| signal_for(cfg, &reference, t))
        .collect::<Result<_>>()?;
    let jobs: Vec<(usize, usize)> = cfg
        .n_list
        .iter()
        .flat_map(|&n| (0..cfg.trials).map(move |t| (n, t)))
        .collect();
    let rows: Vec<TrialRow> = jobs
        .par_iter()
        .map(|&(n, trial)| {
            let seed = trial_seed(cfg.seed, "samples", n as u64, trial);
            let samples = draw_samples(&domain, n, seed)?;
            let tau = tau_for(cfg.tau, n, beta);
            let r = reconstruction_error_compressed(
                &signals[trial],
                &reference,
                &samples,
                &family,
                tau,
            )?;
            Ok(TrialRow {
                x: n as u64,
                trial,
                seed,
                error: r.value,
            })
        })
        .collect::<Result<_>>()?;
    let mut summary = summarize(&rows);
    for s in summary.iter_mut() {
        s.tau = Some(tau_for(cfg.tau, s.x as usize, beta));
    }
    let fit = fit_medians(&summary)?;
    let expected = -beta / (2.0 * beta + 2.0);
    Ok(ExperimentReport {
        schema_version: SCHEMA_VERSION,
        experiment: ExperimentKind::EndToEnd,
        x_label: ExperimentKind::EndToEnd.x_label().into(),
        generator: GENERATOR.into(),
        seed: cfg.seed,
        kernel: reference.kernel().descriptor(),
        filter: Some(family.descriptor()),
        beta: Some(beta),
        summary,
        fit,
        coverage: Vec::new(),
        contract: Contract {
            description: "slope ≤ −β/(2β+2) + 0.1".into(),
            expected_exponent: expected,
            passed: fit.slope <= expected + 0.1,
        },
        config: config_echo(cfg)?,
        rows,
    })
}

pub fn run(kind: ExperimentKind, cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    match kind {
        ExperimentKind::Concentration => run_concentration(cfg),
        ExperimentKind::ApproximationDecay => run_approximation_decay(cfg),
        ExperimentKind::EndToEnd => run_end_to_end(cfg),
    }
}

/// `n` samples placing exactly `n / M` points on every vertex of a graph
/// domain, so the empirical measure equals the uniform one.
pub fn stratified_samples(domain: &Domain, n: usize) -> Result<SampleSet> {
    let Domain::FiniteGraph(g) = domain else {
        return Err(Error::InvalidDomain(
            "stratified sampling needs a graph domain".into(),
        ));
    };
    let m = g.vertices();
    if n == 0 || !n.is_multiple_of(m) {
        return Err(Error::InvalidParameter(format!(
            "{n} samples do not split evenly over {m} vertices"
        )));
    }
    let points = (0..n).map(|i| Point::Vertex(i % m)).collect();
    SampleSet::from_points(domain, points, 0)
}
