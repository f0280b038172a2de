use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use mcframe::artifacts::{read_json, write_json, EigenArtifact, SampleArtifact};
use mcframe::config::{FilterConfig, MethodName};
use mcframe::experiments::{reference_for, signal_for, tau_for, trial_seed};
use mcframe::*;
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "mcframe", version, about = "Monte Carlo wavelet frames from kernel integral operators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw i.i.d. samples from the configured domain.
    Sample(Common),
    /// Eigendecompose the normalized kernel matrix of a sample set.
    Decompose(FrameArgs),
    /// Frame coefficients of the configured signal.
    Analyze(FrameArgs),
    /// Truncated reconstruction and its RKHS error.
    Reconstruct(FrameArgs),
    /// Truncated Parseval identity on the sample set.
    CheckFrame(CheckArgs),
    /// Concentration of the empirical operator around the true one.
    BenchConcentration(Common),
    /// Approximation error of the exact filtered operator against tau.
    BenchApproximation(Common),
    /// Reconstruction error against N with tau chosen from N.
    BenchRate(Common),
    /// Lipschitz and qualification audits of a filter family.
    AuditFilters(AuditArgs),
}

#[derive(Args)]
struct Output {
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Exit with status 2 when a numerical contract fails.
    #[arg(long = "assert")]
    assert_contract: bool,
    /// Worker threads; defaults to the number of cores.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    output: Output,
    /// Single sample size, replacing `n_list`.
    #[arg(long)]
    n: Option<usize>,
    /// `auto` or a fixed scale cutoff.
    #[arg(long)]
    tau: Option<String>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    m: Option<u32>,
    /// Confidence levels, comma separated.
    #[arg(long, value_delimiter = ',')]
    t: Vec<f64>,
    /// Config overrides as `key=value`, with dotted keys for sections.
    #[arg(value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Args)]
struct FrameArgs {
    #[command(flatten)]
    common: Common,
    /// Sample artifact from `sample`; drawn from the config when absent.
    #[arg(long)]
    samples: Option<PathBuf>,
}

#[derive(Args)]
struct CheckArgs {
    #[command(flatten)]
    frame: FrameArgs,
    /// Largest accepted `gap / ‖f‖²`.
    #[arg(long, default_value_t = 1e-6)]
    threshold: f64,
}

#[derive(Args)]
struct AuditArgs {
    /// tikhonov, iterated-tikhonov, landweber, asymptotic or all.
    #[arg(long)]
    method: String,
    #[arg(long)]
    m: Option<u32>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long, default_value_t = 64)]
    jmax: u64,
    #[arg(long, default_value_t = 1.0)]
    kappa_sq: f64,
    #[arg(long, default_value_t = 4096)]
    grid: usize,
    #[command(flatten)]
    output: Output,
}

impl Common {
    fn overrides(&self) -> Result<Vec<(String, String)>> {
        let mut out = Vec::new();
        if let Some(s) = self.seed {
            out.push(("seed".into(), s.to_string()));
        }
        if let Some(n) = self.n {
            out.push(("n_list".into(), format!("[{n}]")));
        }
        if let Some(t) = &self.tau {
            out.push(("tau".into(), t.clone()));
        }
        if let Some(a) = self.alpha {
            out.push(("alpha".into(), format!("{a:?}")));
        }
        if let Some(m) = &self.method {
            out.push(("filter.method".into(), m.clone()));
        }
        if let Some(g) = self.gamma {
            out.push(("filter.gamma".into(), format!("{g:?}")));
        }
        if let Some(m) = self.m {
            out.push(("filter.m".into(), m.to_string()));
        }
        if !self.t.is_empty() {
            let items: Vec<String> = self.t.iter().map(|t| format!("{t:?}")).collect();
            out.push(("t".into(), format!("[{}]", items.join(", "))));
        }
        for raw in &self.overrides {
            let (k, v) = raw
                .split_once('=')
                .ok_or_else(|| anyhow!("override {raw:?} is not key=value"))?;
            out.push((k.trim().to_string(), v.trim().to_string()));
        }
        Ok(out)
    }

    fn load(&self) -> Result<ExperimentConfig> {
        ExperimentConfig::load(&self.config, &self.overrides()?)
            .with_context(|| format!("loading config {}", self.config.display()))
    }
}

/// Whether every checked contract held.
type Outcome = bool;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let output = match &cli.command {
        Command::Sample(c)
        | Command::BenchConcentration(c)
        | Command::BenchApproximation(c)
        | Command::BenchRate(c) => &c.output,
        Command::Decompose(f) | Command::Analyze(f) | Command::Reconstruct(f) => &f.common.output,
        Command::CheckFrame(c) => &c.frame.common.output,
        Command::AuditFilters(a) => &a.output,
    };
    let assert_contract = output.assert_contract;
    if let Some(k) = output.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(k).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match dispatch(&cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) if assert_contract => ExitCode::from(2),
        Ok(false) => {
            eprintln!("warning: contract failed (pass --assert to make this an error)");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(command: &Command) -> Result<Outcome> {
    let start = Instant::now();
    let (name, out, outcome) = match command {
        Command::Sample(c) => ("sample", &c.output.out, sample(c)?),
        Command::Decompose(f) => ("decompose", &f.common.output.out, decompose(f)?),
        Command::Analyze(f) => ("analyze", &f.common.output.out, analyze(f)?),
        Command::Reconstruct(f) => ("reconstruct", &f.common.output.out, reconstruct(f)?),
        Command::CheckFrame(c) => ("check-frame", &c.frame.common.output.out, check_frame(c)?),
        Command::BenchConcentration(c) => {
            ("concentration", &c.output.out, bench(c, ExperimentKind::Concentration)?)
        }
        Command::BenchApproximation(c) => (
            "approximation-decay",
            &c.output.out,
            bench(c, ExperimentKind::ApproximationDecay)?,
        ),
        Command::BenchRate(c) => ("end-to-end", &c.output.out, bench(c, ExperimentKind::EndToEnd)?),
        Command::AuditFilters(a) => ("audit-filters", &a.output.out, audit_filters(a)?),
    };
    // wall-clock stays out of the artifacts so reruns are byte-identical
    write_json(
        &out.join(format!("{name}.timing.json")),
        &json!({ "command": name, "seconds": start.elapsed().as_secs_f64() }),
    )?;
    Ok(outcome)
}

fn prepare(out: &Path) -> Result<()> {
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))
}

fn first_n(cfg: &ExperimentConfig) -> Result<usize> {
    cfg.n_list
        .first()
        .copied()
        .ok_or_else(|| anyhow!("no sample size: set n_list or pass --n"))
}

fn config_json(cfg: &ExperimentConfig) -> Result<Value> {
    Ok(serde_json::to_value(cfg)?)
}

fn sample(c: &Common) -> Result<Outcome> {
    let cfg = c.load()?;
    let (domain, _, _) = cfg.build()?;
    let n = first_n(&cfg)?;
    let samples = draw_samples(&domain, n, trial_seed(cfg.seed, "samples", n as u64, 0))?;
    prepare(&c.output.out)?;
    let path = c.output.out.join("samples.json");
    write_json(&path, &SampleArtifact { samples, config: config_json(&cfg)? })?;
    println!("wrote {} ({n} samples)", path.display());
    Ok(true)
}

fn load_samples(f: &FrameArgs, cfg: &ExperimentConfig, domain: &Domain) -> Result<SampleSet> {
    match &f.samples {
        Some(path) => {
            let a: SampleArtifact =
                read_json(path).with_context(|| format!("reading samples {}", path.display()))?;
            Ok(a.samples)
        }
        None => {
            let n = first_n(cfg)?;
            Ok(draw_samples(domain, n, trial_seed(cfg.seed, "samples", n as u64, 0))?)
        }
    }
}

fn decompose(f: &FrameArgs) -> Result<Outcome> {
    let cfg = f.common.load()?;
    let (domain, kernel, _) = cfg.build()?;
    let samples = load_samples(f, &cfg, &domain)?;
    let eig = eigendecompose(&kernel_matrix(&kernel, &samples)?, kernel.kappa_bound())?;
    prepare(&f.common.output.out)?;
    let path = f.common.output.out.join("eigensystem.json");
    let artifact = EigenArtifact::new(&eig, &samples, &kernel.descriptor(), config_json(&cfg)?);
    write_json(&path, &artifact)?;
    println!(
        "wrote {} (N = {}, rank {}, top eigenvalue {:.6e})",
        path.display(),
        eig.len(),
        eig.rank(),
        eig.values().first().copied().unwrap_or(0.0)
    );
    Ok(true)
}

/// Frame, signal values at the samples, and the resolved scale cutoff.
struct Prepared {
    cfg: ExperimentConfig,
    frame: WaveletFrame,
    reference: ReferenceOperator,
    signal: SignalSpec,
    values: Vec<f64>,
    tau: u64,
}

fn prepare_frame(f: &FrameArgs) -> Result<Prepared> {
    let cfg = f.common.load()?;
    let (domain, reference) = reference_for(&cfg, true)?;
    let kernel = reference.kernel().clone();
    let family = cfg.filter.build(kernel.kappa_bound())?;
    let samples = load_samples(f, &cfg, &domain)?;
    let beta = family.qualification().cap(cfg.alpha);
    let tau = tau_for(cfg.tau, samples.len(), beta);
    let frame = WaveletFrame::new(&kernel, &samples, family, tau)?;
    let signal = signal_for(&cfg, &reference, 0)?;
    let values = samples
        .points
        .iter()
        .map(|x| evaluate_signal(&signal, &reference, x))
        .collect::<mcframe::Result<Vec<f64>>>()?;
    Ok(Prepared { cfg, frame, reference, signal, values, tau })
}

fn analyze(f: &FrameArgs) -> Result<Outcome> {
    let p = prepare_frame(f)?;
    let table = p.frame.analyze(&p.values, p.tau)?;
    let out = &f.common.output.out;
    prepare(out)?;
    let csv = out.join("coefficients.csv");
    table.write_csv(std::io::BufWriter::new(std::fs::File::create(&csv)?))?;
    write_json(
        &out.join("coefficients.json"),
        &json!({
            "seed": p.cfg.seed,
            "n": p.frame.len(),
            "tau": p.tau,
            "filter": p.frame.family().descriptor(),
            "partial_sum": table.partial_sum(),
            "coefficients": "coefficients.csv",
            "config": config_json(&p.cfg)?,
        }),
    )?;
    println!("wrote {} ({} scales × {} points)", csv.display(), p.tau, p.frame.len());
    Ok(true)
}

fn reconstruct(f: &FrameArgs) -> Result<Outcome> {
    let p = prepare_frame(f)?;
    let rec = p.frame.reconstruct(&p.values, p.tau)?;
    let err = reconstruction_error(&p.signal, &p.reference, &p.frame, p.tau)?;
    let out = &f.common.output.out;
    prepare(out)?;
    let mut csv = String::from("k,f,reconstruction\n");
    for (k, (a, b)) in p.values.iter().zip(&rec).enumerate() {
        csv.push_str(&format!("{k},{a:?},{b:?}\n"));
    }
    std::fs::write(out.join("reconstruction.csv"), csv)?;
    write_json(
        &out.join("reconstruction.json"),
        &json!({
            "seed": p.cfg.seed,
            "n": p.frame.len(),
            "tau": p.tau,
            "filter": p.frame.family().descriptor(),
            "signal_norm": p.signal.norm_sq().sqrt(),
            "error": err,
            "values": "reconstruction.csv",
            "config": config_json(&p.cfg)?,
        }),
    )?;
    println!(
        "reconstruction error {:.6e} (‖f‖ = {:.6e}, τ = {})",
        err.value,
        p.signal.norm_sq().sqrt(),
        p.tau
    );
    if err.unreliable {
        eprintln!("warning: rounding bound {:.2e} is large relative to the error", err.rounding);
    }
    Ok(true)
}

fn check_frame(c: &CheckArgs) -> Result<Outcome> {
    let p = prepare_frame(&c.frame)?;
    let report = p.frame.parseval_report(&p.values, p.tau)?;
    let rel = report.relative_gap();
    let passed = rel <= c.threshold;
    let out = &c.frame.common.output.out;
    prepare(out)?;
    write_json(
        &out.join("check-frame.json"),
        &json!({
            "seed": p.cfg.seed,
            "n": p.frame.len(),
            "filter": p.frame.family().descriptor(),
            "report": report,
            "relative_gap": rel,
            "threshold": c.threshold,
            "passed": passed,
            "config": config_json(&p.cfg)?,
        }),
    )?;
    println!(
        "gap/‖f‖² = {rel:.3e} at τ = {} ({})",
        p.tau,
        if passed { "ok" } else { "above threshold" }
    );
    Ok(passed)
}

fn bench(c: &Common, kind: ExperimentKind) -> Result<Outcome> {
    let cfg = c.load()?;
    let report = mcframe::experiments::run(kind, &cfg)?;
    prepare(&c.output.out)?;
    let (csv, json) = report.write(&c.output.out, kind.name())?;
    for s in &report.summary {
        eprintln!("{} = {:>8}: median {:.6e} over {} trials", report.x_label, s.x, s.median, s.count);
    }
    println!(
        "slope {:.4} (expected {:.4}), contract {}: {}",
        report.fit.slope,
        report.contract.expected_exponent,
        report.contract.description,
        if report.contract.passed { "ok" } else { "FAILED" }
    );
    println!("wrote {} and {}", csv.display(), json.display());
    Ok(report.contract.passed)
}

fn audit_families(a: &AuditArgs) -> Result<Vec<FilterFamily>> {
    let names: Vec<&str> = if a.method == "all" {
        vec!["tikhonov", "iterated-tikhonov", "landweber", "asymptotic"]
    } else {
        vec![a.method.as_str()]
    };
    names
        .into_iter()
        .map(|name| {
            let method: MethodName = serde_json::from_value(json!(name))
                .map_err(|_| anyhow!("unknown filter method {name:?}"))?;
            let m = match method {
                MethodName::IteratedTikhonov => Some(a.m.unwrap_or(2)),
                _ => None,
            };
            let gamma = match method {
                MethodName::Landweber => a.gamma,
                _ => None,
            };
            Ok(FilterConfig { method, m, gamma }.build(a.kappa_sq)?)
        })
        .collect()
}

/// `landweber(gamma=1e0)` becomes `landweber-gamma-1e0`.
fn file_stem(descriptor: &str) -> String {
    let mut s = String::new();
    for c in descriptor.chars() {
        if c.is_ascii_alphanumeric() || c == '.' {
            s.push(c);
        } else if !s.ends_with('-') {
            s.push('-');
        }
    }
    s.trim_end_matches('-').to_string()
}

fn audit_filters(a: &AuditArgs) -> Result<Outcome> {
    let families = audit_families(a)?;
    prepare(&a.output.out)?;
    let mut all_passed = true;
    for fam in &families {
        let mut csv = String::from("j,lipschitz,bound,passed\n");
        let mut rows = Vec::new();
        let mut worst: f64 = 0.0;
        for j in 1..=a.jmax {
            let l = fam.lipschitz_audit(j, a.grid)?;
            let bound = j as f64 * (1.0 + 1e-6);
            let ok = l <= bound;
            all_passed &= ok;
            worst = worst.max(l / j as f64);
            csv.push_str(&format!("{j},{l:?},{bound:?},{ok}\n"));
            rows.push(json!({ "j": j, "lipschitz": l, "passed": ok }));
        }
        let decay = [0.5, 1.0, 2.0]
            .iter()
            .filter(|_| a.jmax >= 4)
            .map(|&nu| fam.qualification_decay_audit(nu, a.jmax))
            .collect::<mcframe::Result<Vec<_>>>()?;
        let stem = format!("audit-{}", file_stem(&fam.descriptor()));
        std::fs::write(a.output.out.join(format!("{stem}.csv")), csv)?;
        write_json(
            &a.output.out.join(format!("{stem}.json")),
            &json!({
                "filter": fam.descriptor(),
                "kappa_sq": a.kappa_sq,
                "grid": a.grid,
                "jmax": a.jmax,
                "qualification": fam.qualification(),
                "lipschitz": rows,
                "decay": decay
                    .iter()
                    .map(|d| json!({
                        "nu": d.nu,
                        "expected_exponent": d.expected_exponent,
                        "slope": d.slope,
                        "rows": d.rows,
                    }))
                    .collect::<Vec<_>>(),
            }),
        )?;
        let decay_text: Vec<String> = decay
            .iter()
            .map(|d| format!("ν={} slope {:.3} (expected {:.3})", d.nu, d.slope, d.expected_exponent))
            .collect();
        println!(
            "{}: max Lipschitz/j {worst:.6}; {}",
            fam.descriptor(),
            decay_text.join(", ")
        );
    }
    if families.is_empty() {
        bail!("no filter families selected");
    }
    Ok(all_passed)
}
