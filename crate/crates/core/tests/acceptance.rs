//! Acceptance gate: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so the report is always printed. The
//! target exits nonzero when a criterion's outcome differs from its recorded
//! expectation; see `EXPECTED_FAILURES`.

use std::time::{Duration, Instant};

use mcframe::config::{
    DomainConfig, ExperimentConfig, FilterConfig, GraphShape, KernelConfig, MethodName,
    ProfileName, SignalConfig, TauRule,
};
use mcframe::experiments::{run_approximation_decay, run_concentration, run_end_to_end};
use mcframe::{
    draw_samples, eigendecompose, kernel_matrix, nystrom_extend, Domain, FilterFamily,
    FourierProfile, Graph, Kernel, Method, Point, WaveletFrame,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

/// Criteria whose bound does not hold for the implemented definitions.
/// Iterated Tikhonov with `m ≥ 2` has `d/dλ [λ g_j(λ)] = m j (1 + jλ)^{−m−1}`,
/// which equals `m j` at `λ = 0`, so the Lipschitz bound `j` fails.
const EXPECTED_FAILURES: &[u32] = &[2];

struct Outcome {
    id: u32,
    passed: bool,
    detail: String,
    elapsed: Duration,
    budget: Option<Duration>,
}

fn timed(id: u32, budget: Option<Duration>, f: impl FnOnce() -> (bool, String)) -> Outcome {
    let start = Instant::now();
    let (passed, detail) = f();
    let elapsed = start.elapsed();
    let within = budget.is_none_or(|b| elapsed <= b);
    Outcome {
        id,
        passed: passed && within,
        detail: if within {
            detail
        } else {
            format!("{detail}; over time budget")
        },
        elapsed,
        budget,
    }
}

fn families(kappa_sq: f64) -> Vec<FilterFamily> {
    vec![
        FilterFamily::tikhonov(kappa_sq).unwrap(),
        FilterFamily::iterated_tikhonov(1, kappa_sq).unwrap(),
        FilterFamily::iterated_tikhonov(2, kappa_sq).unwrap(),
        FilterFamily::iterated_tikhonov(3, kappa_sq).unwrap(),
        FilterFamily::landweber(kappa_sq).unwrap(),
        FilterFamily::asymptotic(kappa_sq).unwrap(),
    ]
}

/// Telescoping: `|Σ_{j≤τ} λ G_j(λ)² − λ g_τ(λ)| ≤ 1e−12`.
fn criterion_1() -> (bool, String) {
    let mut worst: f64 = 0.0;
    for kappa_sq in [1.0, 2.5] {
        for fam in families(kappa_sq) {
            for idx in 1..=512 {
                let lambda = kappa_sq * idx as f64 / 512.0;
                let mut sum = 0.0;
                for tau in 1..=64u64 {
                    sum += lambda * fam.g_squared(tau, lambda).unwrap();
                    let target = lambda * fam.g(tau, lambda).unwrap();
                    worst = worst.max((sum - target).abs());
                }
            }
        }
    }
    (worst <= 1e-12, format!("max deviation {worst:.2e} (tol 1e-12)"))
}

/// Lipschitz audit: grid slope of `λ g_j(λ)` at most `j (1 + 1e−6)`.
fn criterion_2() -> (bool, String) {
    let mut failures = Vec::new();
    let mut worst_ratio: f64 = 0.0;
    for fam in families(1.0) {
        let mut fam_worst: f64 = 0.0;
        for j in 1..=64u64 {
            let slope = fam.lipschitz_audit(j, 4096).unwrap();
            fam_worst = fam_worst.max(slope / j as f64);
        }
        worst_ratio = worst_ratio.max(fam_worst);
        if fam_worst > 1.0 + 1e-6 {
            failures.push(format!("{} slope/j = {fam_worst:.4}", fam.descriptor()));
        }
    }
    if failures.is_empty() {
        (true, format!("max slope/j {worst_ratio:.6}"))
    } else {
        (false, failures.join(", "))
    }
}

/// Eigen-identity `v̂_i(x_k) = √λ̂_i û_i[k]`.
fn criterion_3() -> (bool, String) {
    let circle = Kernel::circle(FourierProfile::Exponential { rate: 1.0 }, 256).unwrap();
    let graph = Graph::cycle(20).unwrap();
    let heat = Kernel::graph_heat(&graph, 0.5, 1.0).unwrap();
    let cases = [
        (Domain::Circle, circle),
        (Domain::FiniteGraph(graph), heat),
    ];
    let mut worst: f64 = 0.0;
    for (domain, kernel) in &cases {
        for n in [8, 32, 128] {
            let s = draw_samples(domain, n, 31 + n as u64).unwrap();
            let eig = eigendecompose(&kernel_matrix(kernel, &s).unwrap(), kernel.kappa_bound())
                .unwrap();
            let scale = kernel.kappa_bound().sqrt();
            for i in 0..eig.rank() {
                let u = eig.sample_vector(i);
                let root = eig.values()[i].sqrt();
                for (k, x) in s.points.iter().enumerate() {
                    let v = nystrom_extend(&eig, kernel, &s, i, x).unwrap();
                    worst = worst.max((v - root * u[k]).abs() / scale);
                }
            }
        }
    }
    (worst <= 1e-9, format!("max deviation {worst:.2e}·√κ² (tol 1e-9)"))
}

/// Wavelet dual formula: the kernel-sum evaluation against the expansion
/// `Σ_i G_j(λ̂_i) v̂_i(x_k) v̂_i(x)` built from Nyström extensions. Wavelet
/// values cross zero, so the error is taken relative to the pointwise bound
/// `|ψ̂_{j,x_k}(x)| ≤ κ ‖ψ̂_{j,x_k}‖_H`.
fn criterion_4() -> (bool, String) {
    let circle = Kernel::circle(FourierProfile::Exponential { rate: 0.2 }, 256).unwrap();
    let graph = Graph::cycle(40).unwrap();
    let heat = Kernel::graph_heat(&graph, 0.3, 1.0).unwrap();
    let cases = [
        (Domain::Circle, circle),
        (Domain::FiniteGraph(graph), heat),
    ];
    let mut rng = ChaCha20Rng::seed_from_u64(404);
    let mut worst: f64 = 0.0;
    for (domain, kernel) in &cases {
        for n in [16, 64] {
            let s = draw_samples(domain, n, 40 + n as u64).unwrap();
            for fam in families(kernel.kappa_bound()) {
                let frame = WaveletFrame::new(kernel, &s, fam, 8).unwrap();
                let eig = frame.eigen();
                let r = eig.rank();
                let at_samples: Vec<Vec<f64>> = (0..r)
                    .map(|i| {
                        s.points
                            .iter()
                            .map(|xk| nystrom_extend(eig, kernel, &s, i, xk).unwrap())
                            .collect()
                    })
                    .collect();
                for _ in 0..50 {
                    let x = match domain {
                        Domain::Circle => Point::Circle(rng.random::<f64>()),
                        _ => Point::Vertex(rng.random_range(0..40)),
                    };
                    let at_x: Vec<f64> = (0..r)
                        .map(|i| nystrom_extend(eig, kernel, &s, i, &x).unwrap())
                        .collect();
                    for j in 1..=8 {
                        let g: Vec<f64> = eig.positive_values()
                            .iter()
                            .map(|&l| fam.big_g(j, l).unwrap())
                            .collect();
                        let direct = frame.wavelets_at(j, &x).unwrap();
                        for (k, d) in direct.iter().enumerate() {
                            let spectral: f64 =
                                (0..r).map(|i| g[i] * at_samples[i][k] * at_x[i]).sum();
                            let norm: f64 = (0..r)
                                .map(|i| (g[i] * at_samples[i][k]).powi(2))
                                .sum::<f64>()
                                .sqrt();
                            let bound = kernel.kappa_bound().sqrt() * norm;
                            if bound > 0.0 {
                                worst = worst.max((d - spectral).abs() / bound);
                            }
                        }
                    }
                }
            }
        }
    }
    (worst <= 1e-10, format!("max relative error {worst:.2e} (tol 1e-10)"))
}

/// Empirical Parseval identity on a 20-vertex graph.
fn criterion_5() -> (bool, String) {
    let graph = Graph::cycle(20).unwrap();
    let kernel = Kernel::graph_heat(&graph, 0.2, 1.0).unwrap();
    let domain = Domain::FiniteGraph(graph);
    let s = draw_samples(&domain, 200, 55).unwrap();
    let fam = FilterFamily::landweber(kernel.kappa_bound()).unwrap();
    let probe = WaveletFrame::new(&kernel, &s, fam, 0).unwrap();
    // smallest τ with sup_i (1 − γλ̂_i)^τ ≤ 1e−8
    let lam_min = *probe.eigen().positive_values().last().unwrap();
    let gamma = 1.0 / kernel.kappa_bound();
    let tau = ((1e-8f64).ln() / (1.0 - gamma * lam_min).ln()).ceil() as u64;
    let frame = WaveletFrame::from_parts(
        probe.eigen().clone(),
        s.clone(),
        kernel.clone(),
        fam,
        tau,
    )
    .unwrap();
    let sup = frame.worst_residual(tau);
    let mut rng = ChaCha20Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    let mut min_gap = f64::INFINITY;
    for _ in 0..20 {
        // f = Σ_ℓ c_ℓ K_{x_ℓ}, sampled
        let c: Vec<f64> = (0..200).map(|_| rng.random::<f64>() - 0.5).collect();
        let f: Vec<f64> = s
            .points
            .iter()
            .map(|x| {
                s.points
                    .iter()
                    .zip(&c)
                    .map(|(y, cy)| cy * kernel.evaluate(x, y).unwrap())
                    .sum()
            })
            .collect();
        let r = frame.parseval_report(&f, tau).unwrap();
        worst = worst.max(r.relative_gap().abs());
        min_gap = min_gap.min(r.gap);
    }
    (
        sup <= 1e-8 && worst <= 1e-6 && min_gap >= -1e-10,
        format!("τ = {tau}, sup residual {sup:.2e}, max gap/‖f‖² {worst:.2e} (tol 1e-6)"),
    )
}

fn graph_config(alpha: f64, method: MethodName) -> ExperimentConfig {
    ExperimentConfig {
        seed: 2024,
        trials: 20,
        n_list: vec![64, 128, 256, 512, 1024, 2048, 4096],
        alpha,
        t: vec![1.0, 2.0, 4.0],
        tau: TauRule::Auto,
        taus: Vec::new(),
        quadrature: None,
        output: None,
        domain: DomainConfig::Graph {
            shape: Some(GraphShape::Cycle),
            vertices: Some(50),
            edge_list: None,
        },
        kernel: KernelConfig::Heat {
            time: 20.0,
            amplitude: 50.0,
        },
        filter: FilterConfig {
            method,
            m: None,
            gamma: None,
        },
        signal: SignalConfig::default(),
    }
}

fn circle_config() -> ExperimentConfig {
    ExperimentConfig {
        seed: 6,
        trials: 20,
        n_list: (5..=12).map(|p| 1usize << p).collect(),
        alpha: 1.0,
        t: vec![1.0, 2.0, 4.0],
        tau: TauRule::Auto,
        taus: Vec::new(),
        quadrature: None,
        output: None,
        domain: DomainConfig::Circle,
        kernel: KernelConfig::Circle {
            profile: ProfileName::Exponential,
            rate: Some(1.0),
            coefficients: None,
            truncation: 256,
        },
        filter: FilterConfig::default(),
        signal: SignalConfig::default(),
    }
}

/// Concentration of `T̂` around `T` on the circle.
fn criterion_6() -> (bool, String) {
    let r = run_concentration(&circle_config()).unwrap();
    let cov: Vec<String> = r
        .coverage
        .iter()
        .map(|c| format!("t={} {:.3}≥{:.3}", c.t, c.fraction, c.required))
        .collect();
    let slope_ok = (r.fit.slope + 0.5).abs() <= 0.1;
    let cov_ok = r.coverage.iter().all(|c| c.passed) && r.coverage.len() == 3;
    (
        slope_ok && cov_ok,
        format!("slope {:.3} (−0.5 ± 0.1), coverage {}", r.fit.slope, cov.join(", ")),
    )
}

/// Approximation decay on the exact graph operator, Landweber.
fn criterion_7() -> (bool, String) {
    let mut ok = true;
    let mut parts = Vec::new();
    for alpha in [0.5, 1.0, 2.0] {
        let r = run_approximation_decay(&graph_config(alpha, MethodName::Landweber)).unwrap();
        let pass = r.fit.slope <= -alpha + 0.1;
        ok &= pass;
        parts.push(format!("α={alpha}: {:.3} ≤ {:.2}", r.fit.slope, -alpha + 0.1));
    }
    (ok, parts.join(", "))
}

/// End-to-end rate on a 50-vertex graph, plus Tikhonov saturation.
fn criterion_8() -> (bool, String) {
    let lw = run_end_to_end(&graph_config(1.0, MethodName::Landweber)).unwrap();
    let tk = run_end_to_end(&graph_config(2.0, MethodName::Tikhonov)).unwrap();
    let lw_ok = lw.fit.slope <= -0.25 + 0.1;
    // qualification 1 caps β at 1, so τ and the exponent follow β = 1
    let tk_ok = tk.beta == Some(1.0) && tk.fit.slope <= -0.25 + 0.1;
    (
        lw_ok && tk_ok,
        format!(
            "landweber α=1 slope {:.3} ≤ -0.15; tikhonov α=2 β={} slope {:.3} ≤ -0.15",
            lw.fit.slope,
            tk.beta.unwrap_or(f64::NAN),
            tk.fit.slope
        ),
    )
}

/// Reports are byte-identical across runs with the same config.
fn criterion_9() -> (bool, String) {
    let mut e2e = graph_config(1.0, MethodName::Landweber);
    e2e.n_list = vec![64, 128, 256];
    e2e.trials = 6;
    let mut conc = circle_config();
    conc.n_list = vec![32, 64, 128];
    conc.trials = 6;
    let mut cfg_iter = graph_config(2.0, MethodName::IteratedTikhonov);
    cfg_iter.filter.m = Some(2);
    cfg_iter.trials = 4;
    let runs: [(&str, Box<dyn Fn() -> mcframe::ExperimentReport>); 3] = [
        ("end-to-end", Box::new(|| run_end_to_end(&e2e).unwrap())),
        ("concentration", Box::new(|| run_concentration(&conc).unwrap())),
        (
            "approximation-decay",
            Box::new(|| run_approximation_decay(&cfg_iter).unwrap()),
        ),
    ];
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    let mut identical = true;
    for (name, run) in &runs {
        run().write(dir_a.path(), name).unwrap();
        run().write(dir_b.path(), name).unwrap();
        for ext in ["csv", "json"] {
            let a = std::fs::read(dir_a.path().join(format!("{name}.{ext}"))).unwrap();
            let b = std::fs::read(dir_b.path().join(format!("{name}.{ext}"))).unwrap();
            identical &= a == b;
        }
    }
    (identical, format!("{} reports compared byte for byte", runs.len()))
}

fn acceptance() -> Vec<u32> {
    let secs = Duration::from_secs;
    let outcomes = vec![
        timed(1, Some(secs(1)), criterion_1),
        timed(2, Some(secs(1)), criterion_2),
        timed(3, None, criterion_3),
        timed(4, None, criterion_4),
        timed(5, None, criterion_5),
        timed(6, Some(secs(300)), criterion_6),
        timed(7, Some(secs(60)), criterion_7),
        timed(8, Some(secs(600)), criterion_8),
        timed(9, None, criterion_9),
    ];
    let mut unexpected = Vec::new();
    for o in &outcomes {
        let status = if o.passed { "PASS" } else { "FAIL" };
        let budget = o
            .budget
            .map(|b| format!(" / {}s", b.as_secs()))
            .unwrap_or_default();
        println!(
            "criterion {}: {status} [{:.2}s{budget}] {}",
            o.id,
            o.elapsed.as_secs_f64(),
            o.detail
        );
        let expect_pass = !EXPECTED_FAILURES.contains(&o.id);
        if o.passed != expect_pass {
            unexpected.push(o.id);
        }
    }
    unexpected
}

fn iterated_tikhonov_lipschitz_constant_is_m_times_j() {
    // the measured constant matches the derivative at zero, m·j
    for m in [2u32, 3] {
        let fam = FilterFamily::new(Method::IteratedTikhonov { m }, 1.0).unwrap();
        for j in [1u64, 8, 64] {
            let slope = fam.lipschitz_audit(j, 1 << 16).unwrap();
            let expect = (m as u64 * j) as f64;
            assert!(slope <= expect * (1.0 + 1e-9), "m={m} j={j} slope={slope}");
            assert!(slope >= expect * 0.99, "m={m} j={j} slope={slope}");
        }
    }
}

fn main() {
    iterated_tikhonov_lipschitz_constant_is_m_times_j();
    let unexpected = acceptance();
    if !unexpected.is_empty() {
        eprintln!("criteria with unexpected outcome: {unexpected:?}");
        std::process::exit(1);
    }
    println!("acceptance: all outcomes as expected");
}
