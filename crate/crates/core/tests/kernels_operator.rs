use mcframe::experiments::stratified_samples;
use mcframe::operator::{
    empirical_hs_norm_sq, hs_distance_from_samples, is_psd, merge_duplicates,
};
use mcframe::reference::reference_operator_with_quadrature;
use mcframe::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

fn circle(rate: f64) -> Kernel {
    Kernel::circle(FourierProfile::Exponential { rate }, 256).unwrap()
}

/// `exp(A)` by scaling and squaring with a Taylor core.
fn expm(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let norm: f64 = a.iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
    let squarings = (norm.max(1.0).log2().ceil() as i32 + 4).max(0);
    let scale = 2f64.powi(-squarings);
    let mul = |x: &Vec<Vec<f64>>, y: &Vec<Vec<f64>>| -> Vec<Vec<f64>> {
        (0..n)
            .map(|i| (0..n).map(|j| (0..n).map(|k| x[i][k] * y[k][j]).sum()).collect())
            .collect()
    };
    let scaled: Vec<Vec<f64>> = a.iter().map(|r| r.iter().map(|v| v * scale).collect()).collect();
    let mut result: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    let mut term = result.clone();
    for k in 1..=20 {
        term = mul(&term, &scaled);
        for row in term.iter_mut() {
            for v in row.iter_mut() {
                *v /= k as f64;
            }
        }
        for i in 0..n {
            for j in 0..n {
                result[i][j] += term[i][j];
            }
        }
    }
    for _ in 0..squarings {
        result = mul(&result, &result);
    }
    result
}

#[test]
fn heat_kernel_matches_matrix_exponential() {
    for (g, s) in [
        (Graph::complete(3).unwrap(), 0.5),
        (Graph::cycle(7).unwrap(), 1.3),
        (Graph::from_edges(4, &[(0, 1, 2.0), (1, 2, 0.5), (2, 3, 1.0), (0, 3, 0.25)]).unwrap(), 0.8),
    ] {
        let m = g.vertices();
        let l = g.laplacian();
        let minus_sl: Vec<Vec<f64>> =
            (0..m).map(|i| (0..m).map(|j| -s * l[(i, j)]).collect()).collect();
        let e = expm(&minus_sl);
        let k = Kernel::graph_heat(&g, s, 1.0).unwrap();
        let mut diag_max: f64 = 0.0;
        for i in 0..m {
            diag_max = diag_max.max(e[i][i]);
            for j in 0..m {
                let v = k.evaluate(&Point::Vertex(i), &Point::Vertex(j)).unwrap();
                assert!((v - e[i][j]).abs() <= 1e-12, "{i},{j}: {v} vs {}", e[i][j]);
            }
        }
        assert!((k.kappa_bound() - diag_max).abs() <= 1e-12);
    }
}

#[test]
fn circle_kappa_is_geometric_sum() {
    let k = Kernel::circle(FourierProfile::Exponential { rate: 1.0 }, 50).unwrap();
    let direct: f64 = (-50i64..=50).map(|m| (-(m.abs() as f64)).exp()).sum();
    assert!((k.kappa_bound() - direct).abs() <= 1e-13 * direct);
    let g = Kernel::circle(FourierProfile::Gaussian { rate: 1.0 }, 256).unwrap();
    assert_eq!(g.fourier_eigenvalue(0).unwrap(), 1.0);
    assert_eq!(k.fourier_eigenvalue(3).unwrap(), (-3f64).exp());
    assert_eq!(k.fourier_eigenvalue(-3).unwrap(), k.fourier_eigenvalue(3).unwrap());
    assert!(k.fourier_eigenvalue(51).is_err());
}

#[test]
fn kernels_are_symmetric() {
    let mut rng = ChaCha20Rng::seed_from_u64(1);
    let g = Graph::cycle(30).unwrap();
    let heat = Kernel::graph_heat(&g, 0.7, 1.0).unwrap();
    let gauss = Kernel::gaussian(0.4, 3).unwrap();
    for k in [circle(1.0), circle(0.1)] {
        for _ in 0..1000 {
            let (x, y) = (Point::Circle(rng.random()), Point::Circle(rng.random()));
            let d = (k.evaluate(&x, &y).unwrap() - k.evaluate(&y, &x).unwrap()).abs();
            assert!(d <= 1e-14 * k.kappa_bound());
        }
    }
    for _ in 0..1000 {
        let x = Point::Euclidean((0..3).map(|_| rng.random()).collect());
        let y = Point::Euclidean((0..3).map(|_| rng.random()).collect());
        assert_eq!(gauss.evaluate(&x, &y).unwrap(), gauss.evaluate(&y, &x).unwrap());
        let (a, b) = (Point::Vertex(rng.random_range(0..30)), Point::Vertex(rng.random_range(0..30)));
        let d = (heat.evaluate(&a, &b).unwrap() - heat.evaluate(&b, &a).unwrap()).abs();
        assert!(d <= 1e-14 * heat.kappa_bound());
    }
}

#[test]
fn kernels_are_positive_semidefinite() {
    let g = Graph::path(25).unwrap();
    let cases = [
        (Domain::Circle, circle(1.0)),
        (Domain::Circle, Kernel::circle(FourierProfile::Gaussian { rate: 0.05 }, 256).unwrap()),
        (Domain::euclidean_box(vec![0.0, 0.0], vec![1.0, 2.0]).unwrap(), Kernel::gaussian(0.5, 2).unwrap()),
        (Domain::FiniteGraph(g.clone()), Kernel::graph_heat(&g, 2.0, 3.0).unwrap()),
    ];
    for (d, k) in &cases {
        for (n, seed) in [(16, 1), (64, 2), (128, 3)] {
            let s = draw_samples(d, n, seed).unwrap();
            assert!(is_psd(k, &s.points).unwrap(), "{} n={n}", k.descriptor());
        }
    }
}

#[test]
fn graph_reference_trace_bound() {
    for s in [0.1, 1.0, 10.0] {
        let g = Graph::cycle(12).unwrap();
        let k = Kernel::graph_heat(&g, s, 1.0).unwrap();
        let r = reference_operator(&k, &Domain::FiniteGraph(g)).unwrap();
        let sum: f64 = r.eigenvalues().unwrap().iter().sum();
        let diag: f64 = (0..12)
            .map(|v| k.evaluate(&Point::Vertex(v), &Point::Vertex(v)).unwrap())
            .sum::<f64>()
            / 12.0;
        assert!((sum - diag).abs() <= 1e-12);
        assert!(sum <= k.kappa_bound() * (1.0 + 1e-12));
        assert!(r.eigenvalues().unwrap().iter().all(|&l| l >= 0.0 && l <= k.kappa_bound()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn circle_closed_form_matches_synthesis(rate in 0.05f64..3.0, d in 0.0f64..1.0) {
        let k = circle(rate);
        let c = k.fourier_eigenvalue(0).unwrap();
        let mut direct = c;
        for m in 1..=256i64 {
            direct += 2.0 * k.fourier_eigenvalue(m).unwrap()
                * (2.0 * std::f64::consts::PI * m as f64 * d).cos();
        }
        let v = k.evaluate(&Point::Circle(d), &Point::Circle(0.0)).unwrap();
        prop_assert!((v - direct).abs() <= 1e-12 * k.kappa_bound());
    }

    #[test]
    fn eigensystem_reconstructs_matrix(n in 2usize..40, seed in any::<u64>()) {
        let k = circle(0.5);
        let s = draw_samples(&Domain::Circle, n, seed).unwrap();
        let m = kernel_matrix(&k, &s).unwrap();
        let eig = eigendecompose(&m, k.kappa_bound()).unwrap();
        let r = eig.reconstruct_matrix();
        for i in 0..n {
            for j in 0..n {
                prop_assert!((r[(i, j)] - m[(i, j)]).abs() <= 1e-10 * k.kappa_bound());
            }
        }
        prop_assert!(eig.values().windows(2).all(|w| w[0] >= w[1]));
        prop_assert!(eig.values()[0] <= k.kappa_bound() * (1.0 + 1e-12));
    }

    /// The Nyström functions are orthonormal in the RKHS: with
    /// `v̂_i = Σ_ℓ a_iℓ K_{x_ℓ}`, `⟨v̂_i, v̂_l⟩ = a_iᵀ K a_l`.
    /// The eigensolver's backward error is `O(ε κ²)`, which this Gram entry
    /// amplifies by `1/√(λ̂_i λ̂_l)`; directions below `1e-6 κ²` are held to
    /// that bound instead of the flat one.
    #[test]
    fn nystrom_functions_orthonormal(n in 2usize..48, seed in any::<u64>()) {
        let k = circle(1.0);
        let s = draw_samples(&Domain::Circle, n, seed).unwrap();
        let m = kernel_matrix(&k, &s).unwrap();
        let eig = eigendecompose(&m, k.kappa_bound()).unwrap();
        let nf = n as f64;
        let coeffs: Vec<Vec<f64>> = (0..eig.rank())
            .map(|i| {
                let u = eig.sample_vector(i);
                let scale = 1.0 / (eig.values()[i].sqrt() * nf);
                u.iter().map(|x| x * scale).collect()
            })
            .collect();
        for i in 0..eig.rank() {
            for l in 0..eig.rank() {
                let mut g = 0.0;
                for p in 0..n {
                    for q in 0..n {
                        g += coeffs[i][p] * nf * m[(p, q)] * coeffs[l][q];
                    }
                }
                let target = if i == l { 1.0 } else { 0.0 };
                let (li, ll) = (eig.values()[i], eig.values()[l]);
                let floor = 1e-6 * k.kappa_bound();
                let tol = if li.min(ll) >= floor {
                    1e-8
                } else {
                    64.0 * f64::EPSILON * nf * k.kappa_bound() / (li * ll).sqrt()
                };
                prop_assert!((g - target).abs() <= tol, "({i},{l}) = {g}");
            }
        }
    }

    #[test]
    fn sample_vectors_are_orthonormal_in_empirical_measure(n in 1usize..30, seed in any::<u64>()) {
        let k = circle(0.3);
        let s = draw_samples(&Domain::Circle, n, seed).unwrap();
        let eig = eigendecompose(&kernel_matrix(&k, &s).unwrap(), k.kappa_bound()).unwrap();
        for i in 0..n {
            let u = eig.sample_vector(i);
            let norm: f64 = u.iter().map(|x| x * x).sum::<f64>() / n as f64;
            prop_assert!((norm - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn hs_distance_invariant_under_sample_order(seed in any::<u64>(), n in 2usize..60) {
        let g = Graph::cycle(9).unwrap();
        let k = Kernel::graph_heat(&g, 0.4, 1.0).unwrap();
        let d = Domain::FiniteGraph(g);
        let r = reference_operator(&k, &d).unwrap();
        let s = draw_samples(&d, n, seed).unwrap();
        let mut rev = s.clone();
        rev.points.reverse();
        let a = hs_distance_from_samples(&r, &s).unwrap().value;
        let b = hs_distance_from_samples(&r, &rev).unwrap().value;
        let eig = eigendecompose(&kernel_matrix(&k, &s).unwrap(), k.kappa_bound()).unwrap();
        let c = hs_distance(&r, &eig, &s).unwrap().value;
        prop_assert!((a - b).abs() <= 1e-12);
        prop_assert!((a - c).abs() <= 1e-9, "{a} vs {c}");
    }

    /// `‖T − T̂‖²_HS = δᵀ (K∘K) δ` with `δ` the difference of the empirical
    /// and uniform vertex weights.
    #[test]
    fn hs_distance_matches_weight_difference_oracle(seed in any::<u64>(), n in 1usize..200) {
        let m = 11;
        let g = Graph::path(m).unwrap();
        let k = Kernel::graph_heat(&g, 0.9, 2.0).unwrap();
        let d = Domain::FiniteGraph(g);
        let r = reference_operator(&k, &d).unwrap();
        let s = draw_samples(&d, n, seed).unwrap();
        let mut delta = vec![-1.0 / m as f64; m];
        for p in &s.points {
            if let Point::Vertex(v) = p {
                delta[*v] += 1.0 / n as f64;
            }
        }
        let mut sq = 0.0;
        for a in 0..m {
            for b in 0..m {
                let kv = k.evaluate(&Point::Vertex(a), &Point::Vertex(b)).unwrap();
                sq += delta[a] * delta[b] * kv * kv;
            }
        }
        let got = hs_distance_from_samples(&r, &s).unwrap().value;
        prop_assert!((got - sq.max(0.0).sqrt()).abs() <= 1e-7 * k.kappa_bound(), "{got} vs {}", sq.sqrt());
    }
}

#[test]
fn frobenius_norm_equals_eigenvalue_sum() {
    let k = circle(1.0);
    let s = draw_samples(&Domain::Circle, 50, 9).unwrap();
    let eig = eigendecompose(&kernel_matrix(&k, &s).unwrap(), k.kappa_bound()).unwrap();
    let spectral: f64 = eig.values().iter().map(|l| l * l).sum();
    assert!((empirical_hs_norm_sq(&k, &s) - spectral).abs() <= 1e-12 * spectral);
}

#[test]
fn stratified_graph_samples_have_zero_distance() {
    let g = Graph::cycle(8).unwrap();
    let k = Kernel::graph_heat(&g, 0.6, 1.0).unwrap();
    let d = Domain::FiniteGraph(g);
    let r = reference_operator(&k, &d).unwrap();
    let s = stratified_samples(&d, 64).unwrap();
    assert!(hs_distance_from_samples(&r, &s).unwrap().value <= 1e-7);
    assert!(stratified_samples(&d, 60).is_err());
}

#[test]
fn median_distance_decreases_with_n() {
    let k = circle(1.0);
    let r = reference_operator(&k, &Domain::Circle).unwrap();
    let mut last = f64::INFINITY;
    for n in [32usize, 128, 512, 2048] {
        let mut v: Vec<f64> = (0..20)
            .map(|t| {
                let s = draw_samples(&Domain::Circle, n, 1000 * n as u64 + t).unwrap();
                hs_distance_from_samples(&r, &s).unwrap().value
            })
            .collect();
        v.sort_by(f64::total_cmp);
        let median = 0.5 * (v[9] + v[10]);
        assert!(median <= last, "n={n}: {median} > {last}");
        last = median;
    }
}

#[test]
fn box_distance_reports_quadrature_error() {
    let k = Kernel::gaussian(0.5, 1).unwrap();
    let d = Domain::euclidean_box(vec![0.0], vec![1.0]).unwrap();
    let r = reference_operator_with_quadrature(&k, &d, 512).unwrap();
    let s = draw_samples(&d, 100, 4).unwrap();
    let h = hs_distance_from_samples(&r, &s).unwrap();
    let err = h.quadrature_error.expect("box distance carries an error estimate");
    assert!(err >= 0.0 && err < 1e-3 * h.value * h.value + 1e-8);
    assert!(h.value > 0.0);
}

#[test]
fn hilbert_norm_rejects_null_space_mass() {
    let k = circle(1.0);
    let x = Point::Circle(0.3);
    let s = SampleSet::from_points(&Domain::Circle, vec![x.clone(), x], 0).unwrap();
    let eig = eigendecompose(&kernel_matrix(&k, &s).unwrap(), k.kappa_bound()).unwrap();
    // different values at the same point cannot come from a function
    assert!(matches!(
        hilbert_norm(&eig, &[1.0, -1.0]),
        Err(Error::NotRepresentable { .. })
    ));
    let h = hilbert_norm(&eig, &[1.0, 1.0]).unwrap();
    // f = c K_x with f(x) = 1 has ‖f‖² = 1 / K(x, x)
    assert!((h.norm * h.norm - 1.0 / k.kappa_bound()).abs() <= 1e-12);
}

#[test]
fn weighted_operator_matches_full_eigensystem() {
    let g = Graph::cycle(10).unwrap();
    let k = Kernel::graph_heat(&g, 0.3, 1.0).unwrap();
    let d = Domain::FiniteGraph(g);
    let s = draw_samples(&d, 60, 12).unwrap();
    let full = eigendecompose(&kernel_matrix(&k, &s).unwrap(), k.kappa_bound()).unwrap();
    let merged = WeightedOperator::from_samples(&k, &s).unwrap();
    let (pts, w) = merge_duplicates(&s.points);
    assert_eq!(merged.points(), &pts[..]);
    assert!((w.iter().sum::<f64>() - 1.0).abs() <= 1e-15);
    assert_eq!(full.rank(), merged.eigen().rank());
    for (a, b) in full.positive_values().iter().zip(merged.eigen().positive_values()) {
        assert!((a - b).abs() <= 1e-13);
    }
}

#[test]
fn point_domain_errors() {
    let k = circle(1.0);
    assert!(k.evaluate(&Point::Vertex(0), &Point::Circle(0.1)).is_err());
    assert!(k.evaluate(&Point::Circle(f64::NAN), &Point::Circle(0.1)).is_err());
    let g = Graph::cycle(4).unwrap();
    let h = Kernel::graph_heat(&g, 1.0, 1.0).unwrap();
    assert!(h.evaluate(&Point::Vertex(4), &Point::Vertex(0)).is_err());
}
