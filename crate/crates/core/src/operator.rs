//! Empirical integral operators built from samples.
//!
//! For samples `x_1, …, x_N` the empirical operator is
//! `T̂f = (1/N) Σ_i f(x_i) K_{x_i}`. It shares its nonzero spectrum with the
//! normalized kernel matrix `K̂[i,k] = K(x_i, x_k)/N`, and an eigenvector `û`
//! of `K̂` extends to an eigenfunction of `T̂` through the kernel.
//!
//! [`EigenSystem`] stores Euclidean-orthonormal eigenvectors `u_i`. The
//! vectors normalized in the empirical measure, `û_i = √N · u_i`, are the ones
//! for which `v̂_i(x_k) = √λ̂_i û_i[k]` holds with `v̂_i` of unit norm in the
//! RKHS; see [`EigenSystem::sample_vector`].
//!
//! [`WeightedOperator`] generalizes the construction to a discrete measure
//! `Σ_p w_p δ_{z_p}`. It is used for the exact operator of a finite graph,
//! for quadrature operators, and for the empirical operator with duplicate
//! samples merged.

use std::collections::BTreeMap;

use faer::Mat;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{Domain, Kernel, Point, EPS_PSD};
use crate::linalg;
use crate::reference::ReferenceOperator;
use crate::rng;

/// `ε_rank = RANK_TOLERANCE · κ² · N`.
pub const RANK_TOLERANCE: f64 = 1e-12;

/// Largest share of `‖f‖²` that [`hilbert_norm`] may drop in null directions.
pub const MAX_EXCLUDED_FRACTION: f64 = 1e-6;

/// `N` i.i.d. draws from a domain's measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSet {
    pub domain: String,
    pub seed: u64,
    pub generator: String,
    pub points: Vec<Point>,
}

impl SampleSet {
    /// Wrap explicit points, e.g. for a stratified design.
    pub fn from_points(domain: &Domain, points: Vec<Point>, seed: u64) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidParameter("sample set is empty".into()));
        }
        for p in &points {
            domain.check(p)?;
        }
        Ok(Self {
            domain: domain.name().to_string(),
            seed,
            generator: rng::GENERATOR.to_string(),
            points,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Draw `n` i.i.d. points from the uniform measure of `domain`.
pub fn draw_samples(domain: &Domain, n: usize, seed: u64) -> Result<SampleSet> {
    if n == 0 {
        return Err(Error::InvalidParameter("need at least one sample".into()));
    }
    let mut r = rng::rng_from_seed(seed);
    let points = match domain {
        Domain::EuclideanBox { lo, hi } => (0..n)
            .map(|_| {
                Point::Euclidean(
                    lo.iter()
                        .zip(hi)
                        .map(|(l, h)| l + (h - l) * r.random::<f64>())
                        .collect(),
                )
            })
            .collect(),
        Domain::Circle => (0..n).map(|_| Point::Circle(r.random::<f64>())).collect(),
        Domain::FiniteGraph(g) => {
            let m = g.vertices();
            (0..n).map(|_| Point::Vertex(r.random_range(0..m))).collect()
        }
    };
    Ok(SampleSet {
        domain: domain.name().to_string(),
        seed,
        generator: rng::GENERATOR.to_string(),
        points,
    })
}

/// Normalized sample kernel matrix `K̂[i,k] = K(x_i, x_k) / N`.
pub fn kernel_matrix(kernel: &Kernel, samples: &SampleSet) -> Result<Mat<f64>> {
    if samples.is_empty() {
        return Err(Error::InvalidParameter("sample set is empty".into()));
    }
    for p in &samples.points {
        kernel.evaluate(p, p)?;
    }
    let n = samples.len() as f64;
    let mut k = kernel.gram(&samples.points);
    for j in 0..k.ncols() {
        for i in 0..k.nrows() {
            k[(i, j)] /= n;
        }
    }
    Ok(k)
}

/// Eigenpairs of a normalized kernel matrix, eigenvalues descending.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenSystem {
    values: Vec<f64>,
    vectors: Mat<f64>,
    rank: usize,
    kappa_sq: f64,
    rank_threshold: f64,
}

/// Eigendecompose a normalized kernel matrix `K̂` with spectral bound `κ²`.
///
/// Eigenvalues within `ε_rank = 1e−12 · κ² · N` of zero are set to zero and
/// excluded from the rank.
pub fn eigendecompose(khat: &Mat<f64>, kappa_sq: f64) -> Result<EigenSystem> {
    let n = khat.nrows();
    eigendecompose_with_threshold(khat, kappa_sq, RANK_TOLERANCE * kappa_sq * n as f64)
}

pub(crate) fn eigendecompose_with_threshold(
    khat: &Mat<f64>,
    kappa_sq: f64,
    rank_threshold: f64,
) -> Result<EigenSystem> {
    let scale = (0..khat.nrows())
        .flat_map(|i| (0..khat.ncols()).map(move |j| (i, j)))
        .map(|(i, j)| khat[(i, j)].abs())
        .fold(0.0, f64::max);
    let asym = linalg::max_asymmetry(khat);
    if asym > 1e-12 * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::NotSymmetric(asym));
    }
    let eig = linalg::symmetric_eigen(khat)?;
    let mut values = eig.values;
    for v in values.iter_mut() {
        if v.abs() <= rank_threshold {
            *v = 0.0;
        }
    }
    let rank = values.iter().take_while(|&&v| v > rank_threshold).count();
    Ok(EigenSystem {
        values,
        vectors: eig.vectors,
        rank,
        kappa_sq,
        rank_threshold,
    })
}

impl EigenSystem {
    /// Assemble from parts, e.g. when loading an artifact. Columns of
    /// `vectors` must be Euclidean-orthonormal.
    pub fn from_parts(values: Vec<f64>, vectors: Mat<f64>, kappa_sq: f64) -> Result<Self> {
        let n = values.len();
        if vectors.nrows() != n || vectors.ncols() != n {
            return Err(Error::InvalidParameter(format!(
                "{} eigenvalues but a {}x{} eigenvector matrix",
                n,
                vectors.nrows(),
                vectors.ncols()
            )));
        }
        if values.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::InvalidParameter("eigenvalues must be descending".into()));
        }
        let rank_threshold = RANK_TOLERANCE * kappa_sq * n as f64;
        let rank = values.iter().take_while(|&&v| v > rank_threshold).count();
        Ok(Self {
            values,
            vectors,
            rank,
            kappa_sq,
            rank_threshold,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn positive_values(&self) -> &[f64] {
        &self.values[..self.rank]
    }

    /// Number of eigenvalues above the rank threshold.
    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn rank_threshold(&self) -> f64 {
        self.rank_threshold
    }

    pub fn kappa_sq(&self) -> f64 {
        self.kappa_sq
    }

    /// Euclidean-orthonormal eigenvector matrix (columns).
    pub fn vectors(&self) -> &Mat<f64> {
        &self.vectors
    }

    /// Euclidean-unit eigenvector `u_i`.
    pub fn vector(&self, i: usize) -> Vec<f64> {
        (0..self.len()).map(|r| self.vectors[(r, i)]).collect()
    }

    /// Eigenvector normalized in the empirical measure, `û_i = √N u_i`, so
    /// that `(1/N) Σ_k û_i[k] û_l[k] = δ_il`.
    pub fn sample_vector(&self, i: usize) -> Vec<f64> {
        let s = (self.len() as f64).sqrt();
        (0..self.len()).map(|r| s * self.vectors[(r, i)]).collect()
    }

    /// Coordinates `u_iᵀ f` for `i < rank`.
    pub(crate) fn project(&self, f: &[f64]) -> Vec<f64> {
        linalg::project(&self.vectors, self.rank, f)
    }

    /// `Σ_{i<rank} c_i u_i`.
    pub(crate) fn synthesize(&self, coeffs: &[f64]) -> Vec<f64> {
        linalg::combine(&self.vectors, coeffs)
    }

    /// `Σ_i λ̂_i u_i u_iᵀ`.
    pub fn reconstruct_matrix(&self) -> Mat<f64> {
        let n = self.len();
        Mat::from_fn(n, n, |a, b| {
            (0..n)
                .map(|i| self.values[i] * self.vectors[(a, i)] * self.vectors[(b, i)])
                .sum()
        })
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i >= self.len() {
            return Err(Error::IndexOutOfRange {
                index: i,
                limit: self.len(),
            });
        }
        if i >= self.rank {
            return Err(Error::NullEigendirection {
                index: i,
                rank: self.rank,
            });
        }
        Ok(())
    }
}

/// `μ^{−1/2} Σ_p y[p] √w_p K(x, z_p)`: unit-norm eigenfunction of the operator
/// of the discrete measure `Σ_p w_p δ_{z_p}` from an eigenvector `y` of
/// `W^{1/2} K W^{1/2}`.
fn extend_eigenvector(
    kernel: &Kernel,
    points: &[Point],
    sqrt_weights: &[f64],
    vectors: &Mat<f64>,
    column: usize,
    eigenvalue: f64,
    x: &Point,
) -> f64 {
    let s: f64 = points
        .iter()
        .zip(sqrt_weights)
        .enumerate()
        .map(|(p, (z, sw))| vectors[(p, column)] * sw * kernel.eval(x, z))
        .sum();
    s / eigenvalue.sqrt()
}

/// Out-of-sample extension
/// `v̂_i(x) = λ̂_i^{−1/2} (1/N) Σ_ℓ û_i[ℓ] K(x, x_ℓ)`.
pub fn nystrom_extend(
    eig: &EigenSystem,
    kernel: &Kernel,
    samples: &SampleSet,
    i: usize,
    x: &Point,
) -> Result<f64> {
    eig.check_index(i)?;
    if samples.len() != eig.len() {
        return Err(Error::InvalidParameter(format!(
            "{} samples for a {}-dimensional eigensystem",
            samples.len(),
            eig.len()
        )));
    }
    kernel.evaluate(x, x)?;
    let sw = vec![1.0 / (samples.len() as f64).sqrt(); samples.len()];
    Ok(extend_eigenvector(
        kernel,
        &samples.points,
        &sw,
        &eig.vectors,
        i,
        eig.values[i],
        x,
    ))
}

/// Sample values of `φ(T̂) f` restricted to the positive-eigenvalue subspace,
/// `U_r φ(Λ_r) U_rᵀ f`.
pub fn apply_empirical(eig: &EigenSystem, phi: impl Fn(f64) -> f64, f: &[f64]) -> Vec<f64> {
    let coords = eig.project(f);
    let scaled: Vec<f64> = coords
        .iter()
        .zip(eig.positive_values())
        .map(|(c, &l)| c * phi(l))
        .collect();
    eig.synthesize(&scaled)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HilbertNorm {
    pub norm: f64,
    /// Share of `‖f‖²` (sample values) in directions below the rank threshold.
    pub excluded_fraction: f64,
}

/// RKHS norm of the element of `span{K_{x_i}}` with sample values `f`:
/// `‖f‖² = Σ_{i≤r} ⟨û_i, f⟩²_N / λ̂_i` with `⟨a, b⟩_N = (1/N) Σ a b`.
pub fn hilbert_norm(eig: &EigenSystem, f: &[f64]) -> Result<HilbertNorm> {
    if f.len() != eig.len() {
        return Err(Error::InvalidParameter(format!(
            "{} sample values for a {}-dimensional eigensystem",
            f.len(),
            eig.len()
        )));
    }
    let total = linalg::norm_sq(f);
    if total == 0.0 {
        return Ok(HilbertNorm {
            norm: 0.0,
            excluded_fraction: 0.0,
        });
    }
    let coords = eig.project(f);
    let kept: f64 = linalg::norm_sq(&coords);
    let excluded_fraction = ((total - kept) / total).max(0.0);
    if excluded_fraction > MAX_EXCLUDED_FRACTION {
        return Err(Error::NotRepresentable {
            excluded: excluded_fraction,
        });
    }
    let n = eig.len() as f64;
    let sq: f64 = coords
        .iter()
        .zip(eig.positive_values())
        .map(|(c, l)| c * c / l)
        .sum::<f64>()
        / n;
    Ok(HilbertNorm {
        norm: sq.sqrt(),
        excluded_fraction,
    })
}

/// Operator of a discrete measure `Σ_p w_p δ_{z_p}`:
/// `T_w f = Σ_p w_p f(z_p) K_{z_p}`.
#[derive(Debug, Clone)]
pub struct WeightedOperator {
    points: Vec<Point>,
    weights: Vec<f64>,
    sqrt_weights: Vec<f64>,
    eig: EigenSystem,
}

impl WeightedOperator {
    /// `rank_scale` plays the role of `N` in `ε_rank = 1e−12 κ² N`.
    pub fn new(
        kernel: &Kernel,
        points: Vec<Point>,
        weights: Vec<f64>,
        rank_scale: usize,
    ) -> Result<Self> {
        if points.is_empty() || points.len() != weights.len() {
            return Err(Error::InvalidParameter(format!(
                "{} points with {} weights",
                points.len(),
                weights.len()
            )));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::InvalidParameter("weights must be positive".into()));
        }
        for p in &points {
            kernel.evaluate(p, p)?;
        }
        let sqrt_weights: Vec<f64> = weights.iter().map(|w| w.sqrt()).collect();
        let mut b = kernel.gram(&points);
        for j in 0..b.ncols() {
            for i in 0..b.nrows() {
                b[(i, j)] *= sqrt_weights[i] * sqrt_weights[j];
            }
        }
        let kappa_sq = kernel.kappa_bound();
        let eig = eigendecompose_with_threshold(
            &b,
            kappa_sq,
            RANK_TOLERANCE * kappa_sq * rank_scale as f64,
        )?;
        Ok(Self {
            points,
            weights,
            sqrt_weights,
            eig,
        })
    }

    /// Empirical operator of `samples` with coincident points merged,
    /// `T̂ = Σ_z (n_z/N) K_z ⊗ K_z`.
    pub fn from_samples(kernel: &Kernel, samples: &SampleSet) -> Result<Self> {
        let (points, weights) = merge_duplicates(&samples.points);
        Self::new(kernel, points, weights, samples.len())
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn eigen(&self) -> &EigenSystem {
        &self.eig
    }

    /// Unit-norm eigenfunction `e_i(x)` for `i < rank`.
    pub fn eigenfunction(&self, kernel: &Kernel, i: usize, x: &Point) -> Result<f64> {
        self.eig.check_index(i)?;
        kernel.evaluate(x, x)?;
        Ok(self.eigenfunction_unchecked(kernel, i, x))
    }

    pub(crate) fn eigenfunction_unchecked(&self, kernel: &Kernel, i: usize, x: &Point) -> f64 {
        extend_eigenvector(
            kernel,
            &self.points,
            &self.sqrt_weights,
            &self.eig.vectors,
            i,
            self.eig.values[i],
            x,
        )
    }

    /// `⟨f, e_i⟩` for `i < rank`, from the values of `f` at the support
    /// points. Exact for any `f` in the RKHS.
    pub fn spectral_coefficients(&self, values: &[f64]) -> Vec<f64> {
        let weighted: Vec<f64> = values
            .iter()
            .zip(&self.sqrt_weights)
            .map(|(v, s)| v * s)
            .collect();
        self.eig
            .project(&weighted)
            .into_iter()
            .zip(self.eig.positive_values())
            .map(|(c, l)| c / l.sqrt())
            .collect()
    }

    /// `Σ_{p,q} w_p w_q K(z_p, z_q)² = ‖T_w‖²_HS`.
    pub fn hs_norm_sq(&self, kernel: &Kernel) -> f64 {
        weighted_square_sum(kernel, &self.points, &self.weights)
    }
}

/// Group identical points, returning distinct points (in first-seen order)
/// and their empirical weights `n_z / N`.
pub fn merge_duplicates(points: &[Point]) -> (Vec<Point>, Vec<f64>) {
    #[derive(PartialEq, Eq, PartialOrd, Ord)]
    enum Key {
        E(Vec<u64>),
        C(u64),
        V(usize),
    }
    let key = |p: &Point| match p {
        Point::Euclidean(x) => Key::E(x.iter().map(|v| v.to_bits()).collect()),
        Point::Circle(t) => Key::C(t.to_bits()),
        Point::Vertex(v) => Key::V(*v),
    };
    let mut index: BTreeMap<Key, usize> = BTreeMap::new();
    let mut distinct = Vec::new();
    let mut counts: Vec<usize> = Vec::new();
    for p in points {
        let slot = *index.entry(key(p)).or_insert_with(|| {
            distinct.push(p.clone());
            counts.push(0);
            distinct.len() - 1
        });
        counts[slot] += 1;
    }
    let n = points.len() as f64;
    (distinct, counts.into_iter().map(|c| c as f64 / n).collect())
}

/// `Σ_{p,q} w_p w_q K(z_p, z_q)²`, rows evaluated in parallel and summed in
/// index order.
pub(crate) fn weighted_square_sum(kernel: &Kernel, points: &[Point], weights: &[f64]) -> f64 {
    let rows: Vec<f64> = (0..points.len())
        .into_par_iter()
        .map(|p| {
            let mut s = 0.0;
            for q in 0..p {
                let k = kernel.eval(&points[p], &points[q]);
                s += 2.0 * weights[q] * k * k;
            }
            let k = kernel.eval(&points[p], &points[p]);
            s += weights[p] * k * k;
            weights[p] * s
        })
        .collect();
    rows.iter().sum()
}

/// `‖T̂‖²_HS = Σ λ̂_i² = ‖K̂‖²_F`, computed on merged samples without an
/// eigendecomposition.
pub fn empirical_hs_norm_sq(kernel: &Kernel, samples: &SampleSet) -> f64 {
    let (points, weights) = merge_duplicates(&samples.points);
    weighted_square_sum(kernel, &points, &weights)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HsDistance {
    pub value: f64,
    /// Estimated quadrature error of `value`, when the reference operator is
    /// itself a quadrature approximation.
    pub quadrature_error: Option<f64>,
}

/// `‖T − T̂‖_HS = sqrt(‖T‖² + ‖T̂‖² − 2⟨T, T̂⟩)` with `‖T̂‖² = Σ λ̂_i²`.
pub fn hs_distance(
    reference: &ReferenceOperator,
    eig: &EigenSystem,
    samples: &SampleSet,
) -> Result<HsDistance> {
    let empirical: f64 = eig.values().iter().map(|l| l * l).sum();
    distance_from_parts(reference, empirical, samples)
}

/// [`hs_distance`] with `‖T̂‖²_HS` taken from the Frobenius norm of `K̂`.
pub fn hs_distance_from_samples(
    reference: &ReferenceOperator,
    samples: &SampleSet,
) -> Result<HsDistance> {
    let empirical = empirical_hs_norm_sq(reference.kernel(), samples);
    distance_from_parts(reference, empirical, samples)
}

fn distance_from_parts(
    reference: &ReferenceOperator,
    empirical_sq: f64,
    samples: &SampleSet,
) -> Result<HsDistance> {
    let (points, weights) = merge_duplicates(&samples.points);
    let parts = reference.hs_parts(&points, &weights)?;
    let radicand = parts.reference_sq + empirical_sq - 2.0 * parts.cross;
    let kappa_sq = reference.kernel().kappa_bound();
    if radicand < -1e-12 * kappa_sq * kappa_sq {
        return Err(Error::InvalidParameter(format!(
            "negative Hilbert-Schmidt radicand {radicand:e}"
        )));
    }
    Ok(HsDistance {
        value: radicand.max(0.0).sqrt(),
        quadrature_error: parts.quadrature_error,
    })
}

/// Minimum eigenvalue of a raw kernel Gram matrix relative to `κ²`.
pub fn min_gram_eigenvalue(kernel: &Kernel, points: &[Point]) -> Result<f64> {
    let g = kernel.gram(points);
    let eig = linalg::symmetric_eigen(&g)?;
    Ok(*eig.values.last().unwrap_or(&0.0))
}

/// Whether the Gram matrix of `points` is PSD up to `ε_psd κ²`.
pub fn is_psd(kernel: &Kernel, points: &[Point]) -> Result<bool> {
    Ok(min_gram_eigenvalue(kernel, points)? >= -EPS_PSD * kernel.kappa_bound())
}
