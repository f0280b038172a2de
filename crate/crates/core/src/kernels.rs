//! Domains, sampling measures and bounded positive semi-definite kernels.
//!
//! Three settings are supported:
//!
//! * a Euclidean box `[lo, hi] ⊂ ℝ^d` with the uniform measure and a
//!   Gaussian kernel,
//! * the unit circle `ℝ/ℤ` with the uniform measure and a translation
//!   invariant kernel given by its Fourier coefficients,
//! * a finite weighted graph with the uniform measure on vertices and the
//!   heat kernel `c · exp(−sL)` of the combinatorial Laplacian `L = D − W`.
//!
//! All kernels are real and symmetric.

use std::f64::consts::PI;
use std::fmt;
use std::path::Path;

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

/// Default Fourier truncation of circle kernels.
pub const DEFAULT_FOURIER_TRUNCATION: u32 = 256;

/// Relative tolerance used when checking positive semi-definiteness.
pub const EPS_PSD: f64 = 1e-10;

/// A point of one of the supported domains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Point {
    Euclidean(Vec<f64>),
    /// Angle in turns; any real is accepted and read modulo 1.
    Circle(f64),
    Vertex(usize),
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Point::Euclidean(x) => write!(f, "{x:?}"),
            Point::Circle(t) => write!(f, "circle({t})"),
            Point::Vertex(v) => write!(f, "vertex({v})"),
        }
    }
}

/// A finite undirected graph with nonnegative edge weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    weights: Mat<f64>,
}

impl Graph {
    /// Build from a dense weighted adjacency matrix.
    pub fn from_adjacency(weights: Mat<f64>) -> Result<Self> {
        let m = weights.nrows();
        if m != weights.ncols() {
            return Err(Error::InvalidDomain("adjacency matrix is not square".into()));
        }
        if m < 2 {
            return Err(Error::InvalidDomain(format!(
                "a graph needs at least 2 vertices, got {m}"
            )));
        }
        for i in 0..m {
            for j in 0..m {
                let w = weights[(i, j)];
                if !w.is_finite() || w < 0.0 {
                    return Err(Error::InvalidDomain(format!(
                        "edge ({i}, {j}) has invalid weight {w}"
                    )));
                }
                if w != weights[(j, i)] {
                    return Err(Error::InvalidDomain(format!(
                        "adjacency is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(Self { weights })
    }

    /// Build from `(u, v, weight)` triples on vertices `0..vertices`.
    /// Repeated edges accumulate.
    pub fn from_edges(vertices: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let mut w = Mat::<f64>::zeros(vertices, vertices);
        for &(u, v, weight) in edges {
            if u >= vertices || v >= vertices {
                return Err(Error::InvalidDomain(format!(
                    "edge ({u}, {v}) references a vertex ≥ {vertices}"
                )));
            }
            if u == v {
                // self-loops do not change L = D − W
                continue;
            }
            w[(u, v)] += weight;
            w[(v, u)] += weight;
        }
        Self::from_adjacency(w)
    }

    /// Parse an edge-list text: one `u v weight` triple per line, 0-based,
    /// whitespace separated. Blank lines and `#` comments are skipped. The
    /// vertex count is one more than the largest index unless given.
    pub fn parse_edge_list(text: &str, vertices: Option<usize>) -> Result<Self> {
        let mut edges = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 3 {
                return Err(Error::Parse(format!(
                    "line {}: expected `u v weight`, got {:?}",
                    lineno + 1,
                    raw
                )));
            }
            let bad = |what: &str| Error::Parse(format!("line {}: bad {what}", lineno + 1));
            let u: usize = fields[0].parse().map_err(|_| bad("vertex u"))?;
            let v: usize = fields[1].parse().map_err(|_| bad("vertex v"))?;
            let w: f64 = fields[2].parse().map_err(|_| bad("weight"))?;
            edges.push((u, v, w));
        }
        let inferred = edges.iter().map(|&(u, v, _)| u.max(v) + 1).max().unwrap_or(0);
        let m = vertices.unwrap_or(inferred);
        Self::from_edges(m, &edges)
    }

    pub fn read_edge_list(path: &Path, vertices: Option<usize>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse_edge_list(&text, vertices)
    }

    /// Cycle graph on `m` vertices with unit weights.
    pub fn cycle(m: usize) -> Result<Self> {
        if m < 3 {
            return Err(Error::InvalidDomain(format!("a cycle needs 3 vertices, got {m}")));
        }
        let edges: Vec<_> = (0..m).map(|i| (i, (i + 1) % m, 1.0)).collect();
        Self::from_edges(m, &edges)
    }

    /// Path graph on `m` vertices with unit weights.
    pub fn path(m: usize) -> Result<Self> {
        let edges: Vec<_> = (1..m).map(|i| (i - 1, i, 1.0)).collect();
        Self::from_edges(m, &edges)
    }

    /// Complete graph on `m` vertices with unit weights.
    pub fn complete(m: usize) -> Result<Self> {
        let mut edges = Vec::new();
        for i in 0..m {
            for j in i + 1..m {
                edges.push((i, j, 1.0));
            }
        }
        Self::from_edges(m, &edges)
    }

    pub fn vertices(&self) -> usize {
        self.weights.nrows()
    }

    pub fn adjacency(&self) -> &Mat<f64> {
        &self.weights
    }

    /// Combinatorial Laplacian `L = D − W`.
    pub fn laplacian(&self) -> Mat<f64> {
        let m = self.vertices();
        Mat::from_fn(m, m, |i, j| {
            if i == j {
                (0..m).map(|k| self.weights[(i, k)]).sum::<f64>() - self.weights[(i, i)]
            } else {
                -self.weights[(i, j)]
            }
        })
    }

    /// Edge list text in the ingestion format, one edge per line.
    pub fn to_edge_list(&self) -> String {
        let m = self.vertices();
        let mut out = String::new();
        for i in 0..m {
            for j in i + 1..m {
                let w = self.weights[(i, j)];
                if w != 0.0 {
                    out.push_str(&format!("{i} {j} {w:?}\n"));
                }
            }
        }
        out
    }
}

/// A domain together with its (uniform) probability measure.
#[derive(Debug, Clone, PartialEq)]
pub enum Domain {
    EuclideanBox { lo: Vec<f64>, hi: Vec<f64> },
    Circle,
    FiniteGraph(Graph),
}

impl Domain {
    pub fn euclidean_box(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.is_empty() || lo.len() != hi.len() {
            return Err(Error::InvalidDomain(format!(
                "box bounds have mismatched dimensions {} and {}",
                lo.len(),
                hi.len()
            )));
        }
        for (a, (l, h)) in lo.iter().zip(&hi).enumerate() {
            if !(l.is_finite() && h.is_finite() && l < h) {
                return Err(Error::InvalidDomain(format!(
                    "axis {a}: need lo < hi, got [{l}, {h}]"
                )));
            }
        }
        Ok(Domain::EuclideanBox { lo, hi })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Domain::EuclideanBox { .. } => "euclidean-box",
            Domain::Circle => "circle",
            Domain::FiniteGraph(_) => "finite-graph",
        }
    }

    pub fn contains(&self, x: &Point) -> bool {
        match (self, x) {
            (Domain::EuclideanBox { lo, hi }, Point::Euclidean(p)) => {
                p.len() == lo.len()
                    && p.iter().zip(lo.iter().zip(hi)).all(|(v, (l, h))| *l <= *v && *v <= *h)
            }
            (Domain::Circle, Point::Circle(t)) => t.is_finite(),
            (Domain::FiniteGraph(g), Point::Vertex(v)) => *v < g.vertices(),
            _ => false,
        }
    }

    pub(crate) fn check(&self, x: &Point) -> Result<()> {
        if self.contains(x) {
            Ok(())
        } else {
            Err(Error::PointOutsideDomain {
                point: x.to_string(),
                domain: self.name(),
            })
        }
    }
}

/// Decay profile of circle-kernel Fourier coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "profile", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FourierProfile {
    /// `k̂(m) = e^{−rate·|m|}`
    Exponential { rate: f64 },
    /// `k̂(m) = e^{−rate·m²}`
    Gaussian { rate: f64 },
    /// `k̂(0), k̂(1), …` given explicitly; missing entries are zero.
    Explicit { coefficients: Vec<f64> },
}

/// Translation-invariant kernel on the circle,
/// `K(x, y) = Σ_{|m|≤M_F} k̂(m) e^{2πim(x−y)}`.
#[derive(Debug, Clone, PartialEq)]
pub struct CircleKernel {
    profile: FourierProfile,
    truncation: u32,
    /// `k̂(m)` for `m = 0..=truncation`.
    coefficients: Vec<f64>,
    /// Largest `m` whose coefficient contributes at double precision.
    effective: usize,
    kappa_sq: f64,
}

impl CircleKernel {
    pub fn new(profile: FourierProfile, truncation: u32) -> Result<Self> {
        let n = truncation as usize + 1;
        let coefficients: Vec<f64> = match &profile {
            FourierProfile::Exponential { rate } | FourierProfile::Gaussian { rate } => {
                if !(rate.is_finite() && *rate > 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "Fourier decay rate must be positive, got {rate}"
                    )));
                }
                let quad = matches!(profile, FourierProfile::Gaussian { .. });
                (0..n)
                    .map(|m| {
                        let m = m as f64;
                        (-rate * if quad { m * m } else { m }).exp()
                    })
                    .collect()
            }
            FourierProfile::Explicit { coefficients } => {
                if coefficients.is_empty() {
                    return Err(Error::InvalidParameter("no Fourier coefficients".into()));
                }
                (0..n)
                    .map(|m| coefficients.get(m).copied().unwrap_or(0.0))
                    .collect()
            }
        };
        if let Some(bad) = coefficients.iter().find(|c| !(c.is_finite() && **c >= 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "Fourier coefficients must be finite and nonnegative, got {bad}"
            )));
        }
        let kappa_sq = coefficients[0] + 2.0 * coefficients[1..].iter().sum::<f64>();
        if kappa_sq <= 0.0 {
            return Err(Error::InvalidParameter("all Fourier coefficients vanish".into()));
        }
        let floor = kappa_sq * 1e-18;
        let effective = coefficients
            .iter()
            .rposition(|&c| c > floor)
            .unwrap_or(0);
        Ok(Self {
            profile,
            truncation,
            coefficients,
            effective,
            kappa_sq,
        })
    }

    pub fn profile(&self) -> &FourierProfile {
        &self.profile
    }

    pub fn truncation(&self) -> u32 {
        self.truncation
    }

    /// `k̂(m)` for `m = 0..=M_F`.
    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    /// Highest frequency with a coefficient above `1e−18 κ²`.
    pub fn effective_truncation(&self) -> usize {
        self.effective
    }

    pub fn kappa_sq(&self) -> f64 {
        self.kappa_sq
    }

    /// `k̂(m)`, the eigenvalue of the integral operator on the mode `e^{2πimx}`.
    pub fn fourier_eigenvalue(&self, m: i64) -> Result<f64> {
        let a = m.unsigned_abs() as usize;
        if a > self.truncation as usize {
            return Err(Error::IndexOutOfRange {
                index: a,
                limit: self.truncation as usize,
            });
        }
        Ok(self.coefficients[a])
    }

    /// `K` as a function of the difference `d = x − y` (in turns).
    pub fn eval_difference(&self, d: f64) -> f64 {
        let theta = 2.0 * PI * d.rem_euclid(1.0);
        match self.profile {
            FourierProfile::Exponential { rate } => {
                // 1 + 2 Re Σ_{m=1}^{M} z^m with z = e^{−rate} e^{iθ}
                let q = (-rate).exp();
                let (s, c) = theta.sin_cos();
                let (zr, zi) = (q * c, q * s);
                let big_m = self.truncation as i32;
                let qm = q.powi(big_m);
                let (mc, ms) = ((big_m as f64 * theta).cos(), (big_m as f64 * theta).sin());
                // z(1 − z^M) / (1 − z)
                let (nr, ni) = (1.0 - qm * mc, -qm * ms);
                let (ar, ai) = (zr * nr - zi * ni, zr * ni + zi * nr);
                let (dr, di) = (1.0 - zr, -zi);
                let den = dr * dr + di * di;
                1.0 + 2.0 * (ar * dr + ai * di) / den
            }
            _ => {
                let mut sum = self.coefficients[0];
                for m in 1..=self.effective {
                    sum += 2.0 * self.coefficients[m] * (m as f64 * theta).cos();
                }
                sum
            }
        }
    }
}

/// Heat kernel `K = c · exp(−sL)` on a finite graph.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphHeatKernel {
    time: f64,
    amplitude: f64,
    matrix: Mat<f64>,
    kappa_sq: f64,
}

impl GraphHeatKernel {
    pub fn new(graph: &Graph, time: f64, amplitude: f64) -> Result<Self> {
        if !(time.is_finite() && time > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "diffusion time must be positive, got {time}"
            )));
        }
        if !(amplitude.is_finite() && amplitude > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "kernel amplitude must be positive, got {amplitude}"
            )));
        }
        let lap = graph.laplacian();
        let eig = linalg::symmetric_eigen(&lap)?;
        let m = graph.vertices();
        let decay: Vec<f64> = eig.values.iter().map(|&t| amplitude * (-time * t).exp()).collect();
        let mut matrix = Mat::<f64>::zeros(m, m);
        for i in 0..m {
            for j in 0..=i {
                let v: f64 = (0..m)
                    .map(|c| eig.vectors[(i, c)] * decay[c] * eig.vectors[(j, c)])
                    .sum();
                matrix[(i, j)] = v;
                matrix[(j, i)] = v;
            }
        }
        let kappa_sq = (0..m).map(|i| matrix[(i, i)]).fold(f64::MIN, f64::max);
        Ok(Self {
            time,
            amplitude,
            matrix,
            kappa_sq,
        })
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn matrix(&self) -> &Mat<f64> {
        &self.matrix
    }

    pub fn vertices(&self) -> usize {
        self.matrix.nrows()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Kernel {
    /// `exp(−‖x − y‖² / (2σ²))` on `ℝ^dim`.
    Gaussian { bandwidth: f64, dim: usize },
    CirclePeriodic(CircleKernel),
    GraphHeat(GraphHeatKernel),
}

impl Kernel {
    pub fn gaussian(bandwidth: f64, dim: usize) -> Result<Self> {
        if !(bandwidth.is_finite() && bandwidth > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "bandwidth must be positive, got {bandwidth}"
            )));
        }
        if dim == 0 {
            return Err(Error::InvalidParameter("dimension must be ≥ 1".into()));
        }
        Ok(Kernel::Gaussian { bandwidth, dim })
    }

    pub fn circle(profile: FourierProfile, truncation: u32) -> Result<Self> {
        Ok(Kernel::CirclePeriodic(CircleKernel::new(profile, truncation)?))
    }

    pub fn graph_heat(graph: &Graph, time: f64, amplitude: f64) -> Result<Self> {
        Ok(Kernel::GraphHeat(GraphHeatKernel::new(graph, time, amplitude)?))
    }

    /// Short descriptor recorded in artifacts.
    pub fn descriptor(&self) -> String {
        match self {
            Kernel::Gaussian { bandwidth, dim } => format!("gaussian(sigma={bandwidth}, d={dim})"),
            Kernel::CirclePeriodic(c) => {
                let p = match c.profile() {
                    FourierProfile::Exponential { rate } => format!("exp(-{rate}|m|)"),
                    FourierProfile::Gaussian { rate } => format!("exp(-{rate}m^2)"),
                    FourierProfile::Explicit { coefficients } => {
                        format!("explicit[{}]", coefficients.len())
                    }
                };
                format!("circle({p}, M_F={})", c.truncation())
            }
            Kernel::GraphHeat(g) => format!(
                "graph-heat(s={}, amplitude={}, M={})",
                g.time(),
                g.amplitude(),
                g.vertices()
            ),
        }
    }

    /// Whether `domain` is the space this kernel is defined on.
    pub fn matches_domain(&self, domain: &Domain) -> bool {
        match (self, domain) {
            (Kernel::Gaussian { dim, .. }, Domain::EuclideanBox { lo, .. }) => *dim == lo.len(),
            (Kernel::CirclePeriodic(_), Domain::Circle) => true,
            (Kernel::GraphHeat(k), Domain::FiniteGraph(g)) => k.vertices() == g.vertices(),
            _ => false,
        }
    }

    fn check_point(&self, x: &Point) -> Result<()> {
        let ok = match (self, x) {
            (Kernel::Gaussian { dim, .. }, Point::Euclidean(p)) => p.len() == *dim,
            (Kernel::CirclePeriodic(_), Point::Circle(t)) => t.is_finite(),
            (Kernel::GraphHeat(k), Point::Vertex(v)) => *v < k.vertices(),
            _ => false,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::PointOutsideDomain {
                point: x.to_string(),
                domain: match self {
                    Kernel::Gaussian { .. } => "euclidean-box",
                    Kernel::CirclePeriodic(_) => "circle",
                    Kernel::GraphHeat(_) => "finite-graph",
                },
            })
        }
    }

    /// `K(x, y)`.
    pub fn evaluate(&self, x: &Point, y: &Point) -> Result<f64> {
        self.check_point(x)?;
        self.check_point(y)?;
        Ok(self.eval(x, y))
    }

    /// `K(x, y)` for points already known to belong to the domain.
    pub(crate) fn eval(&self, x: &Point, y: &Point) -> f64 {
        match (self, x, y) {
            (Kernel::Gaussian { bandwidth, .. }, Point::Euclidean(a), Point::Euclidean(b)) => {
                let d2: f64 = a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum();
                (-d2 / (2.0 * bandwidth * bandwidth)).exp()
            }
            (Kernel::CirclePeriodic(c), Point::Circle(a), Point::Circle(b)) => {
                c.eval_difference(a - b)
            }
            (Kernel::GraphHeat(k), Point::Vertex(a), Point::Vertex(b)) => k.matrix[(*a, *b)],
            _ => panic!("kernel evaluated on a point of the wrong domain"),
        }
    }

    /// `κ²` with `K(x, x) ≤ κ²` for every `x`; exact for all three kernels.
    pub fn kappa_bound(&self) -> f64 {
        match self {
            Kernel::Gaussian { .. } => 1.0,
            Kernel::CirclePeriodic(c) => c.kappa_sq(),
            Kernel::GraphHeat(g) => g.kappa_sq,
        }
    }

    /// `k̂(m)` of a circle kernel.
    pub fn fourier_eigenvalue(&self, m: i64) -> Result<f64> {
        match self {
            Kernel::CirclePeriodic(c) => c.fourier_eigenvalue(m),
            _ => Err(Error::InvalidParameter(
                "Fourier eigenvalues exist only for circle kernels".into(),
            )),
        }
    }

    /// Raw Gram matrix `K(x_i, x_k)` (no normalization).
    pub fn gram(&self, points: &[Point]) -> Mat<f64> {
        let n = points.len();
        let mut g = Mat::<f64>::zeros(n, n);
        for i in 0..n {
            for k in 0..=i {
                let v = self.eval(&points[i], &points[k]);
                g[(i, k)] = v;
                g[(k, i)] = v;
            }
        }
        g
    }
}
