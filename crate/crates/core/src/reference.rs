//! The integral operator `T` of the sampling measure itself.
//!
//! On the circle `T` is diagonal in the real Fourier basis. On a finite graph
//! `T` is the matrix `K/M`. On a box it is approximated by midpoint
//! quadrature, and quantities derived from it carry an error estimate.

use std::f64::consts::PI;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{CircleKernel, Domain, Kernel, Point};
use crate::operator::{weighted_square_sum, WeightedOperator};

/// Default number of quadrature nodes on a box.
pub const DEFAULT_QUADRATURE: usize = 4096;

/// Minimum number of quadrature nodes per axis.
pub const MIN_NODES_PER_AXIS: usize = 4;

/// Real Fourier mode on the circle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FourierMode {
    Constant,
    Cos(u32),
    Sin(u32),
}

impl FourierMode {
    pub fn frequency(self) -> u32 {
        match self {
            FourierMode::Constant => 0,
            FourierMode::Cos(m) | FourierMode::Sin(m) => m,
        }
    }

    /// L²-normalized mode `1`, `√2 cos(2πmx)` or `√2 sin(2πmx)`.
    pub fn eval(self, x: f64) -> f64 {
        match self {
            FourierMode::Constant => 1.0,
            FourierMode::Cos(m) => 2f64.sqrt() * (2.0 * PI * m as f64 * x).cos(),
            FourierMode::Sin(m) => 2f64.sqrt() * (2.0 * PI * m as f64 * x).sin(),
        }
    }
}

/// How a discrete reference operator relates to the true `T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Accuracy {
    Exact,
    /// Tensor midpoint rule, error `O(h²)` in the node spacing.
    Midpoint { nodes_per_axis: usize, order: u32 },
}

#[derive(Debug, Clone)]
pub struct CircleReference {
    kernel: Kernel,
    modes: Vec<FourierMode>,
    values: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct DiscreteReference {
    kernel: Kernel,
    points: Vec<Point>,
    weights: Vec<f64>,
    accuracy: Accuracy,
    /// Coarser rule used for error estimates on boxes.
    coarse: Option<(Vec<Point>, Vec<f64>)>,
    operator: OnceLock<WeightedOperator>,
}

#[derive(Debug, Clone)]
pub enum ReferenceOperator {
    Circle(CircleReference),
    Discrete(DiscreteReference),
}

/// Pieces of `‖T − T̂‖²_HS` that involve `T`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HsParts {
    /// `‖T‖²_HS`.
    pub reference_sq: f64,
    /// `⟨T, T̂⟩_HS = Σ_z w_z ∫ K(z, y)² dρ(y)`.
    pub cross: f64,
    /// Estimated error of `reference_sq − 2 cross` under quadrature.
    pub quadrature_error: Option<f64>,
}

/// Build the reference operator, with [`DEFAULT_QUADRATURE`] nodes on boxes.
pub fn reference_operator(kernel: &Kernel, domain: &Domain) -> Result<ReferenceOperator> {
    reference_operator_with_quadrature(kernel, domain, DEFAULT_QUADRATURE)
}

pub fn reference_operator_with_quadrature(
    kernel: &Kernel,
    domain: &Domain,
    quadrature: usize,
) -> Result<ReferenceOperator> {
    if !kernel.matches_domain(domain) {
        return Err(Error::InvalidDomain(format!(
            "kernel {} does not live on domain {}",
            kernel.descriptor(),
            domain.name()
        )));
    }
    match (kernel, domain) {
        (Kernel::CirclePeriodic(c), Domain::Circle) => Ok(ReferenceOperator::Circle(
            CircleReference::new(kernel.clone(), c),
        )),
        (Kernel::GraphHeat(g), Domain::FiniteGraph(_)) => {
            let m = g.vertices();
            Ok(ReferenceOperator::Discrete(DiscreteReference {
                kernel: kernel.clone(),
                points: (0..m).map(Point::Vertex).collect(),
                weights: vec![1.0 / m as f64; m],
                accuracy: Accuracy::Exact,
                coarse: None,
                operator: OnceLock::new(),
            }))
        }
        (Kernel::Gaussian { .. }, Domain::EuclideanBox { lo, hi }) => {
            let d = lo.len();
            let per_axis = (quadrature as f64).powf(1.0 / d as f64).round() as usize;
            let min = MIN_NODES_PER_AXIS.pow(d as u32);
            if per_axis < MIN_NODES_PER_AXIS {
                return Err(Error::QuadratureTooSmall {
                    got: quadrature,
                    min,
                });
            }
            let (points, weights) = midpoint_grid(lo, hi, per_axis);
            let coarse = Some(midpoint_grid(lo, hi, per_axis / 2));
            Ok(ReferenceOperator::Discrete(DiscreteReference {
                kernel: kernel.clone(),
                points,
                weights,
                accuracy: Accuracy::Midpoint {
                    nodes_per_axis: per_axis,
                    order: 2,
                },
                coarse,
                operator: OnceLock::new(),
            }))
        }
        _ => unreachable!("domain match checked above"),
    }
}

fn midpoint_grid(lo: &[f64], hi: &[f64], per_axis: usize) -> (Vec<Point>, Vec<f64>) {
    let d = lo.len();
    let total = per_axis.pow(d as u32);
    let points = (0..total)
        .map(|mut idx| {
            let mut x = Vec::with_capacity(d);
            for a in 0..d {
                let i = idx % per_axis;
                idx /= per_axis;
                x.push(lo[a] + (hi[a] - lo[a]) * (i as f64 + 0.5) / per_axis as f64);
            }
            Point::Euclidean(x)
        })
        .collect();
    (points, vec![1.0 / total as f64; total])
}

impl CircleReference {
    fn new(kernel: Kernel, c: &CircleKernel) -> Self {
        let coeffs = c.coefficients();
        let mut modes = vec![(FourierMode::Constant, coeffs[0])];
        for m in 1..=c.effective_truncation() {
            if coeffs[m] > 0.0 {
                modes.push((FourierMode::Cos(m as u32), coeffs[m]));
                modes.push((FourierMode::Sin(m as u32), coeffs[m]));
            }
        }
        if coeffs[0] == 0.0 {
            modes.remove(0);
        }
        // stable: ties keep frequency order, cosine before sine
        modes.sort_by(|a, b| b.1.total_cmp(&a.1));
        let (modes, values) = modes.into_iter().unzip();
        Self {
            kernel,
            modes,
            values,
        }
    }

    pub fn modes(&self) -> &[FourierMode] {
        &self.modes
    }
}

impl DiscreteReference {
    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Eigendecomposition of the discrete operator, computed on first use.
    pub fn operator(&self) -> Result<&WeightedOperator> {
        if let Some(op) = self.operator.get() {
            return Ok(op);
        }
        let op = WeightedOperator::new(
            &self.kernel,
            self.points.clone(),
            self.weights.clone(),
            self.points.len(),
        )?;
        Ok(self.operator.get_or_init(|| op))
    }

    fn cross_with(&self, points: &[Point], weights: &[f64], nodes: &[Point], w: &[f64]) -> f64 {
        use rayon::prelude::*;
        let rows: Vec<f64> = points
            .par_iter()
            .zip(weights)
            .map(|(z, wz)| {
                let s: f64 = nodes
                    .iter()
                    .zip(w)
                    .map(|(y, wy)| {
                        let k = self.kernel.eval(z, y);
                        wy * k * k
                    })
                    .sum();
                wz * s
            })
            .collect();
        rows.iter().sum()
    }
}

impl ReferenceOperator {
    pub fn kernel(&self) -> &Kernel {
        match self {
            ReferenceOperator::Circle(c) => &c.kernel,
            ReferenceOperator::Discrete(d) => &d.kernel,
        }
    }

    pub fn accuracy(&self) -> Accuracy {
        match self {
            ReferenceOperator::Circle(_) => Accuracy::Exact,
            ReferenceOperator::Discrete(d) => d.accuracy.clone(),
        }
    }

    pub fn is_exact(&self) -> bool {
        self.accuracy() == Accuracy::Exact
    }

    /// Positive eigenvalues of `T`, descending.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        match self {
            ReferenceOperator::Circle(c) => Ok(c.values.clone()),
            ReferenceOperator::Discrete(d) => Ok(d.operator()?.eigen().positive_values().to_vec()),
        }
    }

    /// Number of positive eigenvalues.
    pub fn positive_modes(&self) -> Result<usize> {
        match self {
            ReferenceOperator::Circle(c) => Ok(c.values.len()),
            ReferenceOperator::Discrete(d) => Ok(d.operator()?.eigen().rank()),
        }
    }

    /// Unit-norm eigenfunction `v_i` of `T` in the RKHS, `i` counted from the
    /// largest eigenvalue.
    pub fn eigenfunction(&self, i: usize, x: &Point) -> Result<f64> {
        self.kernel().evaluate(x, x)?;
        self.eigenfunction_unchecked(i, x)
    }

    pub(crate) fn eigenfunction_unchecked(&self, i: usize, x: &Point) -> Result<f64> {
        match self {
            ReferenceOperator::Circle(c) => {
                let (mode, value) = c
                    .modes
                    .get(i)
                    .zip(c.values.get(i))
                    .ok_or(Error::IndexOutOfRange {
                        index: i,
                        limit: c.modes.len(),
                    })?;
                let t = match x {
                    Point::Circle(t) => *t,
                    _ => unreachable!("point checked against the kernel"),
                };
                Ok(value.sqrt() * mode.eval(t))
            }
            ReferenceOperator::Discrete(d) => {
                let op = d.operator()?;
                if i >= op.eigen().rank() {
                    return Err(Error::IndexOutOfRange {
                        index: i,
                        limit: op.eigen().rank(),
                    });
                }
                Ok(op.eigenfunction_unchecked(&d.kernel, i, x))
            }
        }
    }

    /// `Σ λ_i = ∫ K(x, x) dρ(x)`.
    pub fn trace(&self) -> f64 {
        match self {
            ReferenceOperator::Circle(c) => c.kernel.kappa_bound(),
            ReferenceOperator::Discrete(d) => d
                .points
                .iter()
                .zip(&d.weights)
                .map(|(p, w)| w * d.kernel.eval(p, p))
                .sum(),
        }
    }

    /// `‖T‖²_HS = Σ λ_i²`.
    pub fn hs_norm_sq(&self) -> f64 {
        match self {
            ReferenceOperator::Circle(c) => circle_square_sum(&c.kernel),
            ReferenceOperator::Discrete(d) => weighted_square_sum(&d.kernel, &d.points, &d.weights),
        }
    }

    /// `‖T‖²_HS` and `⟨T, T_w⟩_HS` for the discrete measure `Σ w_z δ_z`.
    pub fn hs_parts(&self, points: &[Point], weights: &[f64]) -> Result<HsParts> {
        for p in points {
            self.kernel().evaluate(p, p)?;
        }
        match self {
            ReferenceOperator::Circle(c) => {
                // ∫ K(x, y)² dy = Σ_m k̂(m)² for every x
                let s = circle_square_sum(&c.kernel);
                let mass: f64 = weights.iter().sum();
                Ok(HsParts {
                    reference_sq: s,
                    cross: mass * s,
                    quadrature_error: None,
                })
            }
            ReferenceOperator::Discrete(d) => {
                let reference_sq = weighted_square_sum(&d.kernel, &d.points, &d.weights);
                let cross = d.cross_with(points, weights, &d.points, &d.weights);
                let quadrature_error = d.coarse.as_ref().map(|(cp, cw)| {
                    let coarse_sq = weighted_square_sum(&d.kernel, cp, cw);
                    let coarse_cross = d.cross_with(points, weights, cp, cw);
                    let fine = reference_sq - 2.0 * cross;
                    let coarse = coarse_sq - 2.0 * coarse_cross;
                    // second-order rule with halved spacing
                    (fine - coarse).abs() / 3.0
                });
                Ok(HsParts {
                    reference_sq,
                    cross,
                    quadrature_error,
                })
            }
        }
    }

    /// `Tf` at the support nodes of a discrete reference, from the values of
    /// `f` at the same nodes.
    pub fn apply(&self, values: &[f64]) -> Result<Vec<f64>> {
        match self {
            ReferenceOperator::Circle(_) => Err(Error::InvalidParameter(
                "the circle operator acts on Fourier coefficients".into(),
            )),
            ReferenceOperator::Discrete(d) => {
                if values.len() != d.points.len() {
                    return Err(Error::InvalidParameter(format!(
                        "{} values for {} nodes",
                        values.len(),
                        d.points.len()
                    )));
                }
                Ok(d
                    .points
                    .iter()
                    .map(|x| {
                        d.points
                            .iter()
                            .zip(&d.weights)
                            .zip(values)
                            .map(|((y, w), f)| w * d.kernel.eval(x, y) * f)
                            .sum()
                    })
                    .collect())
            }
        }
    }
}

fn circle_square_sum(kernel: &Kernel) -> f64 {
    match kernel {
        Kernel::CirclePeriodic(c) => {
            let k = c.coefficients();
            k[0] * k[0] + 2.0 * k[1..].iter().map(|v| v * v).sum::<f64>()
        }
        _ => unreachable!("circle reference holds a circle kernel"),
    }
}
