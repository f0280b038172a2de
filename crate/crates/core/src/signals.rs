//! Test signals satisfying a source condition `f = T^α h`.
//!
//! Signals live in the span of finitely many eigenfunctions `v_i` of the
//! reference operator, normalized in the RKHS. Coefficients are taken with
//! respect to these `v_i`, so `‖f‖² = Σ f_i²` and every RKHS norm below is
//! exact.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filters::FilterFamily;
use crate::frame::WaveletFrame;
use crate::kernels::Point;
use crate::operator::{SampleSet, WeightedOperator};
use crate::reference::ReferenceOperator;
use crate::rng;

/// Default number of eigenmodes carrying `h`.
pub const DEFAULT_BUDGET: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalMode {
    /// Index into the reference eigenvalues, largest first.
    pub mode: usize,
    pub eigenvalue: f64,
    /// Coefficient of `h`.
    pub h: f64,
    /// Coefficient of `f`, equal to `eigenvalue^α · h`.
    pub f: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalSpec {
    pub alpha: f64,
    pub seed: u64,
    pub budget: usize,
    pub h_norm: f64,
    pub kernel: String,
    pub modes: Vec<SignalMode>,
}

/// Draw `h` with i.i.d. standard normal coefficients on the leading `budget`
/// eigenmodes, scale it to `‖h‖ = h_norm`, and set `f = T^α h`.
pub fn make_sobolev_signal(
    reference: &ReferenceOperator,
    alpha: f64,
    budget: usize,
    seed: u64,
    h_norm: f64,
) -> Result<SignalSpec> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "smoothness must be positive, got {alpha}"
        )));
    }
    if !(h_norm.is_finite() && h_norm >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "target norm must be nonnegative, got {h_norm}"
        )));
    }
    let values = reference.eigenvalues()?;
    if budget == 0 || budget > values.len() {
        return Err(Error::NotEnoughModes {
            needed: budget,
            available: values.len(),
        });
    }
    let mut r = rng::rng_from_seed(seed);
    let raw: Vec<f64> = (0..budget).map(|_| StandardNormal.sample(&mut r)).collect();
    let norm = raw.iter().map(|x| x * x).sum::<f64>().sqrt();
    let scale = if norm > 0.0 { h_norm / norm } else { 0.0 };
    let modes = raw
        .into_iter()
        .enumerate()
        .map(|(i, x)| {
            let h = x * scale;
            SignalMode {
                mode: i,
                eigenvalue: values[i],
                h,
                f: values[i].powf(alpha) * h,
            }
        })
        .collect();
    Ok(SignalSpec {
        alpha,
        seed,
        budget,
        h_norm,
        kernel: reference.kernel().descriptor(),
        modes,
    })
}

impl SignalSpec {
    /// `Σ c_i v_i` for explicit coefficients `c_i` of `f`, with `h` derived
    /// through the source condition.
    pub fn from_coefficients(
        reference: &ReferenceOperator,
        alpha: f64,
        coefficients: &[(usize, f64)],
    ) -> Result<Self> {
        let values = reference.eigenvalues()?;
        let mut modes = Vec::with_capacity(coefficients.len());
        for &(mode, f) in coefficients {
            let eigenvalue = *values.get(mode).ok_or(Error::NotEnoughModes {
                needed: mode + 1,
                available: values.len(),
            })?;
            modes.push(SignalMode {
                mode,
                eigenvalue,
                h: f / eigenvalue.powf(alpha),
                f,
            });
        }
        let h_norm = modes.iter().map(|m| m.h * m.h).sum::<f64>().sqrt();
        Ok(Self {
            alpha,
            seed: 0,
            budget: modes.len(),
            h_norm,
            kernel: reference.kernel().descriptor(),
            modes,
        })
    }

    /// `‖f‖²_H = Σ f_i²`.
    pub fn norm_sq(&self) -> f64 {
        self.modes.iter().map(|m| m.f * m.f).sum()
    }

    /// `‖T^{−α} f‖`, recomputed from the `f` coefficients.
    pub fn source_norm(&self) -> f64 {
        self.modes
            .iter()
            .map(|m| {
                let h = m.f / m.eigenvalue.powf(self.alpha);
                h * h
            })
            .sum::<f64>()
            .sqrt()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    fn check_kernel(&self, reference: &ReferenceOperator) -> Result<()> {
        let d = reference.kernel().descriptor();
        if d != self.kernel {
            return Err(Error::InvalidParameter(format!(
                "signal built for kernel {} used with {}",
                self.kernel, d
            )));
        }
        Ok(())
    }
}

/// `f(x) = Σ f_i v_i(x)`.
pub fn evaluate_signal(spec: &SignalSpec, reference: &ReferenceOperator, x: &Point) -> Result<f64> {
    spec.check_kernel(reference)?;
    reference.kernel().evaluate(x, x)?;
    spec.modes
        .iter()
        .filter(|m| m.f != 0.0)
        .map(|m| Ok(m.f * reference.eigenfunction_unchecked(m.mode, x)?))
        .sum()
}

/// `‖f − T g_τ(T) f‖_H = (Σ_i (1 − λ_i g_τ(λ_i))² f_i²)^{1/2}` for the
/// reference operator itself.
pub fn approximation_error(spec: &SignalSpec, family: &FilterFamily, tau: u64) -> f64 {
    spec.modes
        .iter()
        .map(|m| {
            let r = family.residual_unchecked(tau, m.eigenvalue.max(0.0)) * m.f;
            r * r
        })
        .sum::<f64>()
        .sqrt()
}

/// RKHS norm of a reconstruction residual.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualNorm {
    pub value: f64,
    /// `‖f‖² − Σ b_i²`: energy of `f` orthogonal to the span of the samples'
    /// kernel sections.
    pub orthogonal_sq: f64,
    /// Bound on the rounding error of `value`.
    pub rounding: f64,
    /// Set when `rounding` exceeds a tenth of `value`.
    pub unreliable: bool,
}

/// `‖f − T̂ g_τ(T̂) f‖_H` with `T̂` taken from `frame`.
///
/// Splitting `f` along the unit eigenfunctions `e_i` of `T̂` gives
/// `‖f‖² − Σ b_i² + Σ (1 − λ̂_i g_τ(λ̂_i))² b_i²` with `b_i = ⟨f, e_i⟩`, and
/// each `b_i` only needs the values of `f` at the samples.
pub fn reconstruction_error(
    spec: &SignalSpec,
    reference: &ReferenceOperator,
    frame: &WaveletFrame,
    tau: u64,
) -> Result<ResidualNorm> {
    if tau > frame.tau_max() {
        return Err(Error::IndexOutOfRange {
            index: tau as usize,
            limit: frame.tau_max() as usize,
        });
    }
    let mut values = Vec::with_capacity(frame.len());
    for x in &frame.samples().points {
        values.push(evaluate_signal(spec, reference, x)?);
    }
    let b = frame.spectral_coefficients(&values)?;
    Ok(residual_norm(
        spec.norm_sq(),
        &b,
        frame.eigen().positive_values(),
        frame.family(),
        tau,
    ))
}

/// [`reconstruction_error`] on the empirical operator with coincident samples
/// merged. Agrees with the frame route and scales with the number of
/// distinct points instead of `N`.
pub fn reconstruction_error_compressed(
    spec: &SignalSpec,
    reference: &ReferenceOperator,
    samples: &SampleSet,
    family: &FilterFamily,
    tau: u64,
) -> Result<ResidualNorm> {
    let op = WeightedOperator::from_samples(reference.kernel(), samples)?;
    let mut values = Vec::with_capacity(op.points().len());
    for x in op.points() {
        values.push(evaluate_signal(spec, reference, x)?);
    }
    let b = op.spectral_coefficients(&values);
    Ok(residual_norm(
        spec.norm_sq(),
        &b,
        op.eigen().positive_values(),
        family,
        tau,
    ))
}

fn residual_norm(
    norm_sq: f64,
    b: &[f64],
    lambdas: &[f64],
    family: &FilterFamily,
    tau: u64,
) -> ResidualNorm {
    let captured: f64 = b.iter().map(|x| x * x).sum();
    let orthogonal_sq = (norm_sq - captured).max(0.0);
    let filtered: f64 = b
        .iter()
        .zip(lambdas)
        .map(|(x, &l)| {
            let r = family.residual_unchecked(tau, l) * x;
            r * r
        })
        .sum();
    let value = (orthogonal_sq + filtered).sqrt();
    let rounding_sq = 8.0 * f64::EPSILON * (b.len() as f64 + 1.0) * norm_sq.max(captured);
    let rounding = if value > 0.0 {
        rounding_sq / (2.0 * value)
    } else {
        rounding_sq.sqrt()
    }
    .min(rounding_sq.sqrt());
    ResidualNorm {
        value,
        orthogonal_sq,
        rounding,
        unreliable: rounding > 0.1 * value,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{Domain, FourierProfile, Graph, Kernel};
    use crate::reference::reference_operator;
    use approx::assert_relative_eq;

    fn circle_ref() -> ReferenceOperator {
        let k = Kernel::circle(FourierProfile::Exponential { rate: 1.0 }, 256).unwrap();
        reference_operator(&k, &Domain::Circle).unwrap()
    }

    #[test]
    fn single_mode_budget() {
        let r = circle_ref();
        let s = make_sobolev_signal(&r, 1.5, 1, 4, 1.0).unwrap();
        assert_eq!(s.modes.len(), 1);
        assert_relative_eq!(s.modes[0].h.abs(), 1.0, max_relative = 1e-15);
        assert_relative_eq!(s.norm_sq().sqrt(), 1.0, max_relative = 1e-15);
        assert_relative_eq!(s.source_norm(), 1.0, max_relative = 1e-12);
    }

    #[test]
    fn circle_mode_scaling() {
        let r = circle_ref();
        let s = make_sobolev_signal(&r, 1.0, 9, 8, 2.0).unwrap();
        for m in &s.modes {
            assert_relative_eq!(m.f, m.h * m.eigenvalue, max_relative = 1e-15);
        }
        // modes 1..=4 are cos/sin pairs at frequencies 1 and 2
        assert_relative_eq!(s.modes[3].eigenvalue, (-2f64).exp(), max_relative = 1e-15);
        assert_relative_eq!(s.source_norm(), 2.0, max_relative = 1e-12);
    }

    #[test]
    fn single_fourier_mode_evaluation() {
        let r = circle_ref();
        let s = SignalSpec::from_coefficients(&r, 1.0, &[(1, 0.7)]).unwrap();
        for x in [0.0, 0.1, 0.37] {
            let v = evaluate_signal(&s, &r, &Point::Circle(x)).unwrap();
            let expect = 0.7 * (-1f64).exp().sqrt() * 2f64.sqrt() * (2.0 * std::f64::consts::PI * x).cos();
            assert_relative_eq!(v, expect, epsilon = 1e-14);
        }
        let z = SignalSpec::from_coefficients(&r, 1.0, &[]).unwrap();
        assert_eq!(evaluate_signal(&z, &r, &Point::Circle(0.2)).unwrap(), 0.0);
    }

    #[test]
    fn budget_errors() {
        let g = Graph::cycle(4).unwrap();
        let k = Kernel::graph_heat(&g, 0.5, 1.0).unwrap();
        let r = reference_operator(&k, &Domain::FiniteGraph(g)).unwrap();
        assert!(matches!(
            make_sobolev_signal(&r, 1.0, 5, 0, 1.0),
            Err(Error::NotEnoughModes { .. })
        ));
        assert!(make_sobolev_signal(&r, 0.0, 2, 0, 1.0).is_err());
    }

    #[test]
    fn constant_graph_mode() {
        let g = Graph::complete(5).unwrap();
        let k = Kernel::graph_heat(&g, 0.3, 1.0).unwrap();
        let r = reference_operator(&k, &Domain::FiniteGraph(g)).unwrap();
        let s = SignalSpec::from_coefficients(&r, 1.0, &[(0, 1.0)]).unwrap();
        let v0 = evaluate_signal(&s, &r, &Point::Vertex(0)).unwrap();
        for v in 1..5 {
            let x = evaluate_signal(&s, &r, &Point::Vertex(v)).unwrap();
            assert_relative_eq!(x, v0, max_relative = 1e-12);
        }
    }

    #[test]
    fn json_round_trip() {
        let r = circle_ref();
        let s = make_sobolev_signal(&r, 0.5, 5, 1, 1.0).unwrap();
        assert_eq!(SignalSpec::from_json(&s.to_json().unwrap()).unwrap(), s);
    }
}
