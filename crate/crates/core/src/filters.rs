//! Spectral filter families and the frame filters derived from them.
//!
//! A family is a sequence of functions `g_j` on `[0, κ²]` with
//! `0 ≤ g_j ≤ g_{j+1}` and `λ g_j(λ) → 1`. The frame filters are the
//! increments `G_j(λ)² = g_j(λ) − g_{j−1}(λ)`, so that `Σ_j λ G_j(λ)² = 1`.
//!
//! | method | `g_j(λ)` | qualification |
//! |---|---|---|
//! | Tikhonov | `1/(λ + 1/j)` | 1 |
//! | iterated Tikhonov | `((λ + 1/j)^m − (1/j)^m) / (λ (λ + 1/j)^m)` | m |
//! | Landweber | `(1 − (1 − γλ)^j) / λ` | ∞ |
//! | asymptotic regularization | `(1 − e^{−jλ}) / λ` | ∞ |
//!
//! Scales are indexed from `j = 0` with `g_0 ≡ 0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Below this value of the scaled argument (`jλ`, `jγλ`) the closed forms are
/// replaced by their two-term Taylor expansion around `λ = 0`.
const SERIES_THRESHOLD: f64 = 1e-8;

/// Tolerance on a negative increment `g_j − g_{j−1}` before the family is
/// declared broken.
const NEGATIVE_INCREMENT_TOL: f64 = 1e-14;

/// Relative slack allowed when checking `λ ∈ [0, κ²]`.
const DOMAIN_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Method {
    Tikhonov,
    IteratedTikhonov { m: u32 },
    Landweber { gamma: f64 },
    Asymptotic,
}

/// Qualification of a filter family: a finite order or unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Qualification {
    Finite(f64),
    Unbounded,
}

impl Qualification {
    /// `β = min{α, ν̄}`.
    pub fn cap(self, alpha: f64) -> f64 {
        match self {
            Qualification::Finite(q) => alpha.min(q),
            Qualification::Unbounded => alpha,
        }
    }

    pub fn as_f64(self) -> f64 {
        match self {
            Qualification::Finite(q) => q,
            Qualification::Unbounded => f64::INFINITY,
        }
    }
}

/// A filter family together with the spectral interval `[0, κ²]` it acts on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterFamily {
    method: Method,
    kappa_sq: f64,
}

impl FilterFamily {
    pub fn tikhonov(kappa_sq: f64) -> Result<Self> {
        Self::new(Method::Tikhonov, kappa_sq)
    }

    pub fn iterated_tikhonov(m: u32, kappa_sq: f64) -> Result<Self> {
        Self::new(Method::IteratedTikhonov { m }, kappa_sq)
    }

    /// Landweber with the default step `γ = 1/κ²`.
    pub fn landweber(kappa_sq: f64) -> Result<Self> {
        Self::new(Method::Landweber { gamma: 1.0 / kappa_sq }, kappa_sq)
    }

    /// Landweber with an explicit step; `γ` is clamped to `(0, 1/κ²]`.
    pub fn landweber_with_step(gamma: f64, kappa_sq: f64) -> Result<Self> {
        Self::new(Method::Landweber { gamma }, kappa_sq)
    }

    pub fn asymptotic(kappa_sq: f64) -> Result<Self> {
        Self::new(Method::Asymptotic, kappa_sq)
    }

    pub fn new(method: Method, kappa_sq: f64) -> Result<Self> {
        if !(kappa_sq.is_finite() && kappa_sq > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "spectral bound κ² must be positive, got {kappa_sq}"
            )));
        }
        let method = match method {
            Method::IteratedTikhonov { m: 0 } => {
                return Err(Error::InvalidParameter(
                    "iterated Tikhonov needs m ≥ 1".into(),
                ))
            }
            Method::Landweber { gamma } => {
                if !(gamma.is_finite() && gamma > 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "Landweber step must be positive, got {gamma}"
                    )));
                }
                Method::Landweber {
                    gamma: gamma.min(1.0 / kappa_sq),
                }
            }
            other => other,
        };
        Ok(Self { method, kappa_sq })
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn kappa_sq(&self) -> f64 {
        self.kappa_sq
    }

    /// Short human-readable descriptor, e.g. `landweber(gamma=0.5)`.
    pub fn descriptor(&self) -> String {
        match self.method {
            Method::Tikhonov => "tikhonov".to_string(),
            Method::IteratedTikhonov { m } => format!("iterated-tikhonov(m={m})"),
            Method::Landweber { gamma } => format!("landweber(gamma={gamma:e})"),
            Method::Asymptotic => "asymptotic".to_string(),
        }
    }

    pub fn qualification(&self) -> Qualification {
        match self.method {
            Method::Tikhonov => Qualification::Finite(1.0),
            Method::IteratedTikhonov { m } => Qualification::Finite(m as f64),
            Method::Landweber { .. } | Method::Asymptotic => Qualification::Unbounded,
        }
    }

    fn check_lambda(&self, lambda: f64) -> Result<()> {
        if lambda.is_nan()
            || lambda < -DOMAIN_SLACK * self.kappa_sq
            || lambda > self.kappa_sq * (1.0 + DOMAIN_SLACK)
        {
            return Err(Error::OutOfSpectralRange {
                lambda,
                kappa_sq: self.kappa_sq,
            });
        }
        Ok(())
    }

    /// `g_j(λ)`, with `g_0 ≡ 0` and the value at `λ = 0` given by its limit.
    pub fn g(&self, j: u64, lambda: f64) -> Result<f64> {
        self.check_lambda(lambda)?;
        Ok(self.g_unchecked(j, lambda.max(0.0)))
    }

    pub(crate) fn g_unchecked(&self, j: u64, lambda: f64) -> f64 {
        if j == 0 {
            return 0.0;
        }
        let jf = j as f64;
        match self.method {
            Method::Tikhonov => jf / (1.0 + jf * lambda),
            Method::IteratedTikhonov { m } => {
                let mf = m as f64;
                let x = jf * lambda;
                if x < SERIES_THRESHOLD {
                    jf * (mf - 0.5 * mf * (mf + 1.0) * x)
                } else {
                    -(-mf * x.ln_1p()).exp_m1() / lambda
                }
            }
            Method::Landweber { gamma } => {
                let x = gamma * lambda;
                if jf * x < SERIES_THRESHOLD {
                    gamma * jf * (1.0 - 0.5 * (jf - 1.0) * x)
                } else if x >= 1.0 {
                    1.0 / lambda
                } else {
                    -(jf * (-x).ln_1p()).exp_m1() / lambda
                }
            }
            Method::Asymptotic => {
                let x = jf * lambda;
                if x < SERIES_THRESHOLD {
                    jf * (1.0 - 0.5 * x)
                } else {
                    -(-x).exp_m1() / lambda
                }
            }
        }
    }

    /// `1 − λ g_j(λ)`, evaluated without cancellation.
    pub fn residual(&self, j: u64, lambda: f64) -> Result<f64> {
        self.check_lambda(lambda)?;
        Ok(self.residual_unchecked(j, lambda.max(0.0)))
    }

    pub(crate) fn residual_unchecked(&self, j: u64, lambda: f64) -> f64 {
        if j == 0 {
            return 1.0;
        }
        let jf = j as f64;
        match self.method {
            Method::Tikhonov => 1.0 / (1.0 + jf * lambda),
            Method::IteratedTikhonov { m } => (1.0 + jf * lambda).powi(-(m as i32)),
            Method::Landweber { gamma } => {
                let x = (1.0 - gamma * lambda).max(0.0);
                pow_u64(x, j)
            }
            Method::Asymptotic => (-jf * lambda).exp(),
        }
    }

    /// `G_j(λ)² = g_j(λ) − g_{j−1}(λ)`, with `G_0 ≡ 0`.
    ///
    /// Each family uses a closed form of the increment rather than a
    /// subtraction, so the value keeps full relative precision for large `j`.
    pub fn g_squared(&self, j: u64, lambda: f64) -> Result<f64> {
        self.check_lambda(lambda)?;
        let v = self.g_squared_unchecked(j, lambda.max(0.0));
        if v < -NEGATIVE_INCREMENT_TOL {
            return Err(Error::BrokenFamily {
                descriptor: self.descriptor(),
                j,
                lambda,
                value: v,
            });
        }
        Ok(v.max(0.0))
    }

    pub(crate) fn g_squared_unchecked(&self, j: u64, lambda: f64) -> f64 {
        if j == 0 {
            return 0.0;
        }
        let jf = j as f64;
        match self.method {
            Method::Tikhonov => 1.0 / ((1.0 + jf * lambda) * (1.0 + (jf - 1.0) * lambda)),
            Method::IteratedTikhonov { m } => {
                // a^m − b^m = (a − b) Σ a^p b^{m−1−p} with a − b = λab.
                let a = 1.0 / (1.0 + (jf - 1.0) * lambda);
                let b = 1.0 / (1.0 + jf * lambda);
                let mut sum = 0.0;
                let mut ap = 1.0;
                for p in 0..m {
                    sum += ap * b.powi((m - 1 - p) as i32);
                    ap *= a;
                }
                a * b * sum
            }
            Method::Landweber { gamma } => {
                let x = (1.0 - gamma * lambda).max(0.0);
                gamma * pow_u64(x, j - 1)
            }
            Method::Asymptotic => {
                let damping = if lambda < SERIES_THRESHOLD {
                    1.0 - 0.5 * lambda
                } else {
                    -(-lambda).exp_m1() / lambda
                };
                (-(jf - 1.0) * lambda).exp() * damping
            }
        }
    }

    /// `G_j(λ)`.
    pub fn big_g(&self, j: u64, lambda: f64) -> Result<f64> {
        Ok(self.g_squared(j, lambda)?.sqrt())
    }

    /// `λ g_τ(λ) = Σ_{j≤τ} λ G_j(λ)²`, a value in `[0, 1]`.
    pub fn partial_sum(&self, tau: u64, lambda: f64) -> Result<f64> {
        self.check_lambda(lambda)?;
        Ok(self.partial_sum_unchecked(tau, lambda.max(0.0)))
    }

    pub(crate) fn partial_sum_unchecked(&self, tau: u64, lambda: f64) -> f64 {
        if tau == 0 {
            return 0.0;
        }
        (lambda * self.g_unchecked(tau, lambda)).clamp(0.0, 1.0)
    }

    /// Largest finite-difference slope of `λ ↦ λ g_j(λ)` over a uniform grid
    /// of `grid_size` points on `[0, κ²]`.
    pub fn lipschitz_audit(&self, j: u64, grid_size: usize) -> Result<f64> {
        if grid_size < 100 {
            return Err(Error::InvalidParameter(format!(
                "Lipschitz audit needs at least 100 grid points, got {grid_size}"
            )));
        }
        let h = self.kappa_sq / (grid_size - 1) as f64;
        let mut prev = 0.0;
        let mut worst: f64 = 0.0;
        for idx in 1..grid_size {
            let lambda = if idx == grid_size - 1 {
                self.kappa_sq
            } else {
                idx as f64 * h
            };
            let lambda_prev = (idx - 1) as f64 * h;
            let value = lambda * self.g_unchecked(j, lambda);
            let slope = (value - prev).abs() / (lambda - lambda_prev);
            worst = worst.max(slope);
            prev = value;
        }
        Ok(worst)
    }

    /// Grid suprema of `λ^ν (1 − λ g_j(λ))` for `j = 1..=j_max`, and the
    /// log-log slope fitted over the upper three quarters of the scale range.
    pub fn qualification_decay_audit(&self, nu: f64, j_max: u64) -> Result<DecayAudit> {
        if !(nu > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "decay exponent must be positive, got {nu}"
            )));
        }
        if j_max < 4 {
            return Err(Error::InvalidParameter(format!(
                "decay audit needs j_max ≥ 4, got {j_max}"
            )));
        }
        let grid = audit_grid(self.kappa_sq);
        let rows: Vec<(u64, f64)> = (1..=j_max)
            .map(|j| {
                let sup = grid
                    .iter()
                    .map(|&l| l.powf(nu) * self.residual_unchecked(j, l))
                    .fold(0.0, f64::max);
                (j, sup)
            })
            .collect();
        let start = (j_max / 4).max(1);
        let tail: Vec<(f64, f64)> = rows
            .iter()
            .filter(|(j, _)| *j >= start)
            .map(|&(j, s)| (j as f64, s))
            .collect();
        let fit = crate::experiments::fit_rate(&tail)?;
        Ok(DecayAudit {
            nu,
            expected_exponent: -self.qualification().cap(nu),
            rows,
            slope: fit.slope,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayAudit {
    pub nu: f64,
    /// `−min{ν, ν̄}`.
    pub expected_exponent: f64,
    pub rows: Vec<(u64, f64)>,
    pub slope: f64,
}

/// Uniform grid on `[0, κ²]` merged with a geometric grid reaching down to
/// `1e−8 κ²`, so that peaks close to zero are resolved at large `j`.
fn audit_grid(kappa_sq: f64) -> Vec<f64> {
    let uniform = 2048;
    let geometric = 2048;
    let mut grid: Vec<f64> = (1..=uniform)
        .map(|i| kappa_sq * i as f64 / uniform as f64)
        .collect();
    let lo = (1e-8f64).ln();
    grid.extend((0..geometric).map(|i| {
        let t = lo * (1.0 - i as f64 / (geometric - 1) as f64);
        kappa_sq * t.exp()
    }));
    grid
}

fn pow_u64(x: f64, n: u64) -> f64 {
    if n <= i32::MAX as u64 {
        x.powi(n as i32)
    } else {
        x.powf(n as f64)
    }
}
