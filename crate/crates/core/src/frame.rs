//! Monte Carlo wavelet frames.
//!
//! The frame `{ψ̂_{j,x_k}}` with `ψ̂_{j,x_k} = G_j(T̂) K_{x_k}` is Parseval for
//! the empirical measure: `Σ_j (1/N) Σ_k |⟨f, ψ̂_{j,x_k}⟩|² = ‖f‖²` on the
//! span of the kernel sections. All computations run in the spectral
//! coordinates of `K̂`; wavelets are evaluated at arbitrary points on demand.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filters::FilterFamily;
use crate::kernels::{Kernel, Point};
use crate::linalg;
use crate::operator::{
    apply_empirical, eigendecompose, hilbert_norm, kernel_matrix, nystrom_extend, EigenSystem,
    SampleSet,
};

/// `⌈N^{1/(2β+2)}⌉`, the scale cutoff balancing approximation and sampling
/// error.
pub fn default_tau(n: usize, beta: f64) -> u64 {
    let r = (n as f64).powf(1.0 / (2.0 * beta + 2.0));
    // exact powers such as 4096^{1/4} must not round up past the integer
    let near = r.round();
    if (r - near).abs() <= 1e-9 * near.max(1.0) {
        near as u64
    } else {
        r.ceil() as u64
    }
}

#[derive(Debug, Clone)]
pub struct WaveletFrame {
    eig: EigenSystem,
    samples: SampleSet,
    kernel: Kernel,
    family: FilterFamily,
    tau_max: u64,
}

impl WaveletFrame {
    /// Eigendecompose `K̂` for `samples` and wrap it as a frame.
    pub fn new(
        kernel: &Kernel,
        samples: &SampleSet,
        family: FilterFamily,
        tau_max: u64,
    ) -> Result<Self> {
        let k = kernel_matrix(kernel, samples)?;
        let eig = eigendecompose(&k, kernel.kappa_bound())?;
        Self::from_parts(eig, samples.clone(), kernel.clone(), family, tau_max)
    }

    pub fn from_parts(
        eig: EigenSystem,
        samples: SampleSet,
        kernel: Kernel,
        family: FilterFamily,
        tau_max: u64,
    ) -> Result<Self> {
        if eig.len() != samples.len() {
            return Err(Error::InvalidParameter(format!(
                "{} samples for a {}-dimensional eigensystem",
                samples.len(),
                eig.len()
            )));
        }
        if let Some(&top) = eig.values().first() {
            if top > family.kappa_sq() * (1.0 + 1e-9) {
                return Err(Error::OutOfSpectralRange {
                    lambda: top,
                    kappa_sq: family.kappa_sq(),
                });
            }
        }
        Ok(Self {
            eig,
            samples,
            kernel,
            family,
            tau_max,
        })
    }

    pub fn eigen(&self) -> &EigenSystem {
        &self.eig
    }

    pub fn samples(&self) -> &SampleSet {
        &self.samples
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn family(&self) -> &FilterFamily {
        &self.family
    }

    pub fn tau_max(&self) -> u64 {
        self.tau_max
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    fn check_scale(&self, j: u64) -> Result<()> {
        if j > self.tau_max {
            return Err(Error::IndexOutOfRange {
                index: j as usize,
                limit: self.tau_max as usize,
            });
        }
        Ok(())
    }

    fn check_vector(&self, f: &[f64]) -> Result<()> {
        if f.len() != self.len() {
            return Err(Error::InvalidParameter(format!(
                "{} sample values for {} samples",
                f.len(),
                self.len()
            )));
        }
        Ok(())
    }

    fn big_g(&self, j: u64, lambda: f64) -> f64 {
        self.family.g_squared_unchecked(j, lambda).max(0.0).sqrt()
    }

    /// Values of `f` at the samples.
    pub fn sample_values(&self, f: impl Fn(&Point) -> f64) -> Vec<f64> {
        self.samples.points.iter().map(f).collect()
    }

    /// `ψ̂_{j,x_k}(x) = (1/N) Σ_{i≤r, ℓ} G_j(λ̂_i) û_i[k] û_i[ℓ] K(x, x_ℓ)`.
    pub fn wavelet_eval(&self, j: u64, k: usize, x: &Point) -> Result<f64> {
        if k >= self.len() {
            return Err(Error::IndexOutOfRange {
                index: k,
                limit: self.len(),
            });
        }
        Ok(self.wavelets_at(j, x)?[k])
    }

    /// `ψ̂_{j,x_k}(x)` for every `k`.
    pub fn wavelets_at(&self, j: u64, x: &Point) -> Result<Vec<f64>> {
        self.check_scale(j)?;
        self.kernel.evaluate(x, x)?;
        let kx: Vec<f64> = self
            .samples
            .points
            .iter()
            .map(|y| self.kernel.eval(x, y))
            .collect();
        // with Euclidean-unit u_i the 1/N and the √N factors of û cancel
        let coords: Vec<f64> = self
            .eig
            .project(&kx)
            .iter()
            .zip(self.eig.positive_values())
            .map(|(c, &l)| c * self.big_g(j, l))
            .collect();
        Ok(self.eig.synthesize(&coords))
    }

    /// `Σ_{i≤r} G_j(λ̂_i) v̂_i(x_k) v̂_i(x)` through the Nyström extension.
    pub fn wavelet_eval_spectral(&self, j: u64, k: usize, x: &Point) -> Result<f64> {
        self.check_scale(j)?;
        if k >= self.len() {
            return Err(Error::IndexOutOfRange {
                index: k,
                limit: self.len(),
            });
        }
        let xk = &self.samples.points[k];
        let mut sum = 0.0;
        for (i, &l) in self.eig.positive_values().iter().enumerate() {
            let g = self.big_g(j, l);
            if g == 0.0 {
                continue;
            }
            let a = nystrom_extend(&self.eig, &self.kernel, &self.samples, i, xk)?;
            let b = nystrom_extend(&self.eig, &self.kernel, &self.samples, i, x)?;
            sum += g * a * b;
        }
        Ok(sum)
    }

    /// `⟨f, v̂_i⟩` for `i < rank`, from the sample values of `f ∈ Ĥ_N`.
    pub fn spectral_coefficients(&self, f: &[f64]) -> Result<Vec<f64>> {
        self.check_vector(f)?;
        let n = self.len() as f64;
        Ok(self
            .eig
            .project(f)
            .iter()
            .zip(self.eig.positive_values())
            .map(|(c, l)| c / (n * l).sqrt())
            .collect())
    }

    /// Coefficients `c[j][k] = ⟨f, ψ̂_{j,x_k}⟩ = (G_j(T̂) f)(x_k)`, `1 ≤ j ≤ τ`.
    pub fn analyze(&self, f: &[f64], tau: u64) -> Result<CoefficientTable> {
        self.check_vector(f)?;
        self.check_scale(tau)?;
        let values = (1..=tau).map(|j| self.scale_coefficients(f, j)).collect();
        Ok(CoefficientTable {
            n: self.len(),
            seed: self.samples.seed,
            filter: self.family.descriptor(),
            weight: 1.0 / self.len() as f64,
            values,
        })
    }

    fn scale_coefficients(&self, f: &[f64], j: u64) -> Vec<f64> {
        apply_empirical(&self.eig, |l| self.big_g(j, l), f)
    }

    /// Sample values of `T̂_j f = T̂ G_j(T̂)² f`.
    pub fn frame_operator_apply(&self, f: &[f64], j: u64) -> Result<Vec<f64>> {
        self.check_vector(f)?;
        self.check_scale(j)?;
        Ok(apply_empirical(
            &self.eig,
            |l| l * self.family.g_squared_unchecked(j, l).max(0.0),
            f,
        ))
    }

    /// `T̂_j f = (1/N) Σ_k ⟨f, ψ̂_{j,x_k}⟩ ψ̂_{j,x_k}` at the samples, summing
    /// the wavelets explicitly. Costs `O(N³)`.
    pub fn frame_operator_apply_direct(&self, f: &[f64], j: u64) -> Result<Vec<f64>> {
        self.check_vector(f)?;
        self.check_scale(j)?;
        let c = self.scale_coefficients(f, j);
        let n = self.len();
        let mut out = vec![0.0; n];
        for (m, x) in self.samples.points.iter().enumerate() {
            let psi = self.wavelets_at(j, x)?;
            out[m] = linalg::dot(&psi, &c) / n as f64;
        }
        Ok(out)
    }

    /// Sample values of `Σ_{j≤τ} T̂_j f = T̂ g_τ(T̂) f`.
    pub fn reconstruct(&self, f: &[f64], tau: u64) -> Result<Vec<f64>> {
        self.check_vector(f)?;
        self.check_scale(tau)?;
        Ok(apply_empirical(
            &self.eig,
            |l| self.family.partial_sum_unchecked(tau, l),
            f,
        ))
    }

    /// Truncated Parseval check. The partial sum is accumulated one scale at
    /// a time from the actual coefficients.
    pub fn parseval_report(&self, f: &[f64], tau: u64) -> Result<ParsevalReport> {
        self.check_vector(f)?;
        self.check_scale(tau)?;
        let norm = hilbert_norm(&self.eig, f)?;
        let w = 1.0 / self.len() as f64;
        let partial_sum: f64 = (1..=tau)
            .map(|j| w * linalg::norm_sq(&self.scale_coefficients(f, j)))
            .sum();
        let norm_sq = norm.norm * norm.norm;
        Ok(ParsevalReport {
            partial_sum,
            norm_sq,
            gap: norm_sq - partial_sum,
            tau,
        })
    }

    /// `sup_{i≤r} (1 − λ̂_i g_τ(λ̂_i))`.
    pub fn worst_residual(&self, tau: u64) -> f64 {
        self.eig
            .positive_values()
            .iter()
            .map(|&l| self.family.residual_unchecked(tau, l))
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParsevalReport {
    pub partial_sum: f64,
    pub norm_sq: f64,
    pub gap: f64,
    pub tau: u64,
}

impl ParsevalReport {
    /// `gap / ‖f‖²`, zero for the zero signal.
    pub fn relative_gap(&self) -> f64 {
        if self.norm_sq == 0.0 {
            0.0
        } else {
            self.gap / self.norm_sq
        }
    }
}

/// Frame coefficients `c[j−1][k] = ⟨f, ψ̂_{j,x_k}⟩`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientTable {
    pub n: usize,
    pub seed: u64,
    pub filter: String,
    /// Empirical measure weight `1/N`.
    pub weight: f64,
    pub values: Vec<Vec<f64>>,
}

impl CoefficientTable {
    pub fn tau(&self) -> u64 {
        self.values.len() as u64
    }

    /// `c[j][k]` with `j` starting at 1.
    pub fn get(&self, j: u64, k: usize) -> Option<f64> {
        self.values.get((j as usize).checked_sub(1)?)?.get(k).copied()
    }

    /// `Σ_j (1/N) Σ_k c[j][k]²`.
    pub fn partial_sum(&self) -> f64 {
        self.values
            .iter()
            .map(|row| self.weight * linalg::norm_sq(row))
            .sum()
    }

    /// CSV with `#` header lines for `n`, `seed` and `filter`, then `j,k,c`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# n={}", self.n)?;
        writeln!(w, "# seed={}", self.seed)?;
        writeln!(w, "# filter={}", self.filter)?;
        writeln!(w, "j,k,c")?;
        for (j, row) in self.values.iter().enumerate() {
            for (k, c) in row.iter().enumerate() {
                writeln!(w, "{},{},{:?}", j + 1, k, c)?;
            }
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is ascii")
    }

    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut n = None;
        let mut seed = None;
        let mut filter = None;
        let mut values: Vec<Vec<f64>> = Vec::new();
        let bad = |line: &str| Error::Parse(format!("bad coefficient line {line:?}"));
        for line in text.lines() {
            if let Some(meta) = line.strip_prefix("# ") {
                let (key, val) = meta.split_once('=').ok_or_else(|| bad(line))?;
                match key {
                    "n" => n = Some(val.parse().map_err(|_| bad(line))?),
                    "seed" => seed = Some(val.parse().map_err(|_| bad(line))?),
                    "filter" => filter = Some(val.to_string()),
                    _ => return Err(bad(line)),
                }
                continue;
            }
            if line == "j,k,c" || line.is_empty() {
                continue;
            }
            let mut parts = line.split(',');
            let (Some(j), Some(k), Some(c), None) =
                (parts.next(), parts.next(), parts.next(), parts.next())
            else {
                return Err(bad(line));
            };
            let j: usize = j.parse().map_err(|_| bad(line))?;
            let k: usize = k.parse().map_err(|_| bad(line))?;
            let c: f64 = c.parse().map_err(|_| bad(line))?;
            if j == 0 || j > values.len() + 1 {
                return Err(bad(line));
            }
            if j > values.len() {
                values.push(Vec::new());
            }
            if k != values[j - 1].len() {
                return Err(bad(line));
            }
            values[j - 1].push(c);
        }
        let n: usize = n.ok_or_else(|| Error::Parse("missing n".into()))?;
        Ok(Self {
            n,
            seed: seed.ok_or_else(|| Error::Parse("missing seed".into()))?,
            filter: filter.ok_or_else(|| Error::Parse("missing filter".into()))?,
            weight: 1.0 / n as f64,
            values,
        })
    }
}
