//! JSON artifacts passed between command-line invocations.

use std::path::Path;

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::{EigenSystem, SampleSet};

/// An eigensystem with the provenance needed to reuse it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenArtifact {
    pub generator: String,
    pub seed: u64,
    pub kernel: String,
    pub kappa_sq: f64,
    pub values: Vec<f64>,
    /// Eigenvectors as rows: `vectors[i]` is the `i`-th Euclidean-unit
    /// eigenvector.
    pub vectors: Vec<Vec<f64>>,
    #[serde(default)]
    pub config: serde_json::Value,
}

impl EigenArtifact {
    pub fn new(eig: &EigenSystem, samples: &SampleSet, kernel: &str, config: serde_json::Value) -> Self {
        Self {
            generator: samples.generator.clone(),
            seed: samples.seed,
            kernel: kernel.to_string(),
            kappa_sq: eig.kappa_sq(),
            values: eig.values().to_vec(),
            vectors: (0..eig.len()).map(|i| eig.vector(i)).collect(),
            config,
        }
    }

    pub fn to_eigensystem(&self) -> Result<EigenSystem> {
        let n = self.values.len();
        if self.vectors.len() != n || self.vectors.iter().any(|v| v.len() != n) {
            return Err(Error::Parse("eigenvector table has the wrong shape".into()));
        }
        let m = Mat::from_fn(n, n, |r, c| self.vectors[c][r]);
        EigenSystem::from_parts(self.values.clone(), m, self.kappa_sq)
    }
}

/// Samples with the resolved configuration that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleArtifact {
    pub samples: SampleSet,
    #[serde(default)]
    pub config: serde_json::Value,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    std::fs::write(path, s)?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}
