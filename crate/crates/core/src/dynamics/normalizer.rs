use crate::error::{ensure_len, Result};

/// Lower bound on any fitted standard deviation.
pub const STD_FLOOR: f64 = 1e-6;

/// Per-dimension affine standardization.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn identity(dim: usize) -> Self {
        Standardizer {
            mean: vec![0.0; dim],
            std: vec![1.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Fits mean and (population) standard deviation over `rows`; an empty
    /// input yields the identity.
    pub fn fit<'a>(dim: usize, rows: impl Iterator<Item = &'a [f64]>) -> Result<Self> {
        let mut n = 0usize;
        let mut mean = vec![0.0; dim];
        let mut m2 = vec![0.0; dim];
        for row in rows {
            ensure_len("normalizer row", row.len(), dim)?;
            n += 1;
            for d in 0..dim {
                // Welford
                let delta = row[d] - mean[d];
                mean[d] += delta / n as f64;
                m2[d] += delta * (row[d] - mean[d]);
            }
        }
        if n == 0 {
            return Ok(Self::identity(dim));
        }
        let std = m2.iter().map(|v| (v / n as f64).sqrt().max(STD_FLOOR)).collect();
        Ok(Standardizer { mean, std })
    }

    pub fn normalize(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }

    pub fn denormalize(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| v * s + m)
            .collect()
    }
}

/// Input `(s, a)` and target `Δs` statistics shared by all ensemble members.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalizer {
    pub input: Standardizer,
    pub target: Standardizer,
    pub count: u64,
}

impl Normalizer {
    pub fn identity(input_dim: usize, target_dim: usize) -> Self {
        Normalizer {
            input: Standardizer::identity(input_dim),
            target: Standardizer::identity(target_dim),
            count: 0,
        }
    }
}
