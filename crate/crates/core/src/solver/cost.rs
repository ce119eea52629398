use serde::Serialize;

use super::ConvergenceTrace;
use crate::{Error, Result};

/// Per-iteration cost accounting.
///
/// The dominant terms are `K³ + nNr + n³` for the dictionary/projection
/// block and `N²r` for the factorization block; over `k` iterations the
/// total is `O(k(K³ + nNr + n³))`.
#[derive(Debug, Clone, Serialize)]
pub struct CostReport {
    pub features: usize,
    pub samples: usize,
    pub dict_size: usize,
    pub factor_rank: usize,
    pub formula: &'static str,
    /// `K³ + nNr + n³`
    pub dominant_flops: f64,
    /// `N²r`, the factorization block.
    pub factorization_flops: f64,
    pub iterations: Option<usize>,
    pub mean_iter_seconds: Option<f64>,
}

impl CostReport {
    pub const FORMULA: &'static str = "O(k(K^3 + n*N*r + n^3))";

    pub fn estimate(features: usize, samples: usize, dict_size: usize, factor_rank: usize) -> Result<Self> {
        if features == 0 || samples == 0 || dict_size == 0 || factor_rank == 0 {
            return Err(Error::InvalidParameter(format!(
                "cost report needs nonzero shapes (n={features}, N={samples}, K={dict_size}, r={factor_rank})"
            )));
        }
        let (n, big_n, k, r) = (features as f64, samples as f64, dict_size as f64, factor_rank as f64);
        Ok(Self {
            features,
            samples,
            dict_size,
            factor_rank,
            formula: Self::FORMULA,
            dominant_flops: k.powi(3) + n * big_n * r + n.powi(3),
            factorization_flops: big_n * big_n * r,
            iterations: None,
            mean_iter_seconds: None,
        })
    }

    /// Attaches measured timings from a finished run.
    pub fn with_trace(mut self, trace: &ConvergenceTrace) -> Self {
        if let Some(last) = trace.rows.last() {
            self.iterations = Some(trace.len());
            self.mean_iter_seconds = Some(last.wall_time_s / trace.len() as f64);
        }
        self
    }

    /// Total estimate for `iterations` sweeps.
    pub fn total_flops(&self, iterations: usize) -> f64 {
        iterations as f64 * (self.dominant_flops + self.factorization_flops)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formula_terms() {
        let c = CostReport::estimate(10, 20, 5, 3).unwrap();
        assert_eq!(c.dominant_flops, 125.0 + 600.0 + 1000.0);
        assert_eq!(c.factorization_flops, 1200.0);
        assert_eq!(c.formula, "O(k(K^3 + n*N*r + n^3))");
        assert_eq!(c.total_flops(2), 2.0 * (1725.0 + 1200.0));
    }

    #[test]
    fn empty_shapes_rejected() {
        assert!(CostReport::estimate(0, 20, 5, 3).is_err());
        assert!(CostReport::estimate(10, 0, 5, 3).is_err());
    }
}
