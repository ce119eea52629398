use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Everything that determines a solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    /// Weight of the dictionary reconstruction term and of `‖V‖₁`.
    pub alpha: f64,
    /// Weight of the classification term (discriminative solver only).
    pub beta: f64,
    /// Weight of the low-rank plus sparse penalty on `PX`.
    pub gamma: f64,
    /// Number of atoms `K`.
    pub dict_size: usize,
    /// Factorization rank `r`.
    pub factor_rank: usize,
    pub mu0: f64,
    pub mu_max: f64,
    /// Penalty growth factor, `μ ← min(η μ, μ_max)`.
    pub eta: f64,
    /// Stop once the largest constraint residual is at most `eps`.
    pub eps: f64,
    /// Ridge for `XXᵀ` and `(PX)(PX)ᵀ`.
    pub tau: f64,
    /// Row-norm floor for the IRLS weights.
    pub floor: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl HyperParams {
    pub const MU0: f64 = 1e-6;
    pub const MU_MAX: f64 = 1e6;
    pub const ETA: f64 = 1.12;
    pub const EPS: f64 = 1e-7;
    pub const MAX_ITER: usize = 500;

    /// Unsupervised defaults: `α = 1`, `γ = 1e-5`.
    pub fn jrfdl(dict_size: usize, factor_rank: usize) -> Self {
        Self {
            alpha: 1.0,
            beta: 0.0,
            gamma: 1e-5,
            dict_size,
            factor_rank,
            mu0: Self::MU0,
            mu_max: Self::MU_MAX,
            eta: Self::ETA,
            eps: Self::EPS,
            tau: crate::dictsolve::DEFAULT_TAU,
            floor: crate::prox::DEFAULT_FLOOR,
            max_iter: Self::MAX_ITER,
            seed: 0,
        }
    }

    /// Discriminative defaults, picked inside the recommended ranges
    /// `α ≤ 1e-1`, `β ≥ 1e-5`, `γ ≤ 1e-2`.
    pub fn djrfdl(dict_size: usize, factor_rank: usize) -> Self {
        Self { alpha: 1e-2, beta: 1e-1, gamma: 1e-3, ..Self::jrfdl(dict_size, factor_rank) }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta), ("gamma", self.gamma), ("tau", self.tau)] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} must be finite and >= 0, got {v}"));
            }
        }
        for (name, v) in [("mu0", self.mu0), ("mu_max", self.mu_max), ("eps", self.eps), ("floor", self.floor)] {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} must be finite and > 0, got {v}"));
            }
        }
        if self.mu0 > self.mu_max {
            return bad(format!("mu0 ({}) exceeds mu_max ({})", self.mu0, self.mu_max));
        }
        if !(self.eta.is_finite() && self.eta > 1.0) {
            return bad(format!("eta must be > 1, got {}", self.eta));
        }
        if self.dict_size == 0 {
            return bad("dict_size must be >= 1".into());
        }
        if self.factor_rank == 0 {
            return bad("factor_rank must be >= 1".into());
        }
        if self.max_iter == 0 {
            return bad("max_iter must be >= 1".into());
        }
        Ok(())
    }
}
