use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::HyperParams;
use crate::classify::LabelMatrix;
use crate::dictsolve::normalize_columns;
use crate::factorize::FactorPair;
use crate::linalg::{all_finite, ensure_finite, ensure_nonempty, max_abs, Matrix};
use crate::prox::DiagWeights;
use crate::{Error, Result};

/// Entries above this magnitude count as divergence.
pub const DIVERGENCE_LIMIT: f64 = 1e12;

/// Discriminative extension of the state.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierState {
    /// Classifier, K×c.
    pub c: Matrix,
    /// Regression error, N×c.
    pub e: Matrix,
    /// Multiplier for `Hᵀ = XᵀPᵀC + E`, N×c.
    pub y4: Matrix,
}

/// All live matrices of one ALM run.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    /// Dictionary, r×K, unit column sums.
    pub d: Matrix,
    /// Projection, K×n.
    pub p: Matrix,
    /// Factorization `X ≈ X W Vᵀ`, both N×r.
    pub pair: FactorPair,
    /// Low-rank copy of `PX`, K×N.
    pub j: Matrix,
    /// Sparse copy of `PX`, K×N.
    pub s: Matrix,
    /// Sparse copy of `V`, N×r.
    pub f: Matrix,
    /// Dictionary-loss weights, size r.
    pub q: DiagWeights,
    /// Factorization-loss weights, size N.
    pub g: DiagWeights,
    pub y1: Matrix,
    pub y2: Matrix,
    pub y3: Matrix,
    pub mu: f64,
    /// Completed iterations.
    pub iter: usize,
    pub classifier: Option<ClassifierState>,
}

impl SolverState {
    /// Checks finiteness and the divergence bound on every matrix; names the
    /// first offender.
    pub fn check_bounded(&self) -> std::result::Result<(), String> {
        let mut mats: Vec<(&str, &Matrix)> = vec![
            ("D", &self.d),
            ("P", &self.p),
            ("W", &self.pair.w),
            ("V", &self.pair.v),
            ("J", &self.j),
            ("S", &self.s),
            ("F", &self.f),
            ("Y1", &self.y1),
            ("Y2", &self.y2),
            ("Y3", &self.y3),
        ];
        if let Some(cls) = &self.classifier {
            mats.extend([("C", &cls.c), ("E", &cls.e), ("Y4", &cls.y4)]);
        }
        for (name, m) in mats {
            if !all_finite(m) {
                return Err(format!("{name} has non-finite entries"));
            }
            let big = max_abs(m);
            if big > DIVERGENCE_LIMIT {
                return Err(format!("|{name}| reached {big:e}"));
            }
        }
        if !self.mu.is_finite() {
            return Err("mu is not finite".into());
        }
        Ok(())
    }
}

/// Seeded initialization.
///
/// `D`, `P`, `W`, `V` are i.i.d. uniform(0, 1) drawn in that order from a
/// ChaCha8 stream seeded with `params.seed`; `D`'s columns are rescaled to
/// unit sums. `J`, `S`, `F` and every multiplier start at zero, `Q` and `G`
/// at identity, `μ` at `mu0`.
pub fn init_state(x: &Matrix, params: &HyperParams, labels: Option<&LabelMatrix>) -> Result<SolverState> {
    params.validate()?;
    ensure_nonempty(x, "training matrix")?;
    ensure_finite(x, "training matrix")?;
    let (n, samples) = x.shape();
    let (k, r) = (params.dict_size, params.factor_rank);
    if r > n.min(samples) {
        return Err(Error::InvalidParameter(format!("factor_rank {r} exceeds min(n, N) = {}", n.min(samples))));
    }
    if k > samples {
        log::warn!("dictionary size {k} exceeds the sample count {samples}");
    }
    if let Some(h) = labels {
        if h.samples() != samples {
            return Err(Error::dims("labels vs samples", samples, h.samples()));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut uniform = |rows: usize, cols: usize| Matrix::from_fn(rows, cols, |_, _| rng.random::<f64>());
    let d = normalize_columns(uniform(r, k))?;
    let p = uniform(k, n);
    let w = uniform(samples, r);
    let v = uniform(samples, r);

    let classifier = labels.map(|h| ClassifierState {
        c: Matrix::zeros(k, h.classes()),
        e: Matrix::zeros(samples, h.classes()),
        y4: Matrix::zeros(samples, h.classes()),
    });

    Ok(SolverState {
        d,
        p,
        pair: FactorPair { w, v },
        j: Matrix::zeros(k, samples),
        s: Matrix::zeros(k, samples),
        f: Matrix::zeros(samples, r),
        q: DiagWeights::identity(r),
        g: DiagWeights::identity(samples),
        y1: Matrix::zeros(samples, r),
        y2: Matrix::zeros(k, samples),
        y3: Matrix::zeros(k, samples),
        mu: params.mu0,
        iter: 0,
        classifier,
    })
}
