//! Inexact augmented-Lagrangian solvers.
//!
//! The auxiliary splitting `V = F`, `PX = J`, `PX = S` (and `Hᵀ = XᵀPᵀC + E`
//! for the discriminative model) turns the nonsmooth objective into blocks
//! with closed-form or multiplicative updates. One iteration is a single
//! Gauss–Seidel sweep over the blocks, followed by the multiplier ascent
//! and the penalty schedule `μ ← min(ημ, μ_max)`:
//!
//! 1. `J`, `S`, `F` by their proximal maps
//! 2. `D`, then `P`
//! 3. `W`, then `V`
//! 4. IRLS weights `Q`, `G`
//! 5. (discriminative) `C`, then `E`
//! 6. multipliers, `μ`, convergence check on the ∞-norm residuals
//!
//! The discriminative solver keeps the unsupervised sweep order and only
//! swaps in the coupled projection update. With `β = 0` the classification
//! term carries no weight, so it is decoupled entirely: the representation
//! follows the unsupervised trajectory exactly and `C*` is a ridge
//! least-squares fit on the final coefficients.

mod cost;
mod params;
mod state;
mod trace;

use std::time::Instant;

pub use cost::CostReport;
pub use params::HyperParams;
pub use state::{init_state, ClassifierState, SolverState, DIVERGENCE_LIMIT};
pub use trace::{ConvergenceTrace, StopReason, TraceRow};

use crate::classify::LabelMatrix;
use crate::dictsolve::{
    ridge_classifier, update_c, update_d, update_e, update_p_djrfdl, update_p_jrfdl, ClassifierTerms, ProjectionTerms,
    SampleCovariance,
};
use crate::factorize::{factorization_residual, robust_wv_step, update_g, FactorPair, Gram, RobustFactorTerms};
use crate::linalg::{l1_norm, max_abs, Matrix};
use crate::model::{Method, Model, Preprocessing};
use crate::prox::{l21_norm, nuclear_norm, reweight_diag, soft_threshold, svt};
use crate::{Error, Result};

/// How the IRLS weights evolve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Reweighting {
    /// `qᵢᵢ = 1/(2‖χⁱ‖)`, `gᵢᵢ = 1/(2‖ψⁱ‖)` after every sweep.
    #[default]
    Adaptive,
    /// `Q = I`, `G = I` throughout (Frobenius-norm surrogate).
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Coupling {
    Unsupervised,
    Joint,
    Decoupled,
}

/// Constraint residuals in the ∞-norm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Residuals {
    pub pxj: f64,
    pub pxs: f64,
    pub vf: f64,
    pub cls: Option<f64>,
}

impl Residuals {
    pub fn max(&self) -> f64 {
        self.pxj.max(self.pxs).max(self.vf).max(self.cls.unwrap_or(0.0))
    }
}

/// `max(‖PX−J‖∞, ‖PX−S‖∞, ‖V−F‖∞[, ‖Hᵀ−XᵀPᵀC−E‖∞])` and its parts.
pub fn residuals(state: &SolverState, x: &Matrix, h: Option<&Matrix>) -> Residuals {
    residuals_with(state, &(&state.p * x), h)
}

fn residuals_with(state: &SolverState, px: &Matrix, h: Option<&Matrix>) -> Residuals {
    let cls = match (&state.classifier, h) {
        (Some(cls), Some(h)) => Some(max_abs(&(h.transpose() - px.transpose() * &cls.c - &cls.e))),
        _ => None,
    };
    Residuals {
        pxj: max_abs(&(px - &state.j)),
        pxs: max_abs(&(px - &state.s)),
        vf: max_abs(&(&state.pair.v - &state.f)),
        cls,
    }
}

/// The unrelaxed objective at the primal variables:
///
/// ```text
/// ‖Xᵀ − VWᵀXᵀ‖₂,₁ + α(‖Vᵀ − DPX‖₂,₁ + ‖V‖₁) + γ(‖PX‖_* + ‖PX‖₁)
///   [+ β(‖Hᵀ − XᵀPᵀC‖₂,₁ + ‖C‖²_F)]
/// ```
pub fn objective(state: &SolverState, x: &Matrix, h: Option<&Matrix>, params: &HyperParams) -> f64 {
    objective_with(state, x, &(&state.p * x), h, params)
}

fn objective_with(state: &SolverState, x: &Matrix, px: &Matrix, h: Option<&Matrix>, params: &HyperParams) -> f64 {
    let v = &state.pair.v;
    let fit = l21_norm(&factorization_residual(x, &state.pair));
    let dict = l21_norm(&(v.transpose() - &state.d * px));
    let mut obj = fit + params.alpha * (dict + l1_norm(v)) + params.gamma * (nuclear_norm(px) + l1_norm(px));
    if let (Some(cls), Some(h)) = (&state.classifier, h) {
        let err = h.transpose() - px.transpose() * &cls.c;
        obj += params.beta * (l21_norm(&err) + cls.c.norm_squared());
    }
    obj
}

/// Proximal updates of the auxiliaries, from the current `P` and `V`:
/// `J = svt(PX + Y₂/μ, γ/μ)`, `S = shrink(PX + Y₃/μ, γ/μ)`,
/// `F = shrink(V + Y₁/μ, α/μ)`.
pub fn step_auxiliaries(state: &mut SolverState, x: &Matrix, params: &HyperParams) -> Result<()> {
    aux_with(state, &(&state.p * x), params)
}

fn aux_with(state: &mut SolverState, px: &Matrix, params: &HyperParams) -> Result<()> {
    let mu = state.mu;
    state.j = svt(&(px + &state.y2 / mu), params.gamma / mu)?;
    state.s = soft_threshold(&(px + &state.y3 / mu), params.gamma / mu)?;
    state.f = soft_threshold(&(&state.pair.v + &state.y1 / mu), params.alpha / mu)?;
    Ok(())
}

/// Dual ascent on every constraint, then `μ ← min(ημ, μ_max)`.
pub fn step_multipliers(state: &mut SolverState, x: &Matrix, h: Option<&Matrix>, params: &HyperParams) {
    multipliers_with(state, &(&state.p * x), h, params)
}

fn multipliers_with(state: &mut SolverState, px: &Matrix, h: Option<&Matrix>, params: &HyperParams) {
    let mu = state.mu;
    state.y1 += (&state.pair.v - &state.f) * mu;
    state.y2 += (px - &state.j) * mu;
    state.y3 += (px - &state.s) * mu;
    if let (Some(cls), Some(h)) = (state.classifier.as_mut(), h) {
        cls.y4 += (h.transpose() - px.transpose() * &cls.c - &cls.e) * mu;
    }
    state.mu = (params.eta * mu).min(params.mu_max);
}

/// A finished run.
#[derive(Debug, Clone)]
pub struct FitOutput {
    pub model: Model,
    pub trace: ConvergenceTrace,
    pub state: SolverState,
}

/// Iteration driver shared by both models.
pub struct Solver<'a> {
    x: &'a Matrix,
    labels: Option<&'a LabelMatrix>,
    params: HyperParams,
    coupling: Coupling,
    reweighting: Reweighting,
    gram: Gram,
    cov: SampleCovariance,
    state: SolverState,
    px: Matrix,
    started: Instant,
}

impl<'a> Solver<'a> {
    /// Unsupervised solver when `labels` is `None`, discriminative otherwise.
    pub fn new(x: &'a Matrix, params: HyperParams, labels: Option<&'a LabelMatrix>) -> Result<Self> {
        let coupling = match labels {
            None => Coupling::Unsupervised,
            Some(_) if params.beta > 0.0 => Coupling::Joint,
            Some(_) => Coupling::Decoupled,
        };
        // The decoupled run carries no classification state during the sweep.
        let state = init_state(x, &params, labels.filter(|_| coupling == Coupling::Joint))?;
        let gram = Gram::from_samples(x);
        let cov = SampleCovariance::new(x, params.tau)?;
        let px = &state.p * x;
        Ok(Self {
            x,
            labels,
            params,
            coupling,
            reweighting: Reweighting::Adaptive,
            gram,
            cov,
            state,
            px,
            started: Instant::now(),
        })
    }

    pub fn with_reweighting(mut self, reweighting: Reweighting) -> Self {
        self.reweighting = reweighting;
        self
    }

    pub fn state(&self) -> &SolverState {
        &self.state
    }

    pub fn params(&self) -> &HyperParams {
        &self.params
    }

    fn h(&self) -> Option<&'a Matrix> {
        match self.coupling {
            Coupling::Joint => self.labels.map(|l| l.h()),
            _ => None,
        }
    }

    /// Runs one full sweep and returns its trace row.
    pub fn step(&mut self) -> Result<TraceRow> {
        let iteration = self.state.iter + 1;
        let params = &self.params;
        let x = self.x;
        let h = self.h();
        let mu = self.state.mu;
        let st = &mut self.state;

        aux_with(st, &self.px, params)?;

        // With α = 0 the dictionary term vanishes and every D is optimal;
        // keep the current one.
        if params.alpha > 0.0 {
            st.d = update_d(&st.pair.v, &self.px, params.tau)?;
        }

        let terms = ProjectionTerms {
            x,
            v: &st.pair.v,
            d: &st.d,
            q: &st.q,
            j: &st.j,
            s: &st.s,
            y2: &st.y2,
            y3: &st.y3,
            alpha: params.alpha,
            mu,
        };
        st.p = match (&st.classifier, h) {
            (Some(cls), Some(h)) => {
                let cls_terms = ClassifierTerms { c: &cls.c, h, e: &cls.e, y4: &cls.y4 };
                update_p_djrfdl(&terms, &cls_terms, &self.cov)?
            }
            _ => update_p_jrfdl(&terms, &self.cov)?,
        };
        self.px = &st.p * x;
        let px = &self.px;

        let recon = &st.d * px;
        let wv_terms = RobustFactorTerms {
            gram: &self.gram,
            g: &st.g,
            q: &st.q,
            recon: &recon,
            f: &st.f,
            y1: &st.y1,
            alpha: params.alpha,
            mu,
        };
        let mut pair = st.pair.clone();
        robust_wv_step(&wv_terms, &mut pair)?;
        st.pair = pair;

        if self.reweighting == Reweighting::Adaptive {
            st.q = reweight_diag(&(st.pair.v.transpose() - &st.d * px), params.floor)?;
            st.g = update_g(x, &st.pair, params.floor)?;
        }

        if let (Some(cls), Some(h)) = (st.classifier.as_mut(), h) {
            cls.c = update_c(px, h, &cls.e, &cls.y4, mu, params.beta)?;
            cls.e = update_e(h, px, &cls.c, &cls.y4, mu, params.beta)?;
        }

        multipliers_with(st, px, h, params);
        st.iter = iteration;

        st.check_bounded().map_err(|detail| Error::Diverged { iteration, detail })?;

        let res = residuals_with(st, px, h);
        let objective = objective_with(st, x, px, h, params);
        if !objective.is_finite() {
            return Err(Error::Diverged { iteration, detail: "objective is not finite".into() });
        }
        Ok(TraceRow {
            iter: iteration,
            res_max: res.max(),
            res_pxj: res.pxj,
            res_pxs: res.pxs,
            res_vf: res.vf,
            res_cls: match self.coupling {
                Coupling::Unsupervised => None,
                Coupling::Joint => res.cls,
                Coupling::Decoupled => Some(0.0),
            },
            objective,
            mu,
            wall_time_s: self.started.elapsed().as_secs_f64(),
        })
    }

    /// Iterates until `res_max ≤ eps` or `max_iter`.
    pub fn run(mut self) -> Result<FitOutput> {
        self.started = Instant::now();
        let mut rows = Vec::new();
        let mut stop = StopReason::MaxIterations;
        for _ in 0..self.params.max_iter {
            let row = self.step()?;
            let done = row.res_max <= self.params.eps;
            rows.push(row);
            if done {
                stop = StopReason::Converged;
                break;
            }
        }
        self.finish(ConvergenceTrace { rows, stop })
    }

    fn finish(mut self, trace: ConvergenceTrace) -> Result<FitOutput> {
        let (method, c) = match (self.coupling, self.labels) {
            (Coupling::Unsupervised, _) => (Method::Jrfdl, None),
            (Coupling::Joint, _) => (Method::Djrfdl, self.state.classifier.as_ref().map(|c| c.c.clone())),
            (Coupling::Decoupled, Some(labels)) => {
                let c = ridge_classifier(&self.px, labels.h(), self.params.tau)?;
                let e = labels.h().transpose() - self.px.transpose() * &c;
                let y4 = Matrix::zeros(e.nrows(), e.ncols());
                self.state.classifier = Some(ClassifierState { c: c.clone(), e, y4 });
                (Method::Djrfdl, Some(c))
            }
            (Coupling::Decoupled, None) => unreachable!("decoupled runs always carry labels"),
        };
        let model = Model {
            method,
            p: self.state.p.clone(),
            d: self.state.d.clone(),
            c,
            classes: self.labels.map(|l| l.classes()),
            preprocessing: Preprocessing::default(),
            params: self.params.clone(),
        };
        Ok(FitOutput { model, trace, state: self.state })
    }
}

/// Unsupervised J-RFDL. The returned model has no classifier; see
/// [`crate::classify::fit_posthoc_classifier`].
pub fn fit_jrfdl(x: &Matrix, params: &HyperParams) -> Result<(Model, ConvergenceTrace)> {
    let out = Solver::new(x, params.clone(), None)?.run()?;
    Ok((out.model, out.trace))
}

/// Discriminative DJ-RFDL; the model carries `C*`.
pub fn fit_djrfdl(x: &Matrix, labels: &LabelMatrix, params: &HyperParams) -> Result<(Model, ConvergenceTrace)> {
    let out = Solver::new(x, params.clone(), Some(labels))?.run()?;
    Ok((out.model, out.trace))
}

/// Concept-factorization baseline: CF on the training data, coefficients of
/// new samples by least squares on the basis `XW`, i.e. `P = (XW)⁺` and
/// `D = I`.
///
/// The trace records the CF objective; its residual columns hold the
/// relative objective change between consecutive steps.
pub fn fit_cf_baseline(x: &Matrix, params: &HyperParams) -> Result<(Model, ConvergenceTrace)> {
    use rand::SeedableRng;

    params.validate()?;
    let started = Instant::now();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(params.seed);
    let (pair, history) = crate::factorize::fit_cf(x, params.factor_rank, params.max_iter, params.eps, &mut rng)?;
    let mut rows = Vec::with_capacity(history.len());
    let mut prev = f64::NAN;
    for (i, &obj) in history.iter().enumerate() {
        let change = if i == 0 { 1.0 } else { (prev - obj).abs() / prev.max(f64::MIN_POSITIVE) };
        rows.push(TraceRow {
            iter: i + 1,
            res_max: change,
            res_pxj: 0.0,
            res_pxs: 0.0,
            res_vf: 0.0,
            res_cls: None,
            objective: obj,
            mu: 0.0,
            wall_time_s: started.elapsed().as_secs_f64(),
        });
        prev = obj;
    }
    let stop = if rows.last().is_some_and(|r| r.res_max <= params.eps) {
        StopReason::Converged
    } else {
        StopReason::MaxIterations
    };
    let basis = x * &pair.w;
    let p = basis
        .pseudo_inverse(1e-12)
        .map_err(|e| Error::InvalidParameter(format!("pseudo-inverse of the CF basis failed: {e}")))?;
    let r = params.factor_rank;
    let model = Model {
        method: Method::CfBaseline,
        p,
        d: Matrix::identity(r, r),
        c: None,
        classes: None,
        preprocessing: Preprocessing::default(),
        params: HyperParams { dict_size: r, ..params.clone() },
    };
    Ok((model, ConvergenceTrace { rows, stop }))
}

/// Identity-weighted unsupervised run that exposes the per-iteration
/// factors; used to compare against plain CF trajectories.
pub fn factor_trajectory(
    x: &Matrix,
    params: &HyperParams,
    reweighting: Reweighting,
    steps: usize,
) -> Result<Vec<FactorPair>> {
    let mut solver = Solver::new(x, params.clone(), None)?.with_reweighting(reweighting);
    let mut out = Vec::with_capacity(steps + 1);
    out.push(solver.state().pair.clone());
    for _ in 0..steps {
        solver.step()?;
        out.push(solver.state().pair.clone());
    }
    Ok(out)
}
