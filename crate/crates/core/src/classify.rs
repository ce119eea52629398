//! Label matrices, the post-hoc linear classifier and inductive prediction.
//!
//! Prediction is inductive: a new sample is embedded with `P*x` and scored
//! with `C*ᵀP*x`, without touching the training problem.

use nalgebra::DVector;

use crate::dictsolve::{update_c, update_e};
use crate::linalg::{ensure_finite, max_abs, shape, Matrix};
use crate::model::Model;
use crate::prox::l21_norm;
use crate::solver::{HyperParams, DIVERGENCE_LIMIT};
use crate::{Error, Result};

/// One-hot label matrix `H` (c×N) with the labels it was built from.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelMatrix {
    h: Matrix,
    labels: Vec<usize>,
}

impl LabelMatrix {
    pub fn h(&self) -> &Matrix {
        &self.h
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn classes(&self) -> usize {
        self.h.nrows()
    }

    pub fn samples(&self) -> usize {
        self.h.ncols()
    }
}

/// `h[i][j] = 1` iff sample `j` has label `i`.
pub fn build_label_matrix(labels: &[usize], classes: usize) -> Result<LabelMatrix> {
    if classes == 0 {
        return Err(Error::InvalidParameter("class count must be >= 1".into()));
    }
    let mut h = Matrix::zeros(classes, labels.len());
    for (j, &l) in labels.iter().enumerate() {
        if l >= classes {
            return Err(Error::InvalidLabel { index: j, label: l, classes });
        }
        h[(l, j)] = 1.0;
    }
    Ok(LabelMatrix { h, labels: labels.to_vec() })
}

/// Default `β` for the post-hoc classifier on J-RFDL embeddings.
pub const POSTHOC_BETA: f64 = 1e-6;

/// Penalty schedule for the small classifier ALM.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlmSchedule {
    pub mu0: f64,
    pub mu_max: f64,
    pub eta: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for AlmSchedule {
    fn default() -> Self {
        Self { mu0: HyperParams::MU0, mu_max: HyperParams::MU_MAX, eta: HyperParams::ETA, tol: 1e-7, max_iter: 300 }
    }
}

/// Result of [`fit_posthoc_classifier`].
#[derive(Debug, Clone)]
pub struct PosthocFit {
    /// K×c
    pub c: Matrix,
    /// N×c
    pub e: Matrix,
    pub iterations: usize,
    /// Final `‖Hᵀ − XᵀP*ᵀC − E‖∞`.
    pub residual: f64,
}

impl PosthocFit {
    pub fn converged(&self, schedule: &AlmSchedule) -> bool {
        self.residual <= schedule.tol
    }
}

/// `min ‖E‖₂,₁ + β‖C‖²_F  s.t.  Hᵀ = XᵀP*ᵀC + E` by inexact ALM.
pub fn fit_posthoc_classifier(
    p: &Matrix,
    x: &Matrix,
    h: &LabelMatrix,
    beta: f64,
    schedule: &AlmSchedule,
) -> Result<PosthocFit> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::InvalidParameter(format!("post-hoc classifier needs beta > 0, got {beta}")));
    }
    if !(schedule.mu0 > 0.0 && schedule.mu0 <= schedule.mu_max && schedule.eta > 1.0) {
        return Err(Error::InvalidParameter(format!("invalid ALM schedule {schedule:?}")));
    }
    if p.ncols() != x.nrows() {
        return Err(Error::dims("post-hoc classifier: P columns vs features", x.nrows(), shape(p)));
    }
    if h.samples() != x.ncols() {
        return Err(Error::dims("post-hoc classifier: labels vs samples", x.ncols(), h.samples()));
    }
    let b = p * x;
    let ht = h.h().transpose();
    let (k, samples, classes) = (b.nrows(), b.ncols(), h.classes());
    let mut c = Matrix::zeros(k, classes);
    let mut e = Matrix::zeros(samples, classes);
    let mut y = Matrix::zeros(samples, classes);
    let mut mu = schedule.mu0;
    let mut residual = max_abs(&ht);
    let mut iterations = 0;
    while iterations < schedule.max_iter {
        iterations += 1;
        c = update_c(&b, h.h(), &e, &y, mu, beta)?;
        // Unit weight on ‖E‖₂,₁ gives the threshold 1/μ.
        e = update_e(h.h(), &b, &c, &y, mu, 1.0)?;
        let gap = &ht - b.transpose() * &c - &e;
        y += &gap * mu;
        mu = (schedule.eta * mu).min(schedule.mu_max);
        residual = max_abs(&gap);
        let big = max_abs(&y).max(max_abs(&c));
        if !big.is_finite() || big > DIVERGENCE_LIMIT {
            return Err(Error::Diverged {
                iteration: iterations,
                detail: format!("post-hoc classifier state reached {big:e}"),
            });
        }
        if residual <= schedule.tol {
            break;
        }
    }
    if residual > schedule.tol {
        log::warn!("post-hoc classifier stopped after {iterations} iterations at residual {residual:e}");
    }
    Ok(PosthocFit { c, e, iterations, residual })
}

/// `‖E‖₂,₁ + β‖C‖²_F` for a classifier and its error matrix.
pub fn posthoc_objective(c: &Matrix, e: &Matrix, beta: f64) -> f64 {
    l21_norm(e) + beta * c.norm_squared()
}

/// Soft and hard label of one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    /// `C*ᵀP*x`, length c.
    pub soft: DVector<f64>,
    /// Index of the largest soft entry; ties go to the lowest index.
    pub hard: usize,
}

/// Index of the largest entry, lowest index on ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

fn check_sample_dim(model: &Model, rows: usize) -> Result<()> {
    let n = model.p.ncols();
    if rows != n {
        return Err(Error::dims("embed: sample dimension", n, rows));
    }
    Ok(())
}

/// `P*x` for a preprocessed sample.
pub fn embed(model: &Model, x: &DVector<f64>) -> Result<DVector<f64>> {
    check_sample_dim(model, x.len())?;
    Ok(&model.p * x)
}

/// `P*X` for preprocessed samples in columns.
pub fn embed_batch(model: &Model, x: &Matrix) -> Result<Matrix> {
    check_sample_dim(model, x.nrows())?;
    Ok(&model.p * x)
}

/// Scores and labels one preprocessed sample.
pub fn predict(model: &Model, x: &DVector<f64>) -> Result<Prediction> {
    let c = model.c.as_ref().ok_or(Error::NoClassifier)?;
    let soft = c.transpose() * embed(model, x)?;
    let hard = argmax(soft.as_slice());
    Ok(Prediction { soft, hard })
}

/// Column-wise [`predict`].
pub fn predict_batch(model: &Model, x: &Matrix) -> Result<Vec<Prediction>> {
    let c = model.c.as_ref().ok_or(Error::NoClassifier)?;
    let scores = c.transpose() * embed_batch(model, x)?;
    ensure_finite(&scores, "prediction scores")?;
    Ok(scores
        .column_iter()
        .map(|col| {
            let soft = col.into_owned();
            let hard = argmax(soft.as_slice());
            Prediction { soft, hard }
        })
        .collect())
}

/// Fraction of exact matches.
pub fn accuracy(predicted: &[usize], truth: &[usize]) -> Result<f64> {
    if predicted.len() != truth.len() {
        return Err(Error::dims("accuracy: predictions vs truth", truth.len(), predicted.len()));
    }
    if truth.is_empty() {
        return Err(Error::EmptyMatrix("accuracy of an empty prediction set".into()));
    }
    let hits = predicted.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(hits as f64 / truth.len() as f64)
}
