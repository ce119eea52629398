//! Independent oracles and fixtures shared by the integration suites.
//!
//! Nothing here calls into the solver internals it is used to check: the
//! prox oracles minimize the prox objectives numerically, the optimality
//! checks differentiate hand-written objectives by central differences.
#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rfdl_core::data::{split_per_class, synth_classes, Dataset, SynthSpec};

pub type Matrix = DMatrix<f64>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(rows: usize, cols: usize, lo: f64, hi: f64, rng: &mut ChaCha8Rng) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.random_range(lo..hi))
}

pub fn max_diff(a: &Matrix, b: &Matrix) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Golden-section search for the minimizer of a unimodal `f` on `[lo, hi]`.
pub fn golden_min(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - g * (hi - lo);
    let mut b = lo + g * (hi - lo);
    let (mut fa, mut fb) = (f(a), f(b));
    while hi - lo > tol {
        if fa <= fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - g * (hi - lo);
            fa = f(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + g * (hi - lo);
            fb = f(b);
        }
    }
    0.5 * (lo + hi)
}

/// Entry-wise minimizer of `τ|z| + ½(z − m)²` by line search.
pub fn soft_threshold_oracle(m: &Matrix, tau: f64) -> Matrix {
    m.map(|v| {
        let span = v.abs() + tau + 1.0;
        golden_min(|z| tau * z.abs() + 0.5 * (z - v).powi(2), -span, span, 1e-12)
    })
}

/// Row-wise minimizer of `τ‖z‖ + ½‖z − m‖²`, searched over `z = t·m`,
/// `t ∈ [0, 1]`.
pub fn row_shrink_oracle(m: &Matrix, tau: f64) -> Matrix {
    let mut out = m.clone();
    for mut row in out.row_iter_mut() {
        let norm = row.norm();
        let t = golden_min(|t| tau * t * norm + 0.5 * (1.0 - t).powi(2) * norm * norm, 0.0, 1.0, 1e-13);
        row *= t;
    }
    out
}

/// Minimizer of `τ‖Z‖_* + ½‖Z − M‖²_F` through the factored form
/// `min_{A,B} ½‖ABᵀ − M‖² + τ/2 (‖A‖² + ‖B‖²)` with full inner rank,
/// solved by alternating exact ridge solves.
pub fn svt_oracle(m: &Matrix, tau: f64, seed: u64) -> Matrix {
    let (rows, cols) = m.shape();
    let k = rows.min(cols);
    let mut g = rng(seed);
    let mut a = uniform(rows, k, 0.5, 1.5, &mut g);
    let mut b = uniform(cols, k, 0.5, 1.5, &mut g);
    let eye = Matrix::identity(k, k);
    let mut prev = &a * b.transpose();
    for _ in 0..200_000 {
        let gb = (b.transpose() * &b + &eye * tau).try_inverse().expect("ridge Gram invertible");
        a = m * &b * gb;
        let ga = (a.transpose() * &a + &eye * tau).try_inverse().expect("ridge Gram invertible");
        b = m.transpose() * &a * ga;
        let z = &a * b.transpose();
        if max_diff(&z, &prev) < 1e-15 {
            return z;
        }
        prev = z;
    }
    prev
}

/// Central-difference gradient of `f` at `x`.
pub fn fd_gradient(f: impl Fn(&Matrix) -> f64, x: &Matrix) -> Matrix {
    let mut grad = Matrix::zeros(x.nrows(), x.ncols());
    let mut probe = x.clone();
    for i in 0..x.nrows() {
        for j in 0..x.ncols() {
            let h = 1e-5 * x[(i, j)].abs().max(1.0);
            let orig = probe[(i, j)];
            probe[(i, j)] = orig + h;
            let up = f(&probe);
            probe[(i, j)] = orig - h;
            let down = f(&probe);
            probe[(i, j)] = orig;
            grad[(i, j)] = (up - down) / (2.0 * h);
        }
    }
    grad
}

/// `Σᵢ qᵢ ‖rowᵢ(M)‖²`
pub fn weighted_rows(m: &Matrix, q: &[f64]) -> f64 {
    m.row_iter().zip(q).map(|(row, w)| w * row.norm_squared()).sum()
}

/// Dictionary objective `Σᵢ qᵢ ‖rowᵢ(Vᵀ − D PX)‖²` (no ridge).
pub fn dictionary_objective(d: &Matrix, v: &Matrix, px: &Matrix, q: &[f64]) -> f64 {
    weighted_rows(&(v.transpose() - d * px), q)
}

/// Inputs of the projection subproblem, held by value for the oracles.
pub struct ProjectionInstance {
    pub x: Matrix,
    pub v: Matrix,
    pub d: Matrix,
    pub q: Vec<f64>,
    pub j: Matrix,
    pub s: Matrix,
    pub y2: Matrix,
    pub y3: Matrix,
    pub alpha: f64,
    pub mu: f64,
    pub c: Matrix,
    pub h: Matrix,
    pub e: Matrix,
    pub y4: Matrix,
}

impl ProjectionInstance {
    /// Random instance with `K` atoms, `n` features, `N` samples, rank `r`
    /// and `c` classes.
    pub fn random(k: usize, n: usize, samples: usize, r: usize, classes: usize, seed: u64) -> Self {
        let mut g = rng(seed);
        let labels: Vec<usize> = (0..samples).map(|i| i % classes).collect();
        let mut h = Matrix::zeros(classes, samples);
        for (j, &l) in labels.iter().enumerate() {
            h[(l, j)] = 1.0;
        }
        Self {
            x: uniform(n, samples, -1.0, 1.0, &mut g),
            v: uniform(samples, r, 0.0, 1.0, &mut g),
            d: uniform(r, k, -1.0, 1.0, &mut g),
            q: (0..r).map(|_| g.random_range(0.2..2.0)).collect(),
            j: uniform(k, samples, -1.0, 1.0, &mut g),
            s: uniform(k, samples, -1.0, 1.0, &mut g),
            y2: uniform(k, samples, -1.0, 1.0, &mut g),
            y3: uniform(k, samples, -1.0, 1.0, &mut g),
            alpha: g.random_range(0.1..2.0),
            mu: g.random_range(0.1..3.0),
            c: uniform(k, classes, -1.0, 1.0, &mut g),
            h,
            e: uniform(samples, classes, -0.5, 0.5, &mut g),
            y4: uniform(samples, classes, -1.0, 1.0, &mut g),
        }
    }

    /// Augmented-Lagrangian terms of the J-RFDL problem that depend on `P`.
    pub fn objective(&self, p: &Matrix) -> f64 {
        let px = p * &self.x;
        let gap_j = &px - &self.j;
        let gap_s = &px - &self.s;
        self.alpha * dictionary_objective(&self.d, &self.v, &px, &self.q)
            + self.y2.dot(&gap_j)
            + 0.5 * self.mu * gap_j.norm_squared()
            + self.y3.dot(&gap_s)
            + 0.5 * self.mu * gap_s.norm_squared()
    }

    /// [`Self::objective`] plus the classification constraint terms.
    pub fn coupled_objective(&self, p: &Matrix) -> f64 {
        let px = p * &self.x;
        let gap = self.h.transpose() - px.transpose() * &self.c - &self.e;
        self.objective(p) + self.y4.dot(&gap) + 0.5 * self.mu * gap.norm_squared()
    }
}

/// `β‖C‖² + ⟨Y₄, Hᵀ − BᵀC − E⟩ + μ/2 ‖Hᵀ − BᵀC − E‖²` with `B = PX`.
pub fn classifier_objective(c: &Matrix, b: &Matrix, h: &Matrix, e: &Matrix, y4: &Matrix, mu: f64, beta: f64) -> f64 {
    let gap = h.transpose() - b.transpose() * c - e;
    beta * c.norm_squared() + y4.dot(&gap) + 0.5 * mu * gap.norm_squared()
}

/// Largest gradient entry at the candidate relative to the largest entry
/// at the origin.
pub fn relative_stationarity(f: impl Fn(&Matrix) -> f64, candidate: &Matrix) -> f64 {
    let at_candidate = fd_gradient(&f, candidate).norm();
    let at_zero = fd_gradient(&f, &Matrix::zeros(candidate.nrows(), candidate.ncols())).norm();
    at_candidate / at_zero.max(f64::MIN_POSITIVE)
}

/// The separable three-class suite: 30 features, 60 samples per class.
pub fn synthetic_suite() -> Dataset {
    synth_classes(&SynthSpec { classes: 3, features: 30, per_class: 60, separation: 10.0, noise_sigma: 1.0, seed: 1 })
        .expect("valid synthetic spec")
}

/// Training and test parts of one split.
pub struct SplitData {
    pub x_train: Matrix,
    pub y_train: Vec<usize>,
    pub x_test: Matrix,
    pub y_test: Vec<usize>,
}

pub fn split_suite(ds: &Dataset, samples: &Matrix, per_class: usize, seed: u64) -> SplitData {
    let plan = split_per_class(&ds.labels, ds.classes, per_class, seed).expect("enough samples per class");
    let pick = |idx: &[usize]| samples.select_columns(idx.iter());
    SplitData {
        x_train: pick(&plan.train),
        y_train: ds.select_labels(&plan.train),
        x_test: pick(&plan.test),
        y_test: ds.select_labels(&plan.test),
    }
}

/// Nearest class mean in Euclidean distance.
pub fn nearest_centroid_accuracy(split: &SplitData, classes: usize) -> f64 {
    let n = split.x_train.nrows();
    let mut sums = Matrix::zeros(n, classes);
    let mut counts = vec![0usize; classes];
    for (col, &l) in split.x_train.column_iter().zip(&split.y_train) {
        let mut target = sums.column_mut(l);
        target += col;
        counts[l] += 1;
    }
    for (l, &count) in counts.iter().enumerate() {
        let mut col = sums.column_mut(l);
        col /= count.max(1) as f64;
    }
    let hits = split
        .x_test
        .column_iter()
        .zip(&split.y_test)
        .filter(|(col, &l)| {
            let best = (0..classes)
                .min_by(|&a, &b| {
                    let da = (col - sums.column(a)).norm();
                    let db = (col - sums.column(b)).norm();
                    da.total_cmp(&db)
                })
                .unwrap();
            best == l
        })
        .count();
    hits as f64 / split.y_test.len() as f64
}

pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}
