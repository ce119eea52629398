//! Closed-form block updates: dictionary `D`, projection `P`, classifier
//! `C` and regression error `E`.
//!
//! Shapes: `X` n×N, `V` N×r, `D` r×K, `P` K×n, `C` K×c, `H` c×N, `E` N×c.

use crate::linalg::{ensure_finite, ensure_shape, gram_ridge_solve, ridge_pinv, shape, Matrix};
use crate::prox::{row_shrink, DiagWeights};
use crate::{Error, Result};

/// Default ridge added to the Gram-type systems that may be singular.
pub const DEFAULT_TAU: f64 = 1e-6;

/// A column whose sum is below this fraction of its absolute mass cannot be
/// rescaled to sum one.
pub const DEGENERATE_COLUMN_SUM: f64 = 1e-10;

/// `Xᵀ(XXᵀ + τI)⁻¹` (N×n), fixed for a whole solve.
pub struct SampleCovariance {
    pinv: Matrix,
}

impl SampleCovariance {
    pub fn new(x: &Matrix, tau: f64) -> Result<Self> {
        if !(tau.is_finite() && tau >= 0.0) {
            return Err(Error::InvalidParameter(format!("tau must be >= 0, got {tau}")));
        }
        let pinv = ridge_pinv(x, tau, "X Xᵀ + τI", ": use tau > 0 or reduce the feature dimension")?;
        Ok(Self { pinv })
    }

    pub fn dim(&self) -> usize {
        self.pinv.ncols()
    }

    /// `M Xᵀ (X Xᵀ + τI)⁻¹` for a K×N matrix `M`.
    pub fn project(&self, m: &Matrix) -> Matrix {
        m * &self.pinv
    }
}

/// Unnormalized dictionary `D = Vᵀ (PX)ᵀ ((PX)(PX)ᵀ + τI)⁻¹`.
///
/// This is the stationary point of `α tr((Vᵀ − D PX)ᵀ Q (Vᵀ − D PX))` for any
/// positive `Q` (the weights cancel), plus `ατ tr(Dᵀ Q D)` when `τ > 0`.
pub fn solve_dictionary(v: &Matrix, px: &Matrix, tau: f64) -> Result<Matrix> {
    if v.nrows() != px.ncols() {
        return Err(Error::dims("update_d: V rows vs PX columns", px.ncols(), v.nrows()));
    }
    let pinv = ridge_pinv(px, tau, "update_d", ": (PX)(PX)ᵀ is singular; use tau > 0")?;
    Ok(v.transpose() * pinv)
}

/// Rescales every column to sum to one. Columns whose entries cancel (or
/// vanish) are reported as degenerate.
pub fn normalize_columns(mut d: Matrix) -> Result<Matrix> {
    for (j, mut col) in d.column_iter_mut().enumerate() {
        let sum: f64 = col.iter().sum();
        let mass: f64 = col.iter().map(|v| v.abs()).sum();
        if !sum.is_finite() || sum.abs() <= DEGENERATE_COLUMN_SUM * mass {
            return Err(Error::DegenerateColumn { column: j, sum });
        }
        col /= sum;
    }
    Ok(d)
}

/// Dictionary update followed by the `eᵀD = eᵀ` rescaling.
pub fn update_d(v: &Matrix, px: &Matrix, tau: f64) -> Result<Matrix> {
    normalize_columns(solve_dictionary(v, px, tau)?)
}

/// Inputs of the J-RFDL projection subproblem.
#[derive(Debug, Clone, Copy)]
pub struct ProjectionTerms<'a> {
    pub x: &'a Matrix,
    pub v: &'a Matrix,
    pub d: &'a Matrix,
    pub q: &'a DiagWeights,
    pub j: &'a Matrix,
    pub s: &'a Matrix,
    pub y2: &'a Matrix,
    pub y3: &'a Matrix,
    pub alpha: f64,
    pub mu: f64,
}

/// Classification coupling added by DJ-RFDL.
#[derive(Debug, Clone, Copy)]
pub struct ClassifierTerms<'a> {
    pub c: &'a Matrix,
    pub h: &'a Matrix,
    pub e: &'a Matrix,
    pub y4: &'a Matrix,
}

impl ProjectionTerms<'_> {
    fn check(&self) -> Result<(usize, usize)> {
        let (n, samples) = self.x.shape();
        let (r, k) = self.d.shape();
        ensure_shape(self.v, samples, r, "update_p: V")?;
        ensure_shape(self.j, k, samples, "update_p: J")?;
        ensure_shape(self.s, k, samples, "update_p: S")?;
        ensure_shape(self.y2, k, samples, "update_p: Y2")?;
        ensure_shape(self.y3, k, samples, "update_p: Y3")?;
        if self.q.len() != r {
            return Err(Error::dims("update_p: Q", r, self.q.len()));
        }
        if !(self.mu > 0.0 && self.mu.is_finite()) || self.alpha.is_nan() || self.alpha < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "update_p needs mu > 0 and alpha >= 0 (mu = {}, alpha = {})",
                self.mu, self.alpha
            )));
        }
        Ok((n, k))
    }

    /// Square-root factor `A = √(2α) Q^½ D` with `AᵀA = 2α DᵀQD`, and the K×N
    /// matrix `M` with `L = M Xᵀ`.
    fn system(&self) -> (Matrix, Matrix) {
        let qd = self.q.scale_rows(self.d);
        let root = DiagWeights::from_vec(self.q.as_slice().iter().map(|w| w.sqrt()).collect())
            .expect("square roots of positive weights")
            .scale_rows(self.d)
            * (2.0 * self.alpha).sqrt();
        let rhs =
            qd.transpose() * self.v.transpose() * (2.0 * self.alpha) - self.y2 - self.y3 + (self.j + self.s) * self.mu;
        (root, rhs)
    }
}

/// Solves `(AᵀA + 2μI) Z = M` and maps through `Xᵀ(XXᵀ + τI)⁻¹`.
fn solve_projection(root: &Matrix, mu: f64, rhs: &Matrix, x: &Matrix, cov: &SampleCovariance) -> Result<Matrix> {
    if cov.dim() != x.nrows() {
        return Err(Error::dims("update_p: covariance", x.nrows(), cov.dim()));
    }
    let inner = gram_ridge_solve(root, 2.0 * mu, rhs, "update_p")?;
    let p = cov.project(&inner);
    ensure_finite(&p, "update_p")?;
    Ok(p)
}

/// `P = (2α DᵀQD + 2μI)⁻¹ [2α (X V Q D)ᵀ − Y₂Xᵀ − Y₃Xᵀ + μJXᵀ + μSXᵀ] (XXᵀ + τI)⁻¹`
pub fn update_p_jrfdl(terms: &ProjectionTerms<'_>, cov: &SampleCovariance) -> Result<Matrix> {
    terms.check()?;
    let (root, rhs) = terms.system();
    solve_projection(&root, terms.mu, &rhs, terms.x, cov)
}

/// The projection update with the classification coupling:
///
/// ```text
/// P = (2α DᵀQD + 2μI + μCCᵀ)⁻¹ Z (XXᵀ + τI)⁻¹
/// Z = L + C Y₄ᵀ Xᵀ + μ C H Xᵀ − μ C Eᵀ Xᵀ
/// ```
pub fn update_p_djrfdl(
    terms: &ProjectionTerms<'_>,
    cls: &ClassifierTerms<'_>,
    cov: &SampleCovariance,
) -> Result<Matrix> {
    let (_, k) = terms.check()?;
    let samples = terms.x.ncols();
    let classes = cls.h.nrows();
    ensure_shape(cls.c, k, classes, "update_p: C")?;
    ensure_shape(cls.h, classes, samples, "update_p: H")?;
    ensure_shape(cls.e, samples, classes, "update_p: E")?;
    ensure_shape(cls.y4, samples, classes, "update_p: Y4")?;

    let (root, mut rhs) = terms.system();
    // μCCᵀ joins the Gram part: stack √μ·Cᵀ under the root factor.
    let mut stacked = Matrix::zeros(root.nrows() + classes, k);
    stacked.rows_mut(0, root.nrows()).copy_from(&root);
    stacked.rows_mut(root.nrows(), classes).copy_from(&(cls.c.transpose() * terms.mu.sqrt()));
    rhs += cls.c * (cls.y4.transpose() + (cls.h - cls.e.transpose()) * terms.mu);
    solve_projection(&stacked, terms.mu, &rhs, terms.x, cov)
}

fn check_classifier_inputs(px: &Matrix, h: &Matrix, e: &Matrix, y4: &Matrix) -> Result<()> {
    let samples = px.ncols();
    let classes = h.nrows();
    ensure_shape(h, classes, samples, "classifier: H")?;
    ensure_shape(e, samples, classes, "classifier: E")?;
    ensure_shape(y4, samples, classes, "classifier: Y4")?;
    Ok(())
}

/// `C = (PX XᵀPᵀ + 2βI/μ)⁻¹ (PX·Y₄/μ + PX·Hᵀ − PX·E)`
pub fn update_c(px: &Matrix, h: &Matrix, e: &Matrix, y4: &Matrix, mu: f64, beta: f64) -> Result<Matrix> {
    check_classifier_inputs(px, h, e, y4)?;
    if !(mu > 0.0 && mu.is_finite()) || !(beta >= 0.0 && beta.is_finite()) {
        return Err(Error::InvalidParameter(format!("update_c needs mu > 0 and beta >= 0 (mu = {mu}, beta = {beta})")));
    }
    const HINT: &str = ": PX is rank-deficient and beta = 0; use beta > 0 or a ridge";
    let solver = ridge_pinv(px, 2.0 * beta / mu, "update_c", HINT)?.transpose();
    let target = y4 / mu + h.transpose() - e;
    Ok(solver * target)
}

/// Ridge least-squares classifier `(PX XᵀPᵀ + τI)⁻¹ PX Hᵀ`.
pub fn ridge_classifier(px: &Matrix, h: &Matrix, tau: f64) -> Result<Matrix> {
    if h.ncols() != px.ncols() {
        return Err(Error::dims("ridge_classifier: H columns", px.ncols(), shape(h)));
    }
    Ok(ridge_pinv(px, tau, "ridge_classifier", ": use tau > 0")?.transpose() * h.transpose())
}

/// Row-wise shrinkage of `Σ_E = Hᵀ − XᵀPᵀC + Y₄/μ` with threshold `β/μ`.
pub fn update_e(h: &Matrix, px: &Matrix, c: &Matrix, y4: &Matrix, mu: f64, beta: f64) -> Result<Matrix> {
    if !(mu > 0.0 && mu.is_finite()) || beta.is_nan() || beta < 0.0 {
        return Err(Error::InvalidParameter(format!("update_e needs mu > 0 and beta >= 0 (mu = {mu}, beta = {beta})")));
    }
    ensure_shape(c, px.nrows(), h.nrows(), "update_e: C")?;
    ensure_shape(y4, px.ncols(), h.nrows(), "update_e: Y4")?;
    let sigma = h.transpose() - px.transpose() * c + y4 / mu;
    row_shrink(&sigma, beta / mu)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn signed(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
        Matrix::from_fn(rows, cols, |_, _| rng.random::<f64>() * 2.0 - 1.0)
    }

    #[test]
    fn scalar_dictionary() {
        // X = [2], P = [0.5], Vᵀ = [3]: PX = 1, raw D = 3·1/1 = 3.
        let px = Matrix::from_element(1, 1, 0.5 * 2.0);
        let v = Matrix::from_element(1, 1, 3.0);
        let raw = solve_dictionary(&v, &px, 0.0).unwrap();
        assert!((raw[(0, 0)] - 3.0).abs() < 1e-15);
        assert_eq!(update_d(&v, &px, 0.0).unwrap()[(0, 0)], 1.0);
    }

    #[test]
    fn dictionary_columns_sum_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let v = Matrix::from_fn(12, 4, |_, _| rng.random::<f64>());
        let px = signed(6, 12, &mut rng);
        let d = update_d(&v, &px, DEFAULT_TAU).unwrap();
        assert_eq!(d.shape(), (4, 6));
        for col in d.column_iter() {
            assert!((col.sum() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn degenerate_column_is_an_error() {
        let d = Matrix::from_row_slice(2, 2, &[1.0, 1.0, -1.0, 2.0]);
        assert!(matches!(normalize_columns(d), Err(Error::DegenerateColumn { column: 0, .. })));
    }

    #[test]
    fn projection_special_case_recovers_j() {
        // α = 0, Y = 0, J = S: P X = J for square invertible X.
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let (n, k, r) = (4, 3, 2);
        let x = signed(n, n, &mut rng) + Matrix::identity(n, n) * 3.0;
        let j = signed(k, n, &mut rng);
        let zeros = Matrix::zeros(k, n);
        let v = Matrix::from_fn(n, r, |_, _| rng.random::<f64>());
        let d = Matrix::from_fn(r, k, |_, _| rng.random::<f64>());
        let q = DiagWeights::identity(r);
        let terms =
            ProjectionTerms { x: &x, v: &v, d: &d, q: &q, j: &j, s: &j, y2: &zeros, y3: &zeros, alpha: 0.0, mu: 0.37 };
        let cov = SampleCovariance::new(&x, 0.0).unwrap();
        let p = update_p_jrfdl(&terms, &cov).unwrap();
        assert!((&p * &x - &j).amax() < 1e-8);
    }

    #[test]
    fn projection_scalar_hand_value() {
        // K = n = N = r = 1: P = (2αdqd + 2μ)⁻¹ (2α x v q d − y2 x − y3 x + μ j x + μ s x) / (x² + τ)
        let (x, v, d, q, j, s, y2, y3, alpha, mu, tau) = (2.0, 0.5, 0.8, 0.3, 1.1, 0.9, 0.2, -0.1, 0.6, 0.25, 0.01);
        let want = (2.0 * alpha * x * v * q * d - y2 * x - y3 * x + mu * j * x + mu * s * x)
            / (2.0 * alpha * d * q * d + 2.0 * mu)
            / (x * x + tau);
        let m = |val: f64| Matrix::from_element(1, 1, val);
        let (xm, vm, dm, jm, sm, y2m, y3m) = (m(x), m(v), m(d), m(j), m(s), m(y2), m(y3));
        let qw = DiagWeights::from_vec(vec![q]).unwrap();
        let terms = ProjectionTerms { x: &xm, v: &vm, d: &dm, q: &qw, j: &jm, s: &sm, y2: &y2m, y3: &y3m, alpha, mu };
        let cov = SampleCovariance::new(&xm, tau).unwrap();
        let p = update_p_jrfdl(&terms, &cov).unwrap();
        assert!((p[(0, 0)] - want).abs() < 1e-14);
    }

    #[test]
    fn classifier_interpolates_without_ridge() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let (k, classes) = (4, 3);
        let px = signed(k, k, &mut rng) + Matrix::identity(k, k) * 2.0;
        let h = Matrix::from_fn(classes, k, |i, j| if j % classes == i { 1.0 } else { 0.0 });
        let zeros = Matrix::zeros(k, classes);
        let c = update_c(&px, &h, &zeros, &zeros, 0.5, 0.0).unwrap();
        assert!((px.transpose() * c - h.transpose()).amax() < 1e-8);
    }

    #[test]
    fn classifier_rank_deficient_without_ridge_fails() {
        let px = Matrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 2.0, 4.0, 6.0]);
        let h = Matrix::from_row_slice(1, 3, &[1.0, 0.0, 1.0]);
        let zeros = Matrix::zeros(3, 1);
        assert!(matches!(update_c(&px, &h, &zeros, &zeros, 1.0, 0.0), Err(Error::Singular { .. })));
        assert!(update_c(&px, &h, &zeros, &zeros, 1.0, 0.1).is_ok());
    }

    #[test]
    fn error_update_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (k, samples, classes) = (3, 5, 2);
        let px = signed(k, samples, &mut rng);
        let c = signed(k, classes, &mut rng);
        let h = Matrix::from_fn(classes, samples, |i, j| if j % classes == i { 1.0 } else { 0.0 });
        let y4 = signed(samples, classes, &mut rng);
        let mu = 0.8;
        let sigma = h.transpose() - px.transpose() * &c + &y4 / mu;
        assert_eq!(update_e(&h, &px, &c, &y4, mu, 0.0).unwrap(), sigma);

        // A sample predicted exactly gets a zero error row.
        let mut h_exact = (px.transpose() * &c).transpose();
        h_exact.column_mut(0).copy_from(&(px.transpose() * &c).row(0).transpose());
        let e = update_e(&h_exact, &px, &c, &Matrix::zeros(samples, classes), mu, 0.1).unwrap();
        assert_eq!(e.row(0).norm(), 0.0);
    }
}
