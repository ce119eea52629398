//! Small dense helpers layered over nalgebra.

use nalgebra::{Cholesky, DMatrix, Dyn};

use crate::{Error, Result};

/// Dense, column-major `f64` matrix used for every quantity in the solvers.
pub type Matrix = DMatrix<f64>;

pub fn shape(m: &Matrix) -> String {
    format!("{}x{}", m.nrows(), m.ncols())
}

/// Largest absolute entry (the elementwise ∞-norm).
pub fn max_abs(m: &Matrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

/// Sum of absolute entries.
pub fn l1_norm(m: &Matrix) -> f64 {
    m.iter().map(|x| x.abs()).sum()
}

pub fn all_finite(m: &Matrix) -> bool {
    m.iter().all(|x| x.is_finite())
}

pub fn ensure_finite(m: &Matrix, what: &str) -> Result<()> {
    if all_finite(m) {
        Ok(())
    } else {
        Err(Error::NonFinite(what.to_string()))
    }
}

pub fn ensure_nonempty(m: &Matrix, what: &str) -> Result<()> {
    if m.nrows() == 0 || m.ncols() == 0 {
        Err(Error::EmptyMatrix(format!("{what} has shape {}", shape(m))))
    } else {
        Ok(())
    }
}

pub fn ensure_shape(m: &Matrix, rows: usize, cols: usize, context: &'static str) -> Result<()> {
    if m.nrows() == rows && m.ncols() == cols {
        Ok(())
    } else {
        Err(Error::dims(context, format!("{rows}x{cols}"), shape(m)))
    }
}

/// Elementwise positive part `max(x, 0)`.
pub fn pos_part(m: &Matrix) -> Matrix {
    m.map(|x| x.max(0.0))
}

/// Elementwise negative part `max(-x, 0)`, so that `m = pos - neg`.
pub fn neg_part(m: &Matrix) -> Matrix {
    m.map(|x| (-x).max(0.0))
}

/// Cholesky factor of a symmetric positive definite system, reused across
/// many right-hand sides.
pub struct SpdFactor {
    chol: Cholesky<f64, Dyn>,
}

impl SpdFactor {
    pub fn new(a: Matrix, context: &'static str, hint: &'static str) -> Result<Self> {
        ensure_finite(&a, context)?;
        let chol = a.cholesky().ok_or(Error::Singular { context, hint })?;
        Ok(Self { chol })
    }

    /// Ratio of the smallest to the largest pivot of the factor, squared.
    /// A cheap lower-quality stand-in for the reciprocal condition number.
    pub fn pivot_ratio(&self) -> f64 {
        let l = self.chol.l_dirty();
        let diag = l.diagonal();
        let max = diag.iter().fold(0.0_f64, |a, &x| a.max(x));
        let min = diag.iter().fold(f64::INFINITY, |a, &x| a.min(x));
        if max == 0.0 {
            0.0
        } else {
            (min / max).powi(2)
        }
    }

    /// `A⁻¹ B`
    pub fn solve_left(&self, b: &Matrix) -> Matrix {
        self.chol.solve(b)
    }

    /// `B A⁻¹`, using the symmetry of `A`.
    pub fn solve_right(&self, b: &Matrix) -> Matrix {
        self.chol.solve(&b.transpose()).transpose()
    }
}

/// Solves `A Z = B` for symmetric positive definite `A`.
pub fn spd_solve(a: Matrix, b: &Matrix, context: &'static str, hint: &'static str) -> Result<Matrix> {
    let f = SpdFactor::new(a, context, hint)?;
    let z = f.solve_left(b);
    ensure_finite(&z, context)?;
    Ok(z)
}

/// `Aᵀ(AAᵀ + λI)⁻¹`, equivalently `(AᵀA + λI)⁻¹Aᵀ`, through the thin SVD
/// of `A` so rank deficiency is harmless once `λ > 0`.
///
/// With `λ = 0` this is the right inverse of `A` and requires full row rank
/// (reciprocal condition above `1e-13`).
pub fn ridge_pinv(a: &Matrix, lambda: f64, context: &'static str, hint: &'static str) -> Result<Matrix> {
    ensure_finite(a, context)?;
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::InvalidParameter(format!("{context}: ridge must be >= 0, got {lambda}")));
    }
    let (rows, cols) = a.shape();
    let svd = a.clone().svd(true, true);
    let u = svd.u.as_ref().expect("U requested");
    let vt = svd.v_t.as_ref().expect("Vᵀ requested");
    let sigma = &svd.singular_values;
    if lambda == 0.0 {
        let max = sigma.iter().fold(0.0_f64, |m, &s| m.max(s));
        let min = sigma.iter().fold(f64::INFINITY, |m, &s| m.min(s));
        if rows > cols || max == 0.0 || min / max < 1e-13 {
            return Err(Error::Singular { context, hint });
        }
    }
    let mut scaled = vt.transpose();
    for (j, mut col) in scaled.column_iter_mut().enumerate() {
        let s = sigma[j];
        let w = if s == 0.0 { 0.0 } else { s / (s * s + lambda) };
        col *= w;
    }
    let out = scaled * u.transpose();
    ensure_finite(&out, context)?;
    Ok(out)
}

/// `(AᵀA + λI)⁻¹ B` for `λ > 0`, from the thin SVD `A = UΣWᵀ`:
/// `(AᵀA + λI)⁻¹ = (I − W diag(σ²/(σ²+λ)) Wᵀ) / λ`.
pub fn gram_ridge_solve(a: &Matrix, lambda: f64, b: &Matrix, context: &'static str) -> Result<Matrix> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::InvalidParameter(format!("{context}: ridge must be > 0, got {lambda}")));
    }
    if a.ncols() != b.nrows() {
        return Err(Error::dims(context, a.ncols(), b.nrows()));
    }
    ensure_finite(a, context)?;
    let svd = a.clone().svd(false, true);
    let wt = svd.v_t.as_ref().expect("Wᵀ requested");
    let mut proj = wt * b;
    for (i, mut row) in proj.row_iter_mut().enumerate() {
        let s2 = svd.singular_values[i].powi(2);
        row *= s2 / (s2 + lambda);
    }
    let out = (b - wt.transpose() * proj) / lambda;
    ensure_finite(&out, context)?;
    Ok(out)
}

/// Symmetrizes in place: `(A + Aᵀ) / 2`.
pub fn symmetrize(a: &mut Matrix) {
    let n = a.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
}
