//! Norms, proximal operators and the L2,1 reweighting diagonals.
//!
//! Every solver step is built from these pieces:
//!
//! | operator          | minimizes                              |
//! |-------------------|----------------------------------------|
//! | [`soft_threshold`] | `tau·‖Z‖₁  + ½‖Z − M‖²_F`             |
//! | [`svt`]            | `tau·‖Z‖_* + ½‖Z − M‖²_F`             |
//! | [`row_shrink`]     | `tau·‖Z‖₂,₁ + ½‖Z − M‖²_F`            |
//!
//! [`reweight_diag`] produces the diagonal `Λ` with `λᵢ = 1 / (2‖mⁱ‖₂)`, for
//! which `2·tr(Mᵀ Λ M) = ‖M‖₂,₁`; this is what turns each L2,1 term into a
//! weighted least-squares term inside the alternating updates.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::linalg::{ensure_finite, Matrix};
use crate::{Error, Result};

/// Default lower bound on row norms before inversion in [`reweight_diag`].
pub const DEFAULT_FLOOR: f64 = 1e-8;

/// Positive diagonal weights, stored as the diagonal only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagWeights(DVector<f64>);

impl DiagWeights {
    pub fn identity(n: usize) -> Self {
        Self(DVector::from_element(n, 1.0))
    }

    pub fn from_vec(weights: Vec<f64>) -> Result<Self> {
        if let Some(i) = weights.iter().position(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "diagonal weight {i} is {} (must be finite and > 0)",
                weights[i]
            )));
        }
        Ok(Self(DVector::from_vec(weights)))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice()
    }

    pub fn to_matrix(&self) -> Matrix {
        Matrix::from_diagonal(&self.0)
    }

    /// `diag(w) · M`, i.e. row `i` of `M` scaled by `wᵢ`.
    pub fn scale_rows(&self, m: &Matrix) -> Matrix {
        debug_assert_eq!(self.len(), m.nrows());
        let mut out = m.clone();
        for (i, mut row) in out.row_iter_mut().enumerate() {
            row *= self.0[i];
        }
        out
    }

    /// `M · diag(w)`, i.e. column `j` of `M` scaled by `wⱼ`.
    pub fn scale_cols(&self, m: &Matrix) -> Matrix {
        debug_assert_eq!(self.len(), m.ncols());
        let mut out = m.clone();
        for (j, mut col) in out.column_iter_mut().enumerate() {
            col *= self.0[j];
        }
        out
    }
}

fn check_tau(tau: f64, op: &str) -> Result<()> {
    if tau.is_finite() && tau >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{op}: threshold must be finite and >= 0, got {tau}")))
    }
}

/// `Σᵢ ‖row i‖₂`
pub fn l21_norm(m: &Matrix) -> f64 {
    m.row_iter().map(|r| r.norm()).sum()
}

/// Sum of singular values.
pub fn nuclear_norm(m: &Matrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().iter().sum()
}

/// Scalar shrinkage `sgn(x)·max(|x| − tau, 0)`.
#[inline]
pub fn shrink(x: f64, tau: f64) -> f64 {
    x.signum() * (x.abs() - tau).max(0.0)
}

/// Elementwise shrinkage; the proximal map of `tau·‖·‖₁`.
pub fn soft_threshold(m: &Matrix, tau: f64) -> Result<Matrix> {
    check_tau(tau, "soft_threshold")?;
    Ok(m.map(|x| shrink(x, tau)))
}

/// Singular value thresholding; the proximal map of `tau·‖·‖_*`.
pub fn svt(m: &Matrix, tau: f64) -> Result<Matrix> {
    check_tau(tau, "svt")?;
    ensure_finite(m, "svt input")?;
    if m.is_empty() {
        return Ok(m.clone());
    }
    let svd = m.clone().svd(true, true);
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => unreachable!("svd was asked for both factors"),
    };
    let mut scaled = u;
    for (j, mut col) in scaled.column_iter_mut().enumerate() {
        col *= (svd.singular_values[j] - tau).max(0.0);
    }
    Ok(scaled * v_t)
}

/// Row-wise group shrinkage; the proximal map of `tau·‖·‖₂,₁`.
///
/// Row `i` becomes `max(1 − tau/‖mⁱ‖₂, 0)·mⁱ`. Zero rows stay zero.
pub fn row_shrink(m: &Matrix, tau: f64) -> Result<Matrix> {
    check_tau(tau, "row_shrink")?;
    let mut out = m.clone();
    for mut row in out.row_iter_mut() {
        let norm = row.norm();
        let factor = if norm > tau { 1.0 - tau / norm } else { 0.0 };
        row *= factor;
    }
    Ok(out)
}

/// IRLS weights `1 / (2·max(‖row i‖₂, floor))`.
pub fn reweight_diag(m: &Matrix, floor: f64) -> Result<DiagWeights> {
    if !(floor.is_finite() && floor > 0.0) {
        return Err(Error::InvalidParameter(format!("reweight floor must be finite and > 0, got {floor}")));
    }
    let weights = m.row_iter().map(|r| 1.0 / (2.0 * r.norm().max(floor))).collect::<Vec<_>>();
    DiagWeights::from_vec(weights)
}
