use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::linalg::{ensure_nonempty, Matrix};
use crate::{Error, Result};

/// Mean and orthonormal basis of a PCA projection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaBasis {
    /// Training mean, length n.
    pub mean: DVector<f64>,
    /// n×k, orthonormal columns.
    pub basis: Matrix,
}

impl PcaBasis {
    pub fn input_dim(&self) -> usize {
        self.mean.len()
    }

    pub fn output_dim(&self) -> usize {
        self.basis.ncols()
    }

    /// `Bᵀ(x − mean)` for every column.
    pub fn apply(&self, x: &Matrix) -> Result<Matrix> {
        if x.nrows() != self.input_dim() {
            return Err(Error::dims("PCA input features", self.input_dim(), x.nrows()));
        }
        let mut centered = x.clone();
        for mut col in centered.column_iter_mut() {
            col -= &self.mean;
        }
        Ok(self.basis.transpose() * centered)
    }

    /// `B·z + mean` for every column.
    pub fn reconstruct(&self, z: &Matrix) -> Result<Matrix> {
        if z.nrows() != self.output_dim() {
            return Err(Error::dims("PCA coefficients", self.output_dim(), z.nrows()));
        }
        let mut out = &self.basis * z;
        for mut col in out.column_iter_mut() {
            col += &self.mean;
        }
        Ok(out)
    }
}

/// Centers `x` and keeps the fewest leading principal directions whose
/// squared singular values hold at least `energy` of the total.
pub fn pca_reduce(x: &Matrix, energy: f64) -> Result<(Matrix, PcaBasis)> {
    if !(energy > 0.0 && energy <= 1.0) {
        return Err(Error::InvalidParameter(format!("energy fraction must be in (0, 1], got {energy}")));
    }
    ensure_nonempty(x, "PCA input")?;
    let mean = x.column_mean();
    let mut centered = x.clone();
    for mut col in centered.column_iter_mut() {
        col -= &mean;
    }
    let svd = centered.clone().svd(true, false);
    let u = svd.u.as_ref().expect("left singular vectors requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let mass: Vec<f64> = order.iter().map(|&i| svd.singular_values[i].powi(2)).collect();
    let total: f64 = mass.iter().sum();
    let target = energy * total * (1.0 - 1e-12);
    let mut keep = 1;
    let mut acc = 0.0;
    for (i, m) in mass.iter().enumerate() {
        acc += m;
        keep = i + 1;
        if acc >= target {
            break;
        }
    }
    let basis = Matrix::from_columns(&order[..keep].iter().map(|&i| u.column(i)).collect::<Vec<_>>());
    let reduced = basis.transpose() * centered;
    Ok((reduced, PcaBasis { mean, basis }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rank_two() -> Matrix {
        let a = Matrix::from_fn(6, 2, |i, j| ((i + 1) * (j + 2)) as f64 + (i * i * j) as f64);
        let b = Matrix::from_fn(2, 8, |i, j| ((i + 1) as f64 * (j as f64).sin()) + j as f64 * 0.3);
        a * b
    }

    #[test]
    fn low_rank_dimension() {
        let x = rank_two();
        let (z, basis) = pca_reduce(&x, 0.99).unwrap();
        assert!(z.nrows() <= 2);
        assert_eq!(basis.apply(&x).unwrap(), z);
    }

    #[test]
    fn full_energy_reconstructs() {
        let x = Matrix::from_fn(4, 6, |i, j| ((i * 7 + j * 3) % 5) as f64 - 1.5);
        let (z, basis) = pca_reduce(&x, 1.0).unwrap();
        let back = basis.reconstruct(&z).unwrap();
        assert!((back - &x).norm() / x.norm() <= 1e-8);
    }

    #[test]
    fn bad_energy() {
        assert!(pca_reduce(&Matrix::zeros(2, 2), 0.0).is_err());
        assert!(pca_reduce(&Matrix::zeros(2, 2), 1.5).is_err());
    }
}
