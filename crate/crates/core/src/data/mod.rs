//! Datasets: matrix files, manifests, splits, preprocessing, corruption and
//! synthetic generation.

mod corrupt;
mod io;
mod manifest;
mod pca;
mod split;
mod synth;

use serde::{Deserialize, Serialize};

pub use corrupt::{corrupt_pixels, occlude_block, CorruptionMode};
pub use io::{load_matrix, read_labels, save_matrix, write_atomic, write_labels, MatrixFormat, RAW_MAGIC};
pub use manifest::DatasetManifest;
pub use pca::{pca_reduce, PcaBasis};
pub use split::{split_per_class, SplitPlan};
pub use synth::{synth_classes, SynthSpec};

use crate::linalg::{ensure_finite, Matrix};
use crate::{Error, Result};

/// Image height and width; `height · width` equals the feature count and
/// pixel `(row, col)` sits at feature `row · width + col`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Geometry {
    pub height: usize,
    pub width: usize,
}

impl Geometry {
    pub fn pixels(&self) -> usize {
        self.height * self.width
    }
}

/// Features in columns, optionally with image geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleMatrix {
    x: Matrix,
    geometry: Option<Geometry>,
}

impl SampleMatrix {
    pub fn new(x: Matrix, geometry: Option<Geometry>) -> Result<Self> {
        ensure_finite(&x, "sample matrix")?;
        if let Some(g) = geometry {
            if g.pixels() != x.nrows() {
                return Err(Error::dims("geometry height*width vs features", x.nrows(), g.pixels()));
            }
        }
        Ok(Self { x, geometry })
    }

    pub fn x(&self) -> &Matrix {
        &self.x
    }

    pub fn into_inner(self) -> Matrix {
        self.x
    }

    pub fn geometry(&self) -> Option<Geometry> {
        self.geometry
    }

    pub fn features(&self) -> usize {
        self.x.nrows()
    }

    pub fn samples(&self) -> usize {
        self.x.ncols()
    }

    /// Columns at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Matrix {
        self.x.select_columns(indices)
    }
}

/// A labeled sample matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub samples: SampleMatrix,
    pub labels: Vec<usize>,
    pub classes: usize,
    pub normalize: Normalization,
}

impl Dataset {
    pub fn new(samples: SampleMatrix, labels: Vec<usize>, classes: usize) -> Result<Self> {
        if labels.len() != samples.samples() {
            return Err(Error::dims("labels vs feature columns", samples.samples(), labels.len()));
        }
        if let Some((index, &label)) = labels.iter().enumerate().find(|(_, &l)| l >= classes) {
            return Err(Error::InvalidLabel { index, label, classes });
        }
        Ok(Self { samples, labels, classes, normalize: Normalization::None })
    }

    pub fn select_labels(&self, indices: &[usize]) -> Vec<usize> {
        indices.iter().map(|&i| self.labels[i]).collect()
    }
}

/// Per-sample feature scaling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    #[default]
    None,
    /// Every column scaled to unit Euclidean norm (zero columns left as is).
    UnitL2,
}

impl Normalization {
    pub fn apply(&self, x: &Matrix) -> Matrix {
        match self {
            Normalization::None => x.clone(),
            Normalization::UnitL2 => {
                let mut out = x.clone();
                for mut col in out.column_iter_mut() {
                    let norm = col.norm();
                    if norm > 0.0 {
                        col /= norm;
                    }
                }
                out
            }
        }
    }
}
