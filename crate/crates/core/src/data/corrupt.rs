use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Geometry;
use crate::linalg::Matrix;
use crate::{Error, Result};

/// Replacement values for corrupted pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorruptionMode {
    /// Uniform over `[min X, max X]`.
    #[default]
    Uniform,
    /// `min X` or `max X` with equal probability.
    SaltPepper,
}

fn sample_rng(seed: u64, column: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ column as u64)
}

/// Replaces `⌊fraction·n⌋` distinct entries of every column. Each column
/// draws from its own stream seeded with `seed ^ column`.
pub fn corrupt_pixels(x: &Matrix, fraction: f64, seed: u64, mode: CorruptionMode) -> Result<Matrix> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::InvalidParameter(format!("corruption fraction must be in [0, 1], got {fraction}")));
    }
    let n = x.nrows();
    let count = (fraction * n as f64).floor() as usize;
    let mut out = x.clone();
    if count == 0 || x.is_empty() {
        return Ok(out);
    }
    let (lo, hi) = (x.min(), x.max());
    for (j, mut col) in out.column_iter_mut().enumerate() {
        let mut rng = sample_rng(seed, j);
        for i in sample(&mut rng, n, count) {
            col[i] = match mode {
                CorruptionMode::Uniform if hi > lo => rng.random_range(lo..=hi),
                CorruptionMode::Uniform => lo,
                CorruptionMode::SaltPepper => {
                    if rng.random_bool(0.5) {
                        hi
                    } else {
                        lo
                    }
                }
            };
        }
    }
    Ok(out)
}

/// Zeroes one `side × side` block, fully inside the image, per column.
pub fn occlude_block(x: &Matrix, geometry: Option<Geometry>, side: usize, seed: u64) -> Result<Matrix> {
    let g = geometry.ok_or_else(|| Error::InvalidParameter("block occlusion needs image geometry".into()))?;
    if g.pixels() != x.nrows() {
        return Err(Error::dims("geometry height*width vs features", x.nrows(), g.pixels()));
    }
    if side > g.height.min(g.width) {
        return Err(Error::InvalidParameter(format!("block side {side} exceeds image {}x{}", g.height, g.width)));
    }
    let mut out = x.clone();
    if side == 0 {
        return Ok(out);
    }
    for (j, mut col) in out.column_iter_mut().enumerate() {
        let mut rng = sample_rng(seed, j);
        let top = rng.random_range(0..=g.height - side);
        let left = rng.random_range(0..=g.width - side);
        for r in top..top + side {
            for c in left..left + side {
                col[r * g.width + c] = 0.0;
            }
        }
    }
    Ok(out)
}
