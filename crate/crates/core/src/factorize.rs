//! Concept factorization `X ≈ X W Vᵀ` and the robust W/V block of J-RFDL.
//!
//! Both use Lee–Seung style multiplicative updates. The robust variant
//! works on the IRLS surrogate of the L2,1 factorization loss, weighted by
//! the diagonal `G`, and is coupled to the dictionary block through
//! `α‖Vᵀ − DPX‖₂,₁` (weighted by `Q`) and to the auxiliary split `V = F`.

use rand::Rng;

use crate::linalg::{ensure_finite, neg_part, pos_part, shape, Matrix};
use crate::prox::{reweight_diag, DiagWeights};
use crate::{Error, Result};

/// Lower clamp for numerators and denominators of multiplicative ratios.
pub const RATIO_FLOOR: f64 = 1e-12;

/// The kernel matrix `A = XᵀX` (N×N).
///
/// Signed data (centered or PCA features) gives a signed kernel; the
/// multiplicative rules then use `A = A⁺ − A⁻` and route each part to the
/// side of the ratio where it stays nonnegative.
#[derive(Debug, Clone)]
pub struct Gram {
    a: Matrix,
    pos: Matrix,
    neg: Option<Matrix>,
}

impl Gram {
    pub fn from_samples(x: &Matrix) -> Self {
        let mut a = x.transpose() * x;
        crate::linalg::symmetrize(&mut a);
        let neg = a.iter().any(|&v| v < 0.0).then(|| neg_part(&a));
        Self { pos: pos_part(&a), a, neg }
    }

    pub fn matrix(&self) -> &Matrix {
        &self.a
    }

    /// `A⁺`, the entrywise positive part.
    pub fn positive(&self) -> &Matrix {
        &self.pos
    }

    /// `A⁻ = max(−A, 0)`, or `None` for a nonnegative kernel.
    pub fn negative(&self) -> Option<&Matrix> {
        self.neg.as_ref()
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }
}

/// Nonnegative factors `W` (N×r) and `V` (N×r); `Vᵀ` is the compressed
/// representation of the samples.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorPair {
    pub w: Matrix,
    pub v: Matrix,
}

impl FactorPair {
    pub fn new(w: Matrix, v: Matrix) -> Result<Self> {
        if w.shape() != v.shape() {
            return Err(Error::dims("factor pair", shape(&w), shape(&v)));
        }
        ensure_finite(&w, "W")?;
        ensure_finite(&v, "V")?;
        if w.iter().chain(v.iter()).any(|&x| x < 0.0) {
            return Err(Error::InvalidParameter("factor pair entries must be nonnegative".into()));
        }
        Ok(Self { w, v })
    }

    /// Uniform(0, 1) initialization.
    pub fn random<R: Rng>(samples: usize, rank: usize, rng: &mut R) -> Self {
        let w = Matrix::from_fn(samples, rank, |_, _| rng.random::<f64>());
        let v = Matrix::from_fn(samples, rank, |_, _| rng.random::<f64>());
        Self { w, v }
    }

    pub fn samples(&self) -> usize {
        self.w.nrows()
    }

    pub fn rank(&self) -> usize {
        self.w.ncols()
    }

    fn check_against(&self, a: &Gram) -> Result<()> {
        if self.samples() != a.dim() {
            return Err(Error::dims(
                "factor pair vs gram",
                format!("{} rows", a.dim()),
                format!("{} rows", self.samples()),
            ));
        }
        Ok(())
    }
}

/// `‖X − X W Vᵀ‖²_F`
pub fn cf_objective(x: &Matrix, pair: &FactorPair) -> f64 {
    (x - x * &pair.w * pair.v.transpose()).norm_squared()
}

/// One step of the classical CF multiplicative rules, `W` first and then
/// `V` with the new `W`:
///
/// ```text
/// w ← w ∘ (A V) ⊘ (A W VᵀV)
/// v ← v ∘ (A W) ⊘ (V WᵀA W)
/// ```
///
/// With a signed kernel every `A` splits into `A⁺ − A⁻` and the `A⁻`
/// products change sides.
pub fn cf_step(a: &Gram, pair: &FactorPair) -> Result<FactorPair> {
    pair.check_against(a)?;
    let mut w = pair.w.clone();
    let mut v = pair.v.clone();

    let vtv = v.transpose() * &v;
    let mut num = a.positive() * &v;
    let mut den = (a.positive() * &w) * &vtv;
    if let Some(neg) = a.negative() {
        num += (neg * &w) * &vtv;
        den += neg * &v;
    }
    ratio_update(&mut w, &num, &den);

    let mut num = a.positive() * &w;
    let mut den = &v * (w.transpose() * &num);
    if let Some(neg) = a.negative() {
        let nw = neg * &w;
        num += &v * (w.transpose() * &nw);
        den += nw;
    }
    ratio_update(&mut v, &num, &den);

    ensure_finite(&w, "cf_step W")?;
    ensure_finite(&v, "cf_step V")?;
    Ok(FactorPair { w, v })
}

fn ratio_update(target: &mut Matrix, num: &Matrix, den: &Matrix) {
    for ((t, &n), &d) in target.iter_mut().zip(num.iter()).zip(den.iter()) {
        *t *= n.max(RATIO_FLOOR) / d.max(RATIO_FLOOR);
    }
}

/// Multiplicative update with sign splitting. `towards` are the terms that
/// belong in the numerator, `away` the terms that belong in the
/// denominator; a negative entry of either is moved to the other side so
/// both stay nonnegative. Fixed points are unchanged by the move, and when
/// every term already has its expected sign this is the plain ratio rule.
fn split_ratio_update(target: &mut Matrix, towards: &[&Matrix], away: &[&Matrix]) {
    for (idx, t) in target.iter_mut().enumerate() {
        let mut num = 0.0;
        let mut den = 0.0;
        for m in towards {
            let x = m[idx];
            if x >= 0.0 {
                num += x;
            } else {
                den -= x;
            }
        }
        for m in away {
            let x = m[idx];
            if x >= 0.0 {
                den += x;
            } else {
                num -= x;
            }
        }
        *t *= num.max(RATIO_FLOOR) / den.max(RATIO_FLOOR);
    }
}

/// Everything the robust W/V step reads besides the factors themselves.
#[derive(Debug, Clone, Copy)]
pub struct RobustFactorTerms<'a> {
    pub gram: &'a Gram,
    /// Factorization-loss weights (size N).
    pub g: &'a DiagWeights,
    /// Dictionary-loss weights (size r).
    pub q: &'a DiagWeights,
    /// The current reconstruction `D P X` (r×N).
    pub recon: &'a Matrix,
    /// Auxiliary copy of `V` (N×r).
    pub f: &'a Matrix,
    /// Multiplier for `V = F` (N×r).
    pub y1: &'a Matrix,
    pub alpha: f64,
    pub mu: f64,
}

impl RobustFactorTerms<'_> {
    fn check(&self, pair: &FactorPair) -> Result<()> {
        pair.check_against(self.gram)?;
        let (n, r) = (pair.samples(), pair.rank());
        if self.g.len() != n {
            return Err(Error::dims("G weights", n, self.g.len()));
        }
        if self.q.len() != r {
            return Err(Error::dims("Q weights", r, self.q.len()));
        }
        crate::linalg::ensure_shape(self.recon, r, n, "reconstruction DPX")?;
        crate::linalg::ensure_shape(self.f, n, r, "F")?;
        crate::linalg::ensure_shape(self.y1, n, r, "Y1")?;
        Ok(())
    }
}

/// One Gauss–Seidel sweep of the robust factorization rules.
///
/// ```text
/// w ← w ∘ (A G V) ⊘ (A W Vᵀ G V)
/// v ← v ∘ (2 G A W + 2α (DPX)ᵀ Q + μF) ⊘ (2 G V WᵀA W + 2α V Q + Y₁ + μV)
/// ```
///
/// The W rule uses `G`: it is the stationarity condition of the
/// G-weighted factorization loss, and `Q` (r×r) does not fit the product
/// `Vᵀ · V` (r×N · N×r) shape-wise.
pub fn robust_wv_step(terms: &RobustFactorTerms<'_>, pair: &mut FactorPair) -> Result<()> {
    terms.check(pair)?;
    let (pos, neg) = (terms.gram.positive(), terms.gram.negative());

    let gv = terms.g.scale_rows(&pair.v);
    let vtgv = pair.v.transpose() * &gv;
    let num = pos * &gv;
    let den = (pos * &pair.w) * &vtgv;
    match neg {
        None => split_ratio_update(&mut pair.w, &[&num], &[&den]),
        Some(neg) => {
            let num_neg = (neg * &pair.w) * &vtgv;
            let den_neg = neg * &gv;
            split_ratio_update(&mut pair.w, &[&num, &num_neg], &[&den, &den_neg]);
        }
    }
    ensure_finite(&pair.w, "robust_wv_step W")?;

    let aw = pos * &pair.w;
    let gaw = terms.g.scale_rows(&aw) * 2.0;
    let coupling = terms.q.scale_cols(&terms.recon.transpose()) * (2.0 * terms.alpha);
    let pull = terms.f * terms.mu;
    let quad = terms.g.scale_rows(&(&pair.v * (pair.w.transpose() * &aw))) * 2.0;
    let shrink = terms.q.scale_cols(&pair.v) * (2.0 * terms.alpha);
    let prox = &pair.v * terms.mu;
    match neg {
        None => split_ratio_update(&mut pair.v, &[&gaw, &coupling, &pull], &[&quad, &shrink, terms.y1, &prox]),
        Some(neg) => {
            let nw = neg * &pair.w;
            let gnw = terms.g.scale_rows(&nw) * 2.0;
            let quad_neg = terms.g.scale_rows(&(&pair.v * (pair.w.transpose() * &nw))) * 2.0;
            split_ratio_update(
                &mut pair.v,
                &[&gaw, &coupling, &pull, &quad_neg],
                &[&quad, &shrink, terms.y1, &prox, &gnw],
            );
        }
    }
    ensure_finite(&pair.v, "robust_wv_step V")?;
    Ok(())
}

/// The factorization residual `Ψ = Xᵀ − V Wᵀ Xᵀ` (N×n).
pub fn factorization_residual(x: &Matrix, pair: &FactorPair) -> Matrix {
    x.transpose() - &pair.v * (x * &pair.w).transpose()
}

/// Reweighting of the factorization loss: `gᵢᵢ = 1 / (2‖ψⁱ‖₂)`.
pub fn update_g(x: &Matrix, pair: &FactorPair, floor: f64) -> Result<DiagWeights> {
    if x.ncols() != pair.samples() {
        return Err(Error::dims("update_g", x.ncols(), pair.samples()));
    }
    reweight_diag(&factorization_residual(x, pair), floor)
}

/// The smooth W/V block of the augmented Lagrangian in IRLS form:
///
/// ```text
/// tr(Ψᵀ G Ψ) + α tr((Vᵀ − DPX)ᵀ Q (Vᵀ − DPX)) + ⟨Y₁, V − F⟩ + μ/2 ‖V − F‖²_F
/// ```
pub fn factor_block_objective(x: &Matrix, terms: &RobustFactorTerms<'_>, pair: &FactorPair) -> f64 {
    let psi = factorization_residual(x, pair);
    let fit: f64 = psi.row_iter().zip(terms.g.as_slice()).map(|(row, g)| g * row.norm_squared()).sum();
    let chi = pair.v.transpose() - terms.recon;
    let dict: f64 = chi.row_iter().zip(terms.q.as_slice()).map(|(row, q)| q * row.norm_squared()).sum();
    let gap = &pair.v - terms.f;
    fit + terms.alpha * dict + terms.y1.dot(&gap) + 0.5 * terms.mu * gap.norm_squared()
}

/// Plain concept factorization by repeated [`cf_step`]. Returns the factors
/// and the objective after every step; stops early once the relative
/// decrease falls below `tol`.
pub fn fit_cf<R: Rng>(
    x: &Matrix,
    rank: usize,
    max_iter: usize,
    tol: f64,
    rng: &mut R,
) -> Result<(FactorPair, Vec<f64>)> {
    crate::linalg::ensure_nonempty(x, "CF input")?;
    if rank == 0 || rank > x.ncols() {
        return Err(Error::InvalidParameter(format!("CF rank must be in [1, {}], got {rank}", x.ncols())));
    }
    let gram = Gram::from_samples(x);
    let mut pair = FactorPair::random(x.ncols(), rank, rng);
    let mut history = Vec::with_capacity(max_iter);
    let mut prev = cf_objective(x, &pair);
    for _ in 0..max_iter {
        pair = cf_step(&gram, &pair)?;
        let obj = cf_objective(x, &pair);
        history.push(obj);
        if (prev - obj).abs() <= tol * prev.max(f64::MIN_POSITIVE) {
            break;
        }
        prev = obj;
    }
    Ok((pair, history))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prox::DEFAULT_FLOOR;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_nonneg(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
        Matrix::from_fn(rows, cols, |_, _| rng.random::<f64>())
    }

    fn random_signed(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
        Matrix::from_fn(rows, cols, |_, _| rng.random::<f64>() * 2.0 - 1.0)
    }

    #[test]
    fn scalar_fixed_point() {
        let x = Matrix::from_element(1, 1, 2.0);
        let gram = Gram::from_samples(&x);
        assert_eq!(gram.matrix()[(0, 0)], 4.0);
        let pair = FactorPair::new(Matrix::from_element(1, 1, 1.0), Matrix::from_element(1, 1, 1.0)).unwrap();
        let next = cf_step(&gram, &pair).unwrap();
        assert_eq!(next, pair);
    }

    #[test]
    fn cf_objective_non_increasing() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x = random_nonneg(10, 20, &mut rng);
        let gram = Gram::from_samples(&x);
        let mut pair = FactorPair::random(20, 4, &mut rng);
        let mut prev = cf_objective(&x, &pair);
        for _ in 0..100 {
            pair = cf_step(&gram, &pair).unwrap();
            let obj = cf_objective(&x, &pair);
            assert!(obj <= prev * (1.0 + 1e-12), "{obj} > {prev}");
            assert!(pair.w.min() >= 0.0 && pair.v.min() >= 0.0);
            prev = obj;
        }
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let gram = Gram::from_samples(&Matrix::from_element(3, 4, 1.0));
        let pair = FactorPair::new(Matrix::from_element(5, 2, 1.0), Matrix::from_element(5, 2, 1.0)).unwrap();
        assert!(matches!(cf_step(&gram, &pair), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn robust_step_reduces_to_cf() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (n, samples, r) = (6, 9, 3);
        let x = random_nonneg(n, samples, &mut rng);
        let gram = Gram::from_samples(&x);
        let start = FactorPair::random(samples, r, &mut rng);
        let g = DiagWeights::identity(samples);
        let q = DiagWeights::identity(r);
        let recon = random_signed(r, samples, &mut rng);
        let zeros = Matrix::zeros(samples, r);
        let terms =
            RobustFactorTerms { gram: &gram, g: &g, q: &q, recon: &recon, f: &zeros, y1: &zeros, alpha: 0.0, mu: 0.0 };
        let mut robust = start.clone();
        let mut plain = start;
        for _ in 0..50 {
            robust_wv_step(&terms, &mut robust).unwrap();
            plain = cf_step(&gram, &plain).unwrap();
        }
        let rel = |a: &Matrix, b: &Matrix| {
            a.iter()
                .zip(b.iter())
                .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(1e-300))
                .fold(0.0_f64, f64::max)
        };
        assert!(rel(&robust.w, &plain.w) <= 1e-10);
        assert!(rel(&robust.v, &plain.v) <= 1e-10);
    }

    #[test]
    fn robust_step_keeps_nonnegativity_with_signed_terms() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let (n, samples, r) = (5, 8, 2);
        let x = random_nonneg(n, samples, &mut rng);
        let gram = Gram::from_samples(&x);
        let mut pair = FactorPair::random(samples, r, &mut rng);
        let g = reweight_diag(&random_signed(samples, n, &mut rng), DEFAULT_FLOOR).unwrap();
        let q = reweight_diag(&random_signed(r, samples, &mut rng), DEFAULT_FLOOR).unwrap();
        let recon = random_signed(r, samples, &mut rng) * 3.0;
        let f = random_signed(samples, r, &mut rng);
        let y1 = random_signed(samples, r, &mut rng) * 5.0;
        let terms = RobustFactorTerms { gram: &gram, g: &g, q: &q, recon: &recon, f: &f, y1: &y1, alpha: 0.7, mu: 0.3 };
        for _ in 0..20 {
            robust_wv_step(&terms, &mut pair).unwrap();
            assert!(pair.w.min() >= 0.0 && pair.v.min() >= 0.0);
        }
    }

    #[test]
    fn update_g_exact_factorization_hits_floor() {
        // X W Vᵀ = X with W = V = I.
        let x = Matrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let pair = FactorPair::new(Matrix::identity(2, 2), Matrix::identity(2, 2)).unwrap();
        let g = update_g(&x, &pair, 1e-8).unwrap();
        assert_eq!(g.len(), 2);
        for &w in g.as_slice() {
            assert!((w - 1.0 / (2.0 * 1e-8)).abs() < 1e-3);
        }
    }
}
