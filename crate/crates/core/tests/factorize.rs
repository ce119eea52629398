mod common;

use common::*;
use rfdl_core::factorize::{factorization_residual, fit_cf, update_g, FactorPair};

#[test]
fn cf_objective_history_is_non_increasing() {
    let x = uniform(8, 15, 0.0, 1.0, &mut rng(1));
    let (pair, history) = fit_cf(&x, 3, 200, 0.0, &mut rng(2)).unwrap();
    assert_eq!(history.len(), 200);
    for w in history.windows(2) {
        assert!(w[1] <= w[0] * (1.0 + 1e-12), "{} -> {}", w[0], w[1]);
    }
    assert!(pair.w.iter().chain(pair.v.iter()).all(|&v| v >= 0.0));
}

#[test]
fn cf_rank_is_validated() {
    let x = uniform(4, 5, 0.0, 1.0, &mut rng(3));
    assert!(fit_cf(&x, 0, 10, 0.0, &mut rng(4)).is_err());
    assert!(fit_cf(&x, 6, 10, 0.0, &mut rng(4)).is_err());
}

#[test]
fn factor_weights_follow_residual_row_norms() {
    let mut g = rng(5);
    let x = uniform(4, 6, 0.0, 1.0, &mut g);
    let pair = FactorPair::new(uniform(6, 2, 0.0, 1.0, &mut g), uniform(6, 2, 0.0, 1.0, &mut g)).unwrap();
    let weights = update_g(&x, &pair, 1e-8).unwrap();
    // Ψ = Xᵀ − V Wᵀ Xᵀ computed independently.
    let psi = x.transpose() - &pair.v * pair.w.transpose() * x.transpose();
    assert!(max_diff(&psi, &factorization_residual(&x, &pair)) < 1e-12);
    for (w, row) in weights.as_slice().iter().zip(psi.row_iter()) {
        assert!((w - 1.0 / (2.0 * row.norm())).abs() < 1e-9 * w);
    }
}

#[test]
fn signed_data_keeps_factors_bounded() {
    // Centered features give a kernel with negative entries.
    let mut x = uniform(6, 14, -1.0, 1.0, &mut rng(9));
    let mean = x.column_mean();
    for mut col in x.column_iter_mut() {
        col -= &mean;
    }
    let start = FactorPair::random(14, 3, &mut rng(10));
    let (pair, history) = fit_cf(&x, 3, 300, 0.0, &mut rng(10)).unwrap();
    assert!(pair.w.iter().chain(pair.v.iter()).all(|&v| v >= 0.0 && v.is_finite()));
    assert!(history.last().unwrap() < &rfdl_core::factorize::cf_objective(&x, &start));
}
