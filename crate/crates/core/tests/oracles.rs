use approx::{assert_abs_diff_eq, assert_relative_eq};
use constmoran_core::graph::{build_grid_queen, row_normalize};
use constmoran_core::moran::{moran_i, LagState};
use constmoran_core::resample::{generate_ensemble, greedy_match, permuted};
use constmoran_core::rng::rng_from;
use constmoran_core::stats::naive_t_pvalue;
use constmoran_core::summary::mean_sd;
use constmoran_core::synth::{generate_field, moran_beta_curve, SynthConfig};
use constmoran_core::{Field, ResampleConfig};
use rand::Rng;

/// Two-sided Student-t tail by Simpson quadrature of the density on [0, t].
fn t_tail_by_quadrature(t: f64, df: f64) -> f64 {
    let log_c = libm::lgamma((df + 1.0) / 2.0) - libm::lgamma(df / 2.0) - 0.5 * (df * std::f64::consts::PI).ln();
    let density = |s: f64| (log_c - (df + 1.0) / 2.0 * (1.0 + s * s / df).ln()).exp();
    let steps = 20_000;
    let h = t / steps as f64;
    let mut acc = density(0.0) + density(t);
    for k in 1..steps {
        acc += density(k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    1.0 - 2.0 * acc * h / 3.0
}

#[test]
fn t_test_matches_quadrature() {
    for (r, n) in [(0.5, 20), (0.1, 86), (0.493, 86), (-0.8, 10)] {
        let df = (n - 2) as f64;
        let t: f64 = r * (df / (1.0 - r * r)).sqrt();
        let expected = t_tail_by_quadrature(t.abs(), df);
        assert_abs_diff_eq!(naive_t_pvalue(r, n).unwrap(), expected, epsilon = 1e-8);
    }
}

#[test]
fn permutation_null_mean_is_minus_one_over_n_minus_one() {
    let w = row_normalize(&build_grid_queen(10, 10).unwrap()).unwrap();
    let base: Vec<f64> = (0..100).map(|i| ((i * 37) % 101) as f64).collect();
    let mut rng = rng_from(11);
    let draws: Vec<f64> = (0..4000)
        .map(|_| moran_i(&Field::new(permuted(&base, &mut rng)).unwrap(), &w).unwrap())
        .collect();
    let (mean, sd) = mean_sd(&draws);
    let se = sd / (draws.len() as f64).sqrt();
    assert!((mean + 1.0 / 99.0).abs() <= 3.0 * se, "mean {mean}, se {se}");
}

#[test]
fn thousand_swaps_track_scratch_state() {
    let w = row_normalize(&build_grid_queen(12, 12).unwrap()).unwrap();
    let field = generate_field(&SynthConfig::new(12, 12, 1.0, 5)).unwrap();
    let mut values = field.values().to_vec();
    let mut state = LagState::new(&field, &w).unwrap();
    let mut rng = rng_from(3);
    for _ in 0..1000 {
        let a = rng.random_range(0..144);
        let b = rng.random_range(0..144);
        if a == b {
            continue;
        }
        state.apply_swap(&w, a, b).unwrap();
        values.swap(a, b);
    }
    let scratch = LagState::new(&Field::new(values.clone()).unwrap(), &w).unwrap();
    assert_abs_diff_eq!(state.moran(), scratch.moran(), epsilon = 1e-9);
    assert_abs_diff_eq!(state.moran(), moran_i(&Field::new(values).unwrap(), &w).unwrap(), epsilon = 1e-9);
    for (a, b) in state.lag_left(&w).iter().zip(scratch.lag_left(&w)) {
        assert_abs_diff_eq!(*a, b, epsilon = 1e-9);
    }
    assert!(state.lag_drift(&w) <= 1e-9);
}

#[test]
fn replacements_track_scratch_state() {
    let w = row_normalize(&build_grid_queen(9, 9).unwrap()).unwrap();
    let field = generate_field(&SynthConfig::new(9, 9, 0.5, 8)).unwrap();
    let pool = field.values().to_vec();
    let mut values = pool.clone();
    let mut state = LagState::new(&field, &w).unwrap();
    let mut rng = rng_from(4);
    for _ in 0..1000 {
        let a = rng.random_range(0..81);
        let v = pool[rng.random_range(0..81)];
        if state.apply_replace(&w, a, v).is_ok() {
            values[a] = v;
        }
    }
    assert_abs_diff_eq!(state.moran(), moran_i(&Field::new(values).unwrap(), &w).unwrap(), epsilon = 1e-9);
    assert!(state.lag_drift(&w) <= 1e-9);
}

#[test]
fn ensemble_converges_and_is_reproducible() {
    let w = row_normalize(&build_grid_queen(20, 20).unwrap()).unwrap();
    let field = generate_field(&SynthConfig::new(20, 20, 1.5, 21)).unwrap();
    let target = moran_i(&field, &w).unwrap();
    let config = ResampleConfig { seed: 9, ..ResampleConfig::default() };
    let a = generate_ensemble(&field, &w, 8, &config).unwrap();
    let b = generate_ensemble(&field, &w, 8, &config).unwrap();
    assert_eq!(a, b);
    for out in &a {
        assert!(out.converged);
        let recomputed = moran_i(&out.values, &w).unwrap();
        assert!((recomputed - target).abs() <= config.epsilon);
        assert_relative_eq!(recomputed, out.achieved_i, epsilon = 1e-12);
    }
}

#[test]
fn prefreeze_approaches_from_above() {
    let w = row_normalize(&build_grid_queen(20, 20).unwrap()).unwrap();
    let field = generate_field(&SynthConfig::new(20, 20, 1.0, 2)).unwrap();
    let target = moran_i(&field, &w).unwrap();
    let with = greedy_match(&field, &w, target, &ResampleConfig::default()).unwrap();
    let without = greedy_match(&field, &w, target, &ResampleConfig { prefreeze: false, ..Default::default() }).unwrap();
    assert!(with.prefreeze_proposals > 0);
    assert_eq!(without.prefreeze_proposals, 0);
    assert!(with.converged && without.converged);
    assert!(with.achieved_i >= target - 1e-3 && with.achieved_i <= target + 1e-3);
}

#[test]
fn small_beta_curve_increases() {
    let rows = moran_beta_curve(&[0.0, 1.0, 2.0], 40, 16, 16, 1).unwrap();
    assert!(rows.windows(2).all(|p| p[0].moran.mean < p[1].moran.mean));
    assert!(rows[0].moran.mean.abs() < 0.05);
}
