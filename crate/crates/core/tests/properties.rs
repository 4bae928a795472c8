//! Property tests for the pathwise-calculus and generation invariants.

#![allow(clippy::needless_range_loop)]

use proptest::prelude::*;
use sptsim_core::*;

fn simplex_point(d: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.01f64..1.0, d).prop_map(|raw| {
        let total: f64 = raw.iter().sum();
        raw.into_iter().map(|v| v / total).collect()
    })
}

fn weight_path(d: usize, len: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(simplex_point(d), len)
}

fn as_market_path(weights: Vec<Vec<f64>>) -> MarketPath {
    let grid = TimeGrid::uniform(1.0, weights.len() - 1).unwrap();
    MarketPath::from_weights(grid, weights).unwrap()
}

proptest! {
    #[test]
    fn gains_integral_ignores_per_time_scalar_shifts(
        weights in weight_path(3, 12),
        theta in prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 3), 12),
        shifts in prop::collection::vec(-5.0f64..5.0, 12),
    ) {
        let base = left_riemann_integral(&theta, &weights).unwrap();
        let shifted: Vec<Vec<f64>> = theta
            .iter()
            .zip(&shifts)
            .map(|(row, s)| row.iter().map(|v| v + s).collect())
            .collect();
        let moved = left_riemann_integral(&shifted, &weights).unwrap();
        for (a, b) in base.iter().zip(&moved) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn bracket_is_nonnegative_nondecreasing_and_polarizes(
        x in prop::collection::vec(-2.0f64..2.0, 2..40),
        y_seed in prop::collection::vec(-2.0f64..2.0, 40),
    ) {
        let y: Vec<f64> = y_seed.iter().take(x.len()).copied().collect();
        let xx = quadratic_covariation(&x, &x).unwrap();
        for w in xx.windows(2) {
            prop_assert!(w[1] >= w[0]);
        }
        prop_assert!(xx.iter().all(|&v| v >= 0.0));

        let sum: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a + b).collect();
        let xy = quadratic_covariation(&x, &y).unwrap();
        let yy = quadratic_covariation(&y, &y).unwrap();
        let ss = quadratic_covariation(&sum, &sum).unwrap();
        for m in 0..x.len() {
            prop_assert!((xy[m] - (ss[m] - xx[m] - yy[m]) / 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn local_time_starts_at_zero_and_never_decreases(
        x in prop::collection::vec(-1.0f64..1.0, 2..50),
        level in -0.5f64..0.5,
    ) {
        let lt = local_time(&x, level);
        prop_assert_eq!(lt.values[0], 0.0);
        for w in lt.values.windows(2) {
            prop_assert!(w[1] >= w[0]);
        }
    }

    #[test]
    fn ranking_sorts_and_inverts(x in simplex_point(5)) {
        let (ranked, perm, counts) = rank_point(&x);
        for w in ranked.windows(2) {
            prop_assert!(w[0] >= w[1]);
        }
        let mut recovered = vec![0.0; x.len()];
        for (l, &i) in perm.iter().enumerate() {
            recovered[i] = ranked[l];
        }
        prop_assert_eq!(recovered, x.clone());
        // counts are consistent: each rank's count equals the number of
        // components matching its value
        for l in 0..x.len() {
            let n = x.iter().filter(|&&v| v == ranked[l]).count();
            prop_assert_eq!(counts[l], n);
        }
    }

    #[test]
    fn market_weights_lie_on_the_simplex_and_scale_out(
        caps in prop::collection::vec(prop::collection::vec(0.1f64..10.0, 4), 1..10),
        lambda in 0.1f64..50.0,
    ) {
        let w = to_market_weights(&caps).unwrap();
        for row in &w {
            let total: f64 = row.iter().sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
            prop_assert!(row.iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
        let scaled: Vec<Vec<f64>> = caps
            .iter()
            .map(|row| row.iter().map(|v| v * lambda).collect())
            .collect();
        let ws = to_market_weights(&scaled).unwrap();
        for (a, b) in w.iter().zip(&ws) {
            for (u, v) in a.iter().zip(b) {
                prop_assert!((u - v).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn euler_identity_for_rank_and_geometric_generators(x in simplex_point(4)) {
        for g in [
            Generator::large_cap(1).unwrap(),
            Generator::large_cap(3).unwrap(),
            Generator::small_cap(2).unwrap(),
            Generator::geometric_mean(),
        ] {
            let grad = g.gradient(&x);
            let pairing: f64 = grad.iter().zip(&x).map(|(a, b)| a * b).sum();
            prop_assert!((pairing - g.value(&x)).abs() < 1e-12);
        }
    }

    #[test]
    fn additive_identities_hold_on_random_paths(weights in weight_path(3, 8)) {
        let path = as_market_path(weights);
        for g in [Generator::entropy(), Generator::quadratic(2.0).unwrap(), Generator::gini()] {
            let s = additive_generate(&g, &path).unwrap();
            let gains = left_riemann_integral(&s.series.holdings, path.weights()).unwrap();
            for n in 0..path.len() {
                let mu = path.weights_at(n);
                let v: f64 = s.series.holdings[n].iter().zip(mu).map(|(h, m)| h * m).sum();
                prop_assert!((v - s.series.value[n]).abs() < 1e-12);
                prop_assert!((s.series.value[n] - s.series.value[0] - gains[n]).abs() < 1e-12);
                let decomposition = g.value(mu) + s.gamma.values[n];
                prop_assert!((s.series.value[n] - decomposition).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn gamma_is_linear_under_affine_rescaling(
        weights in weight_path(2, 8),
        c in 0.5f64..4.0,
    ) {
        let path = as_market_path(weights);
        let g = Generator::entropy();
        let base = gamma_by_definition(&g, &path).unwrap();
        let shifted = gamma_by_definition(&g.clone().shifted(c).unwrap(), &path).unwrap();
        for (a, b) in base.values.iter().zip(&shifted.values) {
            prop_assert!((b - a / (1.0 + c)).abs() < 1e-12);
        }
    }

    #[test]
    fn portfolio_weights_sum_to_one_when_value_is_positive(weights in weight_path(3, 6)) {
        let path = as_market_path(weights);
        let s = additive_generate(&Generator::entropy(), &path).unwrap();
        if s.series.value.iter().all(|&v| v != 0.0) {
            let pw = portfolio_weights(&s.series, &path).unwrap();
            for row in pw.weights {
                let total: f64 = row.iter().sum();
                prop_assert!((total - 1.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn normalized_generators_start_at_one(x in simplex_point(3)) {
        for g in [Generator::entropy(), Generator::quadratic(3.0).unwrap(), Generator::gini()] {
            let normalized = normalize(g, &x).unwrap();
            prop_assert!((normalized.value(&x) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn long_only_additive_holdings_for_nonnegative_concave_builtins(
        weights in weight_path(3, 10),
    ) {
        let path = as_market_path(weights);
        for g in [
            Generator::entropy(),
            Generator::quadratic(1.0).unwrap(),
            Generator::gini(),
            Generator::small_cap(1).unwrap(),
            Generator::geometric_mean(),
        ] {
            let s = additive_generate(&g, &path).unwrap();
            for row in &s.series.holdings {
                for &h in row {
                    prop_assert!(h >= -1e-12, "{} went short: {h}", g.kind_name());
                }
            }
        }
    }
}
