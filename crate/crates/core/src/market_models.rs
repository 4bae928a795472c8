//! Market path generators: parametric stochastic models plus a deterministic
//! finite-variation counterexample path.
//!
//! Every stochastic model draws from a dedicated ChaCha stream selected by
//! `(seed, path_index)`, so ensemble members are independent, reproducible,
//! and independent of evaluation order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::path_core::{normalize_caps, MarketPath, TimeGrid};

/// Which market model to simulate.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    /// Independent geometric Brownian capitalizations (exact log scheme).
    Gbm(GbmParams),
    /// d = 2 with `dμ = μ(1−μ) dW`: the weight itself is a `[0,1]`-valued
    /// martingale, so the constant deflator works.
    TwoAssetMartingale(TwoAssetMartingaleParams),
    /// Rank-based drift: the currently smallest stock receives the whole
    /// drift, everyone shares one volatility.
    RankAtlas(RankAtlasParams),
    /// d = 2 with `μ_1 = B/2`, `B` a Brownian motion started at 1 and stopped
    /// on hitting {0, 2}; weights absorb exactly at the simplex boundary.
    AbsorbedBrownianPair(AbsorbedBrownianPairParams),
    /// Deterministic piecewise-linear oscillator of finite variation whose
    /// square root has infinite variation; scalar, not simulable as a market
    /// path (it starts on the simplex boundary).  Use [`oscillator_path`].
    OscillatorCounterexample(OscillatorParams),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GbmParams {
    pub initial_caps: Vec<f64>,
    pub drifts: Vec<f64>,
    pub volatilities: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwoAssetMartingaleParams {
    /// μ_1(0), strictly inside (0, 1).
    pub initial_weight: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RankAtlasParams {
    pub initial_caps: Vec<f64>,
    /// Log-drift granted to the smallest stock.
    pub atlas_drift: f64,
    pub volatility: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AbsorbedBrownianPairParams {}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OscillatorParams {
    pub n_max: usize,
}

impl ModelSpec {
    /// Number of assets this model produces.
    pub fn dim(&self) -> usize {
        match self {
            ModelSpec::Gbm(p) => p.initial_caps.len(),
            ModelSpec::RankAtlas(p) => p.initial_caps.len(),
            ModelSpec::TwoAssetMartingale(_)
            | ModelSpec::AbsorbedBrownianPair(_)
            | ModelSpec::OscillatorCounterexample(_) => 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ModelSpec::Gbm(p) => {
                check_initial_caps(&p.initial_caps)?;
                if p.drifts.len() != p.initial_caps.len()
                    || p.volatilities.len() != p.initial_caps.len()
                {
                    return Err(CoreError::InvalidParameter(
                        "drifts and volatilities must match the number of assets".into(),
                    ));
                }
                if p.volatilities.iter().any(|&v| v < 0.0 || !v.is_finite()) {
                    return Err(CoreError::InvalidParameter(
                        "volatilities must be nonnegative".into(),
                    ));
                }
                Ok(())
            }
            ModelSpec::TwoAssetMartingale(p) => {
                if !(p.initial_weight > 0.0 && p.initial_weight < 1.0) {
                    return Err(CoreError::InvalidParameter(format!(
                        "initial weight must lie in (0,1), got {}",
                        p.initial_weight
                    )));
                }
                Ok(())
            }
            ModelSpec::RankAtlas(p) => {
                check_initial_caps(&p.initial_caps)?;
                if !(p.volatility >= 0.0) {
                    return Err(CoreError::InvalidParameter(
                        "volatility must be nonnegative".into(),
                    ));
                }
                if !p.atlas_drift.is_finite() {
                    return Err(CoreError::InvalidParameter("drift must be finite".into()));
                }
                Ok(())
            }
            ModelSpec::AbsorbedBrownianPair(_) => Ok(()),
            ModelSpec::OscillatorCounterexample(p) => {
                if p.n_max < 1 {
                    return Err(CoreError::InvalidParameter(
                        "oscillator needs n_max >= 1".into(),
                    ));
                }
                Ok(())
            }
        }
    }
}

fn check_initial_caps(caps: &[f64]) -> Result<()> {
    if caps.len() < 2 {
        return Err(CoreError::InvalidParameter(format!(
            "need at least two assets, got {}",
            caps.len()
        )));
    }
    if caps.iter().any(|&c| !(c > 0.0) || !c.is_finite()) {
        return Err(CoreError::InvalidParameter(
            "initial capitalizations must be strictly positive".into(),
        ));
    }
    Ok(())
}

/// Simulation controls: uniform grid, base seed, ensemble size.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub horizon: f64,
    pub steps: usize,
    pub seed: u64,
    pub ensemble_size: usize,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.horizon > 0.0) {
            return Err(CoreError::InvalidParameter(format!(
                "horizon must be positive, got {}",
                self.horizon
            )));
        }
        if self.steps < 1 {
            return Err(CoreError::InvalidParameter("steps must be >= 1".into()));
        }
        if self.ensemble_size < 1 {
            return Err(CoreError::InvalidParameter(
                "ensemble size must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

fn path_rng(seed: u64, path_index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path_index as u64);
    rng
}

/// Simulate one ensemble member.  Identical `(spec, config, path_index)`
/// always produce the bit-identical path.
pub fn simulate(spec: &ModelSpec, config: &SimConfig, path_index: usize) -> Result<MarketPath> {
    spec.validate()?;
    config.validate()?;
    if path_index >= config.ensemble_size {
        return Err(CoreError::PathIndexOutOfRange {
            index: path_index,
            size: config.ensemble_size,
        });
    }
    let grid = TimeGrid::uniform(config.horizon, config.steps)?;
    let dt = config.horizon / config.steps as f64;
    let sq_dt = dt.sqrt();
    let mut rng = path_rng(config.seed, path_index);

    let caps = match spec {
        ModelSpec::Gbm(p) => {
            let d = p.initial_caps.len();
            let mut caps = Vec::with_capacity(config.steps + 1);
            caps.push(p.initial_caps.clone());
            let mut log_s: Vec<f64> = p.initial_caps.iter().map(|c| c.ln()).collect();
            for _ in 0..config.steps {
                for i in 0..d {
                    let z: f64 = rng.sample(StandardNormal);
                    log_s[i] +=
                        (p.drifts[i] - 0.5 * p.volatilities[i] * p.volatilities[i]) * dt
                            + p.volatilities[i] * sq_dt * z;
                }
                caps.push(log_s.iter().map(|l| l.exp()).collect());
            }
            caps
        }
        ModelSpec::TwoAssetMartingale(p) => {
            let mut caps = Vec::with_capacity(config.steps + 1);
            let mut x = p.initial_weight;
            caps.push(vec![x, 1.0 - x]);
            for _ in 0..config.steps {
                let z: f64 = rng.sample(StandardNormal);
                // full truncation: diffusion coefficient read off the clamped state
                let xc = x.clamp(0.0, 1.0);
                x = (x + xc * (1.0 - xc) * sq_dt * z).clamp(0.0, 1.0);
                caps.push(vec![x, 1.0 - x]);
            }
            caps
        }
        ModelSpec::RankAtlas(p) => {
            let mut caps = Vec::with_capacity(config.steps + 1);
            caps.push(p.initial_caps.clone());
            let mut log_s: Vec<f64> = p.initial_caps.iter().map(|c| c.ln()).collect();
            for _ in 0..config.steps {
                let laggard = log_s
                    .iter()
                    .enumerate()
                    .min_by(|(_, a), (_, b)| a.total_cmp(b))
                    .map(|(i, _)| i)
                    .unwrap();
                for (i, l) in log_s.iter_mut().enumerate() {
                    let z: f64 = rng.sample(StandardNormal);
                    let drift = if i == laggard { p.atlas_drift } else { 0.0 };
                    *l += drift * dt + p.volatility * sq_dt * z;
                }
                caps.push(log_s.iter().map(|l| l.exp()).collect());
            }
            caps
        }
        ModelSpec::AbsorbedBrownianPair(_) => {
            let mut caps = Vec::with_capacity(config.steps + 1);
            let mut b = 1.0_f64;
            caps.push(vec![b / 2.0, 1.0 - b / 2.0]);
            for _ in 0..config.steps {
                if b > 0.0 && b < 2.0 {
                    let z: f64 = rng.sample(StandardNormal);
                    b = (b + sq_dt * z).clamp(0.0, 2.0);
                }
                caps.push(vec![b / 2.0, 1.0 - b / 2.0]);
            }
            caps
        }
        ModelSpec::OscillatorCounterexample(_) => {
            return Err(CoreError::Unsupported(
                "the oscillator starts on the simplex boundary and is not a market path; \
                 use oscillator_path"
                    .into(),
            ));
        }
    };
    MarketPath::from_caps(grid, caps)
}

/// Simulate the full ensemble, in parallel, in index order.
pub fn simulate_ensemble(spec: &ModelSpec, config: &SimConfig) -> Result<Vec<MarketPath>> {
    (0..config.ensemble_size)
        .into_par_iter()
        .map(|i| simulate(spec, config, i))
        .collect()
}

/// Smallest odd integer in `[√n, 3√n)`, the number of oscillation legs on
/// the n-th interval of the counterexample path.
pub fn oscillation_count(n: usize) -> usize {
    let mut a = 1usize;
    while a * a < n {
        a += 2;
    }
    a
}

/// Deterministic continuous piecewise-linear path on [0, 1): `X(1−1/n) = 1/n`
/// with exactly `a_n` linear oscillations between `1/n` and `1/(n+1)` on
/// `[1−1/n, 1−1/(n+1)]`, sampled at every oscillation extremum.
///
/// Its total variation is `Σ_n a_n (1/n − 1/(n+1))`, a convergent series,
/// while the variation of `√X` grows like `½ log n_max` without bound.
pub fn oscillator_path(n_max: usize) -> Result<(TimeGrid, Vec<f64>)> {
    if n_max < 1 {
        return Err(CoreError::InvalidParameter(
            "oscillator needs n_max >= 1".into(),
        ));
    }
    let mut times = vec![0.0];
    let mut values = vec![1.0];
    for n in 1..=n_max {
        let legs = oscillation_count(n);
        let hi = 1.0 / n as f64;
        let lo = 1.0 / (n + 1) as f64;
        let t_left = 1.0 - hi;
        let t_right = 1.0 - lo;
        let leg_dt = (t_right - t_left) / legs as f64;
        for j in 1..=legs {
            let t = if j == legs {
                t_right
            } else {
                t_left + leg_dt * j as f64
            };
            times.push(t);
            // legs alternate: odd legs land on the lower level
            values.push(if j % 2 == 1 { lo } else { hi });
        }
    }
    Ok((TimeGrid::from_times(times)?, values))
}

/// Componentwise normalization `μ_i(t) = S_i(t)/Σ_j S_j(t)`.
pub fn to_market_weights(caps: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    caps.iter().map(|s| normalize_caps(s)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gbm_spec(d: usize) -> ModelSpec {
        ModelSpec::Gbm(GbmParams {
            initial_caps: (0..d).map(|i| 1.0 + i as f64).collect(),
            drifts: vec![0.0; d],
            volatilities: vec![0.2; d],
        })
    }

    fn config(steps: usize, seed: u64, ensemble: usize) -> SimConfig {
        SimConfig {
            horizon: 1.0,
            steps,
            seed,
            ensemble_size: ensemble,
        }
    }

    #[test]
    fn gbm_zero_volatility_keeps_weights_constant() {
        let spec = ModelSpec::Gbm(GbmParams {
            initial_caps: vec![2.0, 1.0, 1.0],
            drifts: vec![0.05; 3],
            volatilities: vec![0.0; 3],
        });
        let path = simulate(&spec, &config(32, 1, 1), 0).unwrap();
        for n in 0..path.len() {
            for i in 0..3 {
                assert!((path.weights_at(n)[i] - path.weights_at(0)[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn gbm_caps_stay_positive() {
        let path = simulate(&gbm_spec(3), &config(256, 7, 1), 0).unwrap();
        for caps in path.caps() {
            assert!(caps.iter().all(|&c| c > 0.0));
        }
    }

    #[test]
    fn simulation_is_deterministic_per_stream() {
        let spec = gbm_spec(2);
        let cfg = config(64, 42, 3);
        let a = simulate(&spec, &cfg, 1).unwrap();
        let b = simulate(&spec, &cfg, 1).unwrap();
        assert_eq!(a.caps(), b.caps());
        let c = simulate(&spec, &cfg, 2).unwrap();
        assert_ne!(a.caps(), c.caps());

        // ensemble members match individually simulated paths
        let all = simulate_ensemble(&spec, &cfg).unwrap();
        assert_eq!(all[1].caps(), a.caps());
    }

    #[test]
    fn path_index_must_be_in_ensemble() {
        let err = simulate(&gbm_spec(2), &config(8, 0, 2), 2).unwrap_err();
        assert!(matches!(err, CoreError::PathIndexOutOfRange { .. }));
    }

    #[test]
    fn two_asset_martingale_stays_in_unit_interval() {
        let spec = ModelSpec::TwoAssetMartingale(TwoAssetMartingaleParams {
            initial_weight: 0.5,
        });
        for idx in 0..8 {
            let path = simulate(&spec, &config(512, 11, 8), idx).unwrap();
            for w in path.weights() {
                assert!(w[0] >= 0.0 && w[0] <= 1.0);
                assert!((w[0] + w[1] - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn two_asset_martingale_mean_preserved() {
        // martingale property: ensemble mean of μ_1(T) stays near μ_1(0)
        let spec = ModelSpec::TwoAssetMartingale(TwoAssetMartingaleParams {
            initial_weight: 0.5,
        });
        let cfg = SimConfig {
            horizon: 1.0,
            steps: 128,
            seed: 2024,
            ensemble_size: 10_000,
        };
        let paths = simulate_ensemble(&spec, &cfg).unwrap();
        let finals: Vec<f64> = paths
            .iter()
            .map(|p| p.weights_at(p.len() - 1)[0])
            .collect();
        let mean = finals.iter().sum::<f64>() / finals.len() as f64;
        let var = finals.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / finals.len() as f64;
        let se = (var / finals.len() as f64).sqrt();
        assert!(
            (mean - 0.5).abs() <= 3.0 * se,
            "mean {mean} departs from 0.5 by more than 3 SE ({se})"
        );
    }

    #[test]
    fn absorbed_pair_freezes_after_absorption_and_fraction_grows() {
        let spec = ModelSpec::AbsorbedBrownianPair(AbsorbedBrownianPairParams {});
        let mut absorbed = [0usize; 2];
        for (slot, horizon) in [(0usize, 0.25), (1usize, 4.0)] {
            let cfg = SimConfig {
                horizon,
                steps: 512,
                seed: 5,
                ensemble_size: 400,
            };
            for idx in 0..cfg.ensemble_size {
                let path = simulate(&spec, &cfg, idx).unwrap();
                let mut frozen_from = None;
                for (n, w) in path.weights().iter().enumerate() {
                    if w[0] == 0.0 || w[0] == 1.0 {
                        frozen_from = Some(n);
                        break;
                    }
                }
                if let Some(n0) = frozen_from {
                    absorbed[slot] += 1;
                    let v = path.weights_at(n0)[0];
                    for n in n0..path.len() {
                        assert_eq!(path.weights_at(n)[0], v, "weights must stay absorbed");
                    }
                }
            }
        }
        assert!(
            absorbed[1] > absorbed[0],
            "absorption count should grow with the horizon ({absorbed:?})"
        );
    }

    #[test]
    fn oscillation_counts_match_definition() {
        assert_eq!(oscillation_count(1), 1);
        assert_eq!(oscillation_count(2), 3);
        assert_eq!(oscillation_count(4), 3);
        assert_eq!(oscillation_count(9), 3);
        assert_eq!(oscillation_count(10), 5);
        for n in 1..200 {
            let a = oscillation_count(n) as f64;
            let s = (n as f64).sqrt();
            assert!(a >= s && a < 3.0 * s && oscillation_count(n) % 2 == 1);
        }
    }

    #[test]
    fn oscillator_hits_knot_points() {
        let (grid, x) = oscillator_path(20).unwrap();
        for n in 1..=20usize {
            let t = 1.0 - 1.0 / n as f64;
            let idx = grid
                .times()
                .iter()
                .position(|&s| (s - t).abs() < 1e-12)
                .unwrap_or_else(|| panic!("knot 1-1/{n} missing"));
            assert!((x[idx] - 1.0 / n as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn oscillator_variation_respects_series_bound() {
        let n_max = 1000;
        let (_, x) = oscillator_path(n_max).unwrap();
        let tv = crate::path_core::total_variation(&x);
        let bound: f64 = (1..=n_max)
            .map(|n| 3.0 * (n as f64).sqrt() / ((n * n + n) as f64))
            .sum();
        assert!(tv <= bound, "variation {tv} exceeds series bound {bound}");
    }

    #[test]
    fn weights_from_caps() {
        let w = to_market_weights(&[vec![1.0, 1.0], vec![3.0, 1.0]]).unwrap();
        assert_eq!(w[0], vec![0.5, 0.5]);
        assert_eq!(w[1], vec![0.75, 0.25]);

        // positive scaling leaves weights unchanged
        let scaled = to_market_weights(&[vec![7.0, 7.0], vec![21.0, 7.0]]).unwrap();
        assert_eq!(w, scaled);

        assert!(to_market_weights(&[vec![0.0, 0.0]]).is_err());
    }

    #[test]
    fn spec_validation_rejects_bad_parameters() {
        assert!(ModelSpec::Gbm(GbmParams {
            initial_caps: vec![1.0, -1.0],
            drifts: vec![0.0; 2],
            volatilities: vec![0.1; 2],
        })
        .validate()
        .is_err());
        assert!(ModelSpec::TwoAssetMartingale(TwoAssetMartingaleParams {
            initial_weight: 1.0
        })
        .validate()
        .is_err());
        assert!(simulate(
            &ModelSpec::OscillatorCounterexample(OscillatorParams { n_max: 10 }),
            &config(8, 0, 1),
            0
        )
        .is_err());
    }
}
