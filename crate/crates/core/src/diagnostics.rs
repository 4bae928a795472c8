//! Outperformance certification, the multiplicative shift-constant search,
//! Monte Carlo supermartingale checks, Γ-uniqueness probes, and the
//! finite-variation counterexample reports.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::generators::{gamma_by_definition, gamma_with_gradient, Generator};
use crate::market_models::{
    oscillation_count, oscillator_path, simulate_ensemble, ModelSpec, SimConfig,
};
use crate::path_core::{quadratic_covariation, total_variation, MarketPath};
use crate::strategies::{additive_generate, multiplicative_generate, StrategyMode};

/// Relative slack allowed when comparing the realized multiplicative value
/// against the theorem's lower bound; absorbs the O(Δt) master-equation
/// discretization error.
pub const MASTER_EQUATION_TOLERANCE: f64 = 0.02;

/// Per-path outcome of an outperformance check.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PathOutperformance {
    pub path_index: usize,
    /// Γ of the normalized generating function at the activation horizon.
    pub gamma_at_t_star: f64,
    /// Sufficient condition Γ(T*) > 1 (additive) or Γ(T*) > 1+ε (multiplicative).
    pub condition_met: bool,
    /// Whenever the condition holds, the value comparison it promises was
    /// verified on this path.
    pub certified: bool,
    pub initial_value: f64,
    pub value_at_t_star: f64,
    pub min_value: f64,
    pub min_value_from_t_star: f64,
    pub final_value: f64,
}

/// Ensemble-level outperformance summary.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OutperformanceReport {
    pub mode: StrategyMode,
    pub t_star: f64,
    pub t_star_index: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shift_c: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value_bound: Option<f64>,
    pub n_paths: usize,
    pub n_condition_met: usize,
    pub n_certified: usize,
    pub fraction_final_above_one: f64,
    pub paths: Vec<PathOutperformance>,
}

fn check_normalized(g: &Generator, mu0: &[f64]) -> Result<()> {
    let v = g.value(mu0);
    if (v - 1.0).abs() > 1e-9 {
        return Err(CoreError::NotNormalized(v));
    }
    Ok(())
}

fn t_star_index(paths: &[MarketPath], t_star: f64) -> Result<usize> {
    let grid = paths[0].grid();
    grid.index_at_or_after(t_star)
        .ok_or_else(|| CoreError::InvalidParameter(format!(
            "t_star {t_star} lies beyond the horizon {}",
            grid.horizon()
        )))
}

/// Additive outperformance: on every path where Γ(T*) > 1, the strategy value
/// `V = G + Γ` must exceed one at every grid time from T* on (an exact
/// consequence of G ≥ 0 and the nonnegative Γ increments of a concave
/// generator).  Requires the generator normalized to G(μ(0)) = 1.
pub fn check_additive_outperformance(
    g: &Generator,
    paths: &[MarketPath],
    t_star: f64,
) -> Result<OutperformanceReport> {
    if paths.is_empty() {
        return Err(CoreError::InvalidParameter("empty ensemble".into()));
    }
    check_normalized(g, paths[0].weights_at(0))?;
    let idx = t_star_index(paths, t_star)?;

    let rows: Vec<PathOutperformance> = paths
        .par_iter()
        .enumerate()
        .map(|(p, path)| -> Result<PathOutperformance> {
            let s = additive_generate(g, path)?;
            let v = &s.series.value;
            let gamma_star = s.gamma.values[idx];
            let condition = gamma_star > 1.0;
            let min_all = v.iter().copied().fold(f64::INFINITY, f64::min);
            let min_from = v[idx..].iter().copied().fold(f64::INFINITY, f64::min);
            let certified = condition && min_from > 1.0 && min_all >= -1e-12;
            Ok(PathOutperformance {
                path_index: p,
                gamma_at_t_star: gamma_star,
                condition_met: condition,
                certified,
                initial_value: v[0],
                value_at_t_star: v[idx],
                min_value: min_all,
                min_value_from_t_star: min_from,
                final_value: *v.last().unwrap(),
            })
        })
        .collect::<Result<_>>()?;

    Ok(summarize(rows, StrategyMode::Additive, t_star, idx, None, None, None))
}

fn summarize(
    paths: Vec<PathOutperformance>,
    mode: StrategyMode,
    t_star: f64,
    t_star_index: usize,
    epsilon: Option<f64>,
    shift_c: Option<f64>,
    value_bound: Option<f64>,
) -> OutperformanceReport {
    let n_paths = paths.len();
    let n_condition_met = paths.iter().filter(|r| r.condition_met).count();
    let n_certified = paths.iter().filter(|r| r.certified).count();
    let above = paths.iter().filter(|r| r.final_value > 1.0).count();
    OutperformanceReport {
        mode,
        t_star,
        t_star_index,
        epsilon,
        shift_c,
        value_bound,
        n_paths,
        n_condition_met,
        n_certified,
        fraction_final_above_one: above as f64 / n_paths as f64,
        paths,
    }
}

/// Left-hand side of the shift-constant inequality,
/// `(c/(1+c)) · exp((1+ε)/(κ+c))`.
pub fn shift_bound(c: f64, kappa: f64, epsilon: f64) -> f64 {
    (c / (1.0 + c)) * ((1.0 + epsilon) / (kappa + c)).exp()
}

/// Smallest c (coarse 0.25-grid, then bisection to width 1e-6) with
/// `shift_bound(c, κ, ε) > 1`.  Such a c always exists for κ ≥ 0, ε > 0.
pub fn find_shift_c(kappa: f64, epsilon: f64) -> f64 {
    assert!(kappa >= 0.0 && epsilon > 0.0, "need kappa >= 0 and epsilon > 0");
    let step = 0.25;
    let mut hi = step;
    while shift_bound(hi, kappa, epsilon) <= 1.0 {
        hi += step;
        assert!(hi < 1e9, "no shift constant found; inputs out of range");
    }
    let mut lo = (hi - step).max(0.0);
    if lo == 0.0 || shift_bound(lo, kappa, epsilon) > 1.0 {
        // the very first lattice point already passes
        lo = f64::MIN_POSITIVE;
    }
    while hi - lo > 1e-6 {
        let mid = 0.5 * (lo + hi);
        if shift_bound(mid, kappa, epsilon) > 1.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    debug_assert!(shift_bound(hi, kappa, epsilon) > 1.0);
    hi
}

/// Multiplicative outperformance through the shifted function
/// `G^(c) = (G+c)/(1+c)`: when Γ^G(T*) > 1+ε, the generated value at T* must
/// clear `(c/(1+c))·exp((1+ε)/(κ+c))` up to the master-equation tolerance.
///
/// κ is the closed-form supremum of G over the simplex when known, otherwise
/// the visited maximum across the ensemble times a 1.001 safety factor.
pub fn check_multiplicative_outperformance(
    g: &Generator,
    paths: &[MarketPath],
    t_star: f64,
    epsilon: f64,
) -> Result<OutperformanceReport> {
    if paths.is_empty() {
        return Err(CoreError::InvalidParameter("empty ensemble".into()));
    }
    if !(epsilon > 0.0) {
        return Err(CoreError::InvalidParameter(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    check_normalized(g, paths[0].weights_at(0))?;
    let idx = t_star_index(paths, t_star)?;
    let d = paths[0].dim();

    let kappa = match g.sup_bound(d) {
        Some(s) => s,
        None => {
            let visited = paths
                .iter()
                .flat_map(|p| p.weights().iter())
                .map(|w| g.value(w))
                .fold(f64::NEG_INFINITY, f64::max);
            visited * 1.001
        }
    };
    let c = find_shift_c(kappa, epsilon);
    let bound = shift_bound(c, kappa, epsilon);
    let g_shifted = g.clone().shifted(c)?;

    let rows: Vec<PathOutperformance> = paths
        .par_iter()
        .enumerate()
        .map(|(p, path)| -> Result<PathOutperformance> {
            let gamma = gamma_by_definition(g, path)?;
            let m = multiplicative_generate(&g_shifted, path)?;
            let v = &m.series.value;
            let gamma_star = gamma.values[idx];
            let condition = gamma_star > 1.0 + epsilon;
            let min_all = v.iter().copied().fold(f64::INFINITY, f64::min);
            let min_from = v[idx..].iter().copied().fold(f64::INFINITY, f64::min);
            let certified =
                condition && v[idx] > bound * (1.0 - MASTER_EQUATION_TOLERANCE) && min_all > 0.0;
            Ok(PathOutperformance {
                path_index: p,
                gamma_at_t_star: gamma_star,
                condition_met: condition,
                certified,
                initial_value: v[0],
                value_at_t_star: v[idx],
                min_value: min_all,
                min_value_from_t_star: min_from,
                final_value: *v.last().unwrap(),
            })
        })
        .collect::<Result<_>>()?;

    Ok(summarize(
        rows,
        StrategyMode::Multiplicative,
        t_star,
        idx,
        Some(epsilon),
        Some(c),
        Some(bound),
    ))
}

/// Horizon after which a sustained growth rate η of Γ guarantees strong
/// outperformance: `H(μ0)/η` for the entropy function,
/// `(1 − Σ μ0² − 2δ(1−δ))/η` for the quadratic family in a δ-diverse market.
pub fn horizon_bound(
    g: &Generator,
    mu0: &[f64],
    eta: f64,
    diversity: Option<f64>,
) -> Result<f64> {
    if !(eta > 0.0) {
        return Err(CoreError::InvalidParameter(format!(
            "eta must be positive, got {eta}"
        )));
    }
    if let Some(delta) = diversity {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(CoreError::InvalidParameter(format!(
                "diversity must lie in (0,1), got {delta}"
            )));
        }
    }
    match base_kind(g) {
        Generator::Entropy => {
            if diversity.is_some() {
                return Err(CoreError::Unsupported(
                    "diversity-improved bound exists only for the quadratic family".into(),
                ));
            }
            Ok(Generator::Entropy.value(mu0) / eta)
        }
        Generator::Quadratic { .. } => {
            let sum_sq: f64 = mu0.iter().map(|v| v * v).sum();
            let delta_term = diversity.map_or(0.0, |d| 2.0 * d * (1.0 - d));
            Ok((1.0 - delta_term - sum_sq) / eta)
        }
        other => Err(CoreError::Unsupported(format!(
            "no horizon bound for generator kind `{}`",
            other.kind_name()
        ))),
    }
}

fn base_kind(g: &Generator) -> &Generator {
    match g {
        Generator::Affine { base, .. } => base_kind(base),
        other => other,
    }
}

/// Monte Carlo estimate of `t ↦ E[G(μ(t))]` at a set of checkpoints.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SupermartingaleReport {
    pub checkpoint_times: Vec<f64>,
    pub means: Vec<f64>,
    pub standard_errors: Vec<f64>,
    /// Consecutive checkpoint means never rise by more than 3 paired SE.
    pub nonincreasing_within_band: bool,
    /// Consecutive checkpoint means never fall by more than 3 paired SE.
    pub nondecreasing_within_band: bool,
    pub n_paths: usize,
    pub steps: usize,
    pub seed: u64,
}

/// Estimate checkpoint means of `G(μ(t))` over a simulated ensemble and test
/// their monotonicity within a 3-standard-error band (paired differences).
/// On a weight-martingale model a Lyapunov function must come out
/// nonincreasing.
pub fn supermartingale_mc_test(
    g: &Generator,
    spec: &ModelSpec,
    config: &SimConfig,
    checkpoint_fractions: &[f64],
) -> Result<SupermartingaleReport> {
    if checkpoint_fractions.is_empty()
        || checkpoint_fractions
            .iter()
            .any(|&f| !(f > 0.0 && f <= 1.0))
    {
        return Err(CoreError::InvalidParameter(
            "checkpoint fractions must lie in (0, 1]".into(),
        ));
    }
    g.check_dim(spec.dim())?;
    let paths = simulate_ensemble(spec, config)?;
    let mut indices = vec![0usize];
    for &f in checkpoint_fractions {
        let idx = ((f * config.steps as f64).round() as usize).min(config.steps);
        if *indices.last().unwrap() < idx {
            indices.push(idx);
        }
    }

    let samples: Vec<Vec<f64>> = paths
        .par_iter()
        .map(|p| indices.iter().map(|&i| g.value(p.weights_at(i))).collect())
        .collect();

    let n = samples.len() as f64;
    let k = indices.len();
    let mut means = vec![0.0; k];
    for row in &samples {
        for (j, v) in row.iter().enumerate() {
            means[j] += v;
        }
    }
    for m in means.iter_mut() {
        *m /= n;
    }
    let mut ses = vec![0.0; k];
    for row in &samples {
        for (j, v) in row.iter().enumerate() {
            ses[j] += (v - means[j]).powi(2);
        }
    }
    for s in ses.iter_mut() {
        *s = (*s / (n - 1.0) / n).sqrt();
    }

    let mut nonincreasing = true;
    let mut nondecreasing = true;
    for j in 0..k - 1 {
        let diffs: Vec<f64> = samples.iter().map(|row| row[j + 1] - row[j]).collect();
        let mean_d = diffs.iter().sum::<f64>() / n;
        let var_d = diffs.iter().map(|v| (v - mean_d).powi(2)).sum::<f64>() / (n - 1.0);
        let se_d = (var_d / n).sqrt();
        if mean_d > 3.0 * se_d + 1e-12 {
            nonincreasing = false;
        }
        if mean_d < -3.0 * se_d - 1e-12 {
            nondecreasing = false;
        }
    }

    let times = paths[0].times();
    Ok(SupermartingaleReport {
        checkpoint_times: indices.iter().map(|&i| times[i]).collect(),
        means,
        standard_errors: ses,
        nonincreasing_within_band: nonincreasing,
        nondecreasing_within_band: nondecreasing,
        n_paths: paths.len(),
        steps: config.steps,
        seed: config.seed,
    })
}

/// Largest pointwise gap between Γ computed with the generator's own
/// derivative map and with an alternative selection.
pub fn gamma_uniqueness_check(
    g: &Generator,
    dg_alt: impl FnMut(&[f64], &mut Vec<f64>),
    path: &MarketPath,
) -> Result<f64> {
    let own = gamma_by_definition(g, path)?;
    let alt = gamma_with_gradient(g, dg_alt, path)?;
    Ok(own
        .values
        .iter()
        .zip(&alt)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max))
}

/// Exploratory probe of the covariation representation
/// `Γ ≈ −½ Σ_i [D_iG(μ(·)), μ_i]`; pairs each derivative component with its
/// own weight.  Not asserted anywhere.
pub fn covariation_gamma_probe(g: &Generator, path: &MarketPath) -> Result<Vec<f64>> {
    g.check_dim(path.dim())?;
    let w = path.weights();
    let d = path.dim();
    let mut prev = g.gradient(&w[0]);
    let mut next = Vec::with_capacity(d);
    let mut out = Vec::with_capacity(w.len());
    out.push(0.0);
    let mut acc = 0.0;
    for m in 0..w.len() - 1 {
        g.gradient_into(&w[m + 1], &mut next);
        for i in 0..d {
            acc -= 0.5 * (next[i] - prev[i]) * (w[m + 1][i] - w[m][i]);
        }
        out.push(acc);
        std::mem::swap(&mut prev, &mut next);
    }
    Ok(out)
}

/// One oscillator row of the variation divergence table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OscillatorRow {
    pub n_max: usize,
    /// Total variation of the path itself (bounded).
    pub tv_x: f64,
    /// Convergent series bound `Σ 3√n/(n²+n)`.
    pub tv_x_series_bound: f64,
    /// Total variation of √X (diverges logarithmically).
    pub tv_sqrt_x: f64,
    /// Divergent lower bound `Σ (1 − √(n/(n+1)))`.
    pub tv_sqrt_lower_bound: f64,
    /// Exact leg-count series value `Σ a_n (1/√n − 1/√(n+1))`.
    pub tv_sqrt_series: f64,
}

/// Quadratic variation of `√|1 − B|` under mesh refinement on the absorbed
/// Brownian fixture; refinement must make it grow on almost every path.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SqrtQvRefinement {
    pub n_paths: usize,
    pub steps_coarse: usize,
    pub steps_fine: usize,
    pub seed: u64,
    pub mean_qv_coarse: f64,
    pub mean_qv_fine: f64,
    pub fraction_grew: f64,
}

/// Variation divergence report for the counterexample fixtures.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VariationReport {
    pub rows: Vec<OscillatorRow>,
    pub sqrt_qv: SqrtQvRefinement,
}

/// Tabulate the oscillator's bounded variation against the divergent
/// variation of its square root, and measure how the quadratic variation of
/// `√|1−B|` responds to a 4× mesh refinement on 1000 absorbed-Brownian paths.
pub fn variation_divergence_report(n_max_list: &[usize], seed: u64) -> Result<VariationReport> {
    if n_max_list.is_empty() || n_max_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(CoreError::InvalidParameter(
            "n_max values must be nonempty and increasing".into(),
        ));
    }
    let rows = n_max_list
        .iter()
        .map(|&n_max| -> Result<OscillatorRow> {
            let (_, x) = oscillator_path(n_max)?;
            let sqrt_x: Vec<f64> = x.iter().map(|&v| v.sqrt()).collect();
            let mut tv_x_series_bound = 0.0;
            let mut tv_sqrt_lower_bound = 0.0;
            let mut tv_sqrt_series = 0.0;
            for n in 1..=n_max {
                let nf = n as f64;
                tv_x_series_bound += 3.0 * nf.sqrt() / (nf * nf + nf);
                tv_sqrt_lower_bound += 1.0 - (nf / (nf + 1.0)).sqrt();
                tv_sqrt_series +=
                    oscillation_count(n) as f64 * (1.0 / nf.sqrt() - 1.0 / (nf + 1.0).sqrt());
            }
            Ok(OscillatorRow {
                n_max,
                tv_x: total_variation(&x),
                tv_x_series_bound,
                tv_sqrt_x: total_variation(&sqrt_x),
                tv_sqrt_lower_bound,
                tv_sqrt_series,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let n_paths = 1000;
    let steps_fine = 1 << 15;
    let config = SimConfig {
        horizon: 1.0,
        steps: steps_fine,
        seed,
        ensemble_size: n_paths,
    };
    let spec = ModelSpec::AbsorbedBrownianPair(crate::market_models::AbsorbedBrownianPairParams {});
    let paths = simulate_ensemble(&spec, &config)?;
    let stats: Vec<(f64, f64)> = paths
        .par_iter()
        .map(|p| {
            // B = 2 μ_1, so |1 − B| = |1 − 2 μ_1|
            let f: Vec<f64> = p
                .weights()
                .iter()
                .map(|w| (1.0 - 2.0 * w[0]).abs().sqrt())
                .collect();
            let coarse: Vec<f64> = f.iter().step_by(4).copied().collect();
            let qv_fine = *quadratic_covariation(&f, &f).unwrap().last().unwrap();
            let qv_coarse = *quadratic_covariation(&coarse, &coarse).unwrap().last().unwrap();
            (qv_coarse, qv_fine)
        })
        .collect();
    let grew = stats.iter().filter(|(c, f)| f > c).count();
    let mean_qv_coarse = stats.iter().map(|s| s.0).sum::<f64>() / n_paths as f64;
    let mean_qv_fine = stats.iter().map(|s| s.1).sum::<f64>() / n_paths as f64;

    Ok(VariationReport {
        rows,
        sqrt_qv: SqrtQvRefinement {
            n_paths,
            steps_coarse: steps_fine / 4,
            steps_fine,
            seed,
            mean_qv_coarse,
            mean_qv_fine,
            fraction_grew: grew as f64 / n_paths as f64,
        },
    })
}
