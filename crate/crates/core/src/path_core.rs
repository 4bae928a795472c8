//! Discrete pathwise calculus on sampled vector paths.
//!
//! Everything in this module is grid-agnostic and purely pathwise: integrals
//! are non-anticipating left Riemann sums, brackets are sums of increment
//! products, and local times come from the discrete Itô–Tanaka identity.
//!
//! ```text
//! gains integral   I(t_n)   = Σ_{m<n} ⟨ϑ(t_m), X(t_{m+1}) − X(t_m)⟩
//! covariation      [X,Y](t_n) = Σ_{m<n} ΔX(t_m) · ΔY(t_m)
//! local time       Λ(t_n)   = |X(t_n)−a| − |X(0)−a| − Σ_{m<n} sgn(X(t_m)−a) ΔX(t_m)
//! ```
//!
//! with the left-continuous signum, sgn(0) = −1.  The Tanaka sum picks up
//! 2·|X(t_{m+1})−a| every time the path steps across the level `a`, and is
//! nondecreasing by construction.

use crate::error::{CoreError, Result};

/// Left-continuous signum: +1 on (0, ∞), −1 on (−∞, 0].
#[inline]
pub(crate) fn sgn_left(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else {
        -1.0
    }
}

// ---------------------------------------------------------------------------
// Time grid and market path
// ---------------------------------------------------------------------------

/// Strictly increasing sequence of time points starting at 0.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    times: Vec<f64>,
}

impl TimeGrid {
    /// Uniform grid with `steps` intervals on `[0, horizon]`.
    pub fn uniform(horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon > 0.0) {
            return Err(CoreError::InvalidGrid(format!(
                "horizon must be positive, got {horizon}"
            )));
        }
        if steps < 1 {
            return Err(CoreError::InvalidGrid("need at least one step".into()));
        }
        let times = (0..=steps)
            .map(|n| horizon * n as f64 / steps as f64)
            .collect();
        Ok(Self { times })
    }

    /// Grid from explicit time points; must start at 0 and strictly increase.
    pub fn from_times(times: Vec<f64>) -> Result<Self> {
        if times.len() < 2 {
            return Err(CoreError::InvalidGrid("need at least two points".into()));
        }
        if times[0] != 0.0 {
            return Err(CoreError::InvalidGrid(format!(
                "first time must be 0, got {}",
                times[0]
            )));
        }
        for w in times.windows(2) {
            if !(w[1] > w[0]) || !w[1].is_finite() {
                return Err(CoreError::InvalidGrid(format!(
                    "times must strictly increase, got {} then {}",
                    w[0], w[1]
                )));
            }
        }
        Ok(Self { times })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().unwrap()
    }

    /// Index of the first grid point at or after `t`.
    pub fn index_at_or_after(&self, t: f64) -> Option<usize> {
        self.times.iter().position(|&s| s >= t)
    }
}

/// Sampled market: capitalizations `S(t)` and derived weights `μ(t) = S(t)/Σ(t)`
/// on the unit simplex.
#[derive(Debug, Clone)]
pub struct MarketPath {
    grid: TimeGrid,
    caps: Vec<Vec<f64>>,
    weights: Vec<Vec<f64>>,
}

impl MarketPath {
    /// Build a path from per-time capitalization vectors.
    ///
    /// Each capitalization may vanish, but the total may not; the initial
    /// weight vector must be strictly inside the simplex.
    pub fn from_caps(grid: TimeGrid, caps: Vec<Vec<f64>>) -> Result<Self> {
        if caps.len() != grid.len() {
            return Err(CoreError::GridMismatch {
                left: grid.len(),
                right: caps.len(),
            });
        }
        let d = caps[0].len();
        if d < 2 {
            return Err(CoreError::InvalidPath(format!(
                "need at least two assets, got {d}"
            )));
        }
        let mut weights = Vec::with_capacity(caps.len());
        for (n, s) in caps.iter().enumerate() {
            if s.len() != d {
                return Err(CoreError::InvalidPath(format!(
                    "dimension changes from {d} to {} at index {n}",
                    s.len()
                )));
            }
            weights.push(normalize_caps(s).map_err(|e| match e {
                CoreError::InvalidPath(msg) => {
                    CoreError::InvalidPath(format!("{msg} at time index {n}"))
                }
                other => other,
            })?);
        }
        if weights[0].iter().any(|&w| w <= 0.0) {
            return Err(CoreError::InvalidPath(
                "initial weights must be strictly positive".into(),
            ));
        }
        Ok(Self {
            grid,
            caps,
            weights,
        })
    }

    /// Build a path whose capitalizations already sum to one (weights given
    /// directly).
    pub fn from_weights(grid: TimeGrid, weights: Vec<Vec<f64>>) -> Result<Self> {
        Self::from_caps(grid, weights)
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn times(&self) -> &[f64] {
        self.grid.times()
    }

    pub fn caps(&self) -> &[Vec<f64>] {
        &self.caps
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub fn weights_at(&self, n: usize) -> &[f64] {
        &self.weights[n]
    }

    /// Number of grid points.
    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Number of assets.
    pub fn dim(&self) -> usize {
        self.caps[0].len()
    }

    /// Coarsen the path by keeping every `stride`-th point.  The number of
    /// intervals must be divisible by `stride` so the horizon is preserved.
    pub fn subsample(&self, stride: usize) -> Result<Self> {
        if stride == 0 || !(self.len() - 1).is_multiple_of(stride) {
            return Err(CoreError::InvalidParameter(format!(
                "stride {stride} does not divide {} intervals",
                self.len() - 1
            )));
        }
        let times = self
            .times()
            .iter()
            .step_by(stride)
            .copied()
            .collect::<Vec<_>>();
        let caps = self.caps.iter().step_by(stride).cloned().collect();
        MarketPath::from_caps(TimeGrid::from_times(times)?, caps)
    }
}

/// Normalize one capitalization vector to market weights.
pub(crate) fn normalize_caps(s: &[f64]) -> Result<Vec<f64>> {
    if s.iter().any(|&v| v < 0.0 || !v.is_finite()) {
        return Err(CoreError::InvalidPath(
            "capitalizations must be finite and nonnegative".into(),
        ));
    }
    let total: f64 = s.iter().sum();
    if !(total > 0.0) {
        return Err(CoreError::InvalidPath(
            "total capitalization vanishes".into(),
        ));
    }
    Ok(s.iter().map(|&v| v / total).collect())
}

// ---------------------------------------------------------------------------
// Integrals, brackets, variation
// ---------------------------------------------------------------------------

/// Non-anticipating gains integral of a vector integrand against a vector path:
/// `I(t_n) = Σ_{m<n} ⟨ϑ(t_m), X(t_{m+1}) − X(t_m)⟩`, with `I(0) = 0`.
pub fn left_riemann_integral(integrand: &[Vec<f64>], path: &[Vec<f64>]) -> Result<Vec<f64>> {
    if integrand.len() != path.len() {
        return Err(CoreError::GridMismatch {
            left: integrand.len(),
            right: path.len(),
        });
    }
    let mut out = Vec::with_capacity(path.len());
    out.push(0.0);
    let mut acc = 0.0;
    for m in 0..path.len().saturating_sub(1) {
        let (theta, x0, x1) = (&integrand[m], &path[m], &path[m + 1]);
        if theta.len() != x0.len() || x1.len() != x0.len() {
            return Err(CoreError::GridMismatch {
                left: theta.len(),
                right: x0.len(),
            });
        }
        let mut step = 0.0;
        for i in 0..x0.len() {
            step += theta[i] * (x1[i] - x0[i]);
        }
        acc += step;
        out.push(acc);
    }
    Ok(out)
}

/// Scalar version of [`left_riemann_integral`].
pub fn left_riemann_scalar(integrand: &[f64], path: &[f64]) -> Result<Vec<f64>> {
    if integrand.len() != path.len() {
        return Err(CoreError::GridMismatch {
            left: integrand.len(),
            right: path.len(),
        });
    }
    let mut out = Vec::with_capacity(path.len());
    out.push(0.0);
    let mut acc = 0.0;
    for m in 0..path.len().saturating_sub(1) {
        acc += integrand[m] * (path[m + 1] - path[m]);
        out.push(acc);
    }
    Ok(out)
}

/// Discrete quadratic covariation `[X,Y](t_n) = Σ_{m<n} ΔX(t_m)·ΔY(t_m)`.
pub fn quadratic_covariation(x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
    if x.len() != y.len() {
        return Err(CoreError::GridMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    let mut out = Vec::with_capacity(x.len());
    out.push(0.0);
    let mut acc = 0.0;
    for m in 0..x.len().saturating_sub(1) {
        acc += (x[m + 1] - x[m]) * (y[m + 1] - y[m]);
        out.push(acc);
    }
    Ok(out)
}

/// Total first variation `Σ_n |ΔX(t_n)|` of a sampled scalar series.
pub fn total_variation(x: &[f64]) -> f64 {
    x.windows(2).map(|w| (w[1] - w[0]).abs()).sum()
}

// ---------------------------------------------------------------------------
// Local times
// ---------------------------------------------------------------------------

/// What a [`LocalTimeSeries`] measures.
#[derive(Debug, Clone, PartialEq)]
pub enum LocalTimeDescriptor {
    /// Local time of a scalar series at a fixed level.
    Level { level: f64 },
    /// Collision local time of the gap between ranked components `k < l`
    /// (1-based ranks).
    Collision { k: usize, l: usize },
}

/// Nondecreasing local-time estimate, zero at the start of the path.
#[derive(Debug, Clone)]
pub struct LocalTimeSeries {
    pub values: Vec<f64>,
    pub descriptor: LocalTimeDescriptor,
}

impl LocalTimeSeries {
    pub fn total(&self) -> f64 {
        *self.values.last().unwrap_or(&0.0)
    }
}

/// Tanaka estimate of the local time of `x` at `level`, monotone-clamped.
pub fn local_time(x: &[f64], level: f64) -> LocalTimeSeries {
    let mut values = Vec::with_capacity(x.len());
    values.push(0.0);
    let mut acc = 0.0_f64;
    for m in 0..x.len().saturating_sub(1) {
        let u = x[m] - level;
        let u_next = x[m + 1] - level;
        // per-step Tanaka increment; equals 2|u_next| when the level is crossed
        let raw = u_next.abs() - u.abs() - sgn_left(u) * (u_next - u);
        acc = (acc + raw).max(acc);
        values.push(acc);
    }
    LocalTimeSeries {
        values,
        descriptor: LocalTimeDescriptor::Level { level },
    }
}

// ---------------------------------------------------------------------------
// Ranking
// ---------------------------------------------------------------------------

/// Descending order statistics of one weight vector with the lexicographic
/// tie rule (smaller original index gets the better rank).
///
/// Returns `(ranked values, permutation rank → original index, tie counts)`,
/// where `tie_counts[l]` is the number of components equal to the rank-`l`
/// value.
pub fn rank_point(x: &[f64]) -> (Vec<f64>, Vec<usize>, Vec<usize>) {
    let d = x.len();
    let mut perm: Vec<usize> = (0..d).collect();
    perm.sort_by(|&a, &b| x[b].total_cmp(&x[a]).then(a.cmp(&b)));
    let ranked: Vec<f64> = perm.iter().map(|&i| x[i]).collect();
    let mut counts = vec![0usize; d];
    let mut start = 0;
    while start < d {
        let mut end = start + 1;
        while end < d && ranked[end] == ranked[start] {
            end += 1;
        }
        for c in counts.iter_mut().take(end).skip(start) {
            *c = end - start;
        }
        start = end;
    }
    (ranked, perm, counts)
}

/// Per-time ranked view of a weight path.
#[derive(Debug, Clone)]
pub struct RankedView {
    /// `ranked[n][l]` — rank-`l` (0-based) weight at time index `n`, nonincreasing in `l`.
    pub ranked: Vec<Vec<f64>>,
    /// `perm[n][l]` — original index of the asset occupying rank `l` at time `n`.
    pub perm: Vec<Vec<usize>>,
    /// `tie_counts[n][l]` — number of components equal to the rank-`l` value.
    pub tie_counts: Vec<Vec<usize>>,
}

impl RankedView {
    pub fn len(&self) -> usize {
        self.ranked.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranked.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.ranked.first().map_or(0, |r| r.len())
    }

    /// Rank occupied by `asset` at time index `n`.
    fn rank_of(&self, n: usize, asset: usize) -> usize {
        self.perm[n].iter().position(|&i| i == asset).unwrap()
    }
}

/// Rank every weight vector of a path.
pub fn rank_with_ties(weights: &[Vec<f64>]) -> RankedView {
    let mut ranked = Vec::with_capacity(weights.len());
    let mut perm = Vec::with_capacity(weights.len());
    let mut tie_counts = Vec::with_capacity(weights.len());
    for x in weights {
        let (r, p, c) = rank_point(x);
        ranked.push(r);
        perm.push(p);
        tie_counts.push(c);
    }
    RankedView {
        ranked,
        perm,
        tie_counts,
    }
}

/// Collision local time of the gap `μ_(k) − μ_(l)` at the origin (1-based
/// ranks, `k < l`).
///
/// The ranked gap is nonnegative, so a Tanaka sum on it alone never sees the
/// crossing; the estimate therefore tracks the *signed* gap of the two assets
/// occupying ranks `k` and `l` at the left endpoint of each step:
///
/// ```text
/// y_{m+1} = μ_p(t_{m+1}) − μ_q(t_{m+1}),   p/q = occupants of ranks k/l at t_m
/// ΔΛ_m    = |y_{m+1}| − sgn(gap(t_m)) · y_{m+1}
/// ```
///
/// which is the discrete Tanaka increment of the signed series and equals
/// `2·|y_{m+1}|` exactly when the occupants swap.  From an exact tie the sign
/// of `y` is meaningless (the reflected gap can only open), so a step with
/// `gap(t_m) = 0` contributes `|y_{m+1}|`.  For d = 2 away from exact ties
/// this coincides with `local_time(μ_1 − μ_2, 0)`.
pub fn collision_local_time(view: &RankedView, k: usize, l: usize) -> Result<LocalTimeSeries> {
    let d = view.dim();
    if k < 1 || l <= k || l > d {
        return Err(CoreError::InvalidRankPair { k, l, d });
    }
    let (k0, l0) = (k - 1, l - 1);
    let n = view.len();
    let mut values = Vec::with_capacity(n);
    values.push(0.0);
    let mut acc = 0.0_f64;
    for m in 0..n.saturating_sub(1) {
        let gap = view.ranked[m][k0] - view.ranked[m][l0];
        let p = view.perm[m][k0];
        let q = view.perm[m][l0];
        let y = view.ranked[m + 1][view.rank_of(m + 1, p)]
            - view.ranked[m + 1][view.rank_of(m + 1, q)];
        let raw = if gap > 0.0 { y.abs() - y } else { y.abs() };
        acc = (acc + raw).max(acc);
        values.push(acc);
    }
    Ok(LocalTimeSeries {
        values,
        descriptor: LocalTimeDescriptor::Collision { k, l },
    })
}

// ---------------------------------------------------------------------------
// Absorption
// ---------------------------------------------------------------------------

/// First hitting times of the simplex boundary, with `f64::INFINITY` for
/// "never".
#[derive(Debug, Clone)]
pub struct AbsorptionTimes {
    /// First time each weight drops to the zero threshold.
    pub first_zero: Vec<f64>,
    /// Earliest of the per-asset absorption times.
    pub first_zero_any: f64,
    /// First time a single weight carries the whole market.
    pub first_concentration: f64,
}

/// Scan a path for boundary hits.  `zero_eps = 0` detects exact absorption;
/// a positive threshold widens the detection band for models that only
/// approach the boundary.
pub fn absorption_times(path: &MarketPath, zero_eps: f64) -> AbsorptionTimes {
    let d = path.dim();
    let times = path.times();
    let mut first_zero = vec![f64::INFINITY; d];
    let mut first_concentration = f64::INFINITY;
    for (n, w) in path.weights().iter().enumerate() {
        for i in 0..d {
            if first_zero[i].is_infinite() && w[i] <= zero_eps {
                first_zero[i] = times[n];
            }
            if first_concentration.is_infinite() && w[i] >= 1.0 - zero_eps {
                first_concentration = times[n];
            }
        }
    }
    let first_zero_any = first_zero.iter().copied().fold(f64::INFINITY, f64::min);
    AbsorptionTimes {
        first_zero,
        first_zero_any,
        first_concentration,
    }
}

// ---------------------------------------------------------------------------
// Ranked semimartingale decomposition
// ---------------------------------------------------------------------------

/// Residual of the Banner–Ghomrasni decomposition of the ranked weights,
/// one series per rank:
///
/// ```text
/// res_l(t) = μ_(l)(t) − μ_(l)(0) − Σ_i ∫ (1/N_l) 1{μ_(l)=μ_i} dμ_i
///            − Σ_{k>l} ∫ dΛ^{(l,k)} / N  +  Σ_{k<l} ∫ dΛ^{(k,l)} / N
/// ```
///
/// The local-time integrals are weighted by the collision multiplicity
/// `N = max(2, N_l)`: the measure dΛ charges only times where the two ranks
/// meet, so at least two components coincide there even though the sampled
/// tie count at the left endpoint is typically 1.  With this weighting the
/// residual vanishes identically for d = 2 and shrinks under mesh refinement
/// in general.
pub fn ranked_decomposition_residual(path: &MarketPath) -> Result<Vec<Vec<f64>>> {
    let d = path.dim();
    let n = path.len();
    let weights = path.weights();
    let view = rank_with_ties(weights);

    // collision local times for every rank pair
    let mut lambda = vec![vec![None; d + 1]; d + 1];
    for k in 1..=d {
        for l in (k + 1)..=d {
            lambda[k][l] = Some(collision_local_time(&view, k, l)?);
        }
    }

    let mut residuals = Vec::with_capacity(d);
    for l0 in 0..d {
        // dμ-part: each component tied at rank l0 carries weight 1/N_l.
        let integrand: Vec<Vec<f64>> = (0..n)
            .map(|m| {
                let target = view.ranked[m][l0];
                let share = 1.0 / view.tie_counts[m][l0] as f64;
                (0..d)
                    .map(|i| if weights[m][i] == target { share } else { 0.0 })
                    .collect()
            })
            .collect();
        let gains = left_riemann_integral(&integrand, weights)?;

        let collision_weight: Vec<f64> = (0..n)
            .map(|m| 1.0 / (view.tie_counts[m][l0].max(2) as f64))
            .collect();

        let mut res = vec![0.0; n];
        for (m, r) in res.iter_mut().enumerate() {
            *r = view.ranked[m][l0] - view.ranked[0][l0] - gains[m];
        }
        for k in (l0 + 2)..=d {
            let lt = lambda[l0 + 1][k].as_ref().unwrap();
            let integral = left_riemann_scalar(&collision_weight, &lt.values)?;
            for m in 0..n {
                res[m] -= integral[m];
            }
        }
        for k in 1..=l0 {
            let lt = lambda[k][l0 + 1].as_ref().unwrap();
            let integral = left_riemann_scalar(&collision_weight, &lt.values)?;
            for m in 0..n {
                res[m] += integral[m];
            }
        }
        residuals.push(res);
    }
    Ok(residuals)
}
