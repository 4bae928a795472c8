//! Generating functions on the simplex: a value map `G`, a supergradient-style
//! derivative map `DG`, and the finite-variation process
//!
//! ```text
//! Γ(t_n) = G(μ(0)) − G(μ(t_n)) + Σ_{m<n} ⟨DG(μ(t_m)), Δμ(t_m)⟩
//! ```
//!
//! computed either from that defining identity (`gamma_by_definition`) or from
//! the closed-form bracket/local-time recipes of the built-ins
//! (`gamma_analytic`).  For a concave `G` with a supergradient selection the
//! by-definition increments are nonnegative step by step, so Γ is
//! nondecreasing already at any mesh size.
//!
//! Built-ins:
//!
//! ```text
//! entropy          H(x)      = Σ x_i log(1/x_i)              Γ = ½ Σ ∫ d[μ_i]/μ_i
//! quadratic        H(c)(x)   = c − Σ x_i²                    Γ = Σ [μ_i, μ_i]
//! gini             G♭(x)     = 1 − ½ Σ |x_i − 1/d|           Γ = ½ Σ Tanaka(μ_i at 1/d)
//! large_cap(m)     G(x)      = x_(1) + … + x_(m)             Γ = −∫ dΛ^{(m,m+1)}/N
//! small_cap(m)     G(x)      = x_(m+1) + … + x_(d)           Γ = +∫ dΛ^{(m,m+1)}/N
//! geometric_mean   G(x)      = (x_1 ⋯ x_d)^{1/d}             Γ from the smooth second-order form
//! ```
//!
//! Rank-based derivative maps distribute fractionally over tied indices:
//! `D_i G = Σ_ℓ (1/N_ℓ) D_ℓ G_ranked · 1{x_(ℓ) = x_i}`.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{CoreError, Result};
use crate::path_core::{
    collision_local_time, local_time, rank_point, rank_with_ties, sgn_left, MarketPath,
};

type ValueMap = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type GradientMap = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// User-supplied concave function with an explicit supergradient selection.
#[derive(Clone)]
pub struct CustomConcave {
    dim: usize,
    label: String,
    value: ValueMap,
    gradient: GradientMap,
}

impl fmt::Debug for CustomConcave {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomConcave")
            .field("dim", &self.dim)
            .field("label", &self.label)
            .finish()
    }
}

/// A generating function together with its derivative map.
#[derive(Debug, Clone)]
pub enum Generator {
    Entropy,
    Quadratic { c: f64 },
    Gini,
    LargeCap { m: usize },
    SmallCap { m: usize },
    GeometricMean,
    Custom(CustomConcave),
    /// `scale · base + shift`; covers normalization and the (G+c)/(1+c) shift.
    Affine {
        base: Box<Generator>,
        scale: f64,
        shift: f64,
    },
}

/// How a Γ series was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GammaMethod {
    ByDefinition,
    Analytic,
}

/// Per-time Γ values with Γ(0) = 0.
#[derive(Debug, Clone)]
pub struct GammaSeries {
    pub values: Vec<f64>,
    pub method: GammaMethod,
}

impl GammaSeries {
    pub fn total(&self) -> f64 {
        *self.values.last().unwrap_or(&0.0)
    }
}

impl Generator {
    pub fn entropy() -> Self {
        Generator::Entropy
    }

    pub fn quadratic(c: f64) -> Result<Self> {
        if !c.is_finite() {
            return Err(CoreError::InvalidParameter(
                "quadratic shift must be finite".into(),
            ));
        }
        Ok(Generator::Quadratic { c })
    }

    pub fn gini() -> Self {
        Generator::Gini
    }

    pub fn large_cap(m: usize) -> Result<Self> {
        if m < 1 {
            return Err(CoreError::InvalidParameter(
                "large_cap needs m >= 1".into(),
            ));
        }
        Ok(Generator::LargeCap { m })
    }

    pub fn small_cap(m: usize) -> Result<Self> {
        if m < 1 {
            return Err(CoreError::InvalidParameter(
                "small_cap needs m >= 1".into(),
            ));
        }
        Ok(Generator::SmallCap { m })
    }

    pub fn geometric_mean() -> Self {
        Generator::GeometricMean
    }

    /// `scale · self + shift` with positive scale; nested wrappers collapse.
    pub fn affine(self, scale: f64, shift: f64) -> Result<Self> {
        if !(scale > 0.0) || !scale.is_finite() || !shift.is_finite() {
            return Err(CoreError::InvalidParameter(format!(
                "affine wrapper needs a positive finite scale, got {scale} and shift {shift}"
            )));
        }
        Ok(match self {
            Generator::Affine {
                base,
                scale: s0,
                shift: h0,
            } => Generator::Affine {
                base,
                scale: scale * s0,
                shift: scale * h0 + shift,
            },
            other => Generator::Affine {
                base: Box::new(other),
                scale,
                shift,
            },
        })
    }

    /// The shifted function `(G + c)/(1 + c)` used for multiplicative
    /// outperformance.
    pub fn shifted(self, c: f64) -> Result<Self> {
        if !(c > 0.0) {
            return Err(CoreError::InvalidParameter(format!(
                "shift constant must be positive, got {c}"
            )));
        }
        self.affine(1.0 / (1.0 + c), c / (1.0 + c))
    }

    pub fn kind_name(&self) -> String {
        match self {
            Generator::Entropy => "entropy".into(),
            Generator::Quadratic { c } => format!("quadratic(c={c})"),
            Generator::Gini => "gini".into(),
            Generator::LargeCap { m } => format!("large_cap(m={m})"),
            Generator::SmallCap { m } => format!("small_cap(m={m})"),
            Generator::GeometricMean => "geometric_mean".into(),
            Generator::Custom(c) => format!("custom({})", c.label),
            Generator::Affine { base, scale, shift } => {
                format!("{} * {scale} + {shift}", base.kind_name())
            }
        }
    }

    /// Rank-based functions read the path through the ranked view.
    pub fn is_rank_based(&self) -> bool {
        match self {
            Generator::LargeCap { .. } | Generator::SmallCap { .. } => true,
            Generator::Affine { base, .. } => base.is_rank_based(),
            _ => false,
        }
    }

    /// Validate the generator against the number of assets.
    pub fn check_dim(&self, d: usize) -> Result<()> {
        match self {
            Generator::LargeCap { m } | Generator::SmallCap { m } => {
                if *m >= d {
                    return Err(CoreError::InvalidParameter(format!(
                        "rank cut m={m} must satisfy 1 <= m <= d-1 with d={d}"
                    )));
                }
                Ok(())
            }
            Generator::Custom(c) => {
                if c.dim != d {
                    return Err(CoreError::InvalidParameter(format!(
                        "custom generator built for dimension {}, path has {d}",
                        c.dim
                    )));
                }
                Ok(())
            }
            Generator::Affine { base, .. } => base.check_dim(d),
            _ => Ok(()),
        }
    }

    /// Closed-form supremum over the simplex, where known.
    pub fn sup_bound(&self, d: usize) -> Option<f64> {
        match self {
            Generator::Entropy => Some((d as f64).ln()),
            Generator::Quadratic { c } => Some(c - 1.0 / d as f64),
            Generator::Gini => Some(1.0),
            Generator::LargeCap { .. } => Some(1.0),
            Generator::SmallCap { m } => Some((d - m) as f64 / d as f64),
            Generator::GeometricMean => Some(1.0 / d as f64),
            Generator::Custom(_) => None,
            Generator::Affine { base, scale, shift } => {
                base.sup_bound(d).map(|s| scale * s + shift)
            }
        }
    }

    /// Evaluate `G` at a simplex point.
    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            Generator::Entropy => x
                .iter()
                .map(|&v| if v > 0.0 { -v * v.ln() } else { 0.0 })
                .sum(),
            Generator::Quadratic { c } => c - x.iter().map(|&v| v * v).sum::<f64>(),
            Generator::Gini => {
                let q = 1.0 / x.len() as f64;
                1.0 - 0.5 * x.iter().map(|&v| (v - q).abs()).sum::<f64>()
            }
            Generator::LargeCap { m } => {
                let (ranked, _, _) = rank_point(x);
                ranked.iter().take(*m).sum()
            }
            Generator::SmallCap { m } => {
                let (ranked, _, _) = rank_point(x);
                ranked.iter().skip(*m).sum()
            }
            Generator::GeometricMean => {
                if x.iter().any(|&v| v <= 0.0) {
                    0.0
                } else {
                    (x.iter().map(|&v| v.ln()).sum::<f64>() / x.len() as f64).exp()
                }
            }
            Generator::Custom(c) => (c.value)(x),
            Generator::Affine { base, scale, shift } => scale * base.value(x) + shift,
        }
    }

    /// Evaluate the derivative map `DG` at a simplex point.
    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        self.gradient_into(x, &mut out);
        out
    }

    pub fn gradient_into(&self, x: &[f64], out: &mut Vec<f64>) {
        let d = x.len();
        out.clear();
        out.resize(d, 0.0);
        match self {
            Generator::Entropy => {
                for i in 0..d {
                    // absorbed coordinates are inert; any finite value works there
                    out[i] = if x[i] > 0.0 { -(1.0 + x[i].ln()) } else { 0.0 };
                }
            }
            Generator::Quadratic { .. } => {
                for i in 0..d {
                    out[i] = -2.0 * x[i];
                }
            }
            Generator::Gini => {
                let q = 1.0 / d as f64;
                for i in 0..d {
                    out[i] = -0.5 * sgn_left(x[i] - q);
                }
            }
            Generator::LargeCap { m } => rank_window_gradient(x, 0, *m, out),
            Generator::SmallCap { m } => rank_window_gradient(x, *m, d, out),
            Generator::GeometricMean => {
                let g = self.value(x);
                for i in 0..d {
                    out[i] = if x[i] > 0.0 { g / (d as f64 * x[i]) } else { 0.0 };
                }
            }
            Generator::Custom(c) => {
                let g = (c.gradient)(x);
                out.copy_from_slice(&g);
            }
            Generator::Affine { base, scale, .. } => {
                base.gradient_into(x, out);
                for v in out.iter_mut() {
                    *v *= scale;
                }
            }
        }
    }
}

/// Fractional rank-window derivative: each index tied at ranks `[a, b)` gets
/// `(#slots of its tie group inside [lo, hi)) / N`.
fn rank_window_gradient(x: &[f64], lo: usize, hi: usize, out: &mut [f64]) {
    let d = x.len();
    let (ranked, perm, _) = rank_point(x);
    let mut start = 0;
    while start < d {
        let mut end = start + 1;
        while end < d && ranked[end] == ranked[start] {
            end += 1;
        }
        let inside = end.min(hi).saturating_sub(start.max(lo));
        let share = inside as f64 / (end - start) as f64;
        for &i in &perm[start..end] {
            out[i] = share;
        }
        start = end;
    }
}

/// Wrap user maps as a generating function, after a sampled supergradient
/// check: on random simplex pairs, `G(y) − G(x) ≤ ⟨ξ(x), y − x⟩` must hold
/// within 1e-9.
pub fn custom_concave(
    dim: usize,
    label: impl Into<String>,
    value: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    gradient: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
) -> Result<Generator> {
    if dim < 2 {
        return Err(CoreError::InvalidParameter(
            "custom generator needs dimension >= 2".into(),
        ));
    }
    let label = label.into();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_cafe);
    let sample = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        // Dirichlet(1, ..., 1): normalized exponentials
        let e: Vec<f64> = (0..dim)
            .map(|_| -(rng.random::<f64>().max(f64::MIN_POSITIVE)).ln())
            .collect();
        let total: f64 = e.iter().sum();
        e.into_iter().map(|v| v / total).collect()
    };
    for trial in 0..256 {
        let x = sample(&mut rng);
        let y = sample(&mut rng);
        let gx = value(&x);
        let gy = value(&y);
        let xi = gradient(&x);
        let pairing: f64 = xi.iter().zip(y.iter().zip(&x)).map(|(g, (a, b))| g * (a - b)).sum();
        let slack = gy - gx - pairing;
        if slack > 1e-9 {
            return Err(CoreError::NotConcave(format!(
                "trial {trial}: G(y) - G(x) exceeds the supergradient pairing by {slack:.3e}"
            )));
        }
    }
    Ok(Generator::Custom(CustomConcave {
        dim,
        label,
        value: Arc::new(value),
        gradient: Arc::new(gradient),
    }))
}

/// Γ from the defining identity, evaluated with the generator's own
/// derivative map.
pub fn gamma_by_definition(g: &Generator, path: &MarketPath) -> Result<GammaSeries> {
    let values = gamma_with_gradient(g, |x, out| g.gradient_into(x, out), path)?;
    Ok(GammaSeries {
        values,
        method: GammaMethod::ByDefinition,
    })
}

/// Γ from the defining identity under an externally supplied derivative
/// selection; used to probe how Γ depends on the choice of `DG`.
pub fn gamma_with_gradient(
    g: &Generator,
    mut grad: impl FnMut(&[f64], &mut Vec<f64>),
    path: &MarketPath,
) -> Result<Vec<f64>> {
    g.check_dim(path.dim())?;
    let w = path.weights();
    let times = path.times();
    let n = w.len();
    let g0 = g.value(&w[0]);
    if !g0.is_finite() {
        return Err(CoreError::InvalidParameter(
            "generator value not finite at the initial point".into(),
        ));
    }
    let mut values = Vec::with_capacity(n);
    values.push(0.0);
    let mut gains = 0.0;
    let mut theta = Vec::with_capacity(path.dim());
    for m in 0..n - 1 {
        grad(&w[m], &mut theta);
        if theta.iter().any(|v| !v.is_finite()) {
            return Err(CoreError::NonFiniteGradient {
                index: m,
                time: times[m],
            });
        }
        let mut step = 0.0;
        for i in 0..theta.len() {
            step += theta[i] * (w[m + 1][i] - w[m][i]);
        }
        gains += step;
        let gm = g.value(&w[m + 1]);
        if !gm.is_finite() {
            return Err(CoreError::InvalidParameter(format!(
                "generator value not finite at time index {}",
                m + 1
            )));
        }
        values.push(g0 - gm + gains);
    }
    Ok(values)
}

/// Γ from the built-in closed-form recipe (brackets and/or local times).
pub fn gamma_analytic(g: &Generator, path: &MarketPath) -> Result<GammaSeries> {
    g.check_dim(path.dim())?;
    let values = analytic_values(g, path)?;
    Ok(GammaSeries {
        values,
        method: GammaMethod::Analytic,
    })
}

fn analytic_values(g: &Generator, path: &MarketPath) -> Result<Vec<f64>> {
    let w = path.weights();
    let d = path.dim();
    let n = w.len();
    match g {
        Generator::Affine { base, scale, .. } => {
            let mut values = analytic_values(base, path)?;
            for v in values.iter_mut() {
                *v *= scale;
            }
            Ok(values)
        }
        Generator::Quadratic { .. } => {
            let mut values = vec![0.0; n];
            let mut acc = 0.0;
            for m in 0..n - 1 {
                for i in 0..d {
                    let dv = w[m + 1][i] - w[m][i];
                    acc += dv * dv;
                }
                values[m + 1] = acc;
            }
            Ok(values)
        }
        Generator::Entropy => {
            let mut values = vec![0.0; n];
            let mut acc = 0.0;
            for m in 0..n - 1 {
                for i in 0..d {
                    if w[m][i] > 0.0 {
                        let dv = w[m + 1][i] - w[m][i];
                        acc += 0.5 * dv * dv / w[m][i];
                    }
                }
                values[m + 1] = acc;
            }
            Ok(values)
        }
        Generator::Gini => {
            // Λ_i is half the Tanaka correction; the op returns the full one
            let q = 1.0 / d as f64;
            let mut values = vec![0.0; n];
            for i in 0..d {
                let series: Vec<f64> = w.iter().map(|x| x[i]).collect();
                let lt = local_time(&series, q);
                for m in 0..n {
                    values[m] += 0.5 * lt.values[m];
                }
            }
            Ok(values)
        }
        Generator::LargeCap { m } => rank_boundary_gamma(path, *m, -1.0),
        Generator::SmallCap { m } => rank_boundary_gamma(path, *m, 1.0),
        Generator::GeometricMean => {
            let mut values = vec![0.0; n];
            let mut acc = 0.0;
            for m in 0..n - 1 {
                let gm = g.value(&w[m]);
                let mut sum_sq = 0.0;
                let mut sum = 0.0;
                for i in 0..d {
                    let r = (w[m + 1][i] - w[m][i]) / w[m][i];
                    sum_sq += r * r;
                    sum += r;
                }
                let df = d as f64;
                acc += 0.5 * gm * (sum_sq / df - (sum / df) * (sum / df));
                values[m + 1] = acc;
            }
            Ok(values)
        }
        Generator::Custom(_) => Err(CoreError::NoAnalyticRecipe(g.kind_name())),
    }
}

/// `sign · ∫ dΛ^{(m,m+1)} / max(2, N_m)`: the leakage (large-cap) or promotion
/// gain (small-cap) across the rank-m boundary, assuming no triple collisions.
fn rank_boundary_gamma(path: &MarketPath, m: usize, sign: f64) -> Result<Vec<f64>> {
    let view = rank_with_ties(path.weights());
    let lt = collision_local_time(&view, m, m + 1)?;
    let n = path.len();
    let mut values = vec![0.0; n];
    let mut acc = 0.0;
    for step in 0..n - 1 {
        let weight = 1.0 / view.tie_counts[step][m - 1].max(2) as f64;
        acc += sign * weight * (lt.values[step + 1] - lt.values[step]);
        values[step + 1] = acc;
    }
    Ok(values)
}

/// Rescale so the function takes the value 1 at `mu0`: `G/G(μ0)` when
/// `G(μ0) > 0`, `G + 1` when `G(μ0) = 0`.
pub fn normalize(g: Generator, mu0: &[f64]) -> Result<Generator> {
    g.check_dim(mu0.len())?;
    let v = g.value(mu0);
    if !v.is_finite() {
        return Err(CoreError::InvalidParameter(
            "generator value not finite at the normalization point".into(),
        ));
    }
    if v < 0.0 {
        return Err(CoreError::NegativeAtInitial(v));
    }
    if v == 0.0 {
        g.affine(1.0, 1.0)
    } else {
        g.affine(1.0 / v, 0.0)
    }
}
