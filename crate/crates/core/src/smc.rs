//! Copula-constrained Sequential Monte Carlo sampler.
//!
//! Particles live on the unit cube and target
//! `π_t(u) ∝ c(u) · 1{u ∈ A_t}` along a schedule of shrinking regions.
//! Each level mutates with a mixture kernel: pick a coordinate `m`
//! uniformly, draw the other coordinates from a base distribution (uniform
//! or a Beta fitted to the previous population), then draw `u_m` uniformly
//! on the interval that keeps the point inside `A_t`. The mixture density is
//!
//! ```text
//! K_t(u) = (1/d) Σ_m Π_{i≠m} base_i(u_i) · 1{u_m ∈ I_m(u_{-m})} / |I_m(u_{-m})|
//! ```
//!
//! With the approximately optimal backward kernel the incremental weight is
//! `π_t(u_t) / Σ_k W_{t-1}^k K_t(u_{t-1}^k, u_t)`. Neither kernel depends on the
//! individual previous particle, so the denominator collapses to `K_t(u_t)`
//! and weights cost O(N). When the ESS drops below a fraction of N the
//! population is resampled and rejuvenated by a Gibbs sweep whose
//! full conditionals are drawn with a shrinkage slice sampler.

use rand::Rng;
use rand_distr::{Beta, Distribution, Exp1, Open01};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::copulas::CopulaModel;
use crate::error::{Error, Result};
use crate::geometry::{loss_sum, ConstraintRegion, LevelSchedule, RegionMode};
use crate::marginals::{loss_quantile, MarginalModel};
use crate::rng::{substream, tags, SimRng};

pub const MUTATION_RETRY_CAP: usize = 100;
pub const SLICE_SHRINK_CAP: usize = 100;
pub const BETA_PARAM_MIN: f64 = 0.1;
pub const BETA_PARAM_MAX: f64 = 1e4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    UniformSlice,
    GlobalBeta,
}

/// How Beta parameters are obtained from the weighted mean and variance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BetaMomentRule {
    /// `α = μ(μ(1-μ)/σ² - 1)`: reproduces both moments exactly.
    Exact,
    /// `α = (1-μ)μ²/σ²`: the small-variance approximation of `Exact`.
    Printed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MutationKernelSpec {
    pub kind: KernelKind,
    pub min_variance: f64,
    pub mean_margin: f64,
    pub moment_rule: BetaMomentRule,
}

impl Default for MutationKernelSpec {
    fn default() -> Self {
        MutationKernelSpec { kind: KernelKind::GlobalBeta, min_variance: 1e-6, mean_margin: 1e-4, moment_rule: BetaMomentRule::Exact }
    }
}

impl MutationKernelSpec {
    pub fn uniform() -> Self {
        MutationKernelSpec { kind: KernelKind::UniformSlice, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.min_variance > 0.0 && self.mean_margin > 0.0 && self.mean_margin < 0.5) {
            return Err(Error::Config("kernel clamps must be positive (and mean_margin < 0.5)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResamplingScheme {
    Multinomial,
    Systematic,
}

/// N weighted points in `[0,1]^d`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleSystem {
    pub dim: usize,
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
    pub level: usize,
}

impl ParticleSystem {
    pub fn new(dim: usize, points: Vec<f64>, weights: Vec<f64>, level: usize) -> Result<Self> {
        if dim == 0 || points.len() != dim * weights.len() {
            return Err(Error::DimensionMismatch { expected: dim * weights.len(), actual: points.len() });
        }
        Ok(ParticleSystem { dim, points, weights, level })
    }

    pub fn equally_weighted(dim: usize, points: Vec<f64>, level: usize) -> Result<Self> {
        let n = points.len() / dim.max(1);
        Self::new(dim, points, vec![1.0 / n as f64; n], level)
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn point(&self, j: usize) -> &[f64] {
        &self.points[j * self.dim..(j + 1) * self.dim]
    }

    pub fn ess(&self) -> Result<f64> {
        ess(&self.weights)
    }
}

/// `1 / Σ W_j²` for normalized weights.
pub fn ess(weights: &[f64]) -> Result<f64> {
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Err(Error::LevelFailure { level: 0 });
    }
    let sq: f64 = weights.iter().map(|w| (w / total) * (w / total)).sum();
    Ok(1.0 / sq)
}

/// Normalizes log-weights in place into weights summing to 1.
fn normalize_log_weights(logw: &[f64], level: usize) -> Result<Vec<f64>> {
    let max = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::LevelFailure { level });
    }
    let w: Vec<f64> = logw.iter().map(|&l| (l - max).exp()).collect();
    let total: f64 = w.iter().sum();
    Ok(w.into_iter().map(|x| x / total).collect())
}

pub fn resample<R: Rng + ?Sized>(system: &ParticleSystem, scheme: ResamplingScheme, rng: &mut R) -> ParticleSystem {
    let n = system.len();
    let idx = resample_indices(&system.weights, n, scheme, rng);
    let mut points = Vec::with_capacity(system.points.len());
    for &k in &idx {
        points.extend_from_slice(system.point(k));
    }
    ParticleSystem { dim: system.dim, points, weights: vec![1.0 / n as f64; n], level: system.level }
}

pub fn resample_indices<R: Rng + ?Sized>(weights: &[f64], n: usize, scheme: ResamplingScheme, rng: &mut R) -> Vec<usize> {
    let total: f64 = weights.iter().sum();
    let mut cdf = Vec::with_capacity(weights.len());
    let mut acc = 0.0;
    for &w in weights {
        acc += w / total;
        cdf.push(acc);
    }
    let last_positive = weights.iter().rposition(|&w| w > 0.0).unwrap_or(0);
    let pick = |x: f64| -> usize { cdf.partition_point(|&c| c < x).min(last_positive) };
    match scheme {
        ResamplingScheme::Multinomial => (0..n).map(|_| pick(rng.random::<f64>())).collect(),
        ResamplingScheme::Systematic => {
            let start: f64 = rng.random::<f64>() / n as f64;
            (0..n).map(|j| pick(start + j as f64 / n as f64)).collect()
        }
    }
}

/// Moment-matched Beta parameters per coordinate, with clamps.
pub fn fit_global_beta(system: &ParticleSystem, spec: &MutationKernelSpec) -> Vec<(f64, f64)> {
    let total: f64 = system.weights.iter().sum();
    (0..system.dim)
        .map(|i| {
            let mut mu = 0.0;
            let mut m2 = 0.0;
            for (j, &w) in system.weights.iter().enumerate() {
                let u = system.points[j * system.dim + i];
                mu += w * u;
                m2 += w * u * u;
            }
            mu /= total;
            m2 /= total;
            beta_from_moments(mu, m2 - mu * mu, spec)
        })
        .collect()
}

pub fn beta_from_moments(mean: f64, variance: f64, spec: &MutationKernelSpec) -> (f64, f64) {
    let mu = mean.clamp(spec.mean_margin, 1.0 - spec.mean_margin);
    let var = variance.max(spec.min_variance);
    let a = match spec.moment_rule {
        BetaMomentRule::Exact => mu * (mu * (1.0 - mu) / var - 1.0),
        BetaMomentRule::Printed => (1.0 - mu) * mu * mu / var,
    };
    let b = a * (1.0 / mu - 1.0);
    (a.clamp(BETA_PARAM_MIN, BETA_PARAM_MAX), b.clamp(BETA_PARAM_MIN, BETA_PARAM_MAX))
}

/// Mutation kernel with its population-level parameters fixed for one level.
#[derive(Debug, Clone)]
pub struct FittedKernel {
    dim: usize,
    beta: Option<Vec<BetaBase>>,
}

#[derive(Debug, Clone)]
struct BetaBase {
    a: f64,
    b: f64,
    ln_norm: f64,
    sampler: Beta<f64>,
}

impl FittedKernel {
    pub fn uniform(dim: usize) -> Self {
        FittedKernel { dim, beta: None }
    }

    pub fn beta(params: &[(f64, f64)]) -> Result<Self> {
        let beta = params
            .iter()
            .map(|&(a, b)| {
                let sampler = Beta::new(a, b).map_err(|e| Error::InvalidParameter(format!("beta({a}, {b}): {e}")))?;
                let ln_norm = libm::lgamma(a + b) - libm::lgamma(a) - libm::lgamma(b);
                Ok(BetaBase { a, b, ln_norm, sampler })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(FittedKernel { dim: params.len(), beta: Some(beta) })
    }

    /// Kernel for the level after `prev`.
    pub fn fit(spec: &MutationKernelSpec, prev: &ParticleSystem) -> Result<Self> {
        match spec.kind {
            KernelKind::UniformSlice => Ok(Self::uniform(prev.dim)),
            KernelKind::GlobalBeta => Self::beta(&fit_global_beta(prev, spec)),
        }
    }

    pub fn beta_params(&self) -> Option<Vec<(f64, f64)>> {
        self.beta.as_ref().map(|v| v.iter().map(|b| (b.a, b.b)).collect())
    }

    fn draw_free<R: Rng + ?Sized>(&self, i: usize, rng: &mut R) -> f64 {
        match &self.beta {
            None => Open01.sample(rng),
            Some(b) => b[i].sampler.sample(rng),
        }
    }

    fn ln_base(&self, i: usize, x: f64) -> f64 {
        match &self.beta {
            None => 0.0,
            Some(b) => {
                let p = &b[i];
                p.ln_norm + (p.a - 1.0) * x.ln() + (p.b - 1.0) * (-x).ln_1p()
            }
        }
    }

    /// One proposal inside `region`; returns `(alive, attempts)`.
    pub fn propose<R: Rng + ?Sized>(&self, region: &ConstraintRegion, marginals: &[MarginalModel], rng: &mut R, out: &mut [f64]) -> (bool, usize) {
        let d = self.dim;
        for attempt in 1..=MUTATION_RETRY_CAP {
            let m = rng.random_range(0..d);
            for (i, slot) in out.iter_mut().enumerate() {
                if i != m {
                    *slot = self.draw_free(i, rng);
                }
            }
            let iv = region.feasible_interval(marginals, out, m);
            if !(iv.width > 0.0) {
                continue;
            }
            let v: f64 = Open01.sample(rng);
            out[m] = match region.mode {
                RegionMode::Tail => 1.0 - iv.width * v,
                RegionMode::Band => iv.lo + iv.width * v,
            };
            if region.contains_u(marginals, out) {
                return (true, attempt);
            }
        }
        (false, MUTATION_RETRY_CAP)
    }

    /// Mixture density `K_t(u)`; zero outside `region`.
    pub fn density(&self, region: &ConstraintRegion, marginals: &[MarginalModel], u: &[f64]) -> f64 {
        let x: Vec<f64> = u.iter().zip(marginals).map(|(&ui, f)| loss_quantile(f, ui)).collect();
        let total: f64 = x.iter().sum();
        if !region.contains_sum(total) {
            return 0.0;
        }
        let lnb: Vec<f64> = (0..self.dim).map(|i| self.ln_base(i, u[i])).collect();
        let lsum: f64 = lnb.iter().sum();
        let mut acc = 0.0;
        for m in 0..self.dim {
            let iv = region.interval_from_others(&marginals[m], total - x[m]);
            if iv.width > 0.0 {
                acc += (lsum - lnb[m]).exp() / iv.width;
            }
        }
        acc / self.dim as f64
    }
}

/// `w_j ∝ c(u_j) 1{u_j ∈ A_t} / K_t(u_j)`, normalized. Dead particles get weight 0.
pub fn weight_update(
    points: &[f64],
    alive: &[bool],
    copula: &CopulaModel,
    region: &ConstraintRegion,
    marginals: &[MarginalModel],
    kernel: &FittedKernel,
    level: usize,
) -> Result<Vec<f64>> {
    let d = copula.dim();
    let logw: Vec<f64> = alive
        .iter()
        .enumerate()
        .map(|(j, &ok)| {
            let u = &points[j * d..(j + 1) * d];
            if !ok {
                return f64::NEG_INFINITY;
            }
            let k = kernel.density(region, marginals, u);
            match copula.log_density(u) {
                Ok(lc) if k > 0.0 => lc - k.ln(),
                _ => f64::NEG_INFINITY,
            }
        })
        .collect();
    normalize_log_weights(&logw, level)
}

/// The same update through the full O(N²) mixture over previous particles,
/// for kernels whose density depends on the previous point.
#[allow(clippy::too_many_arguments)]
pub fn weight_update_general<K>(
    prev: &ParticleSystem,
    points: &[f64],
    alive: &[bool],
    copula: &CopulaModel,
    region: &ConstraintRegion,
    marginals: &[MarginalModel],
    kernel_density: K,
    level: usize,
) -> Result<Vec<f64>>
where
    K: Fn(&[f64], &[f64]) -> f64,
{
    let d = copula.dim();
    let total: f64 = prev.weights.iter().sum();
    let logw: Vec<f64> = alive
        .iter()
        .enumerate()
        .map(|(j, &ok)| {
            let u = &points[j * d..(j + 1) * d];
            if !ok || !region.contains_u(marginals, u) {
                return f64::NEG_INFINITY;
            }
            let denom: f64 = (0..prev.len()).filter(|&k| prev.weights[k] > 0.0).map(|k| prev.weights[k] / total * kernel_density(prev.point(k), u)).sum();
            match copula.log_density(u) {
                Ok(lc) if denom > 0.0 => lc - denom.ln(),
                _ => f64::NEG_INFINITY,
            }
        })
        .collect();
    normalize_log_weights(&logw, level)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct GibbsStats {
    pub updates: usize,
    pub capped: usize,
}

/// Systematic-scan Gibbs sweeps targeting `c(u) 1{u ∈ region}`; each full
/// conditional is sampled by slice sampling on its feasible interval.
pub fn gibbs_move<R: Rng + ?Sized>(
    u: &mut [f64],
    copula: &CopulaModel,
    region: &ConstraintRegion,
    marginals: &[MarginalModel],
    sweeps: usize,
    rng: &mut R,
) -> GibbsStats {
    let mut stats = GibbsStats::default();
    for _ in 0..sweeps {
        for m in 0..u.len() {
            if slice_update(u, m, copula, region, marginals, rng) {
                stats.updates += 1;
            } else {
                stats.capped += 1;
            }
        }
    }
    stats
}

/// One shrinkage slice-sampling update of `u[m]`; returns false on a null move.
fn slice_update<R: Rng + ?Sized>(u: &mut [f64], m: usize, copula: &CopulaModel, region: &ConstraintRegion, marginals: &[MarginalModel], rng: &mut R) -> bool {
    let x0 = u[m];
    let Ok(f0) = copula.log_density(u) else {
        return false;
    };
    let iv = region.feasible_interval(marginals, u, m);
    if !(iv.width > 0.0) {
        return false;
    }
    let e: f64 = Exp1.sample(rng);
    let level = f0 - e;
    // bracket in offsets from the upper end keeps resolution near 1 for Tail regions
    let (mut lo, mut hi) = (iv.lo, iv.hi);
    for _ in 0..SLICE_SHRINK_CAP {
        let v: f64 = Open01.sample(rng);
        let x1 = match region.mode {
            RegionMode::Tail if lo == iv.lo && hi == iv.hi => 1.0 - iv.width * v,
            _ => lo + (hi - lo) * v,
        };
        u[m] = x1;
        if region.contains_u(marginals, u) {
            if let Ok(f1) = copula.log_density(u) {
                if f1 > level {
                    return true;
                }
            }
        }
        if x1 < x0 {
            lo = x1;
        } else {
            hi = x1;
        }
    }
    u[m] = x0;
    false
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SmcConfig {
    pub n_particles: usize,
    pub kernel: MutationKernelSpec,
    pub move_sweeps: usize,
    pub ess_fraction: f64,
    pub resampling: ResamplingScheme,
    /// Run per-particle work on the rayon pool; results do not depend on it.
    pub parallel: bool,
    /// Copula draws allowed per particle when filling the first level.
    pub init_draw_cap: u64,
}

impl Default for SmcConfig {
    fn default() -> Self {
        SmcConfig {
            n_particles: 250,
            kernel: MutationKernelSpec::default(),
            move_sweeps: 1,
            ess_fraction: 0.5,
            resampling: ResamplingScheme::Systematic,
            parallel: false,
            init_draw_cap: 10_000_000,
        }
    }
}

impl SmcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_particles < 2 {
            return Err(Error::Config("the SMC sampler needs at least 2 particles".into()));
        }
        if !(0.0..=1.0).contains(&self.ess_fraction) {
            return Err(Error::Config("ess_fraction must lie in [0, 1]".into()));
        }
        self.kernel.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelDiagnostics {
    pub level: usize,
    pub alpha: f64,
    pub threshold: f64,
    /// ESS of the freshly weighted population, before any resampling.
    pub ess: f64,
    pub resampled: bool,
    pub dead: usize,
    pub mean_attempts: f64,
    pub slice_capped: usize,
}

#[derive(Debug, Clone)]
pub struct SmcRun {
    pub levels: Vec<ParticleSystem>,
    pub diagnostics: Vec<LevelDiagnostics>,
}

fn map_particles<T: Send, F: Fn(usize) -> T + Sync + Send>(n: usize, parallel: bool, f: F) -> Vec<T> {
    if parallel {
        (0..n).into_par_iter().map(f).collect()
    } else {
        (0..n).map(f).collect()
    }
}

/// Draws from the copula until the point lands in `region`.
pub fn rejection_draw(copula: &CopulaModel, region: &ConstraintRegion, marginals: &[MarginalModel], rng: &mut SimRng, cap: u64, out: &mut [f64]) -> Result<u64> {
    for draws in 1..=cap {
        copula.sample_into(rng, out);
        if region.contains_u(marginals, out) {
            return Ok(draws);
        }
    }
    Err(Error::DrawCapExceeded { cap, wanted: 1 })
}

/// Proposals for level `t` with their kernel; the random streams depend only on `(seed, t, j)`.
pub fn propose_level(kernel: &FittedKernel, region: &ConstraintRegion, marginals: &[MarginalModel], n: usize, t: usize, seed: u64, parallel: bool) -> (Vec<f64>, Vec<bool>, usize) {
    let d = kernel.dim;
    let out = map_particles(n, parallel, |j| {
        let mut rng = substream(seed, &[tags::MUTATE, t as u64, j as u64]);
        let mut u = vec![0.0; d];
        let (ok, attempts) = kernel.propose(region, marginals, &mut rng, &mut u);
        (u, ok, attempts)
    });
    let mut points = Vec::with_capacity(n * d);
    let mut alive = Vec::with_capacity(n);
    let mut attempts = 0;
    for (u, ok, a) in out {
        points.extend_from_slice(&u);
        alive.push(ok);
        attempts += a;
    }
    (points, alive, attempts)
}

pub fn run_smc_sampler(copula: &CopulaModel, marginals: &[MarginalModel], schedule: &LevelSchedule, config: &SmcConfig, seed: u64) -> Result<SmcRun> {
    config.validate()?;
    let d = copula.dim();
    if marginals.len() != d {
        return Err(Error::DimensionMismatch { expected: d, actual: marginals.len() });
    }
    let n = config.n_particles;
    let mut levels: Vec<ParticleSystem> = Vec::with_capacity(schedule.len());
    let mut diagnostics = Vec::with_capacity(schedule.len());

    let first = &schedule.regions[0];
    let init = map_particles(n, config.parallel, |j| {
        let mut rng = substream(seed, &[tags::INIT, j as u64]);
        let mut u = vec![0.0; d];
        rejection_draw(copula, first, marginals, &mut rng, config.init_draw_cap, &mut u).map(|draws| (u, draws))
    });
    let mut points = Vec::with_capacity(n * d);
    let mut draws = 0u64;
    for r in init {
        let (u, k) = r?;
        points.extend_from_slice(&u);
        draws += k;
    }
    levels.push(ParticleSystem::equally_weighted(d, points, 0)?);
    diagnostics.push(LevelDiagnostics {
        level: 0,
        alpha: schedule.alphas[0],
        threshold: first.threshold,
        ess: n as f64,
        resampled: false,
        dead: 0,
        mean_attempts: draws as f64 / n as f64,
        slice_capped: 0,
    });

    for t in 1..schedule.len() {
        let region = &schedule.regions[t];
        let prev = &levels[t - 1];
        let kernel = FittedKernel::fit(&config.kernel, prev)?;
        let (points, alive, attempts) = propose_level(&kernel, region, marginals, n, t, seed, config.parallel);
        let dead = alive.iter().filter(|&&a| !a).count();
        let weights = weight_update(&points, &alive, copula, region, marginals, &kernel, t)?;
        let mut system = ParticleSystem { dim: d, points, weights, level: t };
        let level_ess = system.ess()?;
        let mut resampled = false;
        let mut slice_capped = 0;
        if level_ess < config.ess_fraction * n as f64 {
            let mut rng = substream(seed, &[tags::RESAMPLE, t as u64]);
            system = resample(&system, config.resampling, &mut rng);
            let moved = map_particles(n, config.parallel, |j| {
                let mut rng = substream(seed, &[tags::MOVE, t as u64, j as u64]);
                let mut u = system.point(j).to_vec();
                let stats = gibbs_move(&mut u, copula, region, marginals, config.move_sweeps, &mut rng);
                (u, stats.capped)
            });
            let mut pts = Vec::with_capacity(n * d);
            for (u, c) in moved {
                pts.extend_from_slice(&u);
                slice_capped += c;
            }
            system.points = pts;
            resampled = true;
        }
        diagnostics.push(LevelDiagnostics {
            level: t,
            alpha: schedule.alphas[t],
            threshold: region.threshold,
            ess: level_ess,
            resampled,
            dead,
            mean_attempts: attempts as f64 / n as f64,
            slice_capped,
        });
        levels.push(system);
    }
    Ok(SmcRun { levels, diagnostics })
}

/// Self-normalized importance sampling from a single fixed kernel at level `t`.
pub fn single_level_importance_sample(
    copula: &CopulaModel,
    marginals: &[MarginalModel],
    region: &ConstraintRegion,
    kernel: &FittedKernel,
    n: usize,
    t: usize,
    seed: u64,
) -> Result<ParticleSystem> {
    let (points, alive, _) = propose_level(kernel, region, marginals, n, t, seed, false);
    let weights = weight_update(&points, &alive, copula, region, marginals, kernel, t)?;
    ParticleSystem::new(copula.dim(), points, weights, t)
}

/// Weighted mean of the aggregate loss, handy for quick checks.
pub fn weighted_loss_mean(system: &ParticleSystem, marginals: &[MarginalModel]) -> f64 {
    (0..system.len()).map(|j| system.weights[j] * loss_sum(marginals, system.point(j))).sum()
}
