//! Reference estimators: rejection Monte Carlo and the mixture importance
//! sampler over conditional copulas (IS-ACH).
//!
//! The IS proposal is `F_V = ∫ C^{[λ]} dF_Λ`, where `C^{[λ]}` is the copula
//! conditioned on `max u_i > λ`. For a discrete `F_Λ = Σ p_k δ_{λ_k}` its
//! density is `Σ_k p_k c(u) 1{max u > λ_k} / (1 - C(λ_k 1))`, so the
//! weight against `c` is
//!
//! ```text
//! w(u) = [ Σ_k p_k 1{max u > λ_k} / (1 - C(λ_k 1)) ]⁻¹
//! ```
//!
//! which needs no copula density. Both baselines draw copula points in order
//! from the same seeded stream, so with `B = 0` and all mixing mass at 0 they
//! produce identical estimates.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::copulas::CopulaModel;
use crate::error::{Error, Result};
use crate::estimators::{AllocationReport, RiskMeasure};
use crate::geometry::{ConstraintRegion, RegionMode};
use crate::marginals::{loss_quantile, MarginalModel};
use crate::rng::{substream, tags};

pub const DEFAULT_DRAW_CAP: u64 = 1_000_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub lambda: f64,
    pub p: f64,
}

/// Discrete mixing law for the conditioning level `Λ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Atom>", into = "Vec<Atom>")]
pub struct MixingDistribution {
    atoms: Vec<Atom>,
}

impl TryFrom<Vec<Atom>> for MixingDistribution {
    type Error = Error;

    fn try_from(atoms: Vec<Atom>) -> Result<Self> {
        MixingDistribution::new(atoms)
    }
}

impl From<MixingDistribution> for Vec<Atom> {
    fn from(m: MixingDistribution) -> Self {
        m.atoms
    }
}

impl MixingDistribution {
    /// Sorts the atoms and normalizes the masses; an atom at 0 with positive mass is required.
    pub fn new(mut atoms: Vec<Atom>) -> Result<Self> {
        if atoms.iter().any(|a| !(0.0..1.0).contains(&a.lambda) || !(a.p > 0.0 && a.p.is_finite())) {
            return Err(Error::InvalidParameter("mixing atoms need lambda in [0, 1) and positive finite mass".into()));
        }
        atoms.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
        if atoms.windows(2).any(|w| w[0].lambda == w[1].lambda) {
            return Err(Error::InvalidParameter("mixing atoms must be distinct".into()));
        }
        if atoms.first().map(|a| a.lambda) != Some(0.0) {
            return Err(Error::InvalidParameter("the mixing distribution needs an atom at 0 with positive mass".into()));
        }
        let total: f64 = atoms.iter().map(|a| a.p).sum();
        atoms.iter_mut().for_each(|a| a.p /= total);
        Ok(MixingDistribution { atoms })
    }

    pub fn point_mass_at_zero() -> Self {
        MixingDistribution { atoms: vec![Atom { lambda: 0.0, p: 1.0 }] }
    }

    /// `λ_k = 1 - 2^{-k}` for `k = 1..=n` plus `λ_0 = 0`, all with equal mass.
    pub fn dyadic(n: u32) -> Self {
        let atoms = (0..=n).map(|k| Atom { lambda: if k == 0 { 0.0 } else { 1.0 - 0.5f64.powi(k as i32) }, p: 1.0 / (n as f64 + 1.0) }).collect();
        MixingDistribution { atoms }
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn p0(&self) -> f64 {
        self.atoms[0].p
    }

    fn pick<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let x: f64 = rng.random();
        let mut acc = 0.0;
        for (k, a) in self.atoms.iter().enumerate() {
            acc += a.p;
            if x < acc {
                return k;
            }
        }
        self.atoms.len() - 1
    }
}

impl Default for MixingDistribution {
    fn default() -> Self {
        Self::dyadic(20)
    }
}

/// The mixing law bound to a copula: `1 / (1 - C(λ_k 1))` per atom.
#[derive(Debug, Clone)]
pub struct AchProposal<'a> {
    copula: &'a CopulaModel,
    mixing: &'a MixingDistribution,
    inv_exceed: Vec<f64>,
}

impl<'a> AchProposal<'a> {
    pub fn new(copula: &'a CopulaModel, mixing: &'a MixingDistribution) -> Self {
        let inv_exceed = mixing.atoms.iter().map(|a| 1.0 / (1.0 - copula.diagonal(a.lambda))).collect();
        AchProposal { copula, mixing, inv_exceed }
    }

    /// `E[N_V] = Σ_k p_k / (1 - C(λ_k 1))`.
    pub fn expected_draws(&self) -> f64 {
        self.mixing.atoms.iter().zip(&self.inv_exceed).map(|(a, r)| a.p * r).sum()
    }

    /// One draw from `F_V` into `out`; returns the level used and the number of copula draws.
    pub fn sample<R: Rng + ?Sized, S: Rng + ?Sized>(&self, mixing_rng: &mut R, draw_rng: &mut S, out: &mut [f64]) -> (f64, u64) {
        let lambda = self.mixing.atoms[self.mixing.pick(mixing_rng)].lambda;
        let mut draws = 0;
        loop {
            self.copula.sample_into(draw_rng, out);
            draws += 1;
            if out.iter().copied().fold(f64::NEG_INFINITY, f64::max) > lambda {
                return (lambda, draws);
            }
        }
    }

    pub fn weight(&self, u: &[f64]) -> f64 {
        let m = u.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let inv: f64 = self.mixing.atoms.iter().zip(&self.inv_exceed).filter(|(a, _)| m > a.lambda).map(|(a, r)| a.p * r).sum();
        1.0 / inv
    }
}

/// Single IS-ACH draw from a fresh stream pair derived from `seed`.
pub fn ach_sample(copula: &CopulaModel, mixing: &MixingDistribution, seed: u64) -> (Vec<f64>, f64, u64) {
    let prop = AchProposal::new(copula, mixing);
    let mut u = vec![0.0; copula.dim()];
    let (lambda, draws) = prop.sample(&mut substream(seed, &[tags::MIXING]), &mut substream(seed, &[tags::DRAWS]), &mut u);
    (u, lambda, draws)
}

pub fn ach_weight(copula: &CopulaModel, mixing: &MixingDistribution, u: &[f64]) -> f64 {
    AchProposal::new(copula, mixing).weight(u)
}

#[derive(Debug, Clone, PartialEq)]
pub struct McEstimate {
    pub report: AllocationReport,
    /// Copula draws used until the `n`-th acceptance.
    pub draws: u64,
}

/// Rejection Monte Carlo for several regions in one pass: copula points are
/// drawn until every region has `n_accept` hits, and each region averages
/// its own first `n_accept` hits.
pub fn mc_rejection_multi(
    copula: &CopulaModel,
    marginals: &[MarginalModel],
    regions: &[ConstraintRegion],
    alphas: &[f64],
    n_accept: usize,
    seed: u64,
    draw_cap: u64,
) -> Result<Vec<McEstimate>> {
    let d = copula.dim();
    if marginals.len() != d {
        return Err(Error::DimensionMismatch { expected: d, actual: marginals.len() });
    }
    if regions.len() != alphas.len() || n_accept == 0 {
        return Err(Error::InvalidParameter("one alpha per region and a positive acceptance target are required".into()));
    }
    let k = regions.len();
    let mut sums = vec![vec![0.0; d]; k];
    let mut hits = vec![0usize; k];
    let mut done_at = vec![0u64; k];
    let mut remaining = k;
    let mut rng = substream(seed, &[tags::DRAWS]);
    let mut u = vec![0.0; d];
    let mut x = vec![0.0; d];
    let mut draws = 0u64;
    while remaining > 0 {
        if draws >= draw_cap {
            return Err(Error::DrawCapExceeded { cap: draw_cap, wanted: n_accept });
        }
        copula.sample_into(&mut rng, &mut u);
        draws += 1;
        let mut s = 0.0;
        for i in 0..d {
            x[i] = loss_quantile(&marginals[i], u[i]);
            s += x[i];
        }
        for t in 0..k {
            if hits[t] < n_accept && regions[t].contains_sum(s) {
                sums[t].iter_mut().zip(&x).for_each(|(a, xi)| *a += xi);
                hits[t] += 1;
                if hits[t] == n_accept {
                    done_at[t] = draws;
                    remaining -= 1;
                }
            }
        }
    }
    Ok((0..k)
        .map(|t| {
            let contributions = sums[t].iter().map(|s| s / n_accept as f64).collect();
            McEstimate { report: tag_report(contributions, &regions[t], alphas[t], "mc", seed), draws: done_at[t] }
        })
        .collect())
}

pub fn mc_rejection_estimate(
    copula: &CopulaModel,
    marginals: &[MarginalModel],
    region: &ConstraintRegion,
    alpha: f64,
    n_accept: usize,
    seed: u64,
    draw_cap: u64,
) -> Result<McEstimate> {
    Ok(mc_rejection_multi(copula, marginals, std::slice::from_ref(region), &[alpha], n_accept, seed, draw_cap)?.remove(0))
}

fn tag_report(contributions: Vec<f64>, region: &ConstraintRegion, alpha: f64, method: &str, seed: u64) -> AllocationReport {
    let measure = match region.mode {
        RegionMode::Tail => RiskMeasure::Es,
        RegionMode::Band => RiskMeasure::Var,
    };
    let mut r = AllocationReport::full(contributions, measure, alpha).with_method(method, Some(seed));
    if region.mode == RegionMode::Band {
        r.epsilon = Some(region.epsilon);
    }
    r
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IsDiagnostics {
    pub n_proposal: usize,
    /// `Ñ`: proposals whose aggregate loss lies in the region.
    pub n_tilde: usize,
    /// Observed mean copula draws per proposal.
    pub mean_draws: f64,
    pub expected_draws: f64,
    /// `Ñ / (Ê[N_V] N_IS)`.
    pub p_is: f64,
    /// Unnormalized IS estimate of the stop-loss `E[(ΣX - B)^+]`, accumulated over the region.
    pub stop_loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IsEstimate {
    pub report: Option<AllocationReport>,
    pub diagnostics: IsDiagnostics,
}

/// IS-ACH for several regions from one proposal sample; a region with
/// `Ñ = 0` gets no report.
pub fn is_ach_multi(
    copula: &CopulaModel,
    marginals: &[MarginalModel],
    regions: &[ConstraintRegion],
    alphas: &[f64],
    mixing: &MixingDistribution,
    n_proposal: usize,
    seed: u64,
) -> Result<Vec<IsEstimate>> {
    let d = copula.dim();
    if marginals.len() != d {
        return Err(Error::DimensionMismatch { expected: d, actual: marginals.len() });
    }
    if regions.len() != alphas.len() || n_proposal == 0 {
        return Err(Error::InvalidParameter("one alpha per region and a positive proposal count are required".into()));
    }
    let prop = AchProposal::new(copula, mixing);
    let mut mix_rng = substream(seed, &[tags::MIXING]);
    let mut draw_rng = substream(seed, &[tags::DRAWS]);
    let k = regions.len();
    let mut num = vec![vec![0.0; d]; k];
    let mut den = vec![0.0; k];
    let mut n_tilde = vec![0usize; k];
    let mut stop = vec![0.0; k];
    let mut total_draws = 0u64;
    let mut u = vec![0.0; d];
    let mut x = vec![0.0; d];
    for _ in 0..n_proposal {
        let (_, draws) = prop.sample(&mut mix_rng, &mut draw_rng, &mut u);
        total_draws += draws;
        let w = prop.weight(&u);
        let mut s = 0.0;
        for i in 0..d {
            x[i] = loss_quantile(&marginals[i], u[i]);
            s += x[i];
        }
        for t in 0..k {
            if regions[t].contains_sum(s) {
                num[t].iter_mut().zip(&x).for_each(|(a, xi)| *a += w * xi);
                den[t] += w;
                n_tilde[t] += 1;
                stop[t] += w * (s - regions[t].threshold).max(0.0);
            }
        }
    }
    let mean_draws = total_draws as f64 / n_proposal as f64;
    let expected_draws = prop.expected_draws();
    Ok((0..k)
        .map(|t| {
            let report = (n_tilde[t] > 0).then(|| {
                let contributions = num[t].iter().map(|a| a / den[t]).collect();
                tag_report(contributions, &regions[t], alphas[t], "is_ach", seed)
            });
            IsEstimate {
                report,
                diagnostics: IsDiagnostics {
                    n_proposal,
                    n_tilde: n_tilde[t],
                    mean_draws,
                    expected_draws,
                    p_is: n_tilde[t] as f64 / (mean_draws * n_proposal as f64),
                    stop_loss: stop[t] / n_proposal as f64,
                },
            }
        })
        .collect())
}

pub fn is_ach_estimate(
    copula: &CopulaModel,
    marginals: &[MarginalModel],
    region: &ConstraintRegion,
    alpha: f64,
    mixing: &MixingDistribution,
    n_proposal: usize,
    seed: u64,
) -> Result<(AllocationReport, IsDiagnostics)> {
    let est = is_ach_multi(copula, marginals, std::slice::from_ref(region), &[alpha], mixing, n_proposal, seed)?.remove(0);
    match est.report {
        Some(r) => Ok((r, est.diagnostics)),
        None => Err(Error::EstimateUnavailable(format!("no IS proposal fell in the region at B = {}", region.threshold))),
    }
}
