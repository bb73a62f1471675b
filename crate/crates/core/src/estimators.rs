//! Allocation numbers from weighted unit-cube samples.
//!
//! A weighted sample `{u_j, W_j}` targeting the copula restricted to a
//! region estimates `E[h(X) | X ∈ G]` as `Σ_j W_j h(F⁻¹(u_j))`. The Euler
//! contributions under ES and VaR are such conditional expectations of the
//! individual losses; under the standard deviation they are covariances.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::copulas::CopulaModel;
use crate::error::{Error, Result};
use crate::marginals::{loss_quantile, MarginalModel};
use crate::rng::{substream, tags};
use crate::smc::ParticleSystem;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RiskMeasure {
    #[serde(rename = "ES")]
    Es,
    #[serde(rename = "VaR")]
    Var,
    #[serde(rename = "StdDev")]
    StdDev,
}

impl std::fmt::Display for RiskMeasure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            RiskMeasure::Es => "ES",
            RiskMeasure::Var => "VaR",
            RiskMeasure::StdDev => "StdDev",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationReport {
    pub contributions: Vec<f64>,
    pub total: f64,
    pub risk_measure: RiskMeasure,
    pub alpha: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    /// Group label per cell, set by [`hierarchical_rollup`].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub groups: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group_rollup: Option<BTreeMap<String, f64>>,
    #[serde(default)]
    pub method: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl AllocationReport {
    pub fn new(contributions: Vec<f64>, total: f64, risk_measure: RiskMeasure, alpha: f64) -> Self {
        AllocationReport { contributions, total, risk_measure, alpha, epsilon: None, groups: None, group_rollup: None, method: String::new(), seed: None }
    }

    /// Report with `total = Σ contributions`.
    pub fn full(contributions: Vec<f64>, risk_measure: RiskMeasure, alpha: f64) -> Self {
        let total = contributions.iter().sum();
        Self::new(contributions, total, risk_measure, alpha)
    }

    pub fn with_method(mut self, method: impl Into<String>, seed: Option<u64>) -> Self {
        self.method = method.into();
        self.seed = seed;
        self
    }

    pub fn dim(&self) -> usize {
        self.contributions.len()
    }

    pub fn scaled(&self, a: f64) -> Self {
        let mut out = self.clone();
        out.contributions.iter_mut().for_each(|c| *c *= a);
        out.total *= a;
        if let Some(r) = out.group_rollup.as_mut() {
            r.values_mut().for_each(|v| *v *= a);
        }
        out
    }

    pub fn allocation_gap(&self) -> f64 {
        (self.contributions.iter().sum::<f64>() - self.total).abs()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// One CSV row per cell: `cell, group, contribution, total, alpha, method, seed`.
pub fn write_reports_csv<W: Write>(reports: &[AllocationReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["cell", "group", "contribution", "total", "alpha", "method", "seed"])?;
    for r in reports {
        for (i, c) in r.contributions.iter().enumerate() {
            let group = r.groups.as_ref().map(|g| g[i].clone()).unwrap_or_default();
            let seed = r.seed.map(|s| s.to_string()).unwrap_or_default();
            w.write_record([(i + 1).to_string(), group, c.to_string(), r.total.to_string(), r.alpha.to_string(), r.method.clone(), seed])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HSpec {
    Marginal(usize),
    Sum,
}

/// `Σ_j W_j h(F⁻¹(u_j))`.
pub fn conditional_expectation(system: &ParticleSystem, marginals: &[MarginalModel], h: HSpec) -> Result<f64> {
    let total_w = checked_weight(system, marginals)?;
    let d = system.dim;
    let mut acc = 0.0;
    for (j, &w) in system.weights.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let u = system.point(j);
        let v = match h {
            HSpec::Marginal(k) if k < d => loss_quantile(&marginals[k], u[k]),
            HSpec::Marginal(k) => return Err(Error::DimensionMismatch { expected: d, actual: k + 1 }),
            HSpec::Sum => u.iter().zip(marginals).map(|(&ui, f)| loss_quantile(f, ui)).sum(),
        };
        acc += w * v;
    }
    Ok(acc / total_w)
}

/// All `d` marginal conditional expectations in one pass.
pub fn marginal_expectations(system: &ParticleSystem, marginals: &[MarginalModel]) -> Result<Vec<f64>> {
    let total_w = checked_weight(system, marginals)?;
    let d = system.dim;
    let mut acc = vec![0.0; d];
    for (j, &w) in system.weights.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        for (k, (&uk, f)) in system.point(j).iter().zip(marginals).enumerate() {
            acc[k] += w * loss_quantile(f, uk);
        }
    }
    Ok(acc.into_iter().map(|a| a / total_w).collect())
}

fn checked_weight(system: &ParticleSystem, marginals: &[MarginalModel]) -> Result<f64> {
    if marginals.len() != system.dim {
        return Err(Error::DimensionMismatch { expected: system.dim, actual: marginals.len() });
    }
    let total: f64 = system.weights.iter().sum();
    if system.is_empty() || !(total > 0.0) {
        return Err(Error::EstimateUnavailable("no particle carries weight".into()));
    }
    Ok(total)
}

pub fn euler_es_allocation(system: &ParticleSystem, marginals: &[MarginalModel], alpha: f64) -> Result<AllocationReport> {
    Ok(AllocationReport::full(marginal_expectations(system, marginals)?, RiskMeasure::Es, alpha))
}

pub fn euler_var_allocation(system: &ParticleSystem, marginals: &[MarginalModel], alpha: f64, epsilon: f64) -> Result<AllocationReport> {
    let mut r = AllocationReport::full(marginal_expectations(system, marginals)?, RiskMeasure::Var, alpha);
    r.epsilon = Some(epsilon);
    Ok(r)
}

/// `Cov(X_i, X) / sd(X)` from `n_samples` plain Monte Carlo draws.
pub fn stddev_allocation(copula: &CopulaModel, marginals: &[MarginalModel], n_samples: usize, seed: u64) -> Result<AllocationReport> {
    let d = copula.dim();
    if marginals.len() != d {
        return Err(Error::DimensionMismatch { expected: d, actual: marginals.len() });
    }
    if n_samples < 2 {
        return Err(Error::InvalidParameter("stddev allocation needs at least 2 samples".into()));
    }
    let mut rng = substream(seed, &[tags::METHOD_STDDEV]);
    let mut u = vec![0.0; d];
    let mut xs = Vec::with_capacity(n_samples * d);
    let mut sums = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        copula.sample_into(&mut rng, &mut u);
        let mut s = 0.0;
        for (ui, f) in u.iter().zip(marginals) {
            let x = loss_quantile(f, *ui);
            xs.push(x);
            s += x;
        }
        sums.push(s);
    }
    let n = n_samples as f64;
    let mean_s = sums.iter().sum::<f64>() / n;
    let var_s = sums.iter().map(|s| (s - mean_s) * (s - mean_s)).sum::<f64>() / (n - 1.0);
    if !(var_s > 0.0) || !var_s.is_finite() {
        return Err(Error::EstimateUnavailable("aggregate loss has no sample variance".into()));
    }
    let sd = var_s.sqrt();
    let contributions = (0..d)
        .map(|i| {
            let mean_i = (0..n_samples).map(|j| xs[j * d + i]).sum::<f64>() / n;
            let cov = (0..n_samples).map(|j| (xs[j * d + i] - mean_i) * (sums[j] - mean_s)).sum::<f64>() / (n - 1.0);
            cov / sd
        })
        .collect();
    // the standard deviation has no confidence level; alpha is reported as 0
    Ok(AllocationReport::new(contributions, sd, RiskMeasure::StdDev, 0.0))
}

/// Sums cell contributions into groups; `grouping[i]` labels cell `i`.
pub fn hierarchical_rollup(report: &AllocationReport, grouping: &[String]) -> Result<AllocationReport> {
    if grouping.len() != report.dim() {
        return Err(Error::InvalidParameter(format!("grouping labels {} cells but the report has {}", grouping.len(), report.dim())));
    }
    if grouping.iter().any(|g| g.is_empty()) {
        return Err(Error::InvalidParameter("every cell needs a non-empty group label".into()));
    }
    let mut rollup = BTreeMap::new();
    for (g, c) in grouping.iter().zip(&report.contributions) {
        *rollup.entry(g.clone()).or_insert(0.0) += c;
    }
    let mut out = report.clone();
    out.groups = Some(grouping.to_vec());
    out.group_rollup = Some(rollup);
    Ok(out)
}

/// Group labels from one-based cell lists, checking they partition `1..=d`.
pub fn grouping_from_cells(groups: &BTreeMap<String, Vec<usize>>, d: usize) -> Result<Vec<String>> {
    let mut labels: Vec<Option<String>> = vec![None; d];
    for (name, cells) in groups {
        for &c in cells {
            if c == 0 || c > d {
                return Err(Error::InvalidParameter(format!("group {name} names cell {c}, outside 1..={d}")));
            }
            if labels[c - 1].replace(name.clone()).is_some() {
                return Err(Error::InvalidParameter(format!("cell {c} belongs to more than one group")));
            }
        }
    }
    labels.into_iter().enumerate().map(|(i, l)| l.ok_or_else(|| Error::InvalidParameter(format!("cell {} is in no group", i + 1)))).collect()
}
