//! Aggregate-loss quantiles that define the level schedules.
//!
//! Each run draws `n_per_run` copula points and takes the type-1 empirical
//! quantile of `Σ F_i⁻¹(u_i)` (order statistic `⌈α n⌉`); the table holds the
//! mean over runs. Tables are persisted as JSON under a fingerprint of the
//! model so later experiments can reuse them.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::copulas::CopulaModel;
use crate::error::{Error, Result};
use crate::geometry::{loss_sum, ConstraintRegion, LevelSchedule};
use crate::marginals::MarginalModel;
use crate::rng::{substream, tags};

/// Intermediate levels used by the case studies.
pub const PAPER_GRID: [f64; 16] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.95, 0.99, 0.995, 0.999, 0.9995, 0.9999, 0.99995];

pub const ALPHA_MATCH_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileTable {
    pub fingerprint: String,
    pub alphas: Vec<f64>,
    pub var: Vec<f64>,
    pub n_per_run: usize,
    pub n_runs: usize,
    pub seed: u64,
    /// Across-run standard deviation of each entry.
    #[serde(default)]
    pub run_sd: Vec<f64>,
}

/// SHA-256 of the canonical JSON of the copula and marginals.
pub fn fingerprint(copula: &CopulaModel, marginals: &[MarginalModel]) -> String {
    let canonical = serde_json::to_string(&(copula.to_spec(), marginals)).expect("model specs serialize");
    Sha256::digest(canonical.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

/// Order statistic `⌈α n⌉` (one-based) of an ascending slice.
pub fn type1_quantile(sorted: &[f64], alpha: f64) -> f64 {
    let n = sorted.len();
    let k = ((alpha * n as f64).ceil() as usize).clamp(1, n);
    sorted[k - 1]
}

fn check_alphas(alphas: &[f64]) -> Result<()> {
    if alphas.is_empty() || alphas.iter().any(|a| !(*a > 0.0 && *a < 1.0)) || alphas.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidParameter("quantile levels must be strictly increasing inside (0, 1)".into()));
    }
    Ok(())
}

pub fn estimate_quantiles(copula: &CopulaModel, marginals: &[MarginalModel], alphas: &[f64], n_per_run: usize, n_runs: usize, seed: u64) -> Result<QuantileTable> {
    check_alphas(alphas)?;
    if n_per_run == 0 || n_runs == 0 {
        return Err(Error::InvalidParameter("quantile runs need positive sizes".into()));
    }
    if marginals.len() != copula.dim() {
        return Err(Error::DimensionMismatch { expected: copula.dim(), actual: marginals.len() });
    }
    let per_run: Vec<Vec<f64>> = (0..n_runs)
        .into_par_iter()
        .map(|r| {
            let mut rng = substream(seed, &[tags::QUANTILES, r as u64]);
            let mut u = vec![0.0; copula.dim()];
            let mut sums: Vec<f64> = (0..n_per_run)
                .map(|_| {
                    copula.sample_into(&mut rng, &mut u);
                    loss_sum(marginals, &u)
                })
                .collect();
            sums.sort_unstable_by(f64::total_cmp);
            alphas.iter().map(|&a| type1_quantile(&sums, a)).collect()
        })
        .collect();
    let n = n_runs as f64;
    let var: Vec<f64> = (0..alphas.len()).map(|i| per_run.iter().map(|q| q[i]).sum::<f64>() / n).collect();
    let run_sd = (0..alphas.len())
        .map(|i| if n_runs < 2 { 0.0 } else { (per_run.iter().map(|q| (q[i] - var[i]).powi(2)).sum::<f64>() / (n - 1.0)).sqrt() })
        .collect();
    if var.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidParameter("estimated quantiles are not strictly increasing; increase n_per_run".into()));
    }
    Ok(QuantileTable { fingerprint: fingerprint(copula, marginals), alphas: alphas.to_vec(), var, n_per_run, n_runs, seed, run_sd })
}

impl QuantileTable {
    pub fn index_of(&self, alpha: f64) -> Result<usize> {
        self.alphas.iter().position(|a| (a - alpha).abs() <= ALPHA_MATCH_TOL).ok_or(Error::UnknownLevel(alpha))
    }

    pub fn threshold(&self, alpha: f64) -> Result<f64> {
        Ok(self.var[self.index_of(alpha)?])
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    /// True when this table was built for the same model and protocol and covers `alphas`.
    pub fn matches(&self, fingerprint: &str, alphas: &[f64], n_per_run: usize, n_runs: usize, seed: u64) -> bool {
        self.fingerprint == fingerprint && self.n_per_run == n_per_run && self.n_runs == n_runs && self.seed == seed && alphas.iter().all(|&a| self.index_of(a).is_ok())
    }
}

/// Reuses the table at `path` when it matches, otherwise builds and saves one.
/// The flag is true on reuse.
pub fn load_or_build(
    path: &Path,
    copula: &CopulaModel,
    marginals: &[MarginalModel],
    alphas: &[f64],
    n_per_run: usize,
    n_runs: usize,
    seed: u64,
) -> Result<(QuantileTable, bool)> {
    let fp = fingerprint(copula, marginals);
    if path.exists() {
        match QuantileTable::load(path) {
            Ok(t) if t.matches(&fp, alphas, n_per_run, n_runs, seed) => {
                log::info!("reusing quantile table {} ({})", path.display(), &fp[..12]);
                return Ok((t, true));
            }
            Ok(_) => log::info!("quantile table {} is for another model or protocol; rebuilding", path.display()),
            Err(e) => log::warn!("ignoring unreadable quantile table {}: {e}", path.display()),
        }
    }
    let table = estimate_quantiles(copula, marginals, alphas, n_per_run, n_runs, seed)?;
    table.save(path)?;
    log::info!("wrote quantile table {}", path.display());
    Ok((table, false))
}

/// Tail levels at every grid point up to and including `target_alpha`.
pub fn build_level_schedule(table: &QuantileTable, target_alpha: f64) -> Result<LevelSchedule> {
    let last = table.index_of(target_alpha)?;
    LevelSchedule::tail(table.alphas[..=last].to_vec(), &table.var[..=last])
}

/// Tail levels strictly below `B - ε`, then the Band `|ΣX - B| ≤ ε` at `B = VaR_α`,
/// with `ε = epsilon_rel · B`.
pub fn build_band_schedule(table: &QuantileTable, target_alpha: f64, epsilon_rel: f64) -> Result<LevelSchedule> {
    let idx = table.index_of(target_alpha)?;
    let b = table.var[idx];
    let band = ConstraintRegion::band(b, epsilon_rel * b.abs())?;
    let mut alphas = Vec::new();
    let mut regions = Vec::new();
    for i in 0..idx {
        if table.var[i] < b - band.epsilon {
            alphas.push(table.alphas[i]);
            regions.push(ConstraintRegion::tail(table.var[i]));
        }
    }
    alphas.push(target_alpha);
    regions.push(band);
    LevelSchedule::new(alphas, regions)
}
