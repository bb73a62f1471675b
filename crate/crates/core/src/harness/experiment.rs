use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use super::config::{AllocationMode, ExperimentConfig, Method, Model};
use super::metrics::{compute_metrics, curves, read_rows, write_rows, MetricsReport, RunRow, TimingRow};
use crate::baselines::{is_ach_multi, mc_rejection_multi};
use crate::error::{Error, Result};
use crate::estimators::{euler_es_allocation, euler_var_allocation, hierarchical_rollup, stddev_allocation, AllocationReport, RiskMeasure};
use crate::geometry::{curve_point, is_convex_at, ConstraintRegion};
use crate::quantiles::{build_band_schedule, build_level_schedule, load_or_build, QuantileTable};
use crate::rng::{derive_seed, tags};
use crate::smc::run_smc_sampler;

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub rows: Vec<RunRow>,
    pub timings: Vec<TimingRow>,
    pub metrics: MetricsReport,
    pub quantiles: QuantileTable,
}

impl ExperimentOutput {
    /// Writes `runs.csv`, `timings.csv`, `curves.csv` and `metrics.json`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        write_rows(&self.rows, std::fs::File::create(dir.join("runs.csv"))?)?;
        write_rows(&self.timings, std::fs::File::create(dir.join("timings.csv"))?)?;
        write_rows(&curves(&self.metrics), std::fs::File::create(dir.join("curves.csv"))?)?;
        std::fs::write(dir.join("metrics.json"), serde_json::to_string_pretty(&self.metrics)?)?;
        Ok(())
    }
}

/// Loads the persisted quantile table or estimates and saves a new one.
pub fn prepare_quantiles(cfg: &ExperimentConfig, model: &Model) -> Result<(QuantileTable, bool)> {
    let q = &cfg.quantiles;
    load_or_build(&cfg.quantile_path(), &model.copula, &model.marginals, &cfg.alphas, q.n_per_run, q.n_runs, cfg.quantile_seed())
}

fn target_region(cfg: &ExperimentConfig, b: f64) -> Result<ConstraintRegion> {
    match cfg.allocation {
        AllocationMode::Es => Ok(ConstraintRegion::tail(b)),
        AllocationMode::Var => ConstraintRegion::band(b, cfg.epsilon_rel * b.abs()),
    }
}

/// Row labels for one report: cells `1..d`, then groups, then the total.
fn labels(report: &AllocationReport) -> Vec<(String, f64)> {
    let mut out: Vec<(String, f64)> = report.contributions.iter().enumerate().map(|(i, c)| ((i + 1).to_string(), *c)).collect();
    if let Some(g) = &report.group_rollup {
        out.extend(g.iter().map(|(k, v)| (k.clone(), *v)));
    }
    out.push((report.risk_measure.to_string(), report.total));
    out
}

fn target_labels(d: usize, model: &Model, mode: AllocationMode) -> Vec<String> {
    let mut out: Vec<String> = (1..=d).map(|i| i.to_string()).collect();
    if let Some(g) = &model.grouping {
        let mut names: Vec<String> = g.clone();
        names.sort();
        names.dedup();
        out.extend(names);
    }
    out.push(match mode {
        AllocationMode::Es => RiskMeasure::Es.to_string(),
        AllocationMode::Var => RiskMeasure::Var.to_string(),
    });
    out
}

struct Outcome {
    report: std::result::Result<AllocationReport, String>,
    n: usize,
    levels: Option<usize>,
    draws: Option<f64>,
    n_tilde: Option<usize>,
}

impl Outcome {
    fn failed(e: &Error, n: usize) -> Self {
        Outcome { report: Err(e.to_string()), n, levels: None, draws: None, n_tilde: None }
    }
}

fn run_method(cfg: &ExperimentConfig, model: &Model, table: &QuantileTable, targets: &[f64], method: Method, seed: u64) -> Vec<Outcome> {
    let (copula, marginals) = (&model.copula, &model.marginals[..]);
    let regions: Result<Vec<ConstraintRegion>> = targets.iter().map(|&a| target_region(cfg, table.threshold(a)?)).collect();
    let regions = match regions {
        Ok(r) => r,
        Err(e) => return targets.iter().map(|_| Outcome::failed(&e, 0)).collect(),
    };
    match method {
        Method::Mc => match mc_rejection_multi(copula, marginals, &regions, targets, cfg.n_mc, seed, cfg.mc_draw_cap) {
            Ok(est) => est
                .into_iter()
                .map(|e| Outcome { report: Ok(e.report), n: cfg.n_mc, levels: None, draws: Some(e.draws as f64), n_tilde: None })
                .collect(),
            Err(e) => targets.iter().map(|_| Outcome::failed(&e, cfg.n_mc)).collect(),
        },
        Method::IsAch => match is_ach_multi(copula, marginals, &regions, targets, &cfg.mixing, cfg.n_is, seed) {
            Ok(est) => est
                .into_iter()
                .map(|e| Outcome {
                    report: e.report.ok_or_else(|| "unavailable: no proposal fell in the region".to_string()),
                    n: cfg.n_is,
                    levels: None,
                    draws: Some(e.diagnostics.mean_draws),
                    n_tilde: Some(e.diagnostics.n_tilde),
                })
                .collect(),
            Err(e) => targets.iter().map(|_| Outcome::failed(&e, cfg.n_is)).collect(),
        },
        Method::Smc => {
            let n = cfg.smc.n_particles;
            match cfg.allocation {
                AllocationMode::Es => smc_es(cfg, model, table, targets, seed),
                AllocationMode::Var => targets
                    .iter()
                    .map(|&a| {
                        let run = build_band_schedule(table, a, cfg.epsilon_rel).and_then(|s| {
                            let r = run_smc_sampler(copula, marginals, &s, &cfg.smc, seed)?;
                            let last = r.levels.last().expect("nonempty schedule");
                            let rep = euler_var_allocation(last, marginals, a, s.target().epsilon)?;
                            Ok((rep, s.len()))
                        });
                        match run {
                            Ok((rep, t)) => Outcome { report: Ok(rep), n, levels: Some(t), draws: None, n_tilde: None },
                            Err(e) => Outcome::failed(&e, n),
                        }
                    })
                    .collect(),
            }
        }
    }
}

/// One sampler run up to the largest target; smaller targets are read off
/// the intermediate levels, with cost counted up to their own level.
fn smc_es(cfg: &ExperimentConfig, model: &Model, table: &QuantileTable, targets: &[f64], seed: u64) -> Vec<Outcome> {
    let n = cfg.smc.n_particles;
    let top = targets.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let run = build_level_schedule(table, top).and_then(|s| run_smc_sampler(&model.copula, &model.marginals, &s, &cfg.smc, seed));
    let run = match run {
        Ok(r) => r,
        Err(e) => return targets.iter().map(|_| Outcome::failed(&e, n)).collect(),
    };
    targets
        .iter()
        .map(|&a| {
            let res = table.index_of(a).and_then(|idx| Ok((euler_es_allocation(&run.levels[idx], &model.marginals, a)?, idx + 1)));
            match res {
                Ok((rep, t)) => Outcome { report: Ok(rep), n, levels: Some(t), draws: None, n_tilde: None },
                Err(e) => Outcome::failed(&e, n),
            }
        })
        .collect()
}

fn finish(report: AllocationReport, model: &Model, method: Method, seed: u64) -> Result<AllocationReport> {
    let report = report.with_method(method.name(), Some(seed));
    match &model.grouping {
        Some(g) => hierarchical_rollup(&report, g),
        None => Ok(report),
    }
}

fn repetition(cfg: &ExperimentConfig, model: &Model, table: &QuantileTable, targets: &[f64], rep: usize) -> (Vec<RunRow>, Vec<TimingRow>) {
    let labels_all = target_labels(model.copula.dim(), model, cfg.allocation);
    let mut rows = Vec::new();
    let mut timings = Vec::new();
    for &method in &cfg.methods {
        let seed = derive_seed(cfg.seed, &[rep as u64, method.tag()]);
        let start = Instant::now();
        let outcomes = run_method(cfg, model, table, targets, method, seed);
        timings.push(TimingRow { rep, method, seconds: start.elapsed().as_secs_f64() });
        for (&alpha, out) in targets.iter().zip(outcomes) {
            let base = RunRow { rep, method, alpha, target: String::new(), estimate: None, status: String::new(), n: out.n, levels: out.levels, draws: out.draws, n_tilde: out.n_tilde };
            match out.report.and_then(|r| finish(r, model, method, seed).map_err(|e| e.to_string())) {
                Ok(report) => {
                    for (target, v) in labels(&report) {
                        rows.push(RunRow { target, estimate: Some(v), status: "ok".into(), ..base.clone() });
                    }
                }
                Err(msg) => {
                    let status = if msg.starts_with("unavailable") { msg } else { format!("error: {msg}") };
                    for target in &labels_all {
                        rows.push(RunRow { target: target.clone(), status: status.clone(), ..base.clone() });
                    }
                }
            }
        }
    }
    (rows, timings)
}

/// Runs every repetition for every method with per-repetition derived seeds.
/// The result does not depend on the number of threads.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let model = cfg.validate()?;
    let (table, _) = prepare_quantiles(cfg, &model)?;
    run_with_table(cfg, &model, table)
}

pub fn run_with_table(cfg: &ExperimentConfig, model: &Model, table: QuantileTable) -> Result<ExperimentOutput> {
    let targets = cfg.sorted_targets();
    for &a in &targets {
        table.index_of(a)?;
    }
    let work = |rep: usize| repetition(cfg, model, &table, &targets, rep);
    let per_rep: Vec<(Vec<RunRow>, Vec<TimingRow>)> = match cfg.threads {
        Some(k) => {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(k).build().map_err(|e| Error::Config(e.to_string()))?;
            pool.install(|| (0..cfg.n_repetitions).into_par_iter().map(work).collect())
        }
        None => (0..cfg.n_repetitions).into_par_iter().map(work).collect(),
    };
    let mut rows = Vec::new();
    let mut timings = Vec::new();
    for (r, t) in per_rep {
        rows.extend(r);
        timings.extend(t);
    }
    let mut metrics = compute_metrics(&rows, &timings);
    metrics.meta.insert("name".into(), cfg.name.clone());
    metrics.meta.insert("seed".into(), cfg.seed.to_string());
    metrics.meta.insert("quantile_fingerprint".into(), table.fingerprint.clone());
    Ok(ExperimentOutput { rows, timings, metrics, quantiles: table })
}

/// Re-aggregates `runs.csv` (and `timings.csv` when present) in `dir`.
pub fn report_from_dir(dir: &Path) -> Result<MetricsReport> {
    let rows: Vec<RunRow> = read_rows(std::fs::File::open(dir.join("runs.csv"))?)?;
    let tpath = dir.join("timings.csv");
    let timings: Vec<TimingRow> = if tpath.exists() { read_rows(std::fs::File::open(tpath)?)? } else { Vec::new() };
    Ok(compute_metrics(&rows, &timings))
}

/// Methods for a single allocation, including the standard-deviation principle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AllocateMethod {
    Run(Method),
    StdDev,
}

impl std::str::FromStr for AllocateMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "stddev" => Ok(AllocateMethod::StdDev),
            other => other.parse().map(AllocateMethod::Run),
        }
    }
}

/// One allocation at `alpha` with the experiment's model and sizes.
pub fn allocate(cfg: &ExperimentConfig, method: AllocateMethod, alpha: f64, seed: u64) -> Result<AllocationReport> {
    let model = cfg.validate()?;
    let report = match method {
        AllocateMethod::StdDev => {
            let s = derive_seed(seed, &[tags::METHOD_STDDEV]);
            stddev_allocation(&model.copula, &model.marginals, cfg.n_mc, s)?.with_method("stddev", Some(seed))
        }
        AllocateMethod::Run(m) => {
            let (table, _) = prepare_quantiles(cfg, &model)?;
            let s = derive_seed(seed, &[0, m.tag()]);
            let out = run_method(cfg, &model, &table, &[alpha], m, s).remove(0);
            out.report.map_err(Error::EstimateUnavailable)?.with_method(m.name(), Some(seed))
        }
    };
    match &model.grouping {
        Some(g) => hierarchical_rollup(&report, g),
        None => Ok(report),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvaturePoint {
    /// `u_1, ..., u_{d-1}`.
    pub u: Vec<f64>,
    /// `u_d` on the surface `Σ x_i = B`.
    pub u_last: f64,
    pub convex: bool,
}

/// Walks `u_1` over a grid in `(0, 1)` with the other free coordinates held at
/// `fixed`, keeping points where the surface is defined.
pub fn curvature_scan(model: &Model, b: f64, n_points: usize, fixed: f64) -> Result<Vec<CurvaturePoint>> {
    let d = model.marginals.len();
    if d < 2 {
        return Err(Error::InvalidParameter("curvature needs at least two risks".into()));
    }
    if n_points == 0 || !(fixed > 0.0 && fixed < 1.0) {
        return Err(Error::InvalidParameter("need a positive point count and a fixed level in (0, 1)".into()));
    }
    let mut out = Vec::new();
    for i in 1..=n_points {
        let mut u = vec![fixed; d - 1];
        u[0] = i as f64 / (n_points + 1) as f64;
        let Ok(u_last) = curve_point(&model.marginals, b, &u) else { continue };
        if !(u_last > 0.0 && u_last < 1.0) {
            continue;
        }
        let convex = is_convex_at(&model.marginals, b, &u)?;
        out.push(CurvaturePoint { u, u_last, convex });
    }
    Ok(out)
}
