use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::config::Method;
use crate::error::{Error, Result};

/// One estimate from one repetition. `n` is the method's sample size
/// (accepted draws, particles or proposals); `levels` is the number of SMC
/// levels spent; `draws` is the copula draws for MC and the mean draws per
/// proposal for IS.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub rep: usize,
    pub method: Method,
    pub alpha: f64,
    pub target: String,
    pub estimate: Option<f64>,
    pub status: String,
    pub n: usize,
    pub levels: Option<usize>,
    pub draws: Option<f64>,
    pub n_tilde: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub rep: usize,
    pub method: Method,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsEntry {
    pub method: Method,
    pub alpha: f64,
    pub target: String,
    pub n_ok: usize,
    pub n_failed: usize,
    pub mean: Option<f64>,
    pub variance: Option<f64>,
    /// `(mean - mean_MC) / mean_MC`; absent for MC itself or without an MC baseline.
    pub relative_bias: Option<f64>,
    /// MC variance scaled by its mean draw count over the method's variance scaled by its cost.
    pub variance_reduction: Option<f64>,
    /// Same ratio with the MC side scaled by its accepted sample size.
    pub variance_reduction_accepted: Option<f64>,
    /// Mean copula draws (MC), `T · N` (SMC) or `Ê[N_V] · N` (IS) per repetition.
    pub cost: Option<f64>,
    pub levels: Option<usize>,
    pub mean_draws: Option<f64>,
    pub p_is: Option<f64>,
    pub mean_seconds: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub entries: Vec<MetricsEntry>,
    pub failures: BTreeMap<String, usize>,
    pub n_repetitions: usize,
    #[serde(default)]
    pub meta: BTreeMap<String, String>,
}

impl MetricsReport {
    pub fn entry(&self, method: Method, alpha: f64, target: &str) -> Option<&MetricsEntry> {
        self.entries.iter().find(|e| e.method == method && (e.alpha - alpha).abs() < 1e-12 && e.target == target)
    }
}

/// `n_mc · var_mc / (cost · var)`.
pub fn variance_reduction(n_mc: f64, var_mc: f64, cost: f64, var: f64) -> Option<f64> {
    let vr = n_mc * var_mc / (cost * var);
    (vr.is_finite() && vr > 0.0).then_some(vr)
}

pub fn relative_bias(estimate: f64, reference: f64) -> Option<f64> {
    let rb = (estimate - reference) / reference;
    rb.is_finite().then_some(rb)
}

fn mean_var(xs: &[f64]) -> (Option<f64>, Option<f64>) {
    let n = xs.len();
    if n == 0 {
        return (None, None);
    }
    let m = xs.iter().sum::<f64>() / n as f64;
    let v = (n >= 2).then(|| xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n as f64 - 1.0));
    (Some(m), v)
}

fn mean_of(xs: impl Iterator<Item = f64>) -> Option<f64> {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| s / n as f64)
}

type Key = (Method, u64, String);

fn key(r: &RunRow) -> Key {
    (r.method, r.alpha.to_bits(), r.target.clone())
}

/// Aggregates per-repetition rows into means, variances and the comparison metrics.
pub fn compute_metrics(rows: &[RunRow], timings: &[TimingRow]) -> MetricsReport {
    let mut groups: Vec<(Key, Vec<&RunRow>)> = Vec::new();
    for r in rows {
        let k = key(r);
        match groups.iter_mut().find(|(g, _)| *g == k) {
            Some((_, v)) => v.push(r),
            None => groups.push((k, vec![r])),
        }
    }
    let mut seconds: BTreeMap<Method, Vec<f64>> = BTreeMap::new();
    for t in timings {
        seconds.entry(t.method).or_default().push(t.seconds);
    }
    let mut failures: BTreeMap<String, usize> = BTreeMap::new();
    let mut reps = 0;

    let mut entries: Vec<MetricsEntry> = groups
        .iter()
        .map(|((method, _, target), rs)| {
            let ok: Vec<&RunRow> = rs.iter().copied().filter(|r| r.estimate.is_some()).collect();
            let failed = rs.len() - ok.len();
            reps = reps.max(rs.len());
            let est: Vec<f64> = ok.iter().filter_map(|r| r.estimate).collect();
            let (mean, variance) = mean_var(&est);
            let n = rs[0].n as f64;
            let levels = rs[0].levels;
            let mean_draws = mean_of(ok.iter().filter_map(|r| r.draws));
            let cost = match method {
                Method::Mc => mean_draws,
                Method::Smc => levels.map(|t| t as f64 * n),
                Method::IsAch => mean_draws.map(|m| m * n),
            };
            let p_is = match method {
                Method::IsAch => mean_of(ok.iter().filter_map(|r| r.n_tilde.map(|k| k as f64))).zip(mean_draws).map(|(k, m)| k / (m * n)),
                _ => None,
            };
            MetricsEntry {
                method: *method,
                alpha: rs[0].alpha,
                target: target.clone(),
                n_ok: ok.len(),
                n_failed: failed,
                mean,
                variance,
                relative_bias: None,
                variance_reduction: None,
                variance_reduction_accepted: None,
                cost,
                levels,
                mean_draws: if *method == Method::Smc { None } else { mean_draws },
                p_is,
                mean_seconds: seconds.get(method).and_then(|s| mean_of(s.iter().copied())),
                flags: Vec::new(),
            }
        })
        .collect();

    for r in rows {
        if r.estimate.is_none() && (r.target == "ES" || r.target == "VaR") {
            *failures.entry(r.method.name().to_string()).or_default() += 1;
        }
    }

    let baseline: Vec<MetricsEntry> = entries.iter().filter(|e| e.method == Method::Mc).cloned().collect();
    for e in entries.iter_mut().filter(|e| e.method != Method::Mc) {
        let Some(mc) = baseline.iter().find(|b| b.alpha.to_bits() == e.alpha.to_bits() && b.target == e.target) else {
            continue;
        };
        if let (Some(m), Some(ref_m)) = (e.mean, mc.mean) {
            e.relative_bias = relative_bias(m, ref_m);
        }
        match (mc.variance, e.variance, mc.cost, e.cost) {
            (Some(vm), Some(v), Some(cm), Some(c)) if vm > 0.0 && v > 0.0 => {
                e.variance_reduction = variance_reduction(cm, vm, c, v);
                let n_mc = rows.iter().find(|r| r.method == Method::Mc).map(|r| r.n as f64).unwrap_or(f64::NAN);
                e.variance_reduction_accepted = variance_reduction(n_mc, vm, c, v);
            }
            (Some(vm), _, _, _) if vm <= 0.0 => e.flags.push("MC variance is zero; variance reduction undefined".into()),
            (_, Some(v), _, _) if v <= 0.0 => e.flags.push("estimator variance is zero; variance reduction undefined".into()),
            _ => e.flags.push("fewer than two successful repetitions; variance reduction undefined".into()),
        }
    }
    MetricsReport { entries, failures, n_repetitions: reps, meta: BTreeMap::new() }
}

pub fn write_rows<W: Write, T: Serialize>(rows: &[T], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rows<R: Read, T: for<'de> Deserialize<'de>>(input: R) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_reader(input);
    r.deserialize().map(|x| x.map_err(Error::from)).collect()
}

/// Plot data: one row per `(alpha, method, target, metric)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub alpha: f64,
    pub method: Method,
    pub target: String,
    pub metric: String,
    pub value: f64,
}

pub fn curves(report: &MetricsReport) -> Vec<CurveRow> {
    let mut out = Vec::new();
    for e in &report.entries {
        let mut push = |metric: &str, v: Option<f64>| {
            if let Some(value) = v {
                out.push(CurveRow { alpha: e.alpha, method: e.method, target: e.target.clone(), metric: metric.into(), value });
            }
        };
        push("mean", e.mean);
        push("relative_bias", e.relative_bias);
        push("log10_variance_reduction", e.variance_reduction.map(f64::log10));
        push("log10_variance_reduction_accepted", e.variance_reduction_accepted.map(f64::log10));
        push("p_is", e.p_is);
    }
    out
}
