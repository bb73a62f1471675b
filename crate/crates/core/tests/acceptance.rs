//! Acceptance suite: one PASS/FAIL line per criterion. Experiments share a
//! quantile cache under the cargo target tmpdir, so re-runs skip rebuilding.
//! Relative biases are printed with their standard error across repetitions.
//! Set `ACCEPTANCE_STRICT=1` to exit non-zero when any criterion fails.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::Instant;

use capalloc::baselines::{is_ach_multi, MixingDistribution};
use capalloc::copulas::tail;
use capalloc::geometry::{residual_bound, ConstraintRegion};
use capalloc::harness::metrics::{compute_metrics, write_rows};
use capalloc::harness::{prepare_quantiles, run_with_table, ExperimentConfig, Method, MetricsReport, RunRow};
use capalloc::marginals::case_study_marginals;
use capalloc::quantiles::estimate_quantiles;
use capalloc::rng::substream;
use capalloc::smc::{gibbs_move, rejection_draw};
use capalloc::{CopulaModel, CopulaSpec, Family, MarginalModel};
use rand::distr::{Distribution, Open01};

struct Outcome {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn cache_dir(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance").join(name)
}

fn config(name: &str, copula: &str, extra: &str) -> ExperimentConfig {
    let text = format!("name = \"{name}\"\ncopula = {copula}\n{extra}\n");
    let mut cfg = ExperimentConfig::from_toml(&text).unwrap_or_else(|e| panic!("{name}: {e}"));
    cfg.out = Some(cache_dir(name));
    cfg
}

/// Runs a config against its cached quantile table.
fn run(cfg: &ExperimentConfig, id: &mut Identity) -> (Vec<RunRow>, MetricsReport) {
    let model = cfg.validate().expect("valid config");
    let (table, reused) = prepare_quantiles(cfg, &model).expect("quantile table");
    let start = Instant::now();
    let out = run_with_table(cfg, &model, table).expect("experiment");
    out.write(&cfg.out_dir()).expect("write artifacts");
    eprintln!("  [{}] quantiles {}, {:.1}s", cfg.name, if reused { "reused" } else { "built" }, start.elapsed().as_secs_f64());
    id.absorb(&out.rows);
    (out.rows, out.metrics)
}

fn rb(m: &MetricsReport, method: Method, alpha: f64, target: &str) -> Option<f64> {
    m.entry(method, alpha, target).and_then(|e| e.relative_bias)
}

/// Standard error of the relative bias from the two across-repetition variances.
fn se(m: &MetricsReport, alpha: f64, target: &str) -> Option<f64> {
    let (s, mc) = (m.entry(Method::Smc, alpha, target)?, m.entry(Method::Mc, alpha, target)?);
    Some((s.variance? / s.n_ok as f64 + mc.variance? / mc.n_ok as f64).sqrt() / mc.mean?.abs())
}

fn fmt_pct(x: Option<f64>) -> String {
    x.map(|v| format!("{:+.2}%", 100.0 * v)).unwrap_or_else(|| "n/a".into())
}

/// Checks `|RB| <= tol` for every listed target; returns the verdict and a summary.
fn bias_within(m: &MetricsReport, alpha: f64, targets: &[String], tol: f64) -> (bool, String) {
    let mut ok = true;
    let mut parts = Vec::new();
    for t in targets {
        let b = rb(m, Method::Smc, alpha, t);
        ok &= b.is_some_and(|v| v.abs() <= tol);
        parts.push(format!("{t}:{}{}", fmt_pct(b), se(m, alpha, t).map(|e| format!("±{:.2}%", 100.0 * e)).unwrap_or_default()));
    }
    (ok, parts.join(" "))
}

fn cell_targets(d: usize, total: &str) -> Vec<String> {
    (1..=d).map(|i| i.to_string()).chain(std::iter::once(total.to_string())).collect()
}

#[derive(Default)]
struct Identity {
    runs: usize,
    worst: f64,
}

impl Identity {
    /// Rows of one run are contiguous: cells, groups, then the total.
    fn absorb(&mut self, rows: &[RunRow]) {
        for run in rows.chunk_by(|a, b| (a.rep, a.method, a.alpha.to_bits()) == (b.rep, b.method, b.alpha.to_bits())) {
            let total = run.iter().find(|r| r.target == "ES" || r.target == "VaR").and_then(|r| r.estimate);
            let Some(t) = total else { continue };
            let sum: f64 = run.iter().filter(|r| r.target.parse::<usize>().is_ok()).filter_map(|r| r.estimate).sum();
            self.worst = self.worst.max((sum - t).abs() / t.abs());
            self.runs += 1;
        }
    }
}

fn criterion_1(id: &Identity) -> Outcome {
    verdict(id.runs > 0 && id.worst <= 1e-9, format!("{} runs, worst relative gap {:.2e} (tol 1e-9)", id.runs, id.worst))
}

fn clayton5() -> ExperimentConfig {
    config(
        "clayton5",
        r#"{ family = "clayton", theta = 1.0, dim = 5 }"#,
        "targets = [0.99, 0.999, 0.9995]\nmethods = [\"mc\", \"smc\"]\nn_mc = 1000\nn_repetitions = 100\nseed = 2024\n[smc]\nn_particles = 250\n[quantiles]\nn_per_run = 1000000\nn_runs = 50",
    )
}

fn criterion_2_3(m: &MetricsReport) -> (Outcome, Outcome) {
    let (ok, s) = bias_within(m, 0.999, &cell_targets(5, "ES"), 0.05);
    let c2 = verdict(ok, format!("SMC relative bias at 0.999: {s} (tol 5%)"));
    let vr = |a: f64| m.entry(Method::Smc, a, "ES").and_then(|e| e.variance_reduction);
    let vra = |a: f64| m.entry(Method::Smc, a, "ES").and_then(|e| e.variance_reduction_accepted);
    let (v1, v2) = (vr(0.999), vr(0.9995));
    let pass = v1.is_some_and(|v| v > 1.0) && v2.is_some_and(|v| v > 5.0);
    let show = |v: Option<f64>| v.map(|x| format!("{x:.3}")).unwrap_or_else(|| "n/a".into());
    let c3 = verdict(
        pass,
        format!(
            "VR(ES) at 0.999 = {} (> 1), at 0.9995 = {} (> 5); with accepted N_MC instead of MC draws: {} and {}",
            show(v1),
            show(v2),
            show(vra(0.999)),
            show(vra(0.9995))
        ),
    );
    (c2, c3)
}

fn criterion_4() -> Outcome {
    let cases = [(0.16, 0.25), (0.33, 0.5), (0.78, 0.75), (2.12, 0.9)];
    let mut ok = true;
    let mut parts = Vec::new();
    for (theta, want) in cases {
        let got = tail::lower(Family::Clayton, theta, 5);
        ok &= (got - want).abs() <= 0.01;
        parts.push(format!("θ={theta}: {got:.4}"));
    }
    verdict(ok, format!("{} (tol 0.01)", parts.join(", ")))
}

fn criterion_5() -> Outcome {
    let m = vec![MarginalModel::lognormal(0.6, 1.4).unwrap(), MarginalModel::lognormal(0.4, 1.0).unwrap()];
    let r = residual_bound(&ConstraintRegion::tail(3.57), &m, &[0.3], 0).unwrap();
    verdict((r - 0.609).abs() <= 0.005, format!("residual bound {r:.5} vs 0.609 ± 0.005"))
}

fn mixed_difference(c: &CopulaModel, u: &[f64]) -> f64 {
    let d = u.len();
    let h: Vec<f64> = u.iter().map(|&x| (1e-3f64).min(0.5 * x).min(0.5 * (1.0 - x))).collect();
    let mut acc = 0.0;
    let mut x = u.to_vec();
    for mask in 0u32..(1 << d) {
        let mut sign = 1.0;
        for i in 0..d {
            if mask >> i & 1 == 1 {
                x[i] = u[i] + h[i];
            } else {
                x[i] = u[i] - h[i];
                sign = -sign;
            }
        }
        acc += sign * c.cdf(&x).unwrap();
    }
    acc / h.iter().map(|v| 2.0 * v).product::<f64>()
}

fn spec(toml_text: &str) -> CopulaModel {
    #[derive(serde::Deserialize)]
    struct W {
        copula: CopulaSpec,
    }
    toml::from_str::<W>(toml_text).unwrap().copula.build().unwrap()
}

fn criterion_6() -> Outcome {
    let mut models = Vec::new();
    for d in 2..=3 {
        for th in [0.5, 1.0, 2.5] {
            models.push(CopulaModel::flat(Family::Clayton, th, d).unwrap());
        }
        for th in [1.25, 2.0] {
            models.push(CopulaModel::flat(Family::Gumbel, th, d).unwrap());
        }
        for th in [-1.5, 2.0, 5.0] {
            if d == 2 || th > 0.0 {
                models.push(CopulaModel::flat(Family::Frank, th, d).unwrap());
            }
        }
    }
    let nested3 = spec("[copula]\nfamily = \"clayton\"\ntheta = 0.5\nchildren = [{ leaf = 1 }, { theta = 1.0, children = [{ leaf = 2 }, { leaf = 3 }] }]");
    let nested_gumbel = spec("[copula]\nfamily = \"gumbel\"\ntheta = 1.2\nchildren = [{ leaf = 1 }, { theta = 2.0, children = [{ leaf = 2 }, { leaf = 3 }] }]");
    models.push(nested3.clone());
    models.push(nested_gumbel);

    // (a) analytic density vs mixed central differences of the cdf
    let grid = [0.2, 0.45, 0.7];
    let mut worst_a: f64 = 0.0;
    for c in &models {
        let d = c.dim();
        for k in 0..grid.len().pow(d as u32) {
            let u: Vec<f64> = (0..d).map(|i| grid[(k / grid.len().pow(i as u32)) % grid.len()]).collect();
            let an = c.log_density(&u).unwrap().exp();
            let fd = mixed_difference(c, &u);
            worst_a = worst_a.max((an - fd).abs() / an);
        }
    }
    // the 7-cell tree: every one-coordinate step of the partial-derivative chain
    let tree = capalloc::copulas::business_unit_clayton(0.5, 0.75, 1.0).unwrap();
    let u7 = [0.35, 0.62, 0.81, 0.22, 0.55, 0.7, 0.9];
    let mut subset = vec![false; 7];
    for j in [3, 0, 6, 1, 4, 2, 5] {
        let h = 1e-5;
        let (mut up, mut dn) = (u7.to_vec(), u7.to_vec());
        up[j] += h;
        dn[j] -= h;
        let fd = (tree.partial_derivative(&up, &subset).unwrap() - tree.partial_derivative(&dn, &subset).unwrap()) / (2.0 * h);
        subset[j] = true;
        let an = tree.partial_derivative(&u7, &subset).unwrap();
        worst_a = worst_a.max((an - fd).abs() / an.abs());
    }
    let full = tree.log_density(&u7).unwrap().exp();
    worst_a = worst_a.max((full - tree.partial_derivative(&u7, &[true; 7]).unwrap()).abs() / full);
    let ok_a = worst_a <= 1e-4;

    // (b) empirical cdf at 10 probes, n = 10^6
    let n = 1_000_000;
    let sample_models = [
        CopulaModel::flat(Family::Clayton, 1.0, 3).unwrap(),
        CopulaModel::flat(Family::Gumbel, 1.5, 3).unwrap(),
        CopulaModel::flat(Family::Frank, 3.0, 3).unwrap(),
        nested3,
        tree.clone(),
    ];
    let mut worst_z: f64 = 0.0;
    for (k, c) in sample_models.iter().enumerate() {
        let d = c.dim();
        let probes: Vec<Vec<f64>> = (0..10).map(|p| (0..d).map(|i| 0.15 + 0.8 * (((p * 7 + i * 3) % 11) as f64 / 11.0)).collect()).collect();
        let mut hits = vec![0usize; probes.len()];
        let mut rng = substream(606, &[k as u64]);
        let mut u = vec![0.0; d];
        for _ in 0..n {
            c.sample_into(&mut rng, &mut u);
            for (p, probe) in probes.iter().enumerate() {
                if u.iter().zip(probe).all(|(a, b)| a <= b) {
                    hits[p] += 1;
                }
            }
        }
        for (p, probe) in probes.iter().enumerate() {
            let want = c.cdf(probe).unwrap();
            let se = (want * (1.0 - want) / n as f64).sqrt();
            worst_z = worst_z.max((hits[p] as f64 / n as f64 - want).abs() / se);
        }
    }
    let ok_b = worst_z <= 4.0;

    // (c) density integrates to one. Under uniform sampling the estimator has
    // infinite variance whenever the copula has tail dependence, so its z is
    // only gated for tail-free models; every model is also checked with the
    // defensive mixture q = (1 + c)/2, whose ratio c/q is bounded by 2.
    let mut worst_c: f64 = 0.0;
    let mut parts_c = Vec::new();
    let mut rng = substream(607, &[]);
    for (family, theta, d) in [(Family::Clayton, 0.7, 2), (Family::Gumbel, 1.3, 3), (Family::Frank, 2.0, 4), (Family::Clayton, 0.5, 5)] {
        let c = CopulaModel::flat(family, theta, d).unwrap();
        let tail_free = tail::lower(family, theta, d) == 0.0 && tail::upper(family, theta, d) == 0.0;
        let n = 1_000_000;
        let z = |s: f64, s2: f64| {
            let mean = s / n as f64;
            (mean - 1.0).abs() / ((s2 / n as f64 - mean * mean) / n as f64).sqrt()
        };
        let mut u = vec![0.0; d];
        let (mut s, mut s2) = (0.0, 0.0);
        for _ in 0..n {
            u.iter_mut().for_each(|x| *x = Open01.sample(&mut rng));
            let v = c.log_density(&u).unwrap().exp();
            s += v;
            s2 += v * v;
        }
        let z_uniform = z(s, s2);
        let (mut s, mut s2) = (0.0, 0.0);
        for k in 0..n {
            if k % 2 == 0 {
                u.iter_mut().for_each(|x| *x = Open01.sample(&mut rng));
            } else {
                c.sample_into(&mut rng, &mut u);
            }
            let v = c.log_density(&u).unwrap().exp();
            let r = v / (0.5 + 0.5 * v);
            s += r;
            s2 += r * r;
        }
        let z_mixture = z(s, s2);
        worst_c = worst_c.max(z_mixture);
        if tail_free {
            worst_c = worst_c.max(z_uniform);
        }
        parts_c.push(format!("{family}({theta}, d={d}) uniform |z| {z_uniform:.2}{} mixture |z| {z_mixture:.2}", if tail_free { "" } else { " (not gated)" }));
    }
    let ok_c = worst_c <= 3.0;
    verdict(
        ok_a && ok_b && ok_c,
        format!(
            "(a) worst relative density error {worst_a:.2e} (tol 1e-4); (b) worst |z| {worst_z:.2} (tol 4); (c) worst gated |z| {worst_c:.2} (tol 3): {}",
            parts_c.join(", ")
        ),
    )
}

/// Two-sample chi-square on a 2-D grid of fixed cells.
fn criterion_7() -> Outcome {
    let copula = CopulaModel::flat(Family::Clayton, 1.0, 2).unwrap();
    let marginals = case_study_marginals(2);
    let table = estimate_quantiles(&copula, &marginals, &[0.9], 1_000_000, 1, 707).unwrap();
    let region = ConstraintRegion::tail(table.var[0]);
    let n = 10_000;
    let cloud = |tag: u64| -> Vec<[f64; 2]> {
        let mut rng = substream(708, &[tag]);
        let mut u = [0.0; 2];
        (0..n)
            .map(|_| {
                rejection_draw(&copula, &region, &marginals, &mut rng, u64::MAX, &mut u).unwrap();
                u
            })
            .collect()
    };
    let mut moved = cloud(1);
    let mut rng = substream(708, &[99]);
    for p in moved.iter_mut() {
        gibbs_move(p, &copula, &region, &marginals, 5, &mut rng);
    }
    let fresh = cloud(2);
    // cell edges from quantiles of a third, independent reference cloud
    let reference = cloud(3);
    let k = 8;
    let edges = |coord: usize| -> Vec<f64> {
        let mut v: Vec<f64> = reference.iter().map(|p| p[coord]).collect();
        v.sort_by(f64::total_cmp);
        (1..k).map(|i| v[i * n / k]).collect()
    };
    let (e0, e1) = (edges(0), edges(1));
    let cell = |p: &[f64; 2]| e0.partition_point(|&e| e < p[0]) * k + e1.partition_point(|&e| e < p[1]);
    let mut a = vec![0.0f64; k * k];
    let mut b = vec![0.0; k * k];
    moved.iter().for_each(|p| a[cell(p)] += 1.0);
    fresh.iter().for_each(|p| b[cell(p)] += 1.0);
    let mut stat = 0.0;
    let mut used = 0;
    for i in 0..k * k {
        if a[i] + b[i] > 0.0 {
            stat += (a[i] - b[i]).powi(2) / (a[i] + b[i]);
            used += 1;
        }
    }
    let df = (used - 1) as f64;
    // Wilson-Hilferty approximation with z for an upper tail of 1e-3
    let z = 3.090_232;
    let crit = df * (1.0 - 2.0 / (9.0 * df) + z * (2.0 / (9.0 * df)).sqrt()).powi(3);
    verdict(stat <= crit, format!("chi-square {stat:.2} on {df} df, critical {crit:.2} at 1e-3"))
}

fn criterion_8(cfg: &ExperimentConfig) -> Outcome {
    let model = cfg.validate().unwrap();
    let (table, _) = prepare_quantiles(cfg, &model).unwrap();
    let alphas = [0.99, 0.999];
    let regions: Vec<ConstraintRegion> = alphas.iter().map(|&a| ConstraintRegion::tail(table.threshold(a).unwrap())).collect();
    let mixing = MixingDistribution::dyadic(20);
    let n = 1000;
    let est = is_ach_multi(&model.copula, &model.marginals, &regions, &alphas, &mixing, n, 808).unwrap();
    let mut ok = mixing.atoms().len() == 21;
    let mut parts = Vec::new();
    for (a, e) in alphas.iter().zip(&est) {
        let p = e.diagnostics.p_is;
        ok &= p < 1.0 - a;
        parts.push(format!("P_IS({a}) = {p:.3e} < {:.0e}", 1.0 - a));
    }
    // geometric draw counts per atom: mean 1/q, variance (1-q)/q²
    let (mut m1, mut m2) = (0.0, 0.0);
    for atom in mixing.atoms() {
        let q = 1.0 - model.copula.diagonal(atom.lambda);
        m1 += atom.p / q;
        m2 += atom.p * ((1.0 - q) / (q * q) + 1.0 / (q * q));
    }
    let sd = ((m2 - m1 * m1) / n as f64).sqrt();
    let diag = &est[0].diagnostics;
    let z = (diag.mean_draws - diag.expected_draws) / sd;
    ok &= (diag.expected_draws - m1).abs() <= 1e-9 * m1 && z.abs() <= 3.0;
    parts.push(format!("mean draws {:.1} vs E[N_V] {:.1} (z = {z:+.2}, tol 3)", diag.mean_draws, diag.expected_draws));
    verdict(ok, parts.join("; "))
}

fn gumbel(d: usize, methods: &str, n_particles: usize) -> ExperimentConfig {
    config(
        &format!("gumbel{d}"),
        &format!(r#"{{ family = "gumbel", theta = 1.25, dim = {d} }}"#),
        &format!("targets = [0.999]\nmethods = {methods}\nn_mc = 1000\nn_repetitions = 100\nseed = 909\n[smc]\nn_particles = {n_particles}\n[quantiles]\nn_per_run = 1000000\nn_runs = 50"),
    )
}

fn criterion_9(id: &mut Identity) -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for d in [2, 3] {
        let (_, m) = run(&gumbel(d, r#"["mc", "smc"]"#, 250), id);
        let (within, s) = bias_within(&m, 0.999, &cell_targets(d, "ES"), 0.06);
        if d == 2 {
            ok &= within;
            parts.push(format!("d=2 {s} (tol 6%)"));
        } else {
            parts.push(format!("d=3 {s} (reported)"));
        }
    }
    let (mc_rows, _) = run(&gumbel(6, r#"["mc"]"#, 250), id);
    let mut biases = Vec::new();
    for n in [250, 1000] {
        let (smc_rows, _) = run(&gumbel(6, r#"["smc"]"#, n), id);
        let rows: Vec<RunRow> = mc_rows.iter().chain(&smc_rows).cloned().collect();
        let m = compute_metrics(&rows, &[]);
        biases.push((rb(&m, Method::Smc, 0.999, "1"), rb(&m, Method::Smc, 0.999, "6"), rb(&m, Method::Smc, 0.999, "ES")));
    }
    let (b250, b1000) = (biases[0].0, biases[1].0);
    let trend = matches!((b250, b1000), (Some(x), Some(y)) if y.abs() < x.abs());
    ok &= trend;
    parts.push(format!(
        "d=6 first-cell bias {} (N=250) -> {} (N=1000); cell 6 {} -> {}; ES {} -> {}",
        fmt_pct(b250),
        fmt_pct(b1000),
        fmt_pct(biases[0].1),
        fmt_pct(biases[1].1),
        fmt_pct(biases[0].2),
        fmt_pct(biases[1].2)
    ));
    verdict(ok, parts.join("; "))
}

fn criterion_10(id: &mut Identity) -> Outcome {
    let cfg = config(
        "nested7",
        "{ family = \"clayton\", theta = 0.5, children = [{ theta = 0.75, children = [{ leaf = 1 }, { leaf = 2 }, { leaf = 3 }] }, { theta = 1.0, children = [{ leaf = 4 }, { leaf = 5 }, { leaf = 6 }, { leaf = 7 }] }] }",
        "targets = [0.99]\nmethods = [\"mc\", \"smc\"]\nn_mc = 1000\nn_repetitions = 100\nseed = 1010\n[smc]\nn_particles = 250\n[quantiles]\nn_per_run = 1000000\nn_runs = 50\n[groups]\nbu_1 = [1, 2, 3]\nbu_2 = [4, 5, 6, 7]",
    );
    let (rows, m) = run(&cfg, id);
    let (within, s) = bias_within(&m, 0.99, &cell_targets(7, "ES"), 0.06);
    let mut worst: f64 = 0.0;
    let mut by_run: BTreeMap<(usize, Method), (f64, f64)> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.estimate.is_some()) {
        let e = by_run.entry((r.rep, r.method)).or_default();
        match r.target.as_str() {
            "bu_1" | "bu_2" => e.0 += r.estimate.unwrap(),
            "ES" => e.1 = r.estimate.unwrap(),
            _ => {}
        }
    }
    for (g, t) in by_run.values() {
        worst = worst.max((g - t).abs() / t.abs());
    }
    let rollup_ok = !by_run.is_empty() && worst <= 1e-12;
    verdict(within && rollup_ok, format!("SMC relative bias {s} (tol 6%); business-unit rollup gap {worst:.1e} over {} runs", by_run.len()))
}

fn criterion_11(id: &mut Identity) -> Outcome {
    let mk = |threads: usize| {
        let mut c = config(
            "determinism",
            r#"{ family = "clayton", theta = 1.0, dim = 3 }"#,
            "alphas = [0.5, 0.9, 0.99]\ntargets = [0.9, 0.99]\nn_mc = 100\nn_is = 300\nn_repetitions = 6\nseed = 1111\n[smc]\nn_particles = 60\n[quantiles]\nn_per_run = 20000\nn_runs = 4",
        );
        c.threads = Some(threads);
        c
    };
    let bytes = |threads: usize, id: &mut Identity| {
        let (rows, _) = run(&mk(threads), id);
        let mut buf = Vec::new();
        write_rows(&rows, &mut buf).unwrap();
        buf
    };
    let a = bytes(1, id);
    let b = bytes(1, id);
    let c = bytes(2, id);
    verdict(a == b && a == c && !a.is_empty(), format!("runs.csv {} bytes; identical on re-run: {}, across thread counts: {}", a.len(), a == b, a == c))
}

fn main() {
    let started = Instant::now();
    let mut id = Identity::default();
    let mut results: Vec<(usize, Outcome)> = Vec::new();

    let c5 = clayton5();
    let (_, m5) = run(&c5, &mut id);
    let (c2, c3) = criterion_2_3(&m5);
    results.push((2, c2));
    results.push((3, c3));
    results.push((4, criterion_4()));
    results.push((5, criterion_5()));
    results.push((6, criterion_6()));
    results.push((7, criterion_7()));
    results.push((8, criterion_8(&c5)));
    results.push((9, criterion_9(&mut id)));
    results.push((10, criterion_10(&mut id)));
    results.push((11, criterion_11(&mut id)));
    results.insert(0, (1, criterion_1(&id)));

    let mut failed = 0;
    for (k, o) in &results {
        println!("criterion {k}: {} {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.pass);
    }
    println!("acceptance: {} of {} passed in {:.0}s", results.len() - failed, results.len(), started.elapsed().as_secs_f64());
    // report mode by default; ACCEPTANCE_STRICT=1 turns any FAIL into a non-zero exit
    if failed > 0 && std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}
