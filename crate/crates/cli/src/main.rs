use std::path::{Path, PathBuf};
use std::process::ExitCode;

use capalloc::harness::metrics::{curves, write_rows};
use capalloc::harness::{allocate, curvature_scan, prepare_quantiles, report_from_dir, run_experiment, AllocateMethod, ExperimentConfig, Method};
use capalloc::Error;
use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "capalloc", version, about = "Rare-event Euler capital allocation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct Common {
    /// Experiment config (TOML, or JSON by extension).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; overrides the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for repetitions.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// mc, smc, is_ach (and stddev for `allocate`); repeatable for `run`.
    #[arg(long, global = true)]
    method: Vec<String>,
    /// Target level(s); repeatable for `run`.
    #[arg(long, global = true)]
    alpha: Vec<f64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build or reuse the quantile table.
    Quantiles,
    /// Run the repeated experiment and write metrics.
    Run,
    /// One allocation with a chosen method.
    Allocate,
    /// Convexity verdicts along the curve `Σ x_i = B`.
    Curvature {
        #[arg(long = "B", alias = "b")]
        b: f64,
        #[arg(long, default_value_t = 99)]
        points: usize,
        /// Level of the free coordinates other than the first.
        #[arg(long, default_value_t = 0.5)]
        fixed: f64,
    },
    /// Recompute metrics from an existing `runs.csv`.
    Report,
}

fn load(common: &Common) -> Result<ExperimentConfig, Error> {
    let path = common.config.as_deref().ok_or_else(|| Error::Config("--config is required".into()))?;
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(o) = &common.out {
        cfg.out = Some(o.clone());
    }
    if let Some(t) = common.threads {
        cfg.threads = Some(t);
    }
    Ok(cfg)
}

fn print_json<T: serde::Serialize>(v: &T) -> Result<(), Error> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn execute(cli: &Cli) -> Result<(), Error> {
    let common = &cli.common;
    match &cli.command {
        Command::Quantiles => {
            let cfg = load(common)?;
            let model = cfg.validate()?;
            let (table, reused) = prepare_quantiles(&cfg, &model)?;
            log::info!("quantile table {} ({})", cfg.quantile_path().display(), if reused { "reused" } else { "built" });
            print_json(&table)
        }
        Command::Run => {
            let mut cfg = load(common)?;
            if !common.method.is_empty() {
                cfg.methods = common.method.iter().map(|m| m.parse()).collect::<Result<Vec<Method>, _>>()?;
            }
            if !common.alpha.is_empty() {
                cfg.targets = common.alpha.clone();
            }
            let out = run_experiment(&cfg)?;
            let dir = cfg.out_dir();
            out.write(&dir)?;
            log::info!("wrote {}", dir.display());
            for (m, k) in &out.metrics.failures {
                log::warn!("{m}: {k} failed estimates");
            }
            Ok(())
        }
        Command::Allocate => {
            let cfg = load(common)?;
            let method: AllocateMethod = match common.method.as_slice() {
                [] => AllocateMethod::Run(Method::Smc),
                [m] => m.parse()?,
                _ => return Err(Error::Config("allocate takes a single --method".into())),
            };
            let alpha = match common.alpha.as_slice() {
                [] => cfg.sorted_targets().last().copied().ok_or_else(|| Error::Config("no target alpha".into()))?,
                [a] => *a,
                _ => return Err(Error::Config("allocate takes a single --alpha".into())),
            };
            let report = allocate(&cfg, method, alpha, cfg.seed)?;
            print_json(&report)
        }
        Command::Curvature { b, points, fixed } => {
            let cfg = load(common)?;
            let model = cfg.build_model()?;
            let pts = curvature_scan(&model, *b, *points, *fixed)?;
            let convex = pts.iter().filter(|p| p.convex).count();
            log::info!("{convex} of {} points convex at B = {b}", pts.len());
            write_curvature(&mut std::io::stdout().lock(), &pts)?;
            Ok(())
        }
        Command::Report => {
            let dir = match (&common.out, &common.config) {
                (Some(o), _) => o.clone(),
                (None, Some(_)) => load(common)?.out_dir(),
                (None, None) => return Err(Error::Config("report needs --out or --config".into())),
            };
            let metrics = report_from_dir(&dir)?;
            write_report(&dir, &metrics)
        }
    }
}

fn write_curvature<W: std::io::Write>(w: &mut W, pts: &[capalloc::harness::CurvaturePoint]) -> Result<(), Error> {
    writeln!(w, "u_1,u_others,u_last,convex")?;
    for p in pts {
        let others = p.u.get(1).map(|v| v.to_string()).unwrap_or_default();
        writeln!(w, "{},{},{},{}", p.u[0], others, p.u_last, p.convex)?;
    }
    Ok(())
}

fn write_report(dir: &Path, metrics: &capalloc::harness::MetricsReport) -> Result<(), Error> {
    std::fs::write(dir.join("metrics.json"), serde_json::to_string_pretty(metrics)?)?;
    write_rows(&curves(metrics), std::fs::File::create(dir.join("curves.csv"))?)?;
    log::info!("re-aggregated {}", dir.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if matches!(e, Error::Config(_)) { 2 } else { 3 })
        }
    }
}
