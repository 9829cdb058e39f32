use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use tfilm::driver::{audit_ede, random_cosine, run, TimeSeries};
use tfilm::experiments::{
    bb_action_demo, dissipation_scaling_fit, liftoff_sweep, opposed_profiles, point_lemma_check,
    rate_fit, BBActionReport, DissipationScalingReport, LiftoffConfig, PointWitness, RateClass,
    RateOptions,
};
use tfilm::io::config::{BbSection, PointLemmaSection};
use tfilm::io::{parse_config, write_json, write_timeseries, ExperimentConfig, OutputLock};
use tfilm::{Error, Result};

#[derive(Parser)]
#[command(
    name = "tfilm",
    version,
    about = "Minimising-movement thin-film simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Worker threads for parallel sweeps.
    #[arg(long)]
    threads: Option<usize>,
    /// Overrides the `seed` key of the config.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the scheme and write diagnostics, snapshots and plots.
    Simulate(Common),
    /// Lift-off time sweep over the `[liftoff]` deltas.
    SweepLiftoff(Common),
    /// Dissipation scaling fit over the `[dissipation]` deltas.
    DissipationBound(Common),
    /// Path action of the concentrate-transport-spread construction.
    BbAction(Common),
    /// Classify the energy decay of a run.
    Rates(Common),
    /// Energy-dissipation audit between two diagnostic rows.
    AuditEde(Common),
    /// Search random profiles for the point witness.
    PointLemma(Common),
}

/// Whether the command's audits passed.
type Outcome = Result<bool>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (common, f): (&Common, fn(&ExperimentConfig, &Path) -> Outcome) = match &cli.command {
        Command::Simulate(c) => (c, simulate),
        Command::SweepLiftoff(c) => (c, sweep_liftoff),
        Command::DissipationBound(c) => (c, dissipation_bound),
        Command::BbAction(c) => (c, bb_action),
        Command::Rates(c) => (c, rates),
        Command::AuditEde(c) => (c, audit),
        Command::PointLemma(c) => (c, point_lemma),
    };
    match execute(common, f) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("audit failed; see {}", common.out.display());
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            let mut src = std::error::Error::source(&e);
            while let Some(s) = src {
                eprintln!("  caused by: {s}");
                src = s.source();
            }
            ExitCode::from(1)
        }
    }
}

fn execute(common: &Common, f: fn(&ExperimentConfig, &Path) -> Outcome) -> Outcome {
    if let Some(n) = common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("--threads: {e}")))?;
    }
    let mut cfg = parse_config(&common.config)?;
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    let _lock = OutputLock::acquire(&common.out)?;
    std::fs::write(common.out.join("config.toml"), cfg.to_toml()?)?;
    f(&cfg, &common.out)
}

fn simulate_series(cfg: &ExperimentConfig, out: &Path) -> Result<TimeSeries> {
    let series = run(&cfg.run_config()?)?;
    write_timeseries(out, &series)?;
    Ok(series)
}

fn simulate(cfg: &ExperimentConfig, out: &Path) -> Outcome {
    let series = simulate_series(cfg, out)?;
    let violations = series.edi_violations();
    println!(
        "steps {}  mass drift {:.3e}  EDI violations {}",
        series.diagnostics.len() - 1,
        series.mass_drift(),
        violations.len()
    );
    Ok(violations.is_empty())
}

fn sweep_liftoff(cfg: &ExperimentConfig, out: &Path) -> Outcome {
    let sec = cfg
        .liftoff
        .as_ref()
        .ok_or_else(|| Error::Config("sweep-liftoff needs a [liftoff] section".into()))?;
    let n = cfg
        .mobility_exponent()
        .ok_or_else(|| Error::Config("sweep-liftoff needs a power-law mobility".into()))?;
    let step = cfg.step()?;
    let lc = LiftoffConfig {
        cells: cfg.cells,
        h: cfg.h,
        t_final: cfg.t_final,
        record_every: cfg.record_every,
        tol_grad: step.tol_grad,
    };
    let report = liftoff_sweep(&sec.deltas, sec.mass, n, cfg.alpha, &lc)?;
    write_json(&out.join("liftoff.json"), &report)?;
    for r in &report.runs {
        println!(
            "delta {:.3e}  t_half {:?}  stays above {}",
            r.delta, r.t_half, r.stays_above
        );
    }
    println!(
        "median t_half {:?}  uniform {}",
        report.median_t_half, report.uniform
    );
    Ok(report.passes)
}

fn dissipation_bound(cfg: &ExperimentConfig, out: &Path) -> Outcome {
    let sec = cfg
        .dissipation
        .as_ref()
        .ok_or_else(|| Error::Config("dissipation-bound needs a [dissipation] section".into()))?;
    let pairs = match &sec.pairs {
        Some(p) => p.clone(),
        None => vec![(
            cfg.mobility_exponent().ok_or_else(|| {
                Error::Config("give [dissipation] pairs or a power-law mobility".into())
            })?,
            cfg.alpha,
        )],
    };
    let g = cfg.grid()?;
    let reports: Vec<DissipationScalingReport> = pairs
        .iter()
        .map(|&(n, a)| dissipation_scaling_fit(&sec.deltas, sec.mass, n, a, &g))
        .collect::<Result<_>>()?;
    write_json(&out.join("dissipation.json"), &reports)?;
    let mut ok = true;
    for r in &reports {
        let slope = r.fit.map(|f| f.slope);
        println!(
            "n {} alpha {}  slope {:?} (target {})  c_fit {:.3e}",
            r.n, r.alpha, slope, r.target_exponent, r.c_fit
        );
        ok &= r.lower_bound_ok && r.slope_ok;
    }
    Ok(ok)
}

fn bb_action(cfg: &ExperimentConfig, out: &Path) -> Outcome {
    let sec: &BbSection = cfg
        .bb
        .as_ref()
        .ok_or_else(|| Error::Config("bb-action needs a [bb] section".into()))?;
    let g = cfg.grid()?;
    let (u0, u1) = opposed_profiles(&g, 1.0, sec.concentration, sec.floor)?;
    let ns = match &sec.n_values {
        Some(v) => v.clone(),
        None => vec![cfg
            .mobility_exponent()
            .ok_or_else(|| Error::Config("give [bb] n_values or a power-law mobility".into()))?],
    };
    let reports: Vec<BBActionReport> = ns
        .iter()
        .map(|&n| {
            bb_action_demo(
                &u0,
                &u1,
                sec.eta,
                &sec.m_sweep,
                n,
                cfg.alpha,
                &g,
                sec.steps_per_stage,
            )
        })
        .collect::<Result<_>>()?;
    write_json(&out.join("bb_action.json"), &reports)?;
    let mut ok = true;
    for r in &reports {
        println!(
            "n {}  actions {:?}  ratio {:.3}  decreasing {}",
            r.n, r.actions, r.decay_ratio, r.strictly_decreasing
        );
        if r.degeneracy_expected {
            ok &= r.strictly_decreasing && r.decay_ratio <= 0.2;
        }
    }
    Ok(ok)
}

#[derive(Serialize)]
struct RatesOutput {
    report: tfilm::experiments::RateReport,
    options: RateOptions,
}

fn rates(cfg: &ExperimentConfig, out: &Path) -> Outcome {
    let series = simulate_series(cfg, out)?;
    let options = cfg.rates.unwrap_or_default();
    let report = rate_fit(&series, cfg.alpha, &options)?;
    println!(
        "class {:?}  rate {:?}  t_star {:?}",
        report.class, report.rate, report.t_star
    );
    let ok = report.class != RateClass::Inconclusive;
    write_json(&out.join("rates.json"), &RatesOutput { report, options })?;
    Ok(ok)
}

fn audit(cfg: &ExperimentConfig, out: &Path) -> Outcome {
    let series = simulate_series(cfg, out)?;
    let sec = cfg.audit.unwrap_or_default();
    let t = sec.t.unwrap_or(series.diagnostics.len() - 1);
    let report = audit_ede(&series, sec.s, t)?;
    write_json(&out.join("audit.json"), &report)?;
    println!(
        "rows {}..{}  slack {:.3e}  allowed {:.3e}  equality defect {:.3e}",
        report.s_idx, report.t_idx, report.inequality_slack, report.allowed, report.equality_defect
    );
    Ok(report.passes)
}

fn point_lemma(cfg: &ExperimentConfig, out: &Path) -> Outcome {
    let sec: PointLemmaSection = cfg.point_lemma.clone().unwrap_or_default();
    let g = cfg.grid()?;
    let witnesses: Vec<PointWitness> = (0..sec.profiles as u64)
        .map(|k| {
            let u = random_cosine(
                &g,
                sec.mean,
                sec.amplitude,
                sec.modes,
                cfg.seed.wrapping_add(k),
            );
            point_lemma_check(&u, &g)
        })
        .collect::<Result<_>>()?;
    write_json(&out.join("point_lemma.json"), &witnesses)?;
    let found = witnesses.iter().filter(|w| w.found).count();
    println!("witness found for {found} of {} profiles", witnesses.len());
    Ok(found == witnesses.len())
}
