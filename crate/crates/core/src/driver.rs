//! Time stepping, per-step diagnostics and the audits that consume them.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::grid::{self, CellField, Grid};
use crate::models::{self, Energy, ModelParams, PotentialSpec};
use crate::step::{self, StepParams};

/// Initial film height.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialDataSpec {
    Constant {
        value: f64,
    },
    /// `mean + amplitude cos(mode pi x / L)`.
    Cosine {
        mean: f64,
        amplitude: f64,
        mode: u32,
    },
    /// The touching parabola `(3M/2)(1 - x^2)` on the unit interval.
    Parabola {
        mass: f64,
    },
    /// `delta + (1 - delta/M) v`, the Dirichlet minimiser with minimum `delta`.
    LiftoffFamily {
        mass: f64,
        delta: f64,
    },
    /// `mean + amplitude * sum_k c_k cos(k pi x / L) / k^2` with seeded
    /// coefficients `c_k` in `[-1, 1]`, normalised so the series stays in
    /// `[-amplitude, amplitude]`.
    RandomCosine {
        mean: f64,
        amplitude: f64,
        modes: u32,
        seed: u64,
    },
    Values {
        values: Vec<f64>,
    },
}

impl Default for InitialDataSpec {
    fn default() -> Self {
        InitialDataSpec::Cosine {
            mean: 1.0,
            amplitude: 0.5,
            mode: 1,
        }
    }
}

/// Samples `(3M/2)(1 - x^2)` at the cell centres of a unit-interval grid.
pub(crate) fn parabola_cells(g: &Grid, mass: f64) -> CellField {
    g.sample(|x| 1.5 * mass * (1.0 - x * x))
}

impl InitialDataSpec {
    pub fn build(&self, g: &Grid) -> Result<CellField> {
        let l = g.length();
        let pi = std::f64::consts::PI;
        let u = match self {
            InitialDataSpec::Constant { value } => CellField(vec![*value; g.cells()]),
            InitialDataSpec::Cosine {
                mean,
                amplitude,
                mode,
            } => {
                let k = *mode as f64;
                g.sample(|x| mean + amplitude * (k * pi * x / l).cos())
            }
            InitialDataSpec::Parabola { mass } => {
                unit_domain(g)?;
                parabola_cells(g, *mass)
            }
            InitialDataSpec::LiftoffFamily { mass, delta } => {
                unit_domain(g)?;
                if !(*delta > 0.0 && delta < mass) {
                    return Err(param("initial.delta", "need 0 < delta < mass"));
                }
                let v = parabola_cells(g, *mass);
                v.map(|s| delta + (1.0 - delta / mass) * s)
            }
            InitialDataSpec::RandomCosine {
                mean,
                amplitude,
                modes,
                seed,
            } => random_cosine(g, *mean, *amplitude, *modes, *seed),
            InitialDataSpec::Values { values } => {
                let u = CellField(values.clone());
                g.check_cells(&u)?;
                u
            }
        };
        Ok(u)
    }
}

fn unit_domain(g: &Grid) -> Result<()> {
    if (g.length() - 1.0).abs() > 1e-14 {
        return Err(param("L", "this profile is defined on the unit interval"));
    }
    Ok(())
}

/// Smooth Neumann profile from a seeded truncated cosine series.
pub fn random_cosine(g: &Grid, mean: f64, amplitude: f64, modes: u32, seed: u64) -> CellField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coef: Vec<f64> = (1..=modes).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let norm: f64 = coef
        .iter()
        .enumerate()
        .map(|(k, c)| c.abs() / ((k + 1) as f64).powi(2))
        .sum::<f64>()
        .max(1e-300);
    let pi = std::f64::consts::PI;
    let l = g.length();
    g.sample(|x| {
        let s: f64 = coef
            .iter()
            .enumerate()
            .map(|(k, c)| {
                let kk = (k + 1) as f64;
                c * (kk * pi * x / l).cos() / (kk * kk)
            })
            .sum();
        mean + amplitude * s / norm
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub grid: Grid,
    pub model: ModelParams,
    pub step: StepParams,
    pub t_final: f64,
    pub record_every: usize,
    pub initial: InitialDataSpec,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.step.validate()?;
        if !(self.t_final >= self.step.h) {
            return Err(param("T", "final time must be at least one time step"));
        }
        if self.record_every == 0 {
            return Err(param("record_every", "snapshot stride must be >= 1"));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.t_final / self.step.h - 1e-9).ceil() as usize
    }

    /// `eps_min^p |Omega| + 10 tol_grad`.
    pub fn tol_audit(&self) -> f64 {
        tol_audit(&self.grid, &self.model, &self.step)
    }
}

pub fn tol_audit(g: &Grid, mp: &ModelParams, sp: &StepParams) -> f64 {
    sp.eps_min.powf(mp.p()) * g.length() + 10.0 * sp.tol_grad
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepDiagnostics {
    pub t: f64,
    pub mass: f64,
    pub min_u: f64,
    pub max_u: f64,
    pub e_dirichlet: f64,
    pub e_potential: f64,
    pub e_total: f64,
    pub diss_flux: f64,
    pub diss_strong: f64,
    pub ede_slack: f64,
    pub el_residual: f64,
    pub newton_iters: usize,
    pub diss_smoothed: f64,
    pub work: f64,
    pub grad_norm: f64,
}

impl StepDiagnostics {
    fn initial(g: &Grid, u: &CellField, e: &models::EnergyBreakdown) -> Self {
        Self {
            t: 0.0,
            mass: grid::integrate(g, u),
            min_u: u.min(),
            max_u: u.max(),
            e_dirichlet: e.dirichlet,
            e_potential: e.potential.to_f64(),
            e_total: e.total.to_f64(),
            diss_flux: 0.0,
            diss_strong: 0.0,
            ede_slack: 0.0,
            el_residual: 0.0,
            newton_iters: 0,
            diss_smoothed: 0.0,
            work: 0.0,
            grad_norm: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub step: usize,
    pub t: f64,
    pub u: CellField,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub config: RunConfig,
    /// Row `k` describes the state after `k` steps (row 0 is the initial state).
    pub diagnostics: Vec<StepDiagnostics>,
    pub snapshots: Vec<Snapshot>,
    pub tol_audit: f64,
}

impl TimeSeries {
    pub fn final_state(&self) -> &CellField {
        &self
            .snapshots
            .last()
            .expect("a run always stores its final state")
            .u
    }

    pub fn times(&self) -> Vec<f64> {
        self.diagnostics.iter().map(|d| d.t).collect()
    }

    /// Steps whose one-step EDI slack is below `-tol_audit`.
    pub fn edi_violations(&self) -> Vec<usize> {
        self.diagnostics
            .iter()
            .enumerate()
            .skip(1)
            .filter(|(_, d)| d.ede_slack < -self.tol_audit)
            .map(|(k, _)| k)
            .collect()
    }

    /// Largest relative deviation of the mass column from its initial value.
    pub fn mass_drift(&self) -> f64 {
        let m0 = self.diagnostics[0].mass;
        self.diagnostics
            .iter()
            .map(|d| ((d.mass - m0) / m0).abs())
            .fold(0.0, f64::max)
    }

    /// Piecewise-affine reconstruction of the height at time `t`.
    pub fn affine_at(&self, t: f64) -> Option<CellField> {
        let snaps = &self.snapshots;
        let idx = snaps.iter().position(|s| s.t >= t)?;
        if idx == 0 || (snaps[idx].t - t).abs() < 1e-15 {
            return Some(snaps[idx].u.clone());
        }
        let (a, b) = (&snaps[idx - 1], &snaps[idx]);
        let s = (t - a.t) / (b.t - a.t);
        Some(CellField(
            a.u.iter()
                .zip(b.u.iter())
                .map(|(x, y)| (1.0 - s) * x + s * y)
                .collect(),
        ))
    }
}

/// Runs the minimising-movement scheme from the configured initial data.
pub fn run(cfg: &RunConfig) -> Result<TimeSeries> {
    cfg.validate()?;
    let u0 = cfg.initial.build(&cfg.grid)?;
    run_from(cfg, u0)
}

/// Runs the scheme from an explicit initial height, ignoring `cfg.initial`.
pub fn run_from(cfg: &RunConfig, u0: CellField) -> Result<TimeSeries> {
    cfg.validate()?;
    let g = &cfg.grid;
    g.check_cells(&u0)?;
    if u0.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::Precondition(
            "initial height must be strictly positive".into(),
        ));
    }
    let pot = cfg.model.modified_potential()?;
    let e0 = models::energy(g, &u0, &pot)?;
    if !e0.total.is_finite() {
        return Err(Error::Precondition(
            "initial height has infinite energy".into(),
        ));
    }

    let steps = cfg.steps();
    let h = cfg.step.h;
    let mut diagnostics = Vec::with_capacity(steps + 1);
    diagnostics.push(StepDiagnostics::initial(g, &u0, &e0));
    let mut snapshots = vec![Snapshot {
        step: 0,
        t: 0.0,
        u: u0.clone(),
    }];

    let mut u = u0;
    let mut e_prev = e0.total.to_f64();
    for k in 1..=steps {
        let res = step::solve_step(g, &u, &cfg.model, &cfg.step).map_err(|e| Error::AtStep {
            step: k,
            source: Box::new(e),
        })?;
        let e = models::energy(g, &res.u_next, &pot)?;
        let e_total = e.total.to_f64();
        diagnostics.push(StepDiagnostics {
            t: k as f64 * h,
            mass: grid::integrate(g, &res.u_next),
            min_u: res.u_next.min(),
            max_u: res.u_next.max(),
            e_dirichlet: e.dirichlet,
            e_potential: e.potential.to_f64(),
            e_total,
            diss_flux: res.dissipation_flux_term,
            diss_strong: res.dissipation_strong_term,
            ede_slack: e_prev - e_total - h * res.dissipation_smoothed_term,
            el_residual: res.el_residual_norm,
            newton_iters: res.newton_iters,
            diss_smoothed: res.dissipation_smoothed_term,
            work: res.work_term,
            grad_norm: res.final_grad_norm,
        });
        e_prev = e_total;
        u = res.u_next;
        if k % cfg.record_every == 0 || k == steps {
            snapshots.push(Snapshot {
                step: k,
                t: k as f64 * h,
                u: u.clone(),
            });
        }
    }

    Ok(TimeSeries {
        config: cfg.clone(),
        diagnostics,
        snapshots,
        tol_audit: cfg.tol_audit(),
    })
}

/// Runs independent configurations in parallel; output order matches input.
pub fn run_many(cfgs: &[RunConfig]) -> Vec<Result<TimeSeries>> {
    cfgs.par_iter().map(run).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub s_idx: usize,
    pub t_idx: usize,
    /// `E(t) + sum h [alpha/(alpha+1) D_flux + 1/(alpha+1) D_strong] - E(s)`.
    pub inequality_slack: f64,
    pub allowed: f64,
    pub passes: bool,
    /// Fenchel-Young defect `sum h [alpha/(alpha+1) D_flux + 1/(alpha+1) D_strong - W]`,
    /// zero exactly when the Euler-Lagrange flux relation holds.
    pub equality_defect: f64,
    /// Convexity gap `E(s) - E(t) - sum h W`; vanishes as `h -> 0`.
    pub convexity_gap: f64,
}

/// Energy-dissipation audit between diagnostic rows `s_idx < t_idx`.
pub fn audit_ede(series: &TimeSeries, s_idx: usize, t_idx: usize) -> Result<AuditReport> {
    let n = series.diagnostics.len();
    if !(s_idx < t_idx && t_idx < n) {
        return Err(Error::Index(format!(
            "need s < t < {n}, got s = {s_idx}, t = {t_idx}"
        )));
    }
    let alpha = series.config.model.alpha;
    let h = series.config.step.h;
    let d = &series.diagnostics;
    let (cf, cs) = (alpha / (alpha + 1.0), 1.0 / (alpha + 1.0));
    let mut diss = 0.0;
    let mut work = 0.0;
    for row in &d[s_idx + 1..=t_idx] {
        diss += h * (cf * row.diss_flux + cs * row.diss_strong);
        work += h * row.work;
    }
    let slack = d[t_idx].e_total + diss - d[s_idx].e_total;
    let allowed = series.tol_audit * (t_idx - s_idx) as f64;
    Ok(AuditReport {
        s_idx,
        t_idx,
        inequality_slack: slack,
        allowed,
        passes: slack <= allowed,
        equality_defect: diss - work,
        convexity_gap: d[s_idx].e_total - d[t_idx].e_total - work,
    })
}

/// Energy with the unmodified potential, counted only where `u >= 2 sigma`.
pub fn unmodified_energy(g: &Grid, u: &CellField, pot: &PotentialSpec, sigma: f64) -> f64 {
    let e = models::energy_slice(g.dx(), &u.0, |s| {
        if s >= 2.0 * sigma {
            Energy::Finite(pot.value(s))
        } else {
            Energy::Finite(0.0)
        }
    });
    e.total.to_f64()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SigmaRun {
    pub sigma: f64,
    pub mass_initial: f64,
    /// Mass added by the lift `u0 + 2 sigma`.
    pub mass_lift: f64,
    /// Relative mass drift of the run itself.
    pub mass_drift: f64,
    pub min_u: f64,
    pub steps: usize,
    /// Smallest value over snapshot times of
    /// `E(u0^sigma) - E(u(t)) - dissipation(0,t)` with the unmodified energy.
    pub limit_edi_slack: f64,
    pub limit_edi_allowed: f64,
    pub energy_initial: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContinuationReport {
    pub runs: Vec<SigmaRun>,
    /// Sup distance at matched snapshot times between runs `i` and `i+1`.
    pub sup_distances: Vec<f64>,
    /// Same distance after removing the mean of each profile.
    pub sup_distances_mean_free: Vec<f64>,
    pub distances_decreasing: bool,
    pub all_positive: bool,
    pub limit_edi_ok: bool,
}

/// Runs the scheme for each `sigma` from the lifted data `u0 + 2 sigma`.
pub fn sigma_continuation(
    u0_nonneg: &CellField,
    sigmas: &[f64],
    template: &RunConfig,
) -> Result<ContinuationReport> {
    if sigmas.is_empty() {
        return Err(param("sigmas", "need at least one sigma"));
    }
    if sigmas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(param("sigmas", "sigmas must be strictly decreasing"));
    }
    if u0_nonneg.iter().any(|&v| v < 0.0) {
        return Err(Error::Precondition("u0 must be non-negative".into()));
    }
    let g = template.grid;
    let results: Vec<Result<(f64, TimeSeries)>> = sigmas
        .par_iter()
        .map(|&sigma| {
            let mut cfg = template.clone();
            cfg.model.sigma = sigma;
            let u0 = u0_nonneg.map(|v| v + 2.0 * sigma);
            run_from(&cfg, u0)
                .map(|ts| (sigma, ts))
                .map_err(|e| Error::AtSigma {
                    sigma,
                    source: Box::new(e),
                })
        })
        .collect();
    let series: Vec<(f64, TimeSeries)> = results.into_iter().collect::<Result<_>>()?;

    let mass_base = grid::integrate(&g, u0_nonneg);
    let mut runs = Vec::new();
    for (sigma, ts) in &series {
        let model = &ts.config.model;
        let (cf, cs) = (model.alpha / (model.alpha + 1.0), 1.0 / (model.alpha + 1.0));
        let h = ts.config.step.h;
        let e0 = unmodified_energy(&g, &ts.snapshots[0].u, &model.potential, *sigma);
        let mut cum = vec![0.0; ts.diagnostics.len()];
        for k in 1..ts.diagnostics.len() {
            let row = &ts.diagnostics[k];
            cum[k] = cum[k - 1] + h * (cf * row.diss_flux + cs * row.diss_strong);
        }
        let mut worst = f64::INFINITY;
        for snap in &ts.snapshots[1..] {
            let e = unmodified_energy(&g, &snap.u, &model.potential, *sigma);
            worst = worst.min(e0 - e - cum[snap.step]);
        }
        let steps = ts.diagnostics.len() - 1;
        runs.push(SigmaRun {
            sigma: *sigma,
            mass_initial: ts.diagnostics[0].mass,
            mass_lift: ts.diagnostics[0].mass - mass_base,
            mass_drift: ts.mass_drift(),
            min_u: ts
                .diagnostics
                .iter()
                .map(|d| d.min_u)
                .fold(f64::INFINITY, f64::min),
            steps,
            limit_edi_slack: if worst.is_finite() { worst } else { 0.0 },
            limit_edi_allowed: ts.tol_audit * steps as f64,
            energy_initial: e0,
        });
    }

    let mut sup = Vec::new();
    let mut sup_mf = Vec::new();
    for pair in series.windows(2) {
        let (a, b) = (&pair[0].1, &pair[1].1);
        let mut d = 0.0_f64;
        let mut d_mf = 0.0_f64;
        for (sa, sb) in a.snapshots.iter().zip(&b.snapshots) {
            debug_assert_eq!(sa.step, sb.step);
            let ma = grid::integrate(&g, &sa.u) / g.length();
            let mb = grid::integrate(&g, &sb.u) / g.length();
            for (x, y) in sa.u.iter().zip(sb.u.iter()) {
                d = d.max((x - y).abs());
                d_mf = d_mf.max(((x - ma) - (y - mb)).abs());
            }
        }
        sup.push(d);
        sup_mf.push(d_mf);
    }
    let distances_decreasing = sup.windows(2).all(|w| w[1] < w[0]);
    let all_positive = runs.iter().all(|r| r.min_u > 0.0);
    let limit_edi_ok = runs
        .iter()
        .all(|r| r.limit_edi_slack >= -r.limit_edi_allowed);
    Ok(ContinuationReport {
        runs,
        sup_distances: sup,
        sup_distances_mean_free: sup_mf,
        distances_decreasing,
        all_positive,
        limit_edi_ok,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HolderReport {
    pub exponent: f64,
    pub quotient: f64,
    /// `E_sigma[u_0]^{1/2}`, the scale the quotient is compared against.
    pub energy_scale: f64,
    pub ratio: f64,
}

/// `max |u(t,x) - u(s,x)| / |t - s|^{1/(5 alpha + 3)}` over snapshot pairs.
pub fn holder_quotient(series: &TimeSeries, alpha: f64) -> Result<HolderReport> {
    let snaps = &series.snapshots;
    if snaps.len() < 2 {
        return Err(Error::Index("need at least two snapshots".into()));
    }
    let exponent = 1.0 / (5.0 * alpha + 3.0);
    let mut q = 0.0_f64;
    for a in 0..snaps.len() {
        for b in a + 1..snaps.len() {
            let dt = (snaps[b].t - snaps[a].t).abs();
            if dt == 0.0 {
                continue;
            }
            let du = snaps[a]
                .u
                .iter()
                .zip(snaps[b].u.iter())
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max);
            q = q.max(du / dt.powf(exponent));
        }
    }
    let e0 = series.diagnostics[0].e_total.max(0.0).sqrt();
    Ok(HolderReport {
        exponent,
        quotient: q,
        energy_scale: e0,
        ratio: if e0 > 0.0 { q / e0 } else { 0.0 },
    })
}
