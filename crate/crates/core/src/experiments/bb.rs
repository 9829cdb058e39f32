use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::grid::{self, CellField, Grid};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BBActionReport {
    pub eta: f64,
    pub n: f64,
    pub alpha: f64,
    pub m_sweep: Vec<f64>,
    pub actions: Vec<f64>,
    /// Per-M action of the concentration, transport and spreading stages.
    pub stage_actions: Vec<[f64; 3]>,
    pub strictly_decreasing: bool,
    /// `action(M_last) / action(M_first)`.
    pub decay_ratio: f64,
    pub degeneracy_expected: bool,
    /// Largest `|j|` left at the right wall by the cumulative-sum flux.
    pub max_wall_flux: f64,
    pub u1_rescale: f64,
}

/// Adds `height` times the cell-averaged indicator of `[a, b]` to `u`.
fn add_block(u: &mut [f64], dx: f64, a: f64, b: f64, height: f64) {
    let n = u.len();
    let first = ((a / dx).floor().max(0.0) as usize).min(n - 1);
    let last = ((b / dx).floor().max(0.0) as usize).min(n - 1);
    for (i, ui) in u.iter_mut().enumerate().take(last + 1).skip(first) {
        let lo = (i as f64 * dx).max(a);
        let hi = ((i + 1) as f64 * dx).min(b);
        if hi > lo {
            *ui += height * (hi - lo) / dx;
        }
    }
}

struct Path<'a> {
    g: &'a Grid,
    u0: &'a [f64],
    u1: &'a [f64],
    delta: f64,
    eta: f64,
    m: f64,
    points: Vec<f64>,
    a: Vec<f64>,
    b: Vec<f64>,
    /// Coupling weights, row-major in (source, target).
    gamma: Vec<f64>,
}

impl Path<'_> {
    fn bumps(&self, weights: &[f64]) -> Vec<f64> {
        let mut u = vec![self.delta; self.g.cells()];
        let r = self.eta / self.m;
        for (z, w) in self.points.iter().zip(weights) {
            add_block(
                &mut u,
                self.g.dx(),
                z - r,
                z + r,
                w * self.m / (2.0 * self.eta),
            );
        }
        u
    }

    fn transport(&self, s: f64) -> Vec<f64> {
        let mut u = vec![self.delta; self.g.cells()];
        let r = self.eta / self.m;
        let k = self.points.len();
        for (i, z) in self.points.iter().enumerate() {
            for (l, zp) in self.points.iter().enumerate() {
                let w = self.gamma[i * k + l];
                if w == 0.0 {
                    continue;
                }
                let c = z + s * (zp - z);
                add_block(
                    &mut u,
                    self.g.dx(),
                    c - r,
                    c + r,
                    w * self.m / (2.0 * self.eta),
                );
            }
        }
        u
    }
}

fn lerp(a: &[f64], b: &[f64], s: f64) -> Vec<f64> {
    a.iter()
        .zip(b)
        .map(|(x, y)| (1.0 - s) * x + s * y)
        .collect()
}

/// Action of a discrete path `levels` spaced `dt` apart, with the flux
/// recovered from the continuity equation. Returns the action and the
/// largest residual wall flux.
fn path_action(levels: &[Vec<f64>], dt: f64, dx: f64, n: f64, alpha: f64) -> (f64, f64) {
    let p = (alpha + 1.0) / alpha;
    let mut action = 0.0;
    let mut wall = 0.0_f64;
    for w in levels.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        let mut j = 0.0;
        let mut sum = 0.0;
        for f in 1..a.len() {
            j -= (b[f - 1] - a[f - 1]) / dt * dx;
            let um = 0.25 * (a[f - 1] + b[f - 1] + a[f] + b[f]);
            sum += j.abs().powf(p) / um.powf(n / alpha);
        }
        let last = a.len() - 1;
        wall = wall.max((j - (b[last] - a[last]) / dt * dx).abs());
        action += sum * dx * dt;
    }
    (action, wall)
}

/// Action of the three-stage concentrate, transport, spread path between
/// `u0` and `u1` for each concentration factor in `m_sweep`.
#[allow(clippy::too_many_arguments)]
pub fn bb_action_demo(
    u0: &CellField,
    u1: &CellField,
    eta: f64,
    m_sweep: &[f64],
    n: f64,
    alpha: f64,
    g: &Grid,
    steps_per_stage: usize,
) -> Result<BBActionReport> {
    g.check_cells(u0)?;
    g.check_cells(u1)?;
    if (g.length() - 1.0).abs() > 1e-14 {
        return Err(param("L", "the construction is set on the unit interval"));
    }
    if !(eta > 0.0 && eta < 0.5) {
        return Err(param("eta", "need 0 < eta < 1/2"));
    }
    if m_sweep.iter().any(|&m| !(m >= 2.0)) {
        return Err(param("M", "concentration factors must be >= 2"));
    }
    if steps_per_stage == 0 {
        return Err(param("steps_per_stage", "need at least one step"));
    }
    if u0.min() <= 0.0 || u1.min() <= 0.0 {
        return Err(Error::Precondition(
            "u0 and u1 must be strictly positive".into(),
        ));
    }
    let (m0, m1) = (grid::integrate(g, u0), grid::integrate(g, u1));
    if ((m0 - m1) / m0).abs() > 1e-6 {
        return Err(Error::Precondition(format!(
            "u0 and u1 carry different mass ({m0} vs {m1})"
        )));
    }
    let rescale = m0 / m1;
    let u1s = u1.map(|v| v * rescale);
    let degeneracy_expected = n > 1.0;

    let same = u0
        .iter()
        .zip(u1s.iter())
        .all(|(a, b)| (a - b).abs() <= 1e-14 * a.abs());
    if same {
        let zeros = vec![0.0; m_sweep.len()];
        return Ok(BBActionReport {
            eta,
            n,
            alpha,
            m_sweep: m_sweep.to_vec(),
            actions: zeros.clone(),
            stage_actions: vec![[0.0; 3]; m_sweep.len()],
            strictly_decreasing: false,
            decay_ratio: 0.0,
            degeneracy_expected,
            max_wall_flux: 0.0,
            u1_rescale: rescale,
        });
    }

    let k = ((1.0 / eta).round() as usize).saturating_sub(1).max(1);
    let points: Vec<f64> = (1..=k).map(|i| i as f64 * eta).collect();
    let delta = 0.5 * u0.min().min(u1s.min());
    let dx = g.dx();
    let lump = |u: &CellField| -> Vec<f64> {
        let mut w = vec![0.0; k];
        for (i, v) in u.iter().enumerate() {
            let x = g.cell_center(i);
            let z = ((x / eta).round() as usize).clamp(1, k);
            w[z - 1] += (v - delta) * dx;
        }
        w
    };
    let a = lump(u0);
    let b = lump(&u1s);
    let total: f64 = a.iter().sum();
    let mut gamma = vec![0.0; k * k];
    for i in 0..k {
        for l in 0..k {
            gamma[i * k + l] = a[i] * b[l] / total;
        }
    }

    let dt = 1.0 / (3.0 * steps_per_stage as f64);
    let results: Vec<([f64; 3], f64)> = m_sweep
        .par_iter()
        .map(|&m| {
            let path = Path {
                g,
                u0: &u0.0,
                u1: &u1s.0,
                delta,
                eta,
                m,
                points: points.clone(),
                a: a.clone(),
                b: b.clone(),
                gamma: gamma.clone(),
            };
            let ns = steps_per_stage;
            let bump0 = path.bumps(&path.a);
            let bump1 = path.bumps(&path.b);
            let s1: Vec<Vec<f64>> = (0..=ns)
                .map(|q| lerp(path.u0, &bump0, q as f64 / ns as f64))
                .collect();
            let s2: Vec<Vec<f64>> = (0..=ns)
                .map(|q| path.transport(q as f64 / ns as f64))
                .collect();
            let s3: Vec<Vec<f64>> = (0..=ns)
                .map(|q| lerp(&bump1, path.u1, q as f64 / ns as f64))
                .collect();
            let mut stages = [0.0; 3];
            let mut wall = 0.0_f64;
            for (slot, levels) in stages.iter_mut().zip([&s1, &s2, &s3]) {
                let (act, wf) = path_action(levels, dt, dx, n, alpha);
                *slot = act;
                wall = wall.max(wf);
            }
            (stages, wall)
        })
        .collect();

    let stage_actions: Vec<[f64; 3]> = results.iter().map(|r| r.0).collect();
    let actions: Vec<f64> = stage_actions.iter().map(|s| s.iter().sum()).collect();
    let max_wall_flux = results.iter().map(|r| r.1).fold(0.0, f64::max);
    let strictly_decreasing = actions.windows(2).all(|w| w[1] < w[0]);
    let decay_ratio = actions.last().unwrap_or(&0.0) / actions.first().unwrap_or(&1.0);
    Ok(BBActionReport {
        eta,
        n,
        alpha,
        m_sweep: m_sweep.to_vec(),
        actions,
        stage_actions,
        strictly_decreasing,
        decay_ratio,
        degeneracy_expected,
        max_wall_flux,
        u1_rescale: rescale,
    })
}

/// End points `u0 = M (b + (1 - b) (1 + cos(pi x))^k / c_k)` and its mirror
/// image `u1(x) = u0(1 - x)`, with `c_k` normalising the bump to unit mass.
pub fn opposed_profiles(g: &Grid, mass: f64, k: i32, b: f64) -> Result<(CellField, CellField)> {
    if !(b > 0.0 && b <= 1.0) {
        return Err(param("floor", "need 0 < b <= 1"));
    }
    if k < 0 {
        return Err(param("concentration", "need k >= 0"));
    }
    if !(mass > 0.0) {
        return Err(param("mass", "need M > 0"));
    }
    let pi = std::f64::consts::PI;
    let w = g.sample(|x| (1.0 + (pi * x / g.length()).cos()).powi(k));
    let mw = grid::integrate(g, &w);
    let u0 = w.map(|v| mass * (b / g.length() + (1.0 - b) * v / mw));
    let u1 = CellField(u0.0.iter().rev().cloned().collect());
    Ok((u0, u1))
}
