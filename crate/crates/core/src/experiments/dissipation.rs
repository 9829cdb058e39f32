use serde::{Deserialize, Serialize};

use super::{linear_fit, LinearFit};
use crate::error::{param, Error, Result};
use crate::grid::{self, CellField, Grid};
use crate::models::{mobility_face, MobilitySpec};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WProfile {
    pub l: f64,
    pub w: CellField,
    /// Cell averages of `w''`.
    pub w_dd: CellField,
    /// `w'` at the faces, from integrating `w_dd`.
    pub w_d: Vec<f64>,
    pub beta: f64,
}

/// `int_{1/2}^x w''` for `w'' = -1 + (1/l)(1 - |x - 1/2|/l)_+`.
fn w_prime_exact(l: f64, x: f64) -> f64 {
    let r = (x - 0.5).abs().min(l);
    let tent = r / l - r * r / (2.0 * l * l);
    -(x - 0.5) + tent * (x - 0.5).signum()
}

/// Builds `w_l` with `w(1/2) = w'(1/2) = 0` by integrating `w''` twice.
pub fn build_w_l(l: f64, g: &Grid) -> Result<WProfile> {
    if !(l > 0.0 && l <= 0.5) {
        return Err(param("l", "need 0 < l <= 1/2"));
    }
    if (g.length() - 1.0).abs() > 1e-14 || g.cells() % 2 != 0 {
        return Err(param(
            "N",
            "w_l needs the unit interval with an even cell count",
        ));
    }
    let n = g.cells();
    let dx = g.dx();
    let w_dd: Vec<f64> = (0..n)
        .map(|i| {
            (w_prime_exact(l, g.face_position(i + 1)) - w_prime_exact(l, g.face_position(i))) / dx
        })
        .collect();

    let c = n / 2;
    let mut w_d = vec![0.0; n + 1];
    for f in c + 1..=n {
        w_d[f] = w_d[f - 1] + w_dd[f - 1] * dx;
    }
    for f in (0..c).rev() {
        w_d[f] = w_d[f + 1] - w_dd[f] * dx;
    }

    let mut w = vec![0.0; n];
    // Half a cell away from the centre, with w' growing linearly from zero.
    w[c] = w_d[c + 1] * dx / 8.0;
    w[c - 1] = -w_d[c - 1] * dx / 8.0;
    for i in c + 1..n {
        w[i] = w[i - 1] + w_d[i] * dx;
    }
    for i in (0..c - 1).rev() {
        w[i] = w[i + 1] - w_d[i + 1] * dx;
    }
    let w = CellField(w);
    Ok(WProfile {
        l,
        beta: grid::integrate(g, &w),
        w,
        w_dd: CellField(w_dd),
        w_d,
    })
}

/// `min{1, delta^{n-1-2 alpha}} / log^{alpha+1}(M/delta)`.
pub fn f_lower(delta: f64, mass: f64, n: f64, alpha: f64) -> f64 {
    let e = n - 1.0 - 2.0 * alpha;
    delta.powf(e).min(1.0) / (mass / delta).ln().powf(alpha + 1.0)
}

/// Discrete `int u^n |u'''|^{alpha+1}` on the interior faces.
pub fn dissipation_integral(g: &Grid, u: &CellField, n: f64, alpha: f64) -> Result<f64> {
    let lap = grid::laplacian_neumann(g, u)?;
    let third = grid::gradient(g, &lap)?;
    let m = mobility_face(&MobilitySpec::Power { n }, u, g)?;
    let s: f64 = third
        .interior()
        .iter()
        .zip(m.interior())
        .map(|(t, mf)| mf * t.abs().powf(alpha + 1.0))
        .sum();
    Ok(s * g.dx())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DissipationScalingReport {
    pub mass: f64,
    pub n: f64,
    pub alpha: f64,
    pub deltas: Vec<f64>,
    pub dissipation: Vec<f64>,
    pub target_exponent: f64,
    pub fit: Option<LinearFit>,
    pub f_values: Vec<f64>,
    /// Largest `c` with `D >= c f` over the sweep.
    pub c_fit: f64,
    pub lower_bound_ok: bool,
    pub slope_ok: bool,
}

/// Evaluates the dissipation of `delta + ((M - delta)/beta_l) w_l`, `l = delta`,
/// and fits its power-law behaviour in `delta`.
pub fn dissipation_scaling_fit(
    deltas: &[f64],
    mass: f64,
    n: f64,
    alpha: f64,
    g: &Grid,
) -> Result<DissipationScalingReport> {
    if deltas.iter().any(|&d| !(d > 0.0 && d < mass / 2.0)) {
        return Err(param("deltas", "need 0 < delta < M/2"));
    }
    if deltas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(param("deltas", "deltas must be strictly decreasing"));
    }
    let dmin = *deltas
        .last()
        .ok_or_else(|| param("deltas", "empty sweep"))?;
    let required = (32.0 / dmin).ceil() as usize;
    if g.cells() < required {
        return Err(Error::Resolution {
            required,
            got: g.cells(),
        });
    }
    let mut dissipation = Vec::with_capacity(deltas.len());
    for &d in deltas {
        let wp = build_w_l(d.min(0.5), g)?;
        let scale = (mass - d) / wp.beta;
        let u = wp.w.map(|w| d + scale * w);
        dissipation.push(dissipation_integral(g, &u, n, alpha)?);
    }

    let target = n - 1.0 - 2.0 * alpha;
    let (xs, ys): (Vec<f64>, Vec<f64>) = deltas
        .iter()
        .zip(&dissipation)
        .filter(|(d, _)| **d < 1.0)
        .map(|(d, v)| (d.ln(), v.ln()))
        .unzip();
    let decades = match (xs.first(), xs.last()) {
        (Some(a), Some(b)) => (a - b) / std::f64::consts::LN_10,
        _ => 0.0,
    };
    let fit = if xs.len() >= 4 && decades >= 2.0 - 1e-9 {
        linear_fit(&xs, &ys)
    } else {
        None
    };
    let slope_ok = fit.map_or(false, |f| (f.slope - target).abs() <= 0.15);

    let f_values: Vec<f64> = deltas.iter().map(|&d| f_lower(d, mass, n, alpha)).collect();
    let c_fit = dissipation
        .iter()
        .zip(&f_values)
        .map(|(d, f)| d / f)
        .fold(f64::INFINITY, f64::min);
    let lower_bound_ok = c_fit > 0.0
        && c_fit.is_finite()
        && dissipation
            .iter()
            .zip(&f_values)
            .all(|(d, f)| *d >= c_fit * f);
    Ok(DissipationScalingReport {
        mass,
        n,
        alpha,
        deltas: deltas.to_vec(),
        dissipation,
        target_exponent: target,
        fit,
        f_values,
        c_fit,
        lower_bound_ok,
        slope_ok,
    })
}
