use serde::{Deserialize, Serialize};

use super::{linear_fit, LinearFit};
use crate::driver::TimeSeries;
use crate::error::{param, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateClass {
    Exponential,
    Algebraic,
    FiniteTime,
    Inconclusive,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RateOptions {
    /// Fraction of the admissible window, counted from its end, used for fitting.
    pub tail_fraction: f64,
    pub tol_extinct: f64,
    /// Energies below this are treated as roundoff and excluded from fits.
    pub noise_floor: f64,
    pub min_points: usize,
}

impl Default for RateOptions {
    fn default() -> Self {
        Self {
            tail_fraction: 0.5,
            tol_extinct: 1e-10,
            noise_floor: 1e-13,
            min_points: 5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub alpha: f64,
    pub class: RateClass,
    /// Exponential: decay rate of `E`. Algebraic: exponent of `E ~ t^{-rate}`.
    pub rate: Option<f64>,
    pub fit: Option<LinearFit>,
    pub t_star: Option<f64>,
    pub window: Option<(f64, f64)>,
    pub note: String,
}

impl RateReport {
    fn inconclusive(alpha: f64, note: impl Into<String>) -> Self {
        Self {
            alpha,
            class: RateClass::Inconclusive,
            rate: None,
            fit: None,
            t_star: None,
            window: None,
            note: note.into(),
        }
    }
}

/// Classifies how the energy of a lifted-off run decays.
pub fn rate_fit(series: &TimeSeries, alpha: f64, opts: &RateOptions) -> Result<RateReport> {
    if !(opts.tail_fraction > 0.0 && opts.tail_fraction <= 1.0) {
        return Err(param("tail_fraction", "need 0 < tail_fraction <= 1"));
    }
    let d = &series.diagnostics;
    if alpha < 1.0 {
        let first = d.iter().position(|r| r.e_total <= opts.tol_extinct);
        return Ok(match first {
            Some(k) if d[k..].iter().all(|r| r.e_total <= opts.tol_extinct) => RateReport {
                alpha,
                class: RateClass::FiniteTime,
                rate: None,
                fit: None,
                t_star: Some(d[k].t),
                window: Some((d[k].t, d[d.len() - 1].t)),
                note: String::new(),
            },
            Some(_) => RateReport::inconclusive(alpha, "energy rose above the extinction level"),
            None => RateReport::inconclusive(alpha, "no extinction within the run"),
        });
    }

    let half = 0.5 * d[0].mass / series.config.grid.length();
    let lifted = d.iter().position(|r| r.min_u >= half);
    let Some(start) = lifted else {
        return Ok(RateReport::inconclusive(alpha, "run never lifted off"));
    };
    let admissible: Vec<usize> = (start.max(1)..d.len())
        .filter(|&k| d[k].e_total > opts.noise_floor)
        .collect();
    let skip = ((1.0 - opts.tail_fraction) * admissible.len() as f64).floor() as usize;
    let window = &admissible[skip..];
    if window.len() < opts.min_points {
        return Ok(RateReport::inconclusive(alpha, "fit window too short"));
    }
    let ly: Vec<f64> = window.iter().map(|&k| d[k].e_total.ln()).collect();
    let xs: Vec<f64> = if alpha == 1.0 {
        window.iter().map(|&k| d[k].t).collect()
    } else {
        window.iter().map(|&k| d[k].t.ln()).collect()
    };
    let fit = linear_fit(&xs, &ly);
    let class = match fit {
        Some(f) if f.slope < 0.0 => {
            if alpha == 1.0 {
                RateClass::Exponential
            } else {
                RateClass::Algebraic
            }
        }
        _ => RateClass::Inconclusive,
    };
    Ok(RateReport {
        alpha,
        class,
        rate: fit.map(|f| -f.slope),
        fit,
        t_star: None,
        window: Some((d[window[0]].t, d[*window.last().unwrap()].t)),
        note: String::new(),
    })
}
