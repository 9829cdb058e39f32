//! Numerical experiments on long-time behaviour, dissipation bounds and the
//! degeneracy of the Benamou-Brenier distance.

pub mod bb;
pub mod dissipation;
pub mod liftoff;
pub mod point;
pub mod rates;

pub use bb::{bb_action_demo, opposed_profiles, BBActionReport};
pub use dissipation::{build_w_l, dissipation_scaling_fit, DissipationScalingReport, WProfile};
pub use liftoff::{
    build_parabola_v, dirichlet_bound_check, liftoff_sweep, LiftoffConfig, LiftoffReport, ParabolaV,
};
pub use point::{point_lemma_check, PointWitness};
pub use rates::{rate_fit, RateClass, RateOptions, RateReport};

use serde::{Deserialize, Serialize};

/// Least-squares line `y = intercept + slope x`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub points: usize,
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> Option<LinearFit> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return None;
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 {
        1.0
    } else {
        sxy * sxy / (sxx * syy)
    };
    Some(LinearFit {
        slope,
        intercept,
        r2,
        points: n,
    })
}

pub(crate) fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(|a, b| a.total_cmp(b));
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}
