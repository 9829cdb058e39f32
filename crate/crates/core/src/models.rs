//! Mobilities, potentials, the barrier-modified potential `G_sigma`, the
//! power nonlinearity `Psi`, and the discrete energy.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{param, Result};
use crate::grid::{CellField, FaceField, Grid};

/// Degenerate mobility `m(s)`, zero for `s <= 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MobilitySpec {
    /// `m(s) = s^n`.
    Power { n: f64 },
    /// `m(s) = lambda s^{alpha+1} + s^{alpha+2}`.
    NavierSlip { lambda: f64, alpha: f64 },
    /// `m = 1`. Only meant for the biharmonic test oracle.
    ConstantOne,
}

impl MobilitySpec {
    pub fn eval(&self, s: f64) -> f64 {
        match *self {
            MobilitySpec::ConstantOne => 1.0,
            _ if s <= 0.0 => 0.0,
            MobilitySpec::Power { n } => s.powf(n),
            MobilitySpec::NavierSlip { lambda, alpha } => {
                lambda * s.powf(alpha + 1.0) + s.powf(alpha + 2.0)
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            MobilitySpec::Power { n } if !(n > 0.0 && n.is_finite()) => Err(param(
                "mobility.n",
                format!("exponent must be positive, got {n}"),
            )),
            MobilitySpec::NavierSlip { lambda, alpha } => {
                if !(lambda > 0.0 && lambda.is_finite()) {
                    return Err(param("mobility.lambda", "slip length must be positive"));
                }
                if !(alpha > 0.0 && alpha.is_finite()) {
                    return Err(param("mobility.alpha", "exponent must be positive"));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Power-law exponent when the mobility is `s^n`.
    pub fn power_exponent(&self) -> Option<f64> {
        match *self {
            MobilitySpec::Power { n } => Some(n),
            _ => None,
        }
    }
}

/// Arithmetic-mean face mobility. Boundary faces copy the adjacent cell;
/// the flux vanishes there so the value never enters a computation.
pub fn mobility_face(m: &MobilitySpec, u: &CellField, g: &Grid) -> Result<FaceField> {
    g.check_cells(u)?;
    let mut out = vec![0.0; g.faces()];
    mobility_face_into(m, &u.0, &mut out);
    Ok(FaceField(out))
}

pub(crate) fn mobility_face_into(m: &MobilitySpec, u: &[f64], out: &mut [f64]) {
    let n = u.len();
    out[0] = m.eval(u[0]);
    out[n] = m.eval(u[n - 1]);
    for f in 1..n {
        out[f] = m.eval(0.5 * (u[f - 1] + u[f]));
    }
}

/// Convex, non-negative base potential `G` on `(0, inf)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialSpec {
    Zero,
    /// `G(s) = a s^2 / 2` for `s > 0`, zero otherwise.
    Quadratic {
        a: f64,
    },
    /// `G(s) = A s^{-2}`.
    StrongSingular {
        #[serde(rename = "A")]
        coef: f64,
    },
}

impl PotentialSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            PotentialSpec::Quadratic { a } if !(a >= 0.0 && a.is_finite()) => {
                Err(param("potential.a", "coefficient must be non-negative"))
            }
            PotentialSpec::StrongSingular { coef } if !(coef >= 0.0 && coef.is_finite()) => {
                Err(param("potential.A", "coefficient must be non-negative"))
            }
            _ => Ok(()),
        }
    }

    /// `G(s)`; `+inf` where the potential is singular.
    pub fn value(&self, s: f64) -> f64 {
        match *self {
            PotentialSpec::Zero => 0.0,
            PotentialSpec::Quadratic { a } => {
                if s > 0.0 {
                    0.5 * a * s * s
                } else {
                    0.0
                }
            }
            PotentialSpec::StrongSingular { coef } => {
                if s > 0.0 {
                    coef / (s * s)
                } else if coef == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    pub fn d1(&self, s: f64) -> f64 {
        match *self {
            PotentialSpec::Zero => 0.0,
            PotentialSpec::Quadratic { a } => {
                if s > 0.0 {
                    a * s
                } else {
                    0.0
                }
            }
            PotentialSpec::StrongSingular { coef } => -2.0 * coef / (s * s * s),
        }
    }

    pub fn d2(&self, s: f64) -> f64 {
        match *self {
            PotentialSpec::Zero => 0.0,
            PotentialSpec::Quadratic { a } => {
                if s > 0.0 {
                    a
                } else {
                    0.0
                }
            }
            PotentialSpec::StrongSingular { coef } => 6.0 * coef / (s * s * s * s),
        }
    }
}

/// Energy value with an explicit infinite state.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Energy {
    Finite(f64),
    Infinite,
}

impl Energy {
    pub fn is_finite(&self) -> bool {
        matches!(self, Energy::Finite(_))
    }

    pub fn finite(&self) -> Option<f64> {
        match *self {
            Energy::Finite(v) => Some(v),
            Energy::Infinite => None,
        }
    }

    /// Finite value, or `f64::INFINITY` for the sentinel. Only for reporting.
    pub fn to_f64(&self) -> f64 {
        self.finite().unwrap_or(f64::INFINITY)
    }
}

impl std::ops::Add for Energy {
    type Output = Energy;
    fn add(self, rhs: Energy) -> Energy {
        match (self, rhs) {
            (Energy::Finite(a), Energy::Finite(b)) => Energy::Finite(a + b),
            _ => Energy::Infinite,
        }
    }
}

impl PartialOrd for Energy {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match (self, other) {
            (Energy::Finite(a), Energy::Finite(b)) => a.partial_cmp(b),
            (Energy::Finite(_), Energy::Infinite) => Some(Ordering::Less),
            (Energy::Infinite, Energy::Finite(_)) => Some(Ordering::Greater),
            (Energy::Infinite, Energy::Infinite) => Some(Ordering::Equal),
        }
    }
}

/// `G_sigma`: equal to `G` on `[2 sigma, inf)`, singular barrier below.
///
/// On `(0, 2 sigma)` the value is `T(s) + phi(s)`, where `T` is the
/// second-order Taylor polynomial of `G` at `2 sigma` and
/// `phi(s) = sigma^2/s^2 + a s^2 + b s + c` with
/// `a = -3/(16 sigma^2)`, `b = 1/sigma`, `c = -3/2`, so that `phi`, `phi'`
/// and `phi''` all vanish at `2 sigma`. The result is C^2 and convex on
/// `(0, inf)` and `+inf` for `s <= 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModifiedPotential {
    pub base: PotentialSpec,
    pub sigma: f64,
    pub a_phi: f64,
    pub b_phi: f64,
    pub c_phi: f64,
    g_junction: [f64; 3],
}

pub fn build_modified_potential(base: PotentialSpec, sigma: f64) -> Result<ModifiedPotential> {
    if !(sigma > 0.0 && sigma < 1.0) {
        return Err(param(
            "sigma",
            format!("sigma must be in (0,1), got {sigma}"),
        ));
    }
    base.validate()?;
    let s2 = 2.0 * sigma;
    Ok(ModifiedPotential {
        base,
        sigma,
        a_phi: -3.0 / (16.0 * sigma * sigma),
        b_phi: 1.0 / sigma,
        c_phi: -1.5,
        g_junction: [base.value(s2), base.d1(s2), base.d2(s2)],
    })
}

impl ModifiedPotential {
    fn junction(&self) -> f64 {
        2.0 * self.sigma
    }

    pub fn phi(&self, s: f64) -> f64 {
        if s >= self.junction() {
            return 0.0;
        }
        let r = self.sigma / s;
        r * r + self.a_phi * s * s + self.b_phi * s + self.c_phi
    }

    pub fn phi_d1(&self, s: f64) -> f64 {
        if s >= self.junction() {
            return 0.0;
        }
        -2.0 * self.sigma * self.sigma / (s * s * s) + 2.0 * self.a_phi * s + self.b_phi
    }

    pub fn phi_d2(&self, s: f64) -> f64 {
        if s >= self.junction() {
            return 0.0;
        }
        6.0 * self.sigma * self.sigma / (s * s * s * s) + 2.0 * self.a_phi
    }

    fn taylor(&self, s: f64) -> [f64; 3] {
        let d = s - self.junction();
        let [g0, g1, g2] = self.g_junction;
        [g0 + g1 * d + 0.5 * g2 * d * d, g1 + g2 * d, g2]
    }

    pub fn value(&self, s: f64) -> Energy {
        if s <= 0.0 {
            Energy::Infinite
        } else if s >= self.junction() {
            Energy::Finite(self.base.value(s))
        } else {
            Energy::Finite(self.taylor(s)[0] + self.phi(s))
        }
    }

    /// `G_sigma'(s)` for `s > 0`.
    pub fn d1(&self, s: f64) -> f64 {
        if s >= self.junction() {
            self.base.d1(s)
        } else {
            self.taylor(s)[1] + self.phi_d1(s)
        }
    }

    /// `G_sigma''(s)` for `s > 0`.
    pub fn d2(&self, s: f64) -> f64 {
        if s >= self.junction() {
            self.base.d2(s)
        } else {
            self.taylor(s)[2] + self.phi_d2(s)
        }
    }
}

/// Rheology and mobility together with the unmodified potential and the
/// barrier parameter.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub alpha: f64,
    pub mobility: MobilitySpec,
    pub potential: PotentialSpec,
    pub sigma: f64,
}

impl ModelParams {
    pub fn new(
        alpha: f64,
        mobility: MobilitySpec,
        potential: PotentialSpec,
        sigma: f64,
    ) -> Result<Self> {
        let mp = Self {
            alpha,
            mobility,
            potential,
            sigma,
        };
        mp.validate()?;
        Ok(mp)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(param(
                "alpha",
                format!("alpha must be positive, got {}", self.alpha),
            ));
        }
        if !(self.sigma > 0.0 && self.sigma < 1.0) {
            return Err(param(
                "sigma",
                format!("sigma must be in (0,1), got {}", self.sigma),
            ));
        }
        self.mobility.validate()?;
        self.potential.validate()
    }

    /// Dissipation exponent `p = (alpha + 1) / alpha`.
    pub fn p(&self) -> f64 {
        (self.alpha + 1.0) / self.alpha
    }

    pub fn modified_potential(&self) -> Result<ModifiedPotential> {
        build_modified_potential(self.potential, self.sigma)
    }
}

/// `Psi(s) = |s|^{alpha-1} s`, with `Psi(0) = 0`.
pub fn psi(alpha: f64, s: f64) -> f64 {
    if s == 0.0 {
        0.0
    } else if alpha == 1.0 {
        s
    } else {
        s.abs().powf(alpha) * s.signum()
    }
}

/// `Psi^{-1}(s) = |s|^{1/alpha - 1} s`.
pub fn psi_inverse(alpha: f64, s: f64) -> f64 {
    psi(1.0 / alpha, s)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub dirichlet: f64,
    pub potential: Energy,
    pub total: Energy,
}

/// Discrete `E^sigma[u] = 1/2 sum_f |grad u|^2 dx + sum_i G_sigma(u_i) dx`.
pub fn energy(g: &Grid, u: &CellField, mp: &ModifiedPotential) -> Result<EnergyBreakdown> {
    g.check_cells(u)?;
    Ok(energy_slice(g.dx(), &u.0, |s| mp.value(s)))
}

/// Same Dirichlet part, with the potential supplied by the caller.
pub(crate) fn energy_slice(dx: f64, u: &[f64], pot: impl Fn(f64) -> Energy) -> EnergyBreakdown {
    let dirichlet = dirichlet_energy(dx, u);
    let mut potential = 0.0;
    let mut infinite = false;
    for &s in u {
        match pot(s) {
            Energy::Finite(v) => potential += v,
            Energy::Infinite => {
                infinite = true;
                break;
            }
        }
    }
    let potential = if infinite {
        Energy::Infinite
    } else {
        Energy::Finite(potential * dx)
    };
    EnergyBreakdown {
        dirichlet,
        potential,
        total: Energy::Finite(dirichlet) + potential,
    }
}

pub(crate) fn dirichlet_energy(dx: f64, u: &[f64]) -> f64 {
    let s: f64 = u.windows(2).map(|w| (w[1] - w[0]) * (w[1] - w[0])).sum();
    0.5 * s / dx
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn mobility_examples() {
        let g = Grid::unit(8).unwrap();
        let m = MobilitySpec::Power { n: 3.0 };
        let f = mobility_face(&m, &CellField(vec![2.0; 8]), &g).unwrap();
        for v in f.iter().skip(1).take(7) {
            assert_relative_eq!(*v, 8.0);
        }
        let mut u = CellField(vec![1.0; 8]);
        u[3] = -1.0;
        u[4] = -0.5;
        let f = mobility_face(&m, &u, &g).unwrap();
        assert_eq!(f[4], 0.0);
        assert_eq!(f[3], 0.0);
        assert!(f[5] > 0.0);
        let one = mobility_face(&MobilitySpec::ConstantOne, &u, &g).unwrap();
        assert!(one.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn navier_slip_form() {
        let m = MobilitySpec::NavierSlip {
            lambda: 0.5,
            alpha: 2.0,
        };
        assert_relative_eq!(m.eval(2.0), 0.5 * 8.0 + 16.0);
        assert_eq!(m.eval(0.0), 0.0);
        assert_eq!(m.eval(-1.0), 0.0);
    }

    #[test]
    fn mobility_positive_on_positive_field() {
        let g = Grid::unit(16).unwrap();
        let u = g.sample(|x| 0.01 + x * x);
        for m in [
            MobilitySpec::Power { n: 2.5 },
            MobilitySpec::NavierSlip {
                lambda: 1.0,
                alpha: 0.5,
            },
        ] {
            let f = mobility_face(&m, &u, &g).unwrap();
            assert!(f.iter().all(|&v| v > 0.0));
        }
    }

    #[test]
    fn barrier_coefficients_match_at_junction() {
        for sigma in [1e-3, 0.01, 0.3, 0.9] {
            let mp = build_modified_potential(PotentialSpec::Zero, sigma).unwrap();
            let s = 2.0 * sigma * (1.0 - 1e-15);
            // Closed forms evaluated at 2 sigma vanish.
            let phi = 0.25 + mp.a_phi * 4.0 * sigma * sigma + 2.0 + mp.c_phi;
            let dphi = -0.25 / sigma + 4.0 * mp.a_phi * sigma + mp.b_phi;
            let ddphi = 6.0 / (16.0 * sigma * sigma) + 2.0 * mp.a_phi;
            assert!(phi.abs() < 1e-14);
            assert!((dphi * sigma).abs() < 1e-14);
            assert!((ddphi * sigma * sigma).abs() < 1e-14);
            assert!(mp.phi(s).abs() < 1e-12);
        }
    }

    #[test]
    fn barrier_examples() {
        let sigma = 0.05;
        let mp = build_modified_potential(PotentialSpec::Zero, sigma).unwrap();
        assert_eq!(mp.value(3.0 * sigma), Energy::Finite(0.0));
        assert_eq!(mp.value(0.0), Energy::Infinite);
        assert_eq!(mp.value(-1.0), Energy::Infinite);
        let s = 1e-6 * sigma;
        let ratio = mp.value(s).to_f64() * s * s / (sigma * sigma);
        assert!((ratio - 1.0).abs() < 1e-5, "{ratio}");
        for k in 1..=100 {
            let s = sigma * k as f64 / 100.0;
            assert!(mp.value(s).to_f64() >= 0.25 * sigma * sigma / (s * s));
        }
    }

    #[test]
    fn sigma_out_of_range_rejected() {
        assert!(build_modified_potential(PotentialSpec::Zero, 0.0).is_err());
        assert!(build_modified_potential(PotentialSpec::Zero, 1.0).is_err());
        assert!(build_modified_potential(PotentialSpec::Zero, 1.5).is_err());
    }

    #[test]
    fn barrier_continuity_and_convexity() {
        for base in [
            PotentialSpec::Zero,
            PotentialSpec::Quadratic { a: 3.0 },
            PotentialSpec::StrongSingular { coef: 0.01 },
        ] {
            let sigma = 0.02;
            let mp = build_modified_potential(base, sigma).unwrap();
            let j = 2.0 * sigma;
            let (lo, hi) = (j * (1.0 - 1e-13), j * (1.0 + 1e-13));
            let rel = |a: f64, b: f64| (a - b).abs() / (1.0 + a.abs().max(b.abs()));
            assert!(rel(mp.value(lo).to_f64(), mp.value(hi).to_f64()) < 1e-12);
            assert!(rel(mp.d1(lo), mp.d1(hi)) < 1e-10);
            assert!(rel(mp.d2(lo), mp.d2(hi)) < 1e-9);

            let mut prev = f64::NEG_INFINITY;
            for k in 1..4000 {
                let s = 10.0 * k as f64 / 4000.0;
                assert!(mp.d2(s) >= 0.0, "{base:?} s={s}");
                let d1 = mp.d1(s);
                assert!(d1 >= prev - 1e-12 * d1.abs());
                prev = d1;
                assert!(mp.value(s).to_f64() >= 0.0);
            }
        }
    }

    #[test]
    fn barrier_derivatives_match_finite_differences() {
        let mp = build_modified_potential(PotentialSpec::Quadratic { a: 2.0 }, 0.1).unwrap();
        for s in [0.01, 0.05, 0.13, 0.19, 0.25, 1.0] {
            let h = 1e-6 * s;
            let fd1 = (mp.value(s + h).to_f64() - mp.value(s - h).to_f64()) / (2.0 * h);
            let fd2 = (mp.d1(s + h) - mp.d1(s - h)) / (2.0 * h);
            assert!((fd1 - mp.d1(s)).abs() < 1e-6 * (1.0 + fd1.abs()), "s={s}");
            assert!((fd2 - mp.d2(s)).abs() < 1e-6 * (1.0 + fd2.abs()), "s={s}");
        }
    }

    #[test]
    fn psi_examples() {
        assert_eq!(psi(1.0, 2.5), 2.5);
        assert_eq!(psi(2.0, -3.0), -9.0);
        assert_eq!(psi(0.5, 0.0), 0.0);
        for alpha in [0.5, 1.0, 2.0] {
            for s in [-7.3, -1.0, -0.01, 0.2, 4.0] {
                assert_relative_eq!(psi_inverse(alpha, psi(alpha, s)), s, max_relative = 1e-13);
            }
        }
    }

    #[test]
    fn energy_examples() {
        let g = Grid::unit(32).unwrap();
        let mp = build_modified_potential(PotentialSpec::Zero, 0.01).unwrap();
        let e = energy(&g, &CellField(vec![0.7; 32]), &mp).unwrap();
        assert_eq!(e.total, Energy::Finite(0.0));
        let mut u = CellField(vec![0.7; 32]);
        u[5] = 0.0;
        assert_eq!(energy(&g, &u, &mp).unwrap().total, Energy::Infinite);
    }

    #[test]
    fn parabola_dirichlet_energy_converges() {
        // Oracle: 1/2 * int_0^1 (3 M x)^2 dx = 3 M^2 / 2.
        let m = 1.0;
        let mut prev_err = f64::INFINITY;
        for n in [64, 256, 1024] {
            let g = Grid::unit(n).unwrap();
            let v = g.sample(|x| 1.5 * m * (1.0 - x * x));
            let d = dirichlet_energy(g.dx(), &v.0);
            let err = (d - 1.5 * m * m).abs();
            assert!(err < prev_err);
            prev_err = err;
        }
        assert!(prev_err < 5e-3);
    }

    #[test]
    fn energy_shift_invariance_above_barrier() {
        let g = Grid::unit(40).unwrap();
        let mp = build_modified_potential(PotentialSpec::Zero, 0.01).unwrap();
        let u = g.sample(|x| 0.5 + 0.2 * (3.0 * x).sin());
        let e0 = energy(&g, &u, &mp).unwrap().total.to_f64();
        let e1 = energy(&g, &u.map(|v| v + 0.37), &mp)
            .unwrap()
            .total
            .to_f64();
        assert_relative_eq!(e0, e1, max_relative = 1e-12);
    }

    #[test]
    fn energy_ordering() {
        assert!(Energy::Finite(1e300) < Energy::Infinite);
        assert!(Energy::Finite(1.0) < Energy::Finite(2.0));
        assert_eq!(
            Energy::Infinite.partial_cmp(&Energy::Infinite),
            Some(Ordering::Equal)
        );
    }
}
