//! TOML configuration shared by every CLI command.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::driver::{InitialDataSpec, RunConfig};
use crate::error::{Error, Result};
use crate::experiments::rates::RateOptions;
use crate::grid::Grid;
use crate::models::{MobilitySpec, ModelParams, PotentialSpec};
use crate::step::StepParams;

/// Potential given either as a bare name (`"zero"`) or as a table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PotentialInput {
    Name(String),
    Spec(PotentialSpec),
}

impl PotentialInput {
    pub fn resolve(&self) -> Result<PotentialSpec> {
        match self {
            PotentialInput::Spec(p) => Ok(*p),
            PotentialInput::Name(n) if n == "zero" => Ok(PotentialSpec::Zero),
            PotentialInput::Name(n) => Err(Error::Config(format!(
                "potential `{n}` needs parameters; write it as a table with a `kind` key"
            ))),
        }
    }
}

/// Optional overrides of the step solver defaults.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol_grad: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_newton: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub armijo_c: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau_boundary: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LiftoffSection {
    pub deltas: Vec<f64>,
    #[serde(default = "one")]
    pub mass: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DissipationSection {
    pub deltas: Vec<f64>,
    #[serde(default = "one")]
    pub mass: f64,
    /// `(n, alpha)` pairs; defaults to the model's own.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pairs: Option<Vec<(f64, f64)>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BbSection {
    #[serde(default = "default_eta")]
    pub eta: f64,
    pub m_sweep: Vec<f64>,
    #[serde(default = "default_stage_steps")]
    pub steps_per_stage: usize,
    /// Exponent `k` of the end-point profiles `b + c (1 +- cos(pi x))^k`.
    #[serde(default = "default_concentration")]
    pub concentration: i32,
    /// Mass fraction `b` spread uniformly under the end-point profiles.
    #[serde(default = "default_floor")]
    pub floor: f64,
    /// Mobility exponents to compare; defaults to the model's own.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_values: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointLemmaSection {
    #[serde(default = "default_profiles")]
    pub profiles: usize,
    #[serde(default = "default_modes")]
    pub modes: u32,
    #[serde(default = "one")]
    pub mean: f64,
    #[serde(default = "default_amplitude")]
    pub amplitude: f64,
}

impl Default for PointLemmaSection {
    fn default() -> Self {
        Self {
            profiles: default_profiles(),
            modes: default_modes(),
            mean: 1.0,
            amplitude: default_amplitude(),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditSection {
    #[serde(default)]
    pub s: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<usize>,
}

fn one() -> f64 {
    1.0
}
fn default_eta() -> f64 {
    0.125
}
fn default_stage_steps() -> usize {
    400
}
fn default_concentration() -> i32 {
    8
}
fn default_floor() -> f64 {
    0.4
}
fn default_profiles() -> usize {
    50
}
fn default_modes() -> u32 {
    6
}
fn default_amplitude() -> f64 {
    0.9
}
fn default_record() -> usize {
    10
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(rename = "L", default = "one")]
    pub length: f64,
    #[serde(rename = "N")]
    pub cells: usize,
    pub h: f64,
    #[serde(rename = "T")]
    pub t_final: f64,
    pub alpha: f64,
    pub sigma: f64,
    pub mobility: MobilitySpec,
    pub potential: PotentialInput,
    #[serde(default = "default_record")]
    pub record_every: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub initial: InitialDataSpec,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub liftoff: Option<LiftoffSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dissipation: Option<DissipationSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bb: Option<BbSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub point_lemma: Option<PointLemmaSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub audit: Option<AuditSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rates: Option<RateOptions>,
}

impl ExperimentConfig {
    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.length, self.cells)
    }

    pub fn model(&self) -> Result<ModelParams> {
        ModelParams::new(
            self.alpha,
            self.mobility,
            self.potential.resolve()?,
            self.sigma,
        )
    }

    pub fn step(&self) -> Result<StepParams> {
        let mut sp = StepParams::new(self.h);
        let s = &self.solver;
        if let Some(v) = s.eps0 {
            sp.eps0 = v;
        }
        if let Some(v) = s.eps_min {
            sp.eps_min = v;
        }
        if let Some(v) = s.rho {
            sp.rho = v;
        }
        if let Some(v) = s.tol_grad {
            sp.tol_grad = v;
        }
        if let Some(v) = s.max_newton {
            sp.max_newton = v;
        }
        if let Some(v) = s.armijo_c {
            sp.armijo_c = v;
        }
        if let Some(v) = s.tau_boundary {
            sp.tau_boundary = v;
        }
        sp.validate()?;
        Ok(sp)
    }

    pub fn run_config(&self) -> Result<RunConfig> {
        let rc = RunConfig {
            grid: self.grid()?,
            model: self.model()?,
            step: self.step()?,
            t_final: self.t_final,
            record_every: self.record_every,
            initial: self.initial.clone(),
        };
        rc.validate()?;
        Ok(rc)
    }

    /// Mobility exponent `n`, if the mobility is a pure power.
    pub fn mobility_exponent(&self) -> Option<f64> {
        self.mobility.power_exponent()
    }

    pub fn validate(&self) -> Result<()> {
        self.run_config()?;
        if self.liftoff.is_some() {
            let n = self.mobility_exponent().ok_or_else(|| {
                Error::Config("lift-off needs a power-law mobility `kind = \"power\"`".into())
            })?;
            if !(2.0 * (self.alpha + 1.0) > n) {
                return Err(Error::Config(format!(
                    "mobility.n: lift-off requires 2(alpha+1) > n, got alpha = {}, n = {n}",
                    self.alpha
                )));
            }
        }
        Ok(())
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }
}

pub fn parse_config_str(text: &str) -> Result<ExperimentConfig> {
    let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn parse_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    parse_config_str(&text).map_err(|e| match e {
        Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
        other => other,
    })
}
