use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::model::{ModelParams, Variant};

/// Parameters that can be sampled.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamName {
    Beta,
    Gamma,
    Rho,
    Nu,
}

impl ParamName {
    pub const ALL: [ParamName; 4] = [ParamName::Beta, ParamName::Gamma, ParamName::Rho, ParamName::Nu];

    pub fn key(&self) -> &'static str {
        match self {
            ParamName::Beta => "beta",
            ParamName::Gamma => "gamma",
            ParamName::Rho => "rho",
            ParamName::Nu => "nu",
        }
    }

    /// Display label; the network variant samples the reparametrised rates.
    pub fn label(&self, variant: Variant) -> &'static str {
        match (self, variant) {
            (ParamName::Beta, Variant::PoissonNetwork) => "beta_tilde",
            (ParamName::Gamma, Variant::PoissonNetwork) => "gamma_tilde",
            _ => self.key(),
        }
    }

    /// Parameters carried by a model variant.
    pub fn for_variant(variant: Variant) -> Vec<ParamName> {
        match variant {
            Variant::GammaFrailty => ParamName::ALL.to_vec(),
            _ => vec![ParamName::Beta, ParamName::Gamma, ParamName::Rho],
        }
    }

    pub fn get(&self, params: &ModelParams) -> f64 {
        match self {
            ParamName::Beta => params.beta,
            ParamName::Gamma => params.gamma,
            ParamName::Rho => params.rho,
            ParamName::Nu => params.nu,
        }
    }

    pub fn set(&self, params: &mut ModelParams, value: f64) {
        match self {
            ParamName::Beta => params.beta = value,
            ParamName::Gamma => params.gamma = value,
            ParamName::Rho => params.rho = value,
            ParamName::Nu => params.nu = value,
        }
    }
}

impl fmt::Display for ParamName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl std::str::FromStr for ParamName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "beta" | "beta_tilde" => Ok(ParamName::Beta),
            "gamma" | "gamma_tilde" => Ok(ParamName::Gamma),
            "rho" => Ok(ParamName::Rho),
            "nu" => Ok(ParamName::Nu),
            other => Err(Error::Config(format!("unknown parameter `{other}`"))),
        }
    }
}

/// Prior family; Gamma uses the shape/rate convention.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Distribution {
    Gamma { shape: f64, rate: f64 },
    Uniform { lo: f64, hi: f64 },
}

impl Distribution {
    fn natural_support(&self) -> (f64, f64) {
        match *self {
            Distribution::Gamma { .. } => (0.0, f64::INFINITY),
            Distribution::Uniform { lo, hi } => (lo, hi),
        }
    }

    fn log_density(&self, x: f64) -> f64 {
        match *self {
            Distribution::Gamma { shape, rate } => {
                if x <= 0.0 {
                    return f64::NEG_INFINITY;
                }
                shape * rate.ln() - ln_gamma(shape) + (shape - 1.0) * x.ln() - rate * x
            }
            Distribution::Uniform { lo, hi } => {
                if x < lo || x > hi {
                    f64::NEG_INFINITY
                } else {
                    -(hi - lo).ln()
                }
            }
        }
    }
}

/// One parameter's prior, optionally truncated to `(lower, upper)`.
/// Truncation is not renormalised; the constant does not affect the posterior.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamPrior {
    #[serde(flatten)]
    pub dist: Distribution,
    #[serde(default = "neg_inf")]
    pub lower: f64,
    #[serde(default = "pos_inf")]
    pub upper: f64,
}

fn neg_inf() -> f64 {
    f64::NEG_INFINITY
}

fn pos_inf() -> f64 {
    f64::INFINITY
}

impl ParamPrior {
    pub fn gamma(shape: f64, rate: f64) -> Self {
        ParamPrior { dist: Distribution::Gamma { shape, rate }, lower: f64::NEG_INFINITY, upper: f64::INFINITY }
    }

    pub fn uniform(lo: f64, hi: f64) -> Self {
        ParamPrior { dist: Distribution::Uniform { lo, hi }, lower: f64::NEG_INFINITY, upper: f64::INFINITY }
    }

    pub fn bounded(mut self, lower: f64, upper: f64) -> Self {
        self.lower = lower;
        self.upper = upper;
        self
    }

    /// Effective support: the family's support intersected with the bounds.
    pub fn support(&self) -> (f64, f64) {
        let (lo, hi) = self.dist.natural_support();
        (lo.max(self.lower), hi.min(self.upper))
    }

    pub fn log_density(&self, x: f64) -> f64 {
        let (lo, hi) = self.support();
        let inside = match self.dist {
            Distribution::Uniform { .. } => x >= lo && x <= hi,
            Distribution::Gamma { .. } => x > lo && x < hi,
        };
        if inside && x.is_finite() {
            self.dist.log_density(x)
        } else {
            f64::NEG_INFINITY
        }
    }

    fn validate(&self, name: ParamName) -> Result<()> {
        match self.dist {
            Distribution::Gamma { shape, rate } if !(shape > 0.0 && rate > 0.0) => {
                return Err(Error::Config(format!("{name}: gamma prior needs positive shape and rate")));
            }
            Distribution::Uniform { lo, hi } if !(lo < hi && lo.is_finite() && hi.is_finite()) => {
                return Err(Error::Config(format!("{name}: uniform prior needs finite lo < hi")));
            }
            _ => {}
        }
        let (lo, hi) = self.support();
        if !(lo < hi) {
            return Err(Error::Config(format!("{name}: empty prior support ({lo}, {hi})")));
        }
        let (valid_lo, valid_hi) = match name {
            ParamName::Rho => (0.0, 1.0),
            _ => (0.0, f64::INFINITY),
        };
        if lo < valid_lo || hi > valid_hi {
            return Err(Error::Config(format!(
                "{name}: prior support ({lo}, {hi}) leaves the valid region ({valid_lo}, {valid_hi})"
            )));
        }
        Ok(())
    }
}

/// Priors for the sampled parameters plus an optional ordering constraint
/// `gamma < beta` (used for the network model's reparametrised rates).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    pub params: BTreeMap<ParamName, ParamPrior>,
    #[serde(default)]
    pub gamma_below_beta: bool,
}

impl PriorSpec {
    /// `Gamma(a, a)` on every parameter of `variant`, with `rho` bounded above by 1.
    pub fn diffuse_gamma(variant: Variant, a: f64) -> Self {
        let params = ParamName::for_variant(variant)
            .into_iter()
            .map(|name| {
                let prior = ParamPrior::gamma(a, a);
                let prior = if name == ParamName::Rho { prior.bounded(0.0, 1.0) } else { prior };
                (name, prior)
            })
            .collect();
        PriorSpec { params, gamma_below_beta: false }
    }

    /// Network-model prior for small outbreaks: `Gamma(0.02, 0.02)` on
    /// both rates with `beta_tilde > 0.1`, `gamma_tilde < beta_tilde`, and
    /// `rho ~ Uniform(0, 0.015)`.
    pub fn network_ordered() -> Self {
        let mut params = BTreeMap::new();
        params.insert(ParamName::Beta, ParamPrior::gamma(0.02, 0.02).bounded(0.1, f64::INFINITY));
        params.insert(ParamName::Gamma, ParamPrior::gamma(0.02, 0.02));
        params.insert(ParamName::Rho, ParamPrior::uniform(0.0, 0.015));
        PriorSpec { params, gamma_below_beta: true }
    }

    pub fn get(&self, name: ParamName) -> Option<&ParamPrior> {
        self.params.get(&name)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, prior) in &self.params {
            prior.validate(*name)?;
        }
        Ok(())
    }

    /// Sum of the component log-densities over the parameters with a prior;
    /// `-inf` off the support or when the ordering constraint fails.
    pub fn log_prior(&self, params: &ModelParams) -> f64 {
        if self.gamma_below_beta && !(params.gamma < params.beta) {
            return f64::NEG_INFINITY;
        }
        let mut total = 0.0;
        for (name, prior) in &self.params {
            total += prior.log_density(name.get(params));
            if total == f64::NEG_INFINITY {
                break;
            }
        }
        total
    }
}

pub fn log_prior(priors: &PriorSpec, params: &ModelParams) -> f64 {
    priors.log_prior(params)
}
