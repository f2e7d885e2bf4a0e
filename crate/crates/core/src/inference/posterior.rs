use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::prior::{ParamName, PriorSpec};
use super::sampler::Transform;
use crate::data::{CountData, EventRecord};
use crate::error::{Error, Result};
use crate::likelihood::{loglik_complete, loglik_counts, loglik_infection_times};
use crate::model::{ModelParams, Variant};

/// Which likelihood the posterior uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LikelihoodKind {
    /// Marginal likelihood of interval counts (requires `N`).
    Counts,
    /// Exact infection times; `use_n` selects the form conditioning on `N`.
    InfectionTimes { use_n: bool },
    /// Complete infection and recovery histories.
    Complete,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Observations {
    Counts(CountData),
    Events(EventRecord),
}

/// Log-likelihood of `data` under `kind`. Parameter values for which the
/// model cannot be evaluated (invalid region, failed integration) have zero
/// likelihood; a selector that does not match the data kind is an error.
pub fn log_likelihood(data: &Observations, params: &ModelParams, kind: LikelihoodKind) -> Result<f64> {
    let value = match (kind, data) {
        (LikelihoodKind::Counts, Observations::Counts(d)) => loglik_counts(params, d),
        (LikelihoodKind::InfectionTimes { use_n }, Observations::Events(e)) => {
            loglik_infection_times(params, &e.infection_times, e.t_end, use_n.then_some(e.n))
        }
        (LikelihoodKind::Complete, Observations::Events(e)) => loglik_complete(params, e),
        (kind, _) => {
            return Err(Error::Config(format!("likelihood {kind:?} does not match the supplied data")));
        }
    };
    match value {
        Ok(v) => Ok(v.value()),
        Err(Error::InvalidParameter(_) | Error::IntegrationFailure { .. } | Error::Numerical(_)) => {
            Ok(f64::NEG_INFINITY)
        }
        Err(e) => Err(e),
    }
}

/// `log_prior + log_likelihood`; the likelihood is skipped when the prior is
/// already `-inf`.
pub fn log_posterior(
    priors: &PriorSpec,
    data: &Observations,
    params: &ModelParams,
    kind: LikelihoodKind,
) -> Result<f64> {
    check_selector(data, kind)?;
    let lp = priors.log_prior(params);
    if lp == f64::NEG_INFINITY {
        return Ok(lp);
    }
    Ok(lp + log_likelihood(data, params, kind)?)
}

fn check_selector(data: &Observations, kind: LikelihoodKind) -> Result<()> {
    match (kind, data) {
        (LikelihoodKind::Counts, Observations::Counts(d)) => {
            if d.n.is_none() {
                return Err(Error::Unsupported(
                    "the marginal count likelihood conditions on the number of initial susceptibles N; \
                     declare N in the data or configuration"
                        .into(),
                ));
            }
            Ok(())
        }
        (LikelihoodKind::InfectionTimes { .. } | LikelihoodKind::Complete, Observations::Events(_)) => Ok(()),
        (kind, _) => Err(Error::Config(format!("likelihood {kind:?} does not match the supplied data"))),
    }
}

/// A posterior over the free parameters of one model variant, with the
/// remaining parameters held fixed.
#[derive(Clone, Debug)]
pub struct Posterior {
    pub variant: Variant,
    pub priors: PriorSpec,
    pub data: Observations,
    pub kind: LikelihoodKind,
    pub fixed: BTreeMap<ParamName, f64>,
    free: Vec<ParamName>,
}

impl Posterior {
    /// Builds the posterior. Every non-fixed parameter of `variant` needs a
    /// prior; priors on fixed parameters are dropped.
    pub fn new(
        variant: Variant,
        mut priors: PriorSpec,
        data: Observations,
        kind: LikelihoodKind,
        fixed: BTreeMap<ParamName, f64>,
    ) -> Result<Self> {
        check_selector(&data, kind)?;
        let all = ParamName::for_variant(variant);
        for name in fixed.keys() {
            if !all.contains(name) {
                return Err(Error::Config(format!(
                    "fixed parameter `{name}` is not part of the {} model",
                    variant.name()
                )));
            }
            priors.params.remove(name);
        }
        let free: Vec<ParamName> = all.into_iter().filter(|p| !fixed.contains_key(p)).collect();
        if free.is_empty() {
            return Err(Error::Config("no free parameters to sample".into()));
        }
        for name in &free {
            if priors.get(*name).is_none() {
                return Err(Error::Config(format!("no prior given for free parameter `{name}`")));
            }
        }
        if let Some(name) = priors.params.keys().find(|p| !free.contains(p)) {
            return Err(Error::Config(format!(
                "prior given for `{name}`, which the {} model does not have",
                variant.name()
            )));
        }
        priors.validate()?;
        Ok(Posterior { variant, priors, data, kind, fixed, free })
    }

    pub fn free(&self) -> &[ParamName] {
        &self.free
    }

    pub fn labels(&self) -> Vec<String> {
        self.free.iter().map(|p| p.label(self.variant).to_string()).collect()
    }

    /// Model parameters with `values` in the free slots.
    pub fn params(&self, values: &[f64]) -> ModelParams {
        let mut p = ModelParams { variant: self.variant, beta: 0.0, gamma: 0.0, rho: 0.0, nu: 0.0 };
        for (name, v) in &self.fixed {
            name.set(&mut p, *v);
        }
        for (name, v) in self.free.iter().zip(values) {
            name.set(&mut p, *v);
        }
        p
    }

    /// Free-parameter values taken from `params`.
    pub fn values(&self, params: &ModelParams) -> Vec<f64> {
        self.free.iter().map(|p| p.get(params)).collect()
    }

    /// Sampler transforms matching each free parameter's prior support.
    pub fn transforms(&self) -> Vec<Transform> {
        self.free
            .iter()
            .map(|p| {
                let (lo, hi) = self.priors.get(*p).expect("checked at construction").support();
                Transform::for_support(lo, hi)
            })
            .collect()
    }

    /// Best point of a log-spaced grid over each free parameter's prior
    /// support (clipped to a practical range). Used as a starting point when
    /// no initial values are supplied.
    pub fn grid_init(&self, points: usize) -> Result<Vec<f64>> {
        let points = points.max(2);
        let axes: Vec<Vec<f64>> = self
            .free
            .iter()
            .map(|p| {
                let (lo, hi) = self.priors.get(*p).expect("checked at construction").support();
                let (a, b): (f64, f64) = match p {
                    ParamName::Rho => (1e-4, 0.5),
                    ParamName::Nu => (0.02, 3.0),
                    _ => (0.02, 20.0),
                };
                let span = (hi - lo).min(1.0) * 1e-3;
                let a = a.max(lo + span);
                let b = b.min(if hi.is_finite() { hi - span } else { hi });
                (0..points).map(|i| a * (b / a).powf(i as f64 / (points - 1) as f64)).collect()
            })
            .collect();
        let mut best: Option<(f64, Vec<f64>)> = None;
        let mut idx = vec![0usize; axes.len()];
        loop {
            let x: Vec<f64> = idx.iter().zip(&axes).map(|(i, ax)| ax[*i]).collect();
            let lp = self.log_density(&x);
            if lp.is_finite() && best.as_ref().is_none_or(|(b, _)| lp > *b) {
                best = Some((lp, x));
            }
            let mut d = 0;
            while d < idx.len() {
                idx[d] += 1;
                if idx[d] < points {
                    break;
                }
                idx[d] = 0;
                d += 1;
            }
            if d == idx.len() {
                break;
            }
        }
        best.map(|(_, x)| x).ok_or_else(|| {
            Error::Initialization("log posterior is -inf at every grid point; supply initial values".into())
        })
    }

    /// Log posterior at free-parameter values; `-inf` wherever it cannot be evaluated.
    pub fn log_density(&self, values: &[f64]) -> f64 {
        let params = self.params(values);
        let lp = self.priors.log_prior(&params);
        if lp == f64::NEG_INFINITY {
            return lp;
        }
        match log_likelihood(&self.data, &params, self.kind) {
            Ok(ll) if !ll.is_nan() => lp + ll,
            _ => f64::NEG_INFINITY,
        }
    }
}
