//! Bayesian inference: priors, posterior composition, an adaptive Metropolis
//! sampler, chain summaries and the replication harness.

pub mod posterior;
pub mod prior;
pub mod replicate;
pub mod sampler;
pub mod summary;

pub use posterior::{log_likelihood, log_posterior, LikelihoodKind, Observations, Posterior};
pub use prior::{log_prior, Distribution, ParamName, ParamPrior, PriorSpec};
pub use replicate::{replicate_study, CoverageReport, DataGenerator, ParamCoverage, ReplicateOutcome, Scenario};
pub use sampler::{run_chain, run_chains, Chain, SamplerConfig, Transform};
pub use summary::{
    effective_sample_size, quantile_sorted, summarize, summarize_chains, ParamSummary, PosteriorSummary,
};
