//! Adaptive random-walk Metropolis on an unconstrained parametrisation.
//!
//! Positive parameters are sampled on the log scale and interval-bounded ones
//! on the logit scale; the log-Jacobian of the back-transform is added to the
//! target so the chain targets the intended density on the original scale.
//!
//! During burn-in the proposal is tuned in two ways: a global scale follows a
//! Robbins–Monro recursion towards 23.4% acceptance, and at the end of every
//! adaptation window the proposal shape is re-estimated from the recent
//! history (diagonal in the first half of burn-in, full covariance in the
//! second). Everything is frozen once burn-in ends, so the retained draws come
//! from a time-homogeneous Metropolis kernel.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SeededGenerator;

/// Map from an unconstrained real `z` to a constrained parameter `x`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Transform {
    Identity,
    /// `x = lower + exp(z)`
    Log {
        lower: f64,
    },
    /// `x = lower + (upper - lower) * logistic(z)`
    Logit {
        lower: f64,
        upper: f64,
    },
}

fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

impl Transform {
    /// Transform matching an open support `(lower, upper)`.
    pub fn for_support(lower: f64, upper: f64) -> Self {
        match (lower.is_finite(), upper.is_finite()) {
            (true, true) => Transform::Logit { lower, upper },
            (true, false) => Transform::Log { lower },
            _ => Transform::Identity,
        }
    }

    pub fn to_constrained(&self, z: f64) -> f64 {
        match *self {
            Transform::Identity => z,
            Transform::Log { lower } => lower + z.exp(),
            Transform::Logit { lower, upper } => {
                let p = if z >= 0.0 { 1.0 / (1.0 + (-z).exp()) } else { z.exp() / (1.0 + z.exp()) };
                lower + (upper - lower) * p
            }
        }
    }

    pub fn to_unconstrained(&self, x: f64) -> f64 {
        match *self {
            Transform::Identity => x,
            Transform::Log { lower } => (x - lower).ln(),
            Transform::Logit { lower, upper } => {
                let p = (x - lower) / (upper - lower);
                (p / (1.0 - p)).ln()
            }
        }
    }

    /// `ln |dx/dz|` at `z`.
    pub fn log_jacobian(&self, z: f64) -> f64 {
        match *self {
            Transform::Identity => 0.0,
            Transform::Log { .. } => z,
            Transform::Logit { lower, upper } => (upper - lower).ln() - softplus(-z) - softplus(z),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    /// Total iterations, burn-in included.
    pub n_draws: usize,
    pub burn_in: usize,
    pub seed: u64,
    /// Iterations between proposal-shape updates during burn-in.
    pub adapt_window: usize,
    pub target_acceptance: f64,
    /// Initial proposal standard deviation on the unconstrained scale.
    pub initial_scale: f64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            n_draws: 20_000,
            burn_in: 10_000,
            seed: 0,
            adapt_window: 200,
            target_acceptance: 0.234,
            initial_scale: 0.1,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_draws <= self.burn_in {
            return Err(Error::Config(format!("n_draws ({}) must exceed burn_in ({})", self.n_draws, self.burn_in)));
        }
        if self.adapt_window < 10 {
            return Err(Error::Config("adapt_window must be at least 10".into()));
        }
        if !(self.target_acceptance > 0.0 && self.target_acceptance < 1.0) {
            return Err(Error::Config("target_acceptance must lie in (0, 1)".into()));
        }
        if !(self.initial_scale > 0.0) {
            return Err(Error::Config("initial_scale must be positive".into()));
        }
        Ok(())
    }
}

/// Ordered draws of one chain, burn-in included.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Chain {
    pub names: Vec<String>,
    /// Constrained-scale draws, one row per iteration.
    pub draws: Vec<Vec<f64>>,
    /// The same draws on the sampler's unconstrained scale.
    pub unconstrained: Vec<Vec<f64>>,
    /// Log target (constrained-scale posterior) per iteration.
    pub log_posterior: Vec<f64>,
    /// Accepted proposals after burn-in.
    pub accepted: usize,
    pub burn_in: usize,
    pub seed: u64,
    pub elapsed_secs: f64,
}

impl Chain {
    pub fn retained(&self) -> &[Vec<f64>] {
        &self.draws[self.burn_in..]
    }

    pub fn retained_len(&self) -> usize {
        self.draws.len() - self.burn_in
    }

    /// Acceptance rate of the frozen kernel (post burn-in).
    pub fn acceptance_rate(&self) -> f64 {
        let n = self.retained_len();
        if n == 0 {
            0.0
        } else {
            self.accepted as f64 / n as f64
        }
    }

    /// Retained draws of parameter `index`.
    pub fn column(&self, index: usize) -> Vec<f64> {
        self.retained().iter().map(|row| row[index]).collect()
    }
}

fn log_target<F: Fn(&[f64]) -> f64>(target: &F, transforms: &[Transform], z: &[f64], x: &mut [f64]) -> f64 {
    let mut jac = 0.0;
    for ((xi, zi), t) in x.iter_mut().zip(z).zip(transforms) {
        *xi = t.to_constrained(*zi);
        jac += t.log_jacobian(*zi);
    }
    let lp = target(x);
    if lp.is_nan() {
        f64::NEG_INFINITY
    } else {
        lp + jac
    }
}

fn empirical_covariance(history: &[Vec<f64>], diagonal: bool) -> DMatrix<f64> {
    let d = history[0].len();
    let n = history.len() as f64;
    let mut mean = DVector::zeros(d);
    for row in history {
        mean += DVector::from_column_slice(row);
    }
    mean /= n;
    let mut cov = DMatrix::zeros(d, d);
    for row in history {
        let diff = DVector::from_column_slice(row) - &mean;
        cov += &diff * diff.transpose();
    }
    cov /= n - 1.0;
    if diagonal {
        cov = DMatrix::from_diagonal(&cov.diagonal());
    }
    cov
}

/// Lower Cholesky factor, with growing diagonal jitter if needed.
fn cholesky_factor(cov: &DMatrix<f64>) -> DMatrix<f64> {
    let d = cov.nrows();
    let mut jitter = 1e-10;
    loop {
        let m = cov + DMatrix::identity(d, d) * jitter;
        if let Some(ch) = m.cholesky() {
            return ch.l();
        }
        jitter *= 10.0;
        if jitter > 1.0 {
            return DMatrix::identity(d, d) * 1e-3;
        }
    }
}

/// Runs one adaptive Metropolis chain.
///
/// `target` receives constrained-scale parameter values and returns the log
/// posterior (any non-finite value is treated as zero density). `init` is on
/// the constrained scale and must have finite target.
pub fn run_chain<F>(
    target: F,
    names: &[String],
    transforms: &[Transform],
    init: &[f64],
    config: &SamplerConfig,
) -> Result<Chain>
where
    F: Fn(&[f64]) -> f64,
{
    config.validate()?;
    let d = transforms.len();
    if d == 0 || init.len() != d || names.len() != d {
        return Err(Error::Config("dimension mismatch between names, transforms and init".into()));
    }
    let start = Instant::now();
    let mut rng = SeededGenerator::new(config.seed);

    let mut z: Vec<f64> = init.iter().zip(transforms).map(|(x, t)| t.to_unconstrained(*x)).collect();
    if z.iter().any(|v| !v.is_finite()) {
        return Err(Error::Initialization(format!("initial point {init:?} is outside the parameter support")));
    }
    let mut x = vec![0.0; d];
    let mut lp = log_target(&target, transforms, &z, &mut x);
    if !lp.is_finite() {
        return Err(Error::Initialization(format!(
            "log posterior is not finite at the initial point {init:?}; re-initialise"
        )));
    }

    let mut chol = DMatrix::identity(d, d) * config.initial_scale;
    let mut shape_estimated = false;
    let mut log_scale = 0.0_f64;
    let mut rm_step = 0usize;
    let mut window_accepts = 0usize;

    let mut chain = Chain {
        names: names.to_vec(),
        draws: Vec::with_capacity(config.n_draws),
        unconstrained: Vec::with_capacity(config.n_draws),
        log_posterior: Vec::with_capacity(config.n_draws),
        accepted: 0,
        burn_in: config.burn_in,
        seed: config.seed,
        elapsed_secs: 0.0,
    };

    let mut proposal = vec![0.0; d];
    let mut x_prop = vec![0.0; d];
    let mut noise = DVector::zeros(d);
    for iter in 0..config.n_draws {
        for e in noise.iter_mut() {
            *e = rng.sample(StandardNormal);
        }
        let step = &chol * &noise * log_scale.exp();
        for i in 0..d {
            proposal[i] = z[i] + step[i];
        }
        let lp_prop = log_target(&target, transforms, &proposal, &mut x_prop);
        let accept_prob = if lp_prop.is_finite() { (lp_prop - lp).exp().min(1.0) } else { 0.0 };
        let u: f64 = rng.random();
        let accepted = u < accept_prob;
        if accepted {
            z.copy_from_slice(&proposal);
            x.copy_from_slice(&x_prop);
            lp = lp_prop;
        }

        chain.draws.push(x.clone());
        chain.unconstrained.push(z.clone());
        chain.log_posterior.push(lp);

        if iter < config.burn_in {
            rm_step += 1;
            log_scale += (accept_prob - config.target_acceptance) / (rm_step as f64).powf(0.6);
            window_accepts += accepted as usize;
            if (iter + 1) % config.adapt_window == 0 {
                if window_accepts == 0 {
                    return Err(Error::Diagnostics(format!(
                        "no proposal accepted in iterations {}..{}; the chain is stuck, re-initialise",
                        iter + 1 - config.adapt_window,
                        iter + 1
                    )));
                }
                window_accepts = 0;
                let history = &chain.unconstrained[iter.div_ceil(2)..];
                if history.len() >= (2 * d).max(config.adapt_window / 2) {
                    let diagonal = iter < config.burn_in / 2;
                    let cov = empirical_covariance(history, diagonal) * (2.38 * 2.38 / d as f64);
                    chol = cholesky_factor(&cov);
                    if !shape_estimated {
                        shape_estimated = true;
                        log_scale = 0.0;
                        rm_step = 0;
                    }
                }
            }
        } else if accepted {
            chain.accepted += 1;
        }
    }
    chain.elapsed_secs = start.elapsed().as_secs_f64();
    Ok(chain)
}

/// Runs `inits.len()` independent chains in parallel. Chain 0 uses
/// `config.seed`; chain `c > 0` uses sub-stream `c` of it.
pub fn run_chains<F>(
    target: F,
    names: &[String],
    transforms: &[Transform],
    inits: &[Vec<f64>],
    config: &SamplerConfig,
) -> Result<Vec<Chain>>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    if inits.is_empty() {
        return Err(Error::Config("at least one chain is required".into()));
    }
    let base = SeededGenerator::new(config.seed);
    inits
        .par_iter()
        .enumerate()
        .map(|(c, init)| {
            let seed = if c == 0 { config.seed } else { base.substream(c as u64).seed() };
            run_chain(&target, names, transforms, init, &SamplerConfig { seed, ..*config })
        })
        .collect()
}
