use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::sampler::Chain;
use crate::error::{Error, Result};

/// Sample quantile by linear interpolation between order statistics
/// (`h = (n - 1) p`). `sorted` must be ascending and non-empty.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let h = (n - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (divisor `n - 1`); 0 for fewer than two values.
pub fn sd(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

/// Effective sample size by the initial positive sequence estimator: lag
/// autocorrelations are summed in adjacent pairs until a pair sum is no
/// longer positive.
///
/// A constant chain has no estimable autocorrelation; by convention its ESS
/// is 1. The result is capped at the chain length.
pub fn effective_sample_size(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return n as f64;
    }
    let m = mean(xs);
    let centered: Vec<f64> = xs.iter().map(|x| x - m).collect();
    let autocov = |lag: usize| -> f64 {
        centered[..n - lag].iter().zip(&centered[lag..]).map(|(a, b)| a * b).sum::<f64>() / n as f64
    };
    let c0 = autocov(0);
    if !(c0 > 0.0) {
        return 1.0;
    }
    let mut tau = -1.0;
    let mut lag = 0;
    while lag + 1 < n {
        let pair = (autocov(lag) + autocov(lag + 1)) / c0;
        if pair <= 0.0 {
            break;
        }
        tau += 2.0 * pair;
        lag += 2;
    }
    (n as f64 / tau.max(1.0 / n as f64)).min(n as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamSummary {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
    pub lower: f64,
    pub upper: f64,
    pub ess: f64,
    pub ess_per_sec: f64,
}

impl ParamSummary {
    pub fn covers(&self, value: f64) -> bool {
        self.lower <= value && value <= self.upper
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    /// Interval level: the credible intervals have coverage `1 - alpha`.
    pub alpha: f64,
    pub retained: usize,
    pub acceptance_rate: f64,
    pub elapsed_secs: f64,
    pub params: Vec<ParamSummary>,
}

impl PosteriorSummary {
    pub fn get(&self, name: &str) -> Option<&ParamSummary> {
        self.params.iter().find(|p| p.name == name)
    }

    pub fn means(&self) -> Vec<f64> {
        self.params.iter().map(|p| p.mean).collect()
    }

    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let tail = 50.0 * self.alpha;
        let _ = writeln!(
            out,
            "{:<12} {:>10} {:>10} {:>10} {:>10} {:>9} {:>9}",
            "param",
            "mean",
            "sd",
            format!("{tail:.1}%"),
            format!("{:.1}%", 100.0 - tail),
            "ESS",
            "ESS/s"
        );
        for p in &self.params {
            let _ = writeln!(
                out,
                "{:<12} {:>10.4} {:>10.4} {:>10.4} {:>10.4} {:>9.1} {:>9.1}",
                p.name, p.mean, p.sd, p.lower, p.upper, p.ess, p.ess_per_sec
            );
        }
        let _ = writeln!(
            out,
            "draws {}  acceptance {:.3}  time {:.2}s",
            self.retained, self.acceptance_rate, self.elapsed_secs
        );
        out
    }
}

/// Per-parameter summaries of the retained draws, with equal-tailed
/// `1 - alpha` credible intervals.
pub fn summarize(chain: &Chain, alpha: f64) -> Result<PosteriorSummary> {
    if chain.retained_len() == 0 {
        return Err(Error::Degenerate("chain has no retained draws".into()));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Config(format!("interval level alpha must lie in (0, 1), got {alpha}")));
    }
    let params = chain
        .names
        .iter()
        .enumerate()
        .map(|(i, name)| {
            let col = chain.column(i);
            let mut sorted = col.clone();
            sorted.sort_by(f64::total_cmp);
            let ess = effective_sample_size(&col);
            ParamSummary {
                name: name.clone(),
                mean: mean(&col),
                sd: sd(&col),
                lower: quantile_sorted(&sorted, alpha / 2.0),
                upper: quantile_sorted(&sorted, 1.0 - alpha / 2.0),
                ess,
                ess_per_sec: if chain.elapsed_secs > 0.0 { ess / chain.elapsed_secs } else { f64::INFINITY },
            }
        })
        .collect();
    Ok(PosteriorSummary {
        alpha,
        retained: chain.retained_len(),
        acceptance_rate: chain.acceptance_rate(),
        elapsed_secs: chain.elapsed_secs,
        params,
    })
}

/// Summary of several chains of the same target: moments and quantiles
/// from the pooled retained draws, ESS summed over chains, and ESS/s against
/// the summed sampling time.
pub fn summarize_chains(chains: &[Chain], alpha: f64) -> Result<PosteriorSummary> {
    let Some(first) = chains.first() else {
        return Err(Error::Degenerate("no chains to summarise".into()));
    };
    let per_chain = chains.iter().map(|c| summarize(c, alpha)).collect::<Result<Vec<_>>>()?;
    if chains.len() == 1 {
        return Ok(per_chain.into_iter().next().unwrap());
    }
    let elapsed: f64 = chains.iter().map(|c| c.elapsed_secs).sum();
    let retained: usize = chains.iter().map(|c| c.retained_len()).sum();
    let params = first
        .names
        .iter()
        .enumerate()
        .map(|(i, name)| {
            let pooled: Vec<f64> = chains.iter().flat_map(|c| c.column(i)).collect();
            let mut sorted = pooled.clone();
            sorted.sort_by(f64::total_cmp);
            let ess = per_chain.iter().map(|s| s.params[i].ess).sum::<f64>();
            ParamSummary {
                name: name.clone(),
                mean: mean(&pooled),
                sd: sd(&pooled),
                lower: quantile_sorted(&sorted, alpha / 2.0),
                upper: quantile_sorted(&sorted, 1.0 - alpha / 2.0),
                ess,
                ess_per_sec: if elapsed > 0.0 { ess / elapsed } else { f64::INFINITY },
            }
        })
        .collect();
    Ok(PosteriorSummary {
        alpha,
        retained,
        acceptance_rate: mean(&per_chain.iter().map(|s| s.acceptance_rate).collect::<Vec<_>>()),
        elapsed_secs: elapsed,
        params,
    })
}
