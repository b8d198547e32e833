use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta, ContinuousCDF};

use crate::error::{Error, Result};
use crate::numerics::BetaParams;

/// Posterior summary of one scalar parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
    /// Central 95% interval.
    pub interval: [f64; 2],
    /// Effective number of independent draws; MCMC summaries only.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub ess: Option<f64>,
}

impl PosteriorSummary {
    /// Exact summary of a beta posterior.
    pub fn of_beta(name: impl Into<String>, p: BetaParams) -> Result<Self> {
        let dist = Beta::new(p.a(), p.b()).map_err(|e| Error::Domain(e.to_string()))?;
        Ok(Self {
            name: name.into(),
            mean: p.mean(),
            sd: p.variance().sqrt(),
            interval: [dist.inverse_cdf(0.025), dist.inverse_cdf(0.975)],
            ess: None,
        })
    }

    /// Summary of a chain of draws.
    pub fn of_draws(name: impl Into<String>, draws: &[f64]) -> Self {
        let n = draws.len() as f64;
        let mean = draws.iter().sum::<f64>() / n;
        let var = if draws.len() > 1 {
            draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        let mut sorted = draws.to_vec();
        sorted.sort_by(f64::total_cmp);
        Self {
            name: name.into(),
            mean,
            sd: var.sqrt(),
            interval: [quantile(&sorted, 0.025), quantile(&sorted, 0.975)],
            ess: Some(effective_sample_size(draws)),
        }
    }
}

/// Linear-interpolation quantile of sorted data.
pub(crate) fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let w = pos - lo as f64;
    sorted[lo] * (1.0 - w) + sorted[hi] * w
}

/// Effective sample size from Geyer's initial positive sequence of
/// autocorrelation pairs.
pub(crate) fn effective_sample_size(draws: &[f64]) -> f64 {
    let n = draws.len();
    if n < 4 {
        return n as f64;
    }
    let mean = draws.iter().sum::<f64>() / n as f64;
    let centred: Vec<f64> = draws.iter().map(|x| x - mean).collect();
    let c0 = centred.iter().map(|x| x * x).sum::<f64>() / n as f64;
    if c0 <= 0.0 {
        return n as f64;
    }
    let autocorr = |lag: usize| -> f64 {
        centred[..n - lag]
            .iter()
            .zip(&centred[lag..])
            .map(|(a, b)| a * b)
            .sum::<f64>()
            / (n as f64 * c0)
    };
    let mut sum_pairs = 0.0;
    let mut lag = 0;
    while lag + 1 < n {
        let pair = if lag == 0 { 1.0 } else { autocorr(lag) } + autocorr(lag + 1);
        if pair <= 0.0 {
            break;
        }
        sum_pairs += pair;
        lag += 2;
    }
    let tau = (2.0 * sum_pairs - 1.0).max(1.0 / n as f64);
    (n as f64 / tau).min(n as f64)
}
