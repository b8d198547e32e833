//! Modified (normalized) power prior with random power parameters.
//!
//! The joint posterior of (π, δ) is the stage-1 binomial likelihood times
//!
//! ```text
//! Π_k π_k^{s_k(δ)+a_π-1} (1-π_k)^{f_k(δ)+b_π-1} Π_j Beta(δ_j; a_δ, b_δ)
//! ---------------------------------------------------------------------
//!            Π_k B(s_k(δ) + a_π, f_k(δ) + b_π)
//! ```
//!
//! with `s_k(δ) = Σ_j δ_j z2[k][j]` and `f_k(δ) = Σ_j δ_j (n2[k][j] - z2[k][j])`.
//! Each π_k is drawn from its beta full conditional; each δ_j takes a
//! random-walk Metropolis step on the logit scale.

use super::summary::PosteriorSummary;
use super::{pi_name, Diagnostics, EstimateResult, McmcConfig, RandomWalk};
use crate::error::Result;
use crate::numerics::special::ln_beta;
use crate::numerics::BetaParams;
use crate::trial::{SubgroupCounts, TrialCounts};
use crate::weights::{BorrowingData, DeltaPair, PriorConfig};

/// ln(1 + e^x) without overflow.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn sigmoid(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

struct DeltaTarget<'a> {
    data: &'a BorrowingData,
    a_delta: f64,
    b_delta: f64,
}

impl DeltaTarget<'_> {
    /// Log full conditional of (δ₁, δ₂) given π, on the logit scale
    /// (Jacobian included), up to a constant.
    fn log_density(&self, logits: [f64; 2], ln_pi: &[f64; 3], ln_1m_pi: &[f64; 3]) -> f64 {
        let d1 = sigmoid(logits[0]);
        let d2 = sigmoid(logits[1]);
        let mut lp = 0.0;
        for k in 0..3 {
            let (s, f) = self.data.weighted(k, d1, d2);
            lp += s * ln_pi[k] + f * ln_1m_pi[k]
                - ln_beta(s + self.data.a_pi, f + self.data.b_pi);
        }
        for &u in &logits {
            // ln δ = -softplus(-u), ln(1 - δ) = -softplus(u); the Jacobian
            // of the logit map adds ln δ + ln(1 - δ)
            lp -= self.a_delta * softplus(-u) + self.b_delta * softplus(u);
        }
        lp
    }
}

/// Samples the MPP posterior by Metropolis-within-Gibbs.
pub fn mpp_fit(
    stage1: &TrialCounts,
    sub: &SubgroupCounts,
    prior: &PriorConfig,
    mcmc: &McmcConfig,
) -> Result<EstimateResult> {
    prior.validate()?;
    mcmc.validate()?;
    let data = BorrowingData::new(stage1, sub, prior);
    let target = DeltaTarget {
        data: &data,
        a_delta: prior.a_delta,
        b_delta: prior.b_delta,
    };
    let mut rng = mcmc.seed.start();

    let start = (prior.a_delta / (prior.a_delta + prior.b_delta)).clamp(1e-6, 1.0 - 1e-6);
    let start_logit = (start / (1.0 - start)).ln();
    let mut logits = [start_logit; 2];
    let mut walks = [
        RandomWalk::new(mcmc.step_logit_delta),
        RandomWalk::new(mcmc.step_logit_delta),
    ];

    let n_keep = mcmc.kept_samples;
    let mut pi_draws = vec![Vec::with_capacity(n_keep); 3];
    let mut delta_draws = vec![Vec::with_capacity(n_keep); 2];
    let total_iter = mcmc.burn_in + n_keep * mcmc.thin;

    let mut ln_pi = [0.0; 3];
    let mut ln_1m_pi = [0.0; 3];
    let mut pi = [0.0; 3];
    for iter in 0..total_iter {
        let burning = iter < mcmc.burn_in;
        let (d1, d2) = (sigmoid(logits[0]), sigmoid(logits[1]));
        for k in 0..3 {
            let (s, f) = data.weighted(k, d1, d2);
            let shape = BetaParams::new(data.succ1[k] + s + data.a_pi, data.fail1[k] + f + data.b_pi)?;
            pi[k] = rng.beta(shape);
            ln_pi[k] = pi[k].ln();
            ln_1m_pi[k] = (-pi[k]).ln_1p();
        }

        let mut current = target.log_density(logits, &ln_pi, &ln_1m_pi);
        for j in 0..2 {
            let mut proposal = logits;
            proposal[j] += walks[j].step * rng.standard_normal();
            let candidate = target.log_density(proposal, &ln_pi, &ln_1m_pi);
            let accept = candidate.is_finite() && rng.uniform().ln() < candidate - current;
            if accept {
                logits = proposal;
                current = candidate;
            }
            walks[j].record(accept, burning);
        }

        if !burning && (iter - mcmc.burn_in + 1) % mcmc.thin == 0 {
            for k in 0..3 {
                pi_draws[k].push(pi[k]);
            }
            delta_draws[0].push(sigmoid(logits[0]));
            delta_draws[1].push(sigmoid(logits[1]));
        }
    }

    let mut summaries = Vec::with_capacity(5);
    let mut pi_hat = [0.0; 3];
    for k in 0..3 {
        let s = PosteriorSummary::of_draws(pi_name(k), &pi_draws[k]);
        pi_hat[k] = s.mean;
        summaries.push(s);
    }
    let mut delta_hat = [0.0; 2];
    for j in 0..2 {
        let s = PosteriorSummary::of_draws(format!("delta{}", j + 1), &delta_draws[j]);
        delta_hat[j] = s.mean.clamp(0.0, 1.0);
        summaries.push(s);
    }
    let mut diagnostics = Diagnostics::default();
    diagnostics.record_walk("delta1", &walks[0]);
    diagnostics.record_walk("delta2", &walks[1]);

    Ok(EstimateResult {
        method: "MPP".into(),
        pi_hat,
        delta_hat: Some(DeltaPair::new(delta_hat[0], delta_hat[1])?),
        linkage_hat: None,
        summaries,
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::RngStream;

    #[test]
    fn softplus_is_stable() {
        assert!((softplus(0.0) - std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(softplus(800.0), 800.0);
        assert!(softplus(-800.0) >= 0.0 && softplus(-800.0) < 1e-300);
        assert!((sigmoid(2.0) + sigmoid(-2.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn empty_stage2_recovers_priors() {
        let stage1 = TrialCounts::stage1_only([30; 3], [6, 9, 12]).unwrap();
        let prior = PriorConfig {
            a_delta: 2.0,
            b_delta: 3.0,
            ..Default::default()
        };
        let mcmc = McmcConfig {
            kept_samples: 20_000,
            seed: RngStream::new(17, 1),
            ..Default::default()
        };
        let r = mpp_fit(&stage1, &SubgroupCounts::empty(), &prior, &mcmc).unwrap();
        let d = r.delta_hat.unwrap();
        assert!((d.d1() - 0.4).abs() < 0.01 && (d.d2() - 0.4).abs() < 0.01, "{d:?}");
        for (k, z) in [6.0, 9.0, 12.0].iter().enumerate() {
            assert!((r.pi_hat[k] - (z + 1.0) / 32.0).abs() < 0.01);
        }
    }

    #[test]
    fn identical_seed_identical_chain() {
        let stage1 = TrialCounts::stage1_only([30; 3], [6, 9, 12]).unwrap();
        let sub = SubgroupCounts::new([[6, 24], [9, 21], [12, 18]], [[1, 5], [3, 6], [5, 7]]).unwrap();
        let mcmc = McmcConfig {
            burn_in: 200,
            kept_samples: 500,
            ..Default::default()
        };
        let a = mpp_fit(&stage1, &sub, &PriorConfig::default(), &mcmc).unwrap();
        let b = mpp_fit(&stage1, &sub, &PriorConfig::default(), &mcmc).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }

    #[test]
    fn thinning_keeps_requested_draws() {
        let stage1 = TrialCounts::stage1_only([9; 3], [3; 3]).unwrap();
        let mcmc = McmcConfig {
            burn_in: 0,
            kept_samples: 100,
            thin: 3,
            ..Default::default()
        };
        let r = mpp_fit(&stage1, &SubgroupCounts::empty(), &PriorConfig::default(), &mcmc).unwrap();
        assert_eq!(r.summaries.len(), 5);
        assert!(r.summary("delta2").unwrap().ess.unwrap() <= 100.0);
    }
}
