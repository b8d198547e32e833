//! Bayesian joint stage model.
//!
//! Stage-2 response rates are tied to stage-1 rates through two linkage
//! parameters: responders to `k` (who stay on `k`) respond with rate
//! `β₁ π_k`, and non-responders switched to `k` respond with `β₀ π_k`.
//! Because the non-responder rate depends only on the stage-2 treatment,
//! the likelihood only needs the pooled subgroup counts.
//!
//! Priors: π_k ~ Beta(a_π, b_π), β₀, β₁ ~ Gamma(shape, rate), truncated to
//! the region where every stage-2 rate is at most one. Proposals leaving
//! that region are rejected.

use super::summary::PosteriorSummary;
use super::{pi_name, Diagnostics, EstimateResult, Linkage, McmcConfig, RandomWalk};
use crate::error::Result;
use crate::trial::{pool_subgroups, TrialCounts};
use crate::weights::PriorConfig;

struct Model {
    succ1: [f64; 3],
    fail1: [f64; 3],
    // [k][0]: responders (β₁), [k][1]: non-responders (β₀)
    succ2: [[f64; 2]; 3],
    fail2: [[f64; 2]; 3],
    prior: PriorConfig,
}

/// y ln p + (n - y) ln(1 - p), with 0·ln 0 = 0 and -∞ outside [0, 1].
fn binomial_kernel(succ: f64, fail: f64, p: f64) -> f64 {
    if !(0.0..=1.0).contains(&p) {
        return f64::NEG_INFINITY;
    }
    let mut v = 0.0;
    if succ > 0.0 {
        v += succ * p.ln();
    }
    if fail > 0.0 {
        v += fail * (-p).ln_1p();
    }
    v
}

impl Model {
    /// Terms involving π_k on the logit scale (Jacobian included).
    fn pi_terms(&self, k: usize, pi: f64, beta0: f64, beta1: f64) -> f64 {
        if !(pi > 0.0 && pi < 1.0) || beta1 * pi > 1.0 || beta0 * pi > 1.0 {
            return f64::NEG_INFINITY;
        }
        binomial_kernel(self.succ1[k], self.fail1[k], pi)
            + binomial_kernel(self.succ2[k][0], self.fail2[k][0], beta1 * pi)
            + binomial_kernel(self.succ2[k][1], self.fail2[k][1], beta0 * pi)
            + self.prior.a_pi * pi.ln()
            + self.prior.b_pi * (-pi).ln_1p()
    }

    /// Terms involving one linkage parameter on the log scale (Jacobian
    /// included); `subgroup` 0 is β₁, 1 is β₀.
    fn beta_terms(&self, subgroup: usize, beta: f64, pi: &[f64; 3]) -> f64 {
        if !(beta > 0.0) || pi.iter().any(|&p| beta * p > 1.0) {
            return f64::NEG_INFINITY;
        }
        let mut v = self.prior.beta_shape * beta.ln() - self.prior.beta_rate * beta;
        for k in 0..3 {
            v += binomial_kernel(self.succ2[k][subgroup], self.fail2[k][subgroup], beta * pi[k]);
        }
        v
    }
}

struct Chain {
    pi: Vec<Vec<f64>>,
    // [0]: β₁, [1]: β₀
    beta: Vec<Vec<f64>>,
    pi_walks: Vec<RandomWalk>,
    beta_walks: [RandomWalk; 2],
}

fn build_model(counts: &TrialCounts, prior: &PriorConfig) -> Model {
    let sub = pool_subgroups(counts);
    let (n1, z1) = (counts.n1(), counts.z1());
    let (n2, z2) = (sub.n2(), sub.z2());
    let mut model = Model {
        succ1: [0.0; 3],
        fail1: [0.0; 3],
        succ2: [[0.0; 2]; 3],
        fail2: [[0.0; 2]; 3],
        prior: *prior,
    };
    for k in 0..3 {
        model.succ1[k] = f64::from(z1[k]);
        model.fail1[k] = f64::from(n1[k] - z1[k]);
        for j in 0..2 {
            model.succ2[k][j] = f64::from(z2[k][j]);
            model.fail2[k][j] = f64::from(n2[k][j] - z2[k][j]);
        }
    }
    model
}

fn run_chain(model: &Model, mcmc: &McmcConfig) -> Chain {
    let prior = &model.prior;
    let mut rng = mcmc.seed.start();
    let mut pi = [0.0; 3];
    for k in 0..3 {
        pi[k] = (model.succ1[k] + prior.a_pi) / (model.succ1[k] + model.fail1[k] + prior.a_pi + prior.b_pi);
    }
    // index 0: β₁ (responders), 1: β₀ (non-responders)
    let mut beta = [1.0, 1.0];

    let mut pi_walks: Vec<RandomWalk> = (0..3).map(|_| RandomWalk::new(mcmc.step_logit_pi)).collect();
    let mut beta_walks = [RandomWalk::new(mcmc.step_log_beta), RandomWalk::new(mcmc.step_log_beta)];

    let n_keep = mcmc.kept_samples;
    let mut pi_draws = vec![Vec::with_capacity(n_keep); 3];
    let mut beta_draws = vec![Vec::with_capacity(n_keep); 2];
    let total_iter = mcmc.burn_in + n_keep * mcmc.thin;

    for iter in 0..total_iter {
        let burning = iter < mcmc.burn_in;
        for k in 0..3 {
            let current = model.pi_terms(k, pi[k], beta[1], beta[0]);
            let logit = (pi[k] / (1.0 - pi[k])).ln() + pi_walks[k].step * rng.standard_normal();
            let proposal = 1.0 / (1.0 + (-logit).exp());
            let candidate = model.pi_terms(k, proposal, beta[1], beta[0]);
            let accept = candidate.is_finite() && rng.uniform().ln() < candidate - current;
            if accept {
                pi[k] = proposal;
            }
            pi_walks[k].record(accept, burning);
        }
        for g in 0..2 {
            let current = model.beta_terms(g, beta[g], &pi);
            let proposal = beta[g] * (beta_walks[g].step * rng.standard_normal()).exp();
            let candidate = model.beta_terms(g, proposal, &pi);
            let accept = candidate.is_finite() && rng.uniform().ln() < candidate - current;
            if accept {
                beta[g] = proposal;
            }
            beta_walks[g].record(accept, burning);
        }

        if !burning && (iter - mcmc.burn_in + 1) % mcmc.thin == 0 {
            for k in 0..3 {
                pi_draws[k].push(pi[k]);
            }
            beta_draws[0].push(beta[0]);
            beta_draws[1].push(beta[1]);
        }
    }
    Chain {
        pi: pi_draws,
        beta: beta_draws,
        pi_walks,
        beta_walks,
    }
}

/// Samples the BJSM posterior by component-wise random-walk Metropolis
/// (logit scale for π_k, log scale for β₀ and β₁).
pub fn bjsm_fit(counts: &TrialCounts, prior: &PriorConfig, mcmc: &McmcConfig) -> Result<EstimateResult> {
    prior.validate()?;
    mcmc.validate()?;
    let model = build_model(counts, prior);
    let Chain {
        pi: pi_draws,
        beta: beta_draws,
        pi_walks,
        beta_walks,
    } = run_chain(&model, mcmc);

    let mut summaries = Vec::with_capacity(5);
    let mut pi_hat = [0.0; 3];
    for k in 0..3 {
        let s = PosteriorSummary::of_draws(pi_name(k), &pi_draws[k]);
        pi_hat[k] = s.mean;
        summaries.push(s);
    }
    let s1 = PosteriorSummary::of_draws("beta1", &beta_draws[0]);
    let s0 = PosteriorSummary::of_draws("beta0", &beta_draws[1]);
    let linkage = Linkage {
        beta0: s0.mean,
        beta1: s1.mean,
    };
    summaries.push(s0);
    summaries.push(s1);

    let mut diagnostics = Diagnostics::default();
    for k in 0..3 {
        diagnostics.record_walk(&pi_name(k), &pi_walks[k]);
    }
    diagnostics.record_walk("beta1", &beta_walks[0]);
    diagnostics.record_walk("beta0", &beta_walks[1]);

    Ok(EstimateResult {
        method: "BJSM".into(),
        pi_hat,
        delta_hat: None,
        linkage_hat: Some(linkage),
        summaries,
        diagnostics,
    })
}
