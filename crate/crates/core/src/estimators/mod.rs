//! Posterior estimation of the stage-1 response rates π = (π_A, π_B, π_C).
//!
//! Every method reports the posterior mean as its point estimate.

mod bjsm;
mod mpp;
mod summary;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{BetaParams, RngStream};
use crate::trial::{SubgroupCounts, TreatmentId, TrialCounts};
use crate::weights::{self, DeltaPair, PriorConfig};

pub use bjsm::bjsm_fit;
pub use mpp::mpp_fit;
pub use summary::PosteriorSummary;

/// Metropolis-within-Gibbs settings shared by the MPP and BJSM samplers.
///
/// During burn-in each random-walk step size is halved when its batch
/// acceptance drops below 20% and doubled above 50%; it is frozen
/// afterwards.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McmcConfig {
    pub burn_in: usize,
    pub kept_samples: usize,
    pub thin: usize,
    pub step_logit_pi: f64,
    pub step_logit_delta: f64,
    pub step_log_beta: f64,
    pub seed: RngStream,
}

impl Default for McmcConfig {
    fn default() -> Self {
        Self {
            burn_in: 2000,
            kept_samples: 10_000,
            thin: 1,
            step_logit_pi: 1.0,
            step_logit_delta: 1.0,
            step_log_beta: 1.0,
            seed: RngStream::default(),
        }
    }
}

impl McmcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.kept_samples == 0 || self.thin == 0 {
            return Err(Error::Config("kept_samples and thin must be at least 1".into()));
        }
        for (name, v) in [
            ("step_logit_pi", self.step_logit_pi),
            ("step_logit_delta", self.step_logit_delta),
            ("step_log_beta", self.step_log_beta),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    pub fn with_seed(mut self, seed: RngStream) -> Self {
        self.seed = seed;
        self
    }
}

pub(crate) const ADAPT_BATCH: usize = 50;
pub(crate) const ACCEPTANCE_WARN: (f64, f64) = (0.05, 0.95);

/// Random-walk proposal scale with burn-in adaptation and acceptance
/// bookkeeping.
#[derive(Debug, Clone)]
pub(crate) struct RandomWalk {
    pub step: f64,
    batch_accepted: usize,
    batch_tried: usize,
    kept_accepted: usize,
    kept_tried: usize,
}

impl RandomWalk {
    pub fn new(step: f64) -> Self {
        Self {
            step,
            batch_accepted: 0,
            batch_tried: 0,
            kept_accepted: 0,
            kept_tried: 0,
        }
    }

    pub fn record(&mut self, accepted: bool, burning_in: bool) {
        if burning_in {
            self.batch_tried += 1;
            self.batch_accepted += usize::from(accepted);
            if self.batch_tried == ADAPT_BATCH {
                let rate = self.batch_accepted as f64 / ADAPT_BATCH as f64;
                if rate < 0.2 {
                    self.step *= 0.5;
                } else if rate > 0.5 {
                    self.step *= 2.0;
                }
                self.batch_tried = 0;
                self.batch_accepted = 0;
            }
        } else {
            self.kept_tried += 1;
            self.kept_accepted += usize::from(accepted);
        }
    }

    pub fn acceptance(&self) -> f64 {
        if self.kept_tried == 0 {
            f64::NAN
        } else {
            self.kept_accepted as f64 / self.kept_tried as f64
        }
    }
}

/// Acceptance rates per sampled parameter and free-form warnings.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    #[serde(default)]
    pub acceptance: BTreeMap<String, f64>,
    #[serde(default)]
    pub flags: Vec<String>,
}

impl Diagnostics {
    pub(crate) fn record_walk(&mut self, name: &str, walk: &RandomWalk) {
        let rate = walk.acceptance();
        self.acceptance.insert(name.to_string(), rate);
        if !(ACCEPTANCE_WARN.0..=ACCEPTANCE_WARN.1).contains(&rate) {
            self.flags.push(format!(
                "acceptance rate {rate:.3} for {name} outside [{}, {}]",
                ACCEPTANCE_WARN.0, ACCEPTANCE_WARN.1
            ));
        }
    }
}

/// Posterior means of the BJSM linkage parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Linkage {
    /// Stage-1 non-responders.
    pub beta0: f64,
    /// Stage-1 responders.
    pub beta1: f64,
}

/// Output of any estimator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateResult {
    pub method: String,
    pub pi_hat: [f64; 3],
    pub delta_hat: Option<DeltaPair>,
    pub linkage_hat: Option<Linkage>,
    pub summaries: Vec<PosteriorSummary>,
    pub diagnostics: Diagnostics,
}

impl EstimateResult {
    pub fn summary(&self, name: &str) -> Option<&PosteriorSummary> {
        self.summaries.iter().find(|s| s.name == name)
    }
}

pub(crate) fn pi_name(k: usize) -> String {
    format!("pi_{}", TreatmentId::ALL[k])
}

/// Conjugate posterior of each π_k for fixed δ.
pub fn fixed_delta_posterior(
    stage1: &TrialCounts,
    sub: &SubgroupCounts,
    delta: DeltaPair,
    prior: &PriorConfig,
) -> Result<[BetaParams; 3]> {
    prior.validate()?;
    let data = weights::BorrowingData::new(stage1, sub, prior);
    let mut out = [BetaParams::new(1.0, 1.0)?; 3];
    for (k, slot) in out.iter_mut().enumerate() {
        let (s, f) = data.weighted(k, delta.d1(), delta.d2());
        *slot = BetaParams::new(data.succ1[k] + s + prior.a_pi, data.fail1[k] + f + prior.b_pi)?;
    }
    Ok(out)
}

/// Posterior for a fixed δ: π_k ~ Beta(z1 + Σ δ_j z2_j + a_π, f1 + Σ δ_j f2_j + b_π).
pub fn fit_fixed_delta(
    stage1: &TrialCounts,
    sub: &SubgroupCounts,
    delta: DeltaPair,
    prior: &PriorConfig,
) -> Result<EstimateResult> {
    let post = fixed_delta_posterior(stage1, sub, delta, prior)?;
    let summaries = post
        .iter()
        .enumerate()
        .map(|(k, p)| PosteriorSummary::of_beta(pi_name(k), *p))
        .collect::<Result<Vec<_>>>()?;
    Ok(EstimateResult {
        method: Strategy::Fixed(delta).to_string(),
        pi_hat: [post[0].mean(), post[1].mean(), post[2].mean()],
        delta_hat: Some(delta),
        linkage_hat: None,
        summaries,
        diagnostics: Diagnostics::default(),
    })
}

/// How the power parameters of a fixed-δ power prior are chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Strategy {
    Fixed(DeltaPair),
    Plc,
    Mlc,
    Bom,
    Fet,
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Strategy::Fixed(d) => write!(f, "FIXED({},{})", d.d1(), d.d2()),
            Strategy::Plc => f.write_str("PLC"),
            Strategy::Mlc => f.write_str("MLC"),
            Strategy::Bom => f.write_str("BOM"),
            Strategy::Fet => f.write_str("FET"),
        }
    }
}

impl FromStr for Strategy {
    type Err = Error;

    /// Accepts `PLC`, `MLC`, `BOM`, `FET`, `FIXED0`, `FIXED1` and
    /// `FIXED(d1,d2)`, case-insensitively.
    fn from_str(s: &str) -> Result<Self> {
        let upper = s.trim().to_ascii_uppercase();
        match upper.as_str() {
            "PLC" => return Ok(Strategy::Plc),
            "MLC" => return Ok(Strategy::Mlc),
            "BOM" => return Ok(Strategy::Bom),
            "FET" => return Ok(Strategy::Fet),
            "FIXED0" => return Ok(Strategy::Fixed(DeltaPair::ZERO)),
            "FIXED1" => return Ok(Strategy::Fixed(DeltaPair::ONE)),
            _ => {}
        }
        let inner = upper
            .strip_prefix("FIXED(")
            .and_then(|rest| rest.strip_suffix(')'))
            .ok_or_else(|| Error::Config(format!("unknown power prior strategy {s:?}")))?;
        let parts: Vec<&str> = inner.split(',').map(str::trim).collect();
        let parse = |v: &str| {
            v.parse::<f64>()
                .map_err(|_| Error::Config(format!("bad power parameter {v:?} in {s:?}")))
        };
        match parts.as_slice() {
            [a, b] => DeltaPair::new(parse(a)?, parse(b)?).map(Strategy::Fixed),
            _ => Err(Error::Config(format!("FIXED needs two values, got {s:?}"))),
        }
    }
}

/// Chooses δ by `strategy`, then fits the fixed-δ posterior.
pub fn fit_power_prior(
    stage1: &TrialCounts,
    sub: &SubgroupCounts,
    prior: &PriorConfig,
    strategy: Strategy,
) -> Result<EstimateResult> {
    let mut flags = Vec::new();
    let delta = match strategy {
        Strategy::Fixed(d) => d,
        Strategy::Fet => weights::delta_fet(sub, stage1)?,
        Strategy::Bom => weights::delta_bom(sub, stage1, prior)?,
        Strategy::Plc => {
            let sel = weights::delta_plc(sub, stage1, prior)?;
            flags = sel.flags;
            sel.delta
        }
        Strategy::Mlc => {
            let sel = weights::delta_mlc(sub, stage1, prior)?;
            flags = sel.flags;
            sel.delta
        }
    };
    let mut result = fit_fixed_delta(stage1, sub, delta, prior)?;
    result.method = strategy.to_string();
    result.diagnostics.flags = flags;
    Ok(result)
}
