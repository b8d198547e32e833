//! Power parameters (δ₁, δ₂) for the responder and non-responder subgroups.
//!
//! Four deterministic strategies are provided: the penalized likelihood-type
//! criterion (PLC), the marginal likelihood criterion (MLC), Bhattacharyya's
//! overlap of stage-wise posteriors (BOM) and averaged two-sided Fisher exact
//! test p-values (FET).
//!
//! In the FET and BOM averages, a treatment whose subgroup cell is empty is
//! left out, and a subgroup with no participants at all gets weight 0; that
//! weight multiplies an empty likelihood, so its value does not matter.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::special::{hypergeom_support, ln_beta, log_hypergeom_pmf};
use crate::numerics::{grid_minimize, Axis, BetaParams};
use crate::trial::{SubgroupCounts, TrialCounts};

/// Power parameters; `d1` weights stage-1 responders, `d2` non-responders.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 2]", into = "[f64; 2]")]
pub struct DeltaPair {
    d1: f64,
    d2: f64,
}

impl DeltaPair {
    pub const ZERO: DeltaPair = DeltaPair { d1: 0.0, d2: 0.0 };
    pub const ONE: DeltaPair = DeltaPair { d1: 1.0, d2: 1.0 };

    pub fn new(d1: f64, d2: f64) -> Result<Self> {
        if !((0.0..=1.0).contains(&d1) && (0.0..=1.0).contains(&d2)) {
            return Err(Error::Domain(format!("power parameters ({d1}, {d2}) not in [0, 1]")));
        }
        Ok(Self { d1, d2 })
    }

    pub fn d1(&self) -> f64 {
        self.d1
    }

    pub fn d2(&self) -> f64 {
        self.d2
    }

    pub fn as_array(&self) -> [f64; 2] {
        [self.d1, self.d2]
    }
}

impl TryFrom<[f64; 2]> for DeltaPair {
    type Error = Error;
    fn try_from(v: [f64; 2]) -> Result<Self> {
        DeltaPair::new(v[0], v[1])
    }
}

impl From<DeltaPair> for [f64; 2] {
    fn from(d: DeltaPair) -> Self {
        d.as_array()
    }
}

/// Hyperparameters shared by all methods.
///
/// `a_pi, b_pi`: beta prior of every response rate. `a_delta, b_delta`: beta
/// prior of each power parameter under the MPP. `beta_shape, beta_rate`:
/// gamma prior (shape/rate) of both BJSM linkage parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PriorConfig {
    pub a_pi: f64,
    pub b_pi: f64,
    pub a_delta: f64,
    pub b_delta: f64,
    pub beta_shape: f64,
    pub beta_rate: f64,
}

impl Default for PriorConfig {
    fn default() -> Self {
        Self {
            a_pi: 1.0,
            b_pi: 1.0,
            a_delta: 1.0,
            b_delta: 1.0,
            beta_shape: 1.0,
            beta_rate: 1.0,
        }
    }
}

impl PriorConfig {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("a_pi", self.a_pi),
            ("b_pi", self.b_pi),
            ("a_delta", self.a_delta),
            ("b_delta", self.b_delta),
            ("beta_shape", self.beta_shape),
            ("beta_rate", self.beta_rate),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("prior {name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// MPP prior on δ with the given mean and `a_delta + b_delta = 2`.
    pub fn with_delta_prior_mean(mut self, mean: f64) -> Self {
        self.a_delta = 2.0 * mean;
        self.b_delta = 2.0 * (1.0 - mean);
        self
    }
}

/// Two-sided Fisher exact test comparing `z1/n1` against `z2/n2`.
///
/// With both margins fixed, the p-value sums the hypergeometric
/// probabilities of every table no more probable than the observed one,
/// up to a relative slack of 1e-7 that absorbs floating-point ties.
pub fn fisher_exact_two_sided(n1: u32, z1: u32, n2: u32, z2: u32) -> Result<f64> {
    if z1 > n1 || z2 > n2 || n1 + n2 == 0 {
        return Err(Error::Domain(format!(
            "invalid 2x2 table: {z1}/{n1} vs {z2}/{n2}"
        )));
    }
    let total = u64::from(n1 + n2);
    let successes = u64::from(z1 + z2);
    let draws = u64::from(n1);
    let (lo, hi) = hypergeom_support(total, successes, draws);
    if lo == hi {
        return Ok(1.0);
    }
    let observed = log_hypergeom_pmf(u64::from(z1), total, successes, draws)?;
    let cutoff = observed + 1e-7f64.ln_1p();
    let mut p = 0.0;
    for x in lo..=hi {
        let lp = log_hypergeom_pmf(x, total, successes, draws)?;
        if lp <= cutoff {
            p += lp.exp();
        }
    }
    Ok(p.min(1.0))
}

/// Bhattacharyya overlap ∫ √(f₁ f₂) of two beta densities.
pub fn bom_overlap(p1: BetaParams, p2: BetaParams) -> f64 {
    let mid = ln_beta(0.5 * (p1.a() + p2.a()), 0.5 * (p1.b() + p2.b()));
    (mid - 0.5 * (p1.log_beta() + p2.log_beta())).exp().min(1.0)
}

fn average_over_nonempty(sub: &SubgroupCounts, mut cell: impl FnMut(usize, usize) -> Result<f64>) -> Result<[f64; 2]> {
    let n2 = sub.n2();
    let mut out = [0.0; 2];
    for (j, slot) in out.iter_mut().enumerate() {
        let mut sum = 0.0;
        let mut used = 0;
        for (k, row) in n2.iter().enumerate() {
            if row[j] > 0 {
                sum += cell(k, j)?;
                used += 1;
            }
        }
        *slot = if used == 0 { 0.0 } else { sum / used as f64 };
    }
    Ok(out)
}

/// δ_j = mean over treatments of the stage-1 vs subgroup-j Fisher p-value.
pub fn delta_fet(sub: &SubgroupCounts, stage1: &TrialCounts) -> Result<DeltaPair> {
    let (n1, z1) = (stage1.n1(), stage1.z1());
    let (n2, z2) = (sub.n2(), sub.z2());
    let [d1, d2] = average_over_nonempty(sub, |k, j| {
        fisher_exact_two_sided(n1[k], z1[k], n2[k][j], z2[k][j])
    })?;
    DeltaPair::new(d1, d2)
}

/// δ_j = mean over treatments of the overlap between the stage-1 and the
/// subgroup-j posterior of the response rate.
pub fn delta_bom(sub: &SubgroupCounts, stage1: &TrialCounts, prior: &PriorConfig) -> Result<DeltaPair> {
    prior.validate()?;
    let (n1, z1) = (stage1.n1(), stage1.z1());
    let (n2, z2) = (sub.n2(), sub.z2());
    let [d1, d2] = average_over_nonempty(sub, |k, j| {
        let p1 = BetaParams::new(
            f64::from(z1[k]) + prior.a_pi,
            f64::from(n1[k] - z1[k]) + prior.b_pi,
        )?;
        let p2 = BetaParams::new(
            f64::from(z2[k][j]) + prior.a_pi,
            f64::from(n2[k][j] - z2[k][j]) + prior.b_pi,
        )?;
        Ok(bom_overlap(p1, p2))
    })?;
    DeltaPair::new(d1, d2)
}

/// Per-treatment counts as floats, laid out for fast repeated evaluation of
/// the likelihood-criterion objectives.
#[derive(Debug, Clone, Copy)]
pub(crate) struct BorrowingData {
    pub succ1: [f64; 3],
    pub fail1: [f64; 3],
    pub succ2: [[f64; 2]; 3],
    pub fail2: [[f64; 2]; 3],
    pub a_pi: f64,
    pub b_pi: f64,
}

impl BorrowingData {
    pub fn new(stage1: &TrialCounts, sub: &SubgroupCounts, prior: &PriorConfig) -> Self {
        let (n1, z1) = (stage1.n1(), stage1.z1());
        let (n2, z2) = (sub.n2(), sub.z2());
        let mut d = BorrowingData {
            succ1: [0.0; 3],
            fail1: [0.0; 3],
            succ2: [[0.0; 2]; 3],
            fail2: [[0.0; 2]; 3],
            a_pi: prior.a_pi,
            b_pi: prior.b_pi,
        };
        for k in 0..3 {
            d.succ1[k] = f64::from(z1[k]);
            d.fail1[k] = f64::from(n1[k] - z1[k]);
            for j in 0..2 {
                d.succ2[k][j] = f64::from(z2[k][j]);
                d.fail2[k][j] = f64::from(n2[k][j] - z2[k][j]);
            }
        }
        d
    }

    /// δ-weighted stage-2 successes and failures for treatment `k`.
    #[inline]
    pub fn weighted(&self, k: usize, d1: f64, d2: f64) -> (f64, f64) {
        (
            self.succ2[k][0] * d1 + self.succ2[k][1] * d2,
            self.fail2[k][0] * d1 + self.fail2[k][1] * d2,
        )
    }

    pub fn log_m_star(&self, d1: f64, d2: f64) -> f64 {
        (0..3)
            .map(|k| {
                let (s, f) = self.weighted(k, d1, d2);
                ln_beta(self.succ1[k] + s + self.a_pi, self.fail1[k] + f + self.b_pi)
            })
            .sum()
    }

    /// Σ_k ln B of the δ-weighted stage-2 data alone.
    pub fn log_normalizer(&self, d1: f64, d2: f64) -> f64 {
        (0..3)
            .map(|k| {
                let (s, f) = self.weighted(k, d1, d2);
                ln_beta(s + self.a_pi, f + self.b_pi)
            })
            .sum()
    }

    pub fn log_m(&self, d1: f64, d2: f64) -> f64 {
        self.log_m_star(d1, d2) - self.log_normalizer(d1, d2)
    }
}

/// ln m*(δ): log of the integrated stage-1 likelihood times the power
/// prior, without the δ-free constant (binomial coefficients).
pub fn log_m_star(
    delta: DeltaPair,
    sub: &SubgroupCounts,
    stage1: &TrialCounts,
    prior: &PriorConfig,
) -> f64 {
    BorrowingData::new(stage1, sub, prior).log_m_star(delta.d1, delta.d2)
}

/// ln m(δ): marginal likelihood of δ, the ratio of the joint integral to
/// the integral of the power prior alone, without its δ-free constant.
pub fn log_m(delta: DeltaPair, sub: &SubgroupCounts, stage1: &TrialCounts, prior: &PriorConfig) -> f64 {
    BorrowingData::new(stage1, sub, prior).log_m(delta.d1, delta.d2)
}

/// Lattice settings for the PLC and MLC searches.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchOptions {
    /// Lower bound of the PLC search; its penalty diverges at zero.
    pub plc_floor: f64,
    pub coarse_step: f64,
    pub refine_rounds: usize,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            plc_floor: 0.001,
            coarse_step: 0.01,
            refine_rounds: 2,
        }
    }
}

/// Outcome of a criterion-based weight search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightSelection {
    pub delta: DeltaPair,
    /// Objective value at `delta`, when a search ran.
    pub objective: Option<f64>,
    pub flags: Vec<String>,
}

/// PLC: minimizes G(δ) = -2 ln m*(δ) + Σ_j ln(n_j)/δ_j, with n_j the size of
/// subgroup j. A subgroup with at most one participant has no usable
/// penalty; its δ is pinned to 0.
pub fn delta_plc(sub: &SubgroupCounts, stage1: &TrialCounts, prior: &PriorConfig) -> Result<WeightSelection> {
    delta_plc_with(sub, stage1, prior, &SearchOptions::default())
}

pub fn delta_plc_with(
    sub: &SubgroupCounts,
    stage1: &TrialCounts,
    prior: &PriorConfig,
    opts: &SearchOptions,
) -> Result<WeightSelection> {
    prior.validate()?;
    if !(opts.plc_floor > 0.0 && opts.plc_floor < 1.0) {
        return Err(Error::Config(format!("PLC floor {} not in (0, 1)", opts.plc_floor)));
    }
    let data = BorrowingData::new(stage1, sub, prior);
    let mut axes = [Axis::fixed(0.0); 2];
    let mut penalty = [0.0; 2];
    let mut flags = Vec::new();
    for j in 0..2 {
        let size = sub.subgroup_size(j);
        if size > 1 {
            axes[j] = Axis::new(opts.plc_floor, 1.0);
            penalty[j] = f64::from(size).ln();
        } else {
            flags.push(format!("delta{} fixed at 0: subgroup has {size} participant(s)", j + 1));
        }
    }
    if axes.iter().all(|a| a.lo == a.hi) {
        flags.push("no subgroup large enough for PLC; returning (0, 0)".into());
        return Ok(WeightSelection {
            delta: DeltaPair::ZERO,
            objective: None,
            flags,
        });
    }
    let objective = |d1: f64, d2: f64| {
        let mut g = -2.0 * data.log_m_star(d1, d2);
        if penalty[0] > 0.0 {
            g += penalty[0] / d1;
        }
        if penalty[1] > 0.0 {
            g += penalty[1] / d2;
        }
        g
    };
    let m = grid_minimize(axes, objective, opts.coarse_step, opts.refine_rounds)?;
    Ok(WeightSelection {
        delta: DeltaPair::new(m.point.0, m.point.1)?,
        objective: Some(m.value),
        flags,
    })
}

/// MLC: minimizes -2 ln m(δ) over [0, 1]².
pub fn delta_mlc(sub: &SubgroupCounts, stage1: &TrialCounts, prior: &PriorConfig) -> Result<WeightSelection> {
    delta_mlc_with(sub, stage1, prior, &SearchOptions::default())
}

pub fn delta_mlc_with(
    sub: &SubgroupCounts,
    stage1: &TrialCounts,
    prior: &PriorConfig,
    opts: &SearchOptions,
) -> Result<WeightSelection> {
    prior.validate()?;
    let data = BorrowingData::new(stage1, sub, prior);
    let axis = Axis::new(0.0, 1.0);
    let m = grid_minimize(
        [axis, axis],
        |d1, d2| -2.0 * data.log_m(d1, d2),
        opts.coarse_step,
        opts.refine_rounds,
    )?;
    Ok(WeightSelection {
        delta: DeltaPair::new(m.point.0, m.point.1)?,
        objective: Some(m.value),
        flags: Vec::new(),
    })
}
