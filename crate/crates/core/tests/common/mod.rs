//! Reference implementations used by the integration and acceptance tests.
//! They share no code with the library's numerics: log-gamma comes from
//! statrs, Fisher p-values from exact integer arithmetic and posterior
//! means from brute-force grids.
#![allow(dead_code)]

use snsmart_core::numerics::quad_01;
use snsmart_core::{
    builtin_scenario, pool_subgroups, simulate_trial, PriorConfig, RngStream, SubgroupCounts,
    TrialCounts,
};
use statrs::function::gamma::{gamma_lr, ln_gamma};

pub fn ln_beta_ref(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

fn choose(n: u32, k: u32) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for i in 0..k {
        c = c * u128::from(n - i) / u128::from(i + 1);
    }
    c
}

/// Two-sided Fisher p-value by exact enumeration: every table with
/// probability at most (1 + 1e-7) times the observed one, compared in
/// integers.
pub fn fisher_oracle(n1: u32, z1: u32, n2: u32, z2: u32) -> f64 {
    let m = z1 + z2;
    let lo = m.saturating_sub(n2);
    let hi = m.min(n1);
    let weight = |x: u32| choose(n1, x) * choose(n2, m - x);
    let observed = weight(z1);
    let mut sum: u128 = 0;
    for x in lo..=hi {
        let w = weight(x);
        if w * 10_000_000 <= observed * 10_000_001 {
            sum += w;
        }
    }
    sum as f64 / choose(n1 + n2, m) as f64
}

/// ∫ √(f₁ f₂) by adaptive quadrature, split at ½ so both endpoint
/// singularities sit at the origin of their half.
pub fn bom_quadrature(a1: f64, b1: f64, a2: f64, b2: f64) -> f64 {
    let lb1 = ln_beta_ref(a1, b1);
    let lb2 = ln_beta_ref(a2, b2);
    let root = |x: f64, y: f64| {
        let l1 = (a1 - 1.0) * x.ln() + (b1 - 1.0) * y.ln() - lb1;
        let l2 = (a2 - 1.0) * x.ln() + (b2 - 1.0) * y.ln() - lb2;
        (0.5 * (l1 + l2)).exp()
    };
    let left = quad_01(|t| root(0.5 * t, 1.0 - 0.5 * t)).unwrap();
    let right = quad_01(|t| root(1.0 - 0.5 * t, 0.5 * t)).unwrap();
    0.5 * (left + right)
}

/// Counts as floats: per treatment stage-1 successes/failures and
/// per-subgroup stage-2 successes/failures.
pub struct Flat {
    pub s1: [f64; 3],
    pub f1: [f64; 3],
    pub s2: [[f64; 2]; 3],
    pub f2: [[f64; 2]; 3],
    pub sizes: [u32; 2],
}

pub fn flatten(stage1: &TrialCounts, sub: &SubgroupCounts) -> Flat {
    let mut out = Flat {
        s1: [0.0; 3],
        f1: [0.0; 3],
        s2: [[0.0; 2]; 3],
        f2: [[0.0; 2]; 3],
        sizes: [0; 2],
    };
    for k in 0..3 {
        out.s1[k] = f64::from(stage1.z1()[k]);
        out.f1[k] = f64::from(stage1.n1()[k] - stage1.z1()[k]);
        for j in 0..2 {
            let n = sub.n2()[k][j];
            let z = sub.z2()[k][j];
            out.s2[k][j] = f64::from(z);
            out.f2[k][j] = f64::from(n - z);
            out.sizes[j] += n;
        }
    }
    out
}

impl Flat {
    fn weighted(&self, k: usize, d: [f64; 2]) -> (f64, f64) {
        (
            d[0] * self.s2[k][0] + d[1] * self.s2[k][1],
            d[0] * self.f2[k][0] + d[1] * self.f2[k][1],
        )
    }

    /// Σ_k ln B(z1 + s + a, f1 + f + b).
    pub fn log_joint(&self, d: [f64; 2], prior: &PriorConfig) -> f64 {
        (0..3)
            .map(|k| {
                let (s, f) = self.weighted(k, d);
                ln_beta_ref(self.s1[k] + s + prior.a_pi, self.f1[k] + f + prior.b_pi)
            })
            .sum()
    }

    /// Σ_k ln B(s + a, f + b).
    pub fn log_power_prior_norm(&self, d: [f64; 2], prior: &PriorConfig) -> f64 {
        (0..3)
            .map(|k| {
                let (s, f) = self.weighted(k, d);
                ln_beta_ref(s + prior.a_pi, f + prior.b_pi)
            })
            .sum()
    }

    pub fn plc_objective(&self, d: [f64; 2], prior: &PriorConfig) -> f64 {
        let mut g = -2.0 * self.log_joint(d, prior);
        for j in 0..2 {
            if self.sizes[j] > 1 {
                g += f64::from(self.sizes[j]).ln() / d[j];
            }
        }
        g
    }

    pub fn mlc_objective(&self, d: [f64; 2], prior: &PriorConfig) -> f64 {
        -2.0 * (self.log_joint(d, prior) - self.log_power_prior_norm(d, prior))
    }
}

/// Minimum of `f` over the lattice `points × points` (first minimum wins).
fn lattice_min(points1: &[f64], points2: &[f64], f: impl Fn([f64; 2]) -> f64) -> ([f64; 2], f64) {
    let mut best = ([f64::NAN; 2], f64::INFINITY);
    for &a in points1 {
        for &b in points2 {
            let v = f([a, b]);
            if v < best.1 {
                best = ([a, b], v);
            }
        }
    }
    best
}

fn steps(lo: usize, hi: usize) -> Vec<f64> {
    (lo..=hi).map(|i| i as f64 / 1000.0).collect()
}

/// PLC minimum on the 0.001 lattice of [0.001, 1]², with δ_j held at 0 for a
/// subgroup of at most one participant.
pub fn plc_exhaustive(flat: &Flat, prior: &PriorConfig) -> ([f64; 2], f64) {
    let axis = |j: usize| if flat.sizes[j] > 1 { steps(1, 1000) } else { vec![0.0] };
    lattice_min(&axis(0), &axis(1), |d| flat.plc_objective(d, prior))
}

/// MLC minimum on the 0.001 lattice of [0, 1]².
pub fn mlc_exhaustive(flat: &Flat, prior: &PriorConfig) -> ([f64; 2], f64) {
    let axis = steps(0, 1000);
    lattice_min(&axis, &axis, |d| flat.mlc_objective(d, prior))
}

/// MPP posterior means of π and δ by midpoint-rule integration over δ,
/// with π integrated analytically.
pub fn mpp_grid_means(flat: &Flat, prior: &PriorConfig, cells: usize) -> ([f64; 3], [f64; 2]) {
    let h = 1.0 / cells as f64;
    let log_prior =
        |x: f64| (prior.a_delta - 1.0) * x.ln() + (prior.b_delta - 1.0) * (1.0 - x).ln();
    let mut logs = Vec::with_capacity(cells * cells);
    for i in 0..cells {
        for j in 0..cells {
            let d = [(i as f64 + 0.5) * h, (j as f64 + 0.5) * h];
            let lp = flat.log_joint(d, prior) - flat.log_power_prior_norm(d, prior)
                + log_prior(d[0])
                + log_prior(d[1]);
            logs.push((d, lp));
        }
    }
    let top = logs.iter().map(|(_, l)| *l).fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    let mut pi = [0.0; 3];
    let mut delta = [0.0; 2];
    for (d, lp) in logs {
        let w = (lp - top).exp();
        total += w;
        for k in 0..3 {
            let (s, f) = flat.weighted(k, d);
            let a = flat.s1[k] + s + prior.a_pi;
            let b = flat.f1[k] + f + prior.b_pi;
            pi[k] += w * a / (a + b);
        }
        delta[0] += w * d[0];
        delta[1] += w * d[1];
    }
    (pi.map(|x| x / total), delta.map(|x| x / total))
}

/// Stage-1 conjugate posterior means (z + a) / (n + a + b).
pub fn conjugate_means(counts: &TrialCounts, prior: &PriorConfig) -> [f64; 3] {
    std::array::from_fn(|k| {
        (f64::from(counts.z1()[k]) + prior.a_pi)
            / (f64::from(counts.n1()[k]) + prior.a_pi + prior.b_pi)
    })
}

/// Twenty datasets: simulated from scenarios 1-5 at several sizes, plus one
/// with a single stage-1 responder.
pub fn fixtures() -> Vec<(TrialCounts, SubgroupCounts)> {
    let mut out = Vec::new();
    for i in 0..19u32 {
        let spec = builtin_scenario(1 + i % 5).unwrap();
        let n = [12, 30, 60, 90][(i / 5) as usize];
        let counts = simulate_trial(&spec, n, RngStream::new(777, u64::from(i))).unwrap();
        out.push((counts, pool_subgroups(&counts)));
    }
    let mut s2 = snsmart_core::Stage2Counts::default();
    s2.y_resp = [0, 1, 0];
    s2.m_non = [[0, 2, 2], [1, 0, 2], [2, 2, 0]];
    s2.y_non = [[0, 1, 0], [0, 0, 2], [1, 1, 0]];
    let edge = TrialCounts::new([4, 4, 4], [0, 1, 0], Some(s2)).unwrap();
    out.push((edge, pool_subgroups(&edge)));
    out
}

/// BJSM posterior means of π when there is no stage-2 data.
///
/// The likelihood is stage 1 only, but the support {β π_k ≤ 1} still ties π
/// to β: integrating both β out leaves the conjugate density tilted by
/// P(β ≤ 1 / max π)², with P the gamma CDF. Midpoint grid over π.
pub fn bjsm_stage1_only_means(counts: &TrialCounts, prior: &PriorConfig, cells: usize) -> [f64; 3] {
    let h = 1.0 / cells as f64;
    let grid: Vec<f64> = (0..cells).map(|i| (i as f64 + 0.5) * h).collect();
    let density: Vec<Vec<f64>> = (0..3)
        .map(|k| {
            let a = f64::from(counts.z1()[k]) + prior.a_pi;
            let b = f64::from(counts.n1()[k] - counts.z1()[k]) + prior.b_pi;
            grid.iter()
                .map(|&p| ((a - 1.0) * p.ln() + (b - 1.0) * (1.0 - p).ln() - ln_beta_ref(a, b)).exp())
                .collect()
        })
        .collect();
    let tilt: Vec<f64> = grid
        .iter()
        .map(|&m| gamma_lr(prior.beta_shape, prior.beta_rate / m).powi(2))
        .collect();
    let mut total = 0.0;
    let mut sums = [0.0; 3];
    for i in 0..cells {
        for j in 0..cells {
            let dij = density[0][i] * density[1][j];
            for l in 0..cells {
                let w = dij * density[2][l] * tilt[i.max(j).max(l)];
                total += w;
                sums[0] += w * grid[i];
                sums[1] += w * grid[j];
                sums[2] += w * grid[l];
            }
        }
    }
    sums.map(|s| s / total)
}
