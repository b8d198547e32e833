//! Acceptance checks, one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary (no libtest harness) so the summary is always
//! printed; exits non-zero if any criterion fails.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::fmt::Write as _;
use std::fs;
use std::process::ExitCode;
use std::time::Instant;

use common::*;
use snsmart_core::study::ScenarioRef;
use snsmart_core::weights::{bom_overlap, delta_mlc, delta_plc, fisher_exact_two_sided};
use snsmart_core::{
    bjsm_fit, fit_fixed_delta, mpp_fit, run_study, write_reports, BetaParams, DeltaPair, McmcConfig, Method,
    PriorConfig, RngStream, StudyConfig, StudyReport, SubgroupCounts, TrialCounts,
};

const REPS: u32 = 1000;
const N: u32 = 90;
const SEED: u64 = 20_210_907;

struct Outcome {
    id: &'static str,
    title: &'static str,
    pass: bool,
    detail: String,
}

/// Accumulates sub-checks of one criterion.
struct Criterion {
    pass: bool,
    detail: String,
}

impl Criterion {
    fn new() -> Self {
        Self {
            pass: true,
            detail: String::new(),
        }
    }

    fn check(&mut self, ok: bool, note: impl AsRef<str>) {
        if !self.detail.is_empty() {
            self.detail.push_str("; ");
        }
        if !ok {
            self.detail.push_str("MISS ");
        }
        self.detail.push_str(note.as_ref());
        self.pass &= ok;
    }

    fn near(&mut self, label: &str, got: f64, want: f64, tol: f64) {
        self.check((got - want).abs() <= tol, format!("{label} {got:.3} (want {want} ± {tol})"));
    }

    fn done(self, id: &'static str, title: &'static str) -> Outcome {
        Outcome {
            id,
            title,
            pass: self.pass,
            detail: self.detail,
        }
    }
}

fn study(scenarios: &[u32], methods: &[Method], prior: PriorConfig) -> StudyReport {
    let mut config = StudyConfig::new(
        scenarios.iter().map(|&s| ScenarioRef::Builtin(s)).collect(),
        vec![N],
        REPS,
        methods.to_vec(),
        SEED,
    );
    config.prior = prior;
    run_study(&config).expect("study runs")
}

fn delta(report: &StudyReport, scenario: u32, method: Method) -> [f64; 2] {
    report
        .cell(&format!("scenario{scenario}"), N, method)
        .and_then(|c| c.delta_mean)
        .expect("delta cell")
        .as_array()
}

fn rmse(report: &StudyReport, scenario: u32, method: Method) -> f64 {
    report.cell(&format!("scenario{scenario}"), N, method).unwrap().mean_rmse
}

fn abs_bias(report: &StudyReport, scenario: u32, method: Method) -> f64 {
    report.cell(&format!("scenario{scenario}"), N, method).unwrap().mean_abs_bias
}

fn c1(main: &StudyReport) -> Outcome {
    let mut c = Criterion::new();
    for (method, want, tol) in [
        (Method::BOM, [0.76, 0.81], 0.03),
        (Method::FET, [0.64, 0.59], 0.04),
        (Method::PLC, [0.32, 0.23], 0.02),
        (Method::MPP, [0.51, 0.54], 0.03),
        (Method::MLC, [0.65, 0.75], 0.06),
    ] {
        let got = delta(main, 1, method);
        c.near(&format!("{method} d1"), got[0], want[0], tol);
        c.near(&format!("{method} d2"), got[1], want[1], tol);
    }
    c.done("C1", "delta means under full compatibility (scenario 1)")
}

fn c2(main: &StudyReport, s2: &StudyReport) -> Outcome {
    let mut c = Criterion::new();
    let fet = delta(main, 4, Method::FET);
    c.near("FET d1 (s4)", fet[0], 0.28, 0.04);
    c.near("FET d2 (s4)", fet[1], 0.40, 0.04);
    c.near("MLC d1 (s4)", delta(main, 4, Method::MLC)[0], 0.08, 0.05);
    for method in [Method::FET, Method::BOM] {
        let one = delta(main, 1, method);
        let two = delta(s2, 2, method);
        c.check(two[0] < one[0], format!("{method} d1 s2 {:.3} < s1 {:.3}", two[0], one[0]));
        c.check(
            (two[1] - one[1]).abs() <= 0.03,
            format!("{method} d2 s2 {:.3} vs s1 {:.3}", two[1], one[1]),
        );
    }
    c.done("C2", "delta response to incompatible stage-2 data")
}

fn c3(low: &StudyReport, high: &StudyReport) -> Outcome {
    let mut c = Criterion::new();
    let d = delta(low, 1, Method::MPP);
    c.near("E(delta)=0.2 d1", d[0], 0.23, 0.03);
    c.near("E(delta)=0.2 d2", d[1], 0.31, 0.03);
    let d = delta(high, 1, Method::MPP);
    c.near("E(delta)=0.8 d1", d[0], 0.80, 0.03);
    c.near("E(delta)=0.8 d2", d[1], 0.81, 0.03);
    c.done("C3", "MPP sensitivity to the delta prior (scenario 1)")
}

fn c4(main: &StudyReport) -> Outcome {
    let mut c = Criterion::new();
    let bjsm_bias = abs_bias(main, 4, Method::BJSM);
    let bjsm_rmse = rmse(main, 4, Method::BJSM);
    for m in Method::ALL.into_iter().filter(|&m| m != Method::BJSM) {
        let (b, r) = (abs_bias(main, 4, m), rmse(main, 4, m));
        c.check(bjsm_bias < b, format!("s4 |bias| BJSM {bjsm_bias:.4} < {m} {b:.4}"));
        c.check(bjsm_rmse < r, format!("s4 rmse BJSM {bjsm_rmse:.4} < {m} {r:.4}"));
    }
    for s in [5, 7] {
        let base = rmse(main, s, Method::BJSM);
        for m in [Method::BOM, Method::FET, Method::PLC, Method::MPP] {
            let r = rmse(main, s, m);
            c.check(r < base, format!("s{s} rmse {m} {r:.4} < BJSM {base:.4}"));
        }
    }
    let bom = rmse(main, 6, Method::BOM);
    for m in [Method::PLC, Method::MLC, Method::MPP, Method::FET] {
        let r = rmse(main, 6, m);
        c.check(bom <= r, format!("s6 rmse BOM {bom:.4} <= {m} {r:.4}"));
    }
    c.done("C4", "orderings of |bias| and rmse across methods")
}

fn c5() -> Outcome {
    let mut c = Criterion::new();

    let mut worst: f64 = 0.0;
    let mut tables = 0;
    for n1 in 0..=30u32 {
        for n2 in 0..=30u32 {
            if n1 + n2 == 0 {
                continue;
            }
            for z1 in 0..=n1 {
                for z2 in 0..=n2 {
                    let got = fisher_exact_two_sided(n1, z1, n2, z2).unwrap();
                    worst = worst.max((got - fisher_oracle(n1, z1, n2, z2)).abs());
                    tables += 1;
                }
            }
        }
    }
    c.check(worst < 1e-12, format!("FET {tables} tables, max diff {worst:.1e}"));

    let mut rng = RngStream::new(SEED, 5).start();
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let mut shape = || 0.5 + 49.5 * rng.uniform();
        let (a1, b1, a2, b2) = (shape(), shape(), shape(), shape());
        let closed = bom_overlap(BetaParams::new(a1, b1).unwrap(), BetaParams::new(a2, b2).unwrap());
        worst = worst.max((closed - bom_quadrature(a1, b1, a2, b2)).abs());
    }
    c.check(worst < 1e-8, format!("BOM 100 pairs, max diff {worst:.1e}"));

    let prior = PriorConfig::default();
    let fixtures = fixtures();
    let (mut plc_ok, mut mlc_ok) = (0, 0);
    for (counts, sub) in &fixtures {
        let flat = flatten(counts, sub);
        let got = delta_plc(sub, counts, &prior).unwrap().delta.as_array();
        let (grid, best) = plc_exhaustive(&flat, &prior);
        if flat.plc_objective(got, &prior) <= best + 1e-9
            && (got[0] - grid[0]).abs() <= 0.0015
            && (got[1] - grid[1]).abs() <= 0.0015
        {
            plc_ok += 1;
        }
        let got = delta_mlc(sub, counts, &prior).unwrap().delta.as_array();
        let (_, best) = mlc_exhaustive(&flat, &prior);
        if flat.mlc_objective(got, &prior) <= best + 1e-9 {
            mlc_ok += 1;
        }
    }
    c.check(plc_ok == fixtures.len(), format!("PLC lattice {plc_ok}/{}", fixtures.len()));
    c.check(mlc_ok == fixtures.len(), format!("MLC lattice {mlc_ok}/{}", fixtures.len()));

    let mut worst: f64 = 0.0;
    for (i, (counts, sub)) in fixtures.iter().enumerate().filter(|(i, _)| [0, 1, 2, 5, 6].contains(i)) {
        let (pi, d) = mpp_grid_means(&flatten(counts, sub), &prior, 300);
        let mcmc = McmcConfig {
            kept_samples: 40_000,
            seed: RngStream::new(SEED, 100 + i as u64),
            ..Default::default()
        };
        let fit = mpp_fit(counts, sub, &prior, &mcmc).unwrap();
        for k in 0..3 {
            worst = worst.max((fit.pi_hat[k] - pi[k]).abs());
        }
        let got = fit.delta_hat.unwrap().as_array();
        worst = worst.max((got[0] - d[0]).abs()).max((got[1] - d[1]).abs());
    }
    c.check(worst < 0.01, format!("MPP grid posterior, 5 fixtures, max diff {worst:.4}"));
    c.done("C5", "oracle equivalence")
}

fn c6() -> Outcome {
    let mut c = Criterion::new();
    let prior = PriorConfig::default();
    let sub = SubgroupCounts::empty();
    // [MPP, BJSM vs conjugate, BJSM vs its own truncated-support posterior]
    let mut worst: [f64; 3] = [0.0; 3];
    let mut exact = true;
    for (i, (n1, z1)) in [([30, 30, 30], [6, 9, 12]), ([10, 10, 10], [0, 5, 10]), ([3, 3, 3], [1, 0, 2])]
        .into_iter()
        .enumerate()
    {
        let counts = TrialCounts::stage1_only(n1, z1).unwrap();
        let want = conjugate_means(&counts, &prior);
        let truncated = bjsm_stage1_only_means(&counts, &prior, 200);
        let fixed = fit_fixed_delta(&counts, &sub, DeltaPair::ZERO, &prior).unwrap();
        exact &= fixed.pi_hat == want;
        let mcmc = McmcConfig::default().with_seed(RngStream::new(SEED, 200 + i as u64));
        let mpp = mpp_fit(&counts, &sub, &prior, &mcmc).unwrap();
        let bjsm = bjsm_fit(&counts, &prior, &mcmc).unwrap();
        for k in 0..3 {
            worst[0] = worst[0].max((mpp.pi_hat[k] - want[k]).abs());
            worst[1] = worst[1].max((bjsm.pi_hat[k] - want[k]).abs());
            worst[2] = worst[2].max((bjsm.pi_hat[k] - truncated[k]).abs());
        }
    }
    c.check(exact, "FIXED0 equals the conjugate posterior exactly");
    c.check(worst[0] < 0.01, format!("MPP max diff {:.4}", worst[0]));
    c.check(worst[1] < 0.01, format!("BJSM max diff {:.4}", worst[1]));
    // not part of the criterion; shows where the BJSM gap comes from
    let note = format!("(BJSM vs truncated-support posterior {:.4})", worst[2]);
    c.detail.push_str("; ");
    c.detail.push_str(&note);
    c.done("C6", "degenerate input (no stage-2 data)")
}

fn c7() -> Outcome {
    let mut c = Criterion::new();
    let mut config = StudyConfig::new(
        vec![ScenarioRef::Builtin(1), ScenarioRef::Builtin(5)],
        vec![30, 90],
        40,
        Method::ALL.to_vec(),
        SEED,
    );
    config.mcmc.burn_in = 500;
    config.mcmc.kept_samples = 2000;
    let names = ["delta_summary.csv", "estimation_summary.csv", "delta_draws.csv"];
    let mut outputs = Vec::new();
    for threads in [1, 4, 8] {
        config.parallelism = threads;
        let dir = tempfile::tempdir().unwrap();
        write_reports(&run_study(&config).unwrap(), dir.path()).unwrap();
        outputs.push(names.map(|n| fs::read(dir.path().join(n)).unwrap()));
    }
    for (i, name) in names.iter().enumerate() {
        let same = outputs.iter().all(|o| o[i] == outputs[0][i]);
        c.check(same, format!("{name} identical at 1/4/8 threads"));
    }
    c.done("C7", "determinism across thread counts")
}

fn main() -> ExitCode {
    let started = Instant::now();
    let all = Method::ALL;
    let main_study = study(&[1, 4, 5, 6, 7], &all, PriorConfig::default());
    let s2_study = study(&[2], &[Method::FET, Method::BOM], PriorConfig::default());
    let low = study(&[1], &[Method::MPP], PriorConfig::default().with_delta_prior_mean(0.2));
    let high = study(&[1], &[Method::MPP], PriorConfig::default().with_delta_prior_mean(0.8));

    let outcomes = [
        c1(&main_study),
        c2(&main_study, &s2_study),
        c3(&low, &high),
        c4(&main_study),
        c5(),
        c6(),
        c7(),
    ];

    let mut out = String::new();
    writeln!(out, "\nacceptance ({REPS} replications, N = {N}, seed {SEED})").unwrap();
    for o in &outcomes {
        let status = if o.pass { "PASS" } else { "FAIL" };
        writeln!(out, "{status} {} {}: {}", o.id, o.title, o.detail).unwrap();
    }
    let failed = outcomes.iter().filter(|o| !o.pass).count();
    writeln!(
        out,
        "{} passed, {failed} failed in {:.0}s",
        outcomes.len() - failed,
        started.elapsed().as_secs_f64()
    )
    .unwrap();
    print!("{out}");
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
