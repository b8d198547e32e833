//! Monte Carlo studies over scenario × sample size × method grids.
//!
//! Replication `r` of every (scenario, N) cell simulates its trial from
//! `RngStream::new(master_seed, r)`, and every method is fitted to that same
//! trial. Sampler seeds are derived from the data stream and the cell label,
//! so results do not depend on how replications are scheduled.

mod report;

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{bjsm_fit, fit_power_prior, mpp_fit, EstimateResult, McmcConfig, Strategy};
use crate::numerics::rng::label_tag;
use crate::numerics::RngStream;
use crate::scenario::{builtin_scenario, simulate_trial, ScenarioSpec};
use crate::trial::pool_subgroups;
use crate::weights::{DeltaPair, PriorConfig};

pub use report::{
    default_out_dir, read_reports, write_reports, CellReport, TreatmentError, OUT_DIR_ENV,
};

/// Current version of the [`StudyConfig`] JSON layout.
pub const SCHEMA_VERSION: u32 = 1;

/// Estimation methods available to a study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Method {
    FIXED0,
    FIXED1,
    PLC,
    MLC,
    MPP,
    BOM,
    FET,
    BJSM,
}

impl Method {
    pub const ALL: [Method; 8] = [
        Method::FIXED0,
        Method::FIXED1,
        Method::PLC,
        Method::MLC,
        Method::MPP,
        Method::BOM,
        Method::FET,
        Method::BJSM,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::FIXED0 => "FIXED0",
            Method::FIXED1 => "FIXED1",
            Method::PLC => "PLC",
            Method::MLC => "MLC",
            Method::MPP => "MPP",
            Method::BOM => "BOM",
            Method::FET => "FET",
            Method::BJSM => "BJSM",
        }
    }

    /// Whether the method borrows through a power prior and so reports δ.
    pub fn has_delta(self) -> bool {
        self != Method::BJSM
    }

    fn fit(
        self,
        counts: &crate::trial::TrialCounts,
        prior: &PriorConfig,
        mcmc: &McmcConfig,
    ) -> Result<EstimateResult> {
        let sub = pool_subgroups(counts);
        let strategy = match self {
            Method::FIXED0 => Strategy::Fixed(DeltaPair::ZERO),
            Method::FIXED1 => Strategy::Fixed(DeltaPair::ONE),
            Method::PLC => Strategy::Plc,
            Method::MLC => Strategy::Mlc,
            Method::BOM => Strategy::Bom,
            Method::FET => Strategy::Fet,
            Method::MPP => return mpp_fit(counts, &sub, prior, mcmc),
            Method::BJSM => return bjsm_fit(counts, prior, mcmc),
        };
        fit_power_prior(counts, &sub, prior, strategy)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let upper = s.trim().to_ascii_uppercase();
        Method::ALL
            .into_iter()
            .find(|m| m.name() == upper)
            .ok_or_else(|| Error::Config(format!("unknown method {s:?}")))
    }
}

/// A scenario given either as a built-in id or in full.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScenarioRef {
    Builtin(u32),
    Spec(ScenarioSpec),
}

impl ScenarioRef {
    pub fn resolve(&self) -> Result<ScenarioSpec> {
        match self {
            ScenarioRef::Builtin(id) => builtin_scenario(*id),
            ScenarioRef::Spec(spec) => {
                spec.validate()?;
                Ok(spec.clone())
            }
        }
    }
}

fn default_schema_version() -> u32 {
    SCHEMA_VERSION
}

fn default_parallelism() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

/// A study grid. The `seed` inside `mcmc` is ignored: sampler streams are
/// derived from `master_seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    #[serde(default = "default_schema_version")]
    pub schema_version: u32,
    pub scenarios: Vec<ScenarioRef>,
    pub n_totals: Vec<u32>,
    pub replications: u32,
    pub methods: Vec<Method>,
    #[serde(default)]
    pub prior: PriorConfig,
    #[serde(default)]
    pub mcmc: McmcConfig,
    pub master_seed: u64,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
}

impl StudyConfig {
    /// A config with default prior, sampler settings and parallelism.
    pub fn new(
        scenarios: Vec<ScenarioRef>,
        n_totals: Vec<u32>,
        replications: u32,
        methods: Vec<Method>,
        master_seed: u64,
    ) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            scenarios,
            n_totals,
            replications,
            methods,
            prior: PriorConfig::default(),
            mcmc: McmcConfig::default(),
            master_seed,
            parallelism: default_parallelism(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.scenarios.is_empty() || self.n_totals.is_empty() || self.methods.is_empty() {
            return Err(Error::Config("scenarios, n_totals and methods must be non-empty".into()));
        }
        if self.replications == 0 {
            return Err(Error::Config("replications must be at least 1".into()));
        }
        if self.parallelism == 0 {
            return Err(Error::Config("parallelism must be at least 1".into()));
        }
        for &n in &self.n_totals {
            if n == 0 || n % 3 != 0 {
                return Err(Error::Config(format!("n_total {n} is not a positive multiple of 3")));
            }
        }
        let mut seen = self.methods.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.methods.len() {
            return Err(Error::Config("methods contain duplicates".into()));
        }
        for s in &self.scenarios {
            s.resolve()?;
        }
        self.prior.validate()?;
        self.mcmc.validate()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }
}

/// Aggregated results of a study; cells are ordered by scenario, then N,
/// then method, following the config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub config: StudyConfig,
    pub cells: Vec<CellReport>,
    pub wall_time_secs: f64,
}

impl StudyReport {
    pub fn cell(&self, scenario: &str, n_total: u32, method: Method) -> Option<&CellReport> {
        self.cells
            .iter()
            .find(|c| c.scenario == scenario && c.n_total == n_total && c.method == method)
    }
}

struct Replication {
    // one entry per method, or the first error
    fits: std::result::Result<Vec<([f64; 3], Option<DeltaPair>)>, String>,
}

fn sampler_stream(data: RngStream, scenario: &str, n_total: u32, method: Method) -> RngStream {
    data.derive(label_tag(&format!("{scenario}/{n_total}/{method}")))
}

fn run_replication(
    spec: &ScenarioSpec,
    n_total: u32,
    r: u32,
    config: &StudyConfig,
) -> Replication {
    let data = RngStream::new(config.master_seed, u64::from(r));
    let fits = simulate_trial(spec, n_total, data).and_then(|counts| {
        config
            .methods
            .iter()
            .map(|&m| {
                let mcmc = config.mcmc.with_seed(sampler_stream(data, &spec.name, n_total, m));
                m.fit(&counts, &config.prior, &mcmc).map(|e| (e.pi_hat, e.delta_hat))
            })
            .collect::<Result<Vec<_>>>()
    });
    Replication {
        fits: fits.map_err(|e| e.to_string()),
    }
}

/// Runs every (scenario, N) cell for all replications on a pool of
/// `parallelism` threads.
pub fn run_study(config: &StudyConfig) -> Result<StudyReport> {
    config.validate()?;
    let started = Instant::now();
    let specs = config
        .scenarios
        .iter()
        .map(ScenarioRef::resolve)
        .collect::<Result<Vec<_>>>()?;
    let units: Vec<(usize, u32, u32)> = specs
        .iter()
        .enumerate()
        .flat_map(|(i, _)| {
            config
                .n_totals
                .iter()
                .flat_map(move |&n| (0..config.replications).map(move |r| (i, n, r)))
        })
        .collect();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.parallelism)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let results: Vec<Replication> = pool.install(|| {
        units
            .par_iter()
            .map(|&(i, n, r)| run_replication(&specs[i], n, r, config))
            .collect()
    });

    let reps = config.replications as usize;
    let mut cells = Vec::new();
    for (&(i, n, _), chunk) in units.iter().step_by(reps).zip(results.chunks(reps)) {
        let spec = &specs[i];
        let failures: Vec<&String> = chunk.iter().filter_map(|r| r.fits.as_ref().err()).collect();
        if failures.len() as f64 > 0.01 * reps as f64 {
            return Err(Error::Study(format!(
                "{} at N = {n}: {} of {reps} replications failed; first error: {}",
                spec.name,
                failures.len(),
                failures[0]
            )));
        }
        for (mi, &method) in config.methods.iter().enumerate() {
            let fits = chunk
                .iter()
                .enumerate()
                .filter_map(|(r, rep)| rep.fits.as_ref().ok().map(|f| (r as u32, f[mi])));
            cells.push(report::aggregate_cell(
                spec,
                n,
                method,
                fits,
                failures.len() as u32,
            ));
        }
    }

    Ok(StudyReport {
        config: config.clone(),
        cells,
        wall_time_secs: started.elapsed().as_secs_f64(),
    })
}
