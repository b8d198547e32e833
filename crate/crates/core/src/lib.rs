//! Estimation of first-stage response rates in a small-n sequential,
//! multiple assignment, randomized trial (snSMART) with three treatments.
//!
//! Second-stage outcomes are split into two subgroups (stage-1 responders and
//! stage-1 non-responders) and borrowed through a power prior whose weights
//! are chosen by one of several strategies:
//!
//! - fixed weights,
//! - a penalized likelihood-type criterion (PLC),
//! - the marginal likelihood criterion (MLC),
//! - Bhattacharyya's overlap between stage-wise posteriors (BOM),
//! - averaged two-sided Fisher exact test p-values (FET),
//! - a modified power prior with random weights (MPP).
//!
//! A Bayesian joint stage model (BJSM) is provided as a baseline, together
//! with a scenario simulator and a Monte Carlo study harness.

pub mod error;
pub mod estimators;
pub mod numerics;
pub mod scenario;
pub mod study;
pub mod trial;
pub mod weights;

pub use error::{Error, Result};
pub use estimators::{
    bjsm_fit, fit_fixed_delta, fit_power_prior, mpp_fit, EstimateResult, McmcConfig,
    PosteriorSummary, Strategy,
};
pub use numerics::{BetaParams, RngStream};
pub use scenario::{builtin_scenario, simulate_participants, simulate_trial, ScenarioSpec};
pub use study::{run_study, write_reports, Method, StudyConfig, StudyReport};
pub use trial::{
    aggregate_counts, parse_participants, pool_subgroups, write_participants, ParticipantRecord,
    Stage2Counts, SubgroupCounts, TreatmentId, TrialCounts,
};
pub use weights::{DeltaPair, PriorConfig};
