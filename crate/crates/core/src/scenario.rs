//! True response-rate configurations and synthetic trial generation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::rng::{sample_bernoulli, StreamRng};
use crate::numerics::RngStream;
use crate::trial::{aggregate_counts, ParticipantRecord, TreatmentId, TrialCounts};

/// True response rates of a simulated trial.
///
/// `stage2_rates[s2][s1]` is the stage-2 response rate on `s2` for
/// participants who started on `s1`; the diagonal applies to stage-1
/// responders, off-diagonal entries to non-responders.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub name: String,
    pub stage1_rates: [f64; 3],
    pub stage2_rates: [[f64; 3]; 3],
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<()> {
        let all = self
            .stage1_rates
            .iter()
            .chain(self.stage2_rates.iter().flatten());
        for &p in all {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!(
                    "scenario {:?}: rate {p} is not in [0, 1]",
                    self.name
                )));
            }
        }
        Ok(())
    }

    /// Stage-2 response rate of a participant who started on `s1` and was
    /// given `s2`.
    pub fn stage2_rate(&self, s1: TreatmentId, s2: TreatmentId) -> f64 {
        self.stage2_rates[s2.index()][s1.index()]
    }
}

/// One of the seven reference configurations.
pub fn builtin_scenario(id: u32) -> Result<ScenarioSpec> {
    let stage2_rates = match id {
        1 | 7 => [[0.2, 0.2, 0.2], [0.3, 0.3, 0.3], [0.4, 0.4, 0.4]],
        2 => [[0.4, 0.2, 0.2], [0.3, 0.6, 0.3], [0.4, 0.4, 0.8]],
        3 => [[0.2, 0.1, 0.1], [0.15, 0.3, 0.15], [0.2, 0.2, 0.4]],
        4 => [[0.4, 0.3, 0.3], [0.45, 0.6, 0.45], [0.6, 0.6, 0.8]],
        5 => [[0.6, 0.4, 0.4], [0.6, 0.6, 0.15], [0.2, 0.2, 0.6]],
        6 => [[0.3; 3]; 3],
        _ => return Err(Error::Config(format!("no built-in scenario {id} (expected 1 to 7)"))),
    };
    let stage1_rates = if id <= 5 { [0.2, 0.3, 0.4] } else { [0.3; 3] };
    Ok(ScenarioSpec {
        name: format!("scenario{id}"),
        stage1_rates,
        stage2_rates,
    })
}

fn check_size(n_total: u32) -> Result<u32> {
    if n_total == 0 || n_total % 3 != 0 {
        return Err(Error::Config(format!(
            "total sample size must be a positive multiple of 3, got {n_total}"
        )));
    }
    Ok(n_total / 3)
}

fn simulate_into(
    spec: &ScenarioSpec,
    per_arm: u32,
    rng: &mut StreamRng,
    mut emit: impl FnMut(TreatmentId, bool, TreatmentId, bool),
) -> Result<()> {
    for arm in TreatmentId::ALL {
        for _ in 0..per_arm {
            let responded = sample_bernoulli(spec.stage1_rates[arm.index()], rng)?;
            let next = if responded {
                arm
            } else {
                let [first, second] = arm.alternatives();
                if rng.uniform() < 0.5 {
                    first
                } else {
                    second
                }
            };
            let responded2 = sample_bernoulli(spec.stage2_rate(arm, next), rng)?;
            emit(arm, responded, next, responded2);
        }
    }
    Ok(())
}

/// Participant-level data: `n_total / 3` participants per stage-1 arm,
/// listed arm by arm.
pub fn simulate_participants(
    spec: &ScenarioSpec,
    n_total: u32,
    stream: RngStream,
) -> Result<Vec<ParticipantRecord>> {
    spec.validate()?;
    let per_arm = check_size(n_total)?;
    let mut rng = stream.start();
    let mut records = Vec::with_capacity(n_total as usize);
    simulate_into(spec, per_arm, &mut rng, |s1, r1, s2, r2| {
        records.push(ParticipantRecord {
            id: format!("{}", records.len() + 1),
            stage1_treatment: s1,
            stage1_response: r1,
            stage2_treatment: s2,
            stage2_response: r2,
        });
    })?;
    Ok(records)
}

/// Aggregated counts of one simulated trial. Uses the same draws as
/// [`simulate_participants`] for the same stream.
pub fn simulate_trial(spec: &ScenarioSpec, n_total: u32, stream: RngStream) -> Result<TrialCounts> {
    aggregate_counts(&simulate_participants(spec, n_total, stream)?)
}
