//! Two-stage trial data: participant records, aggregated counts and the
//! subgroup view consumed by the power prior methods.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One of the three treatments of the trial, ordered `A < B < C`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TreatmentId {
    A,
    B,
    C,
}

impl TreatmentId {
    pub const ALL: [TreatmentId; 3] = [TreatmentId::A, TreatmentId::B, TreatmentId::C];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Self> {
        Self::ALL.get(index).copied()
    }

    /// The two treatments a stage-1 non-responder can be re-randomized to.
    pub fn alternatives(self) -> [TreatmentId; 2] {
        match self {
            TreatmentId::A => [TreatmentId::B, TreatmentId::C],
            TreatmentId::B => [TreatmentId::A, TreatmentId::C],
            TreatmentId::C => [TreatmentId::A, TreatmentId::B],
        }
    }

    pub fn as_char(self) -> char {
        match self {
            TreatmentId::A => 'A',
            TreatmentId::B => 'B',
            TreatmentId::C => 'C',
        }
    }
}

impl fmt::Display for TreatmentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_char())
    }
}

impl FromStr for TreatmentId {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim() {
            "A" => Ok(TreatmentId::A),
            "B" => Ok(TreatmentId::B),
            "C" => Ok(TreatmentId::C),
            other => Err(format!("unknown treatment {other:?} (expected A, B or C)")),
        }
    }
}

/// A single participant's path through both stages.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParticipantRecord {
    pub id: String,
    pub stage1_treatment: TreatmentId,
    pub stage1_response: bool,
    pub stage2_treatment: TreatmentId,
    pub stage2_response: bool,
}

impl ParticipantRecord {
    pub fn new(
        id: impl Into<String>,
        stage1_treatment: TreatmentId,
        stage1_response: bool,
        stage2_treatment: TreatmentId,
        stage2_response: bool,
    ) -> Result<Self> {
        let record = Self {
            id: id.into(),
            stage1_treatment,
            stage1_response,
            stage2_treatment,
            stage2_response,
        };
        record.validate()?;
        Ok(record)
    }

    /// Responders keep their treatment; non-responders must switch.
    pub fn validate(&self) -> Result<()> {
        let same = self.stage1_treatment == self.stage2_treatment;
        if self.stage1_response && !same {
            return Err(Error::Consistency {
                id: self.id.clone(),
                message: format!(
                    "stage-1 responder switched from {} to {}",
                    self.stage1_treatment, self.stage2_treatment
                ),
            });
        }
        if !self.stage1_response && same {
            return Err(Error::Consistency {
                id: self.id.clone(),
                message: format!(
                    "stage-1 non-responder kept treatment {}",
                    self.stage1_treatment
                ),
            });
        }
        Ok(())
    }
}

pub const PARTICIPANT_HEADER: [&str; 5] = [
    "id",
    "stage1_treatment",
    "stage1_response",
    "stage2_treatment",
    "stage2_response",
];

fn parse_flag(value: &str, row: u64, column: &str) -> Result<bool> {
    match value.trim() {
        "0" => Ok(false),
        "1" => Ok(true),
        other => Err(Error::Parse {
            row,
            message: format!("{column} must be 0 or 1, got {other:?}"),
        }),
    }
}

fn parse_treatment(value: &str, row: u64, column: &str) -> Result<TreatmentId> {
    value.parse().map_err(|e| Error::Parse {
        row,
        message: format!("{column}: {e}"),
    })
}

/// Reads participant records from CSV with the five-column header.
///
/// Row numbers in errors are 1-based file lines (the header is line 1).
pub fn parse_participants<R: Read>(source: R) -> Result<Vec<ParticipantRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(source);

    let header = reader.headers().map_err(|e| Error::Parse {
        row: 1,
        message: e.to_string(),
    })?;
    let found: Vec<&str> = header.iter().collect();
    if found != PARTICIPANT_HEADER {
        return Err(Error::Parse {
            row: 1,
            message: format!(
                "expected header {:?}, found {:?}",
                PARTICIPANT_HEADER.join(","),
                found.join(",")
            ),
        });
    }

    let mut records = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let fallback_line = i as u64 + 2;
        let row = row.map_err(|e| Error::Parse {
            row: e
                .position()
                .map(|p| p.line())
                .unwrap_or(fallback_line),
            message: e.to_string(),
        })?;
        let line = row.position().map(|p| p.line()).unwrap_or(fallback_line);
        if row.len() != PARTICIPANT_HEADER.len() {
            return Err(Error::Parse {
                row: line,
                message: format!("expected 5 fields, found {}", row.len()),
            });
        }
        let id = row[0].to_string();
        if id.is_empty() {
            return Err(Error::Parse {
                row: line,
                message: "empty participant id".into(),
            });
        }
        let record = ParticipantRecord {
            id,
            stage1_treatment: parse_treatment(&row[1], line, "stage1_treatment")?,
            stage1_response: parse_flag(&row[2], line, "stage1_response")?,
            stage2_treatment: parse_treatment(&row[3], line, "stage2_treatment")?,
            stage2_response: parse_flag(&row[4], line, "stage2_response")?,
        };
        record.validate()?;
        records.push(record);
    }
    Ok(records)
}

/// Writes records in the participant CSV format read by [`parse_participants`].
pub fn write_participants<W: Write>(records: &[ParticipantRecord], sink: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(sink);
    writer.write_record(PARTICIPANT_HEADER)?;
    for r in records {
        writer.write_record([
            r.id.as_str(),
            &r.stage1_treatment.to_string(),
            if r.stage1_response { "1" } else { "0" },
            &r.stage2_treatment.to_string(),
            if r.stage2_response { "1" } else { "0" },
        ])?;
    }
    writer.flush().map_err(|e| Error::io("<participant csv>", e))?;
    Ok(())
}

/// Stage-2 tallies. `m_non[s1][s2]` counts stage-1 non-responders to `s1`
/// who were given `s2` in stage 2 and `y_non[s1][s2]` how many of them
/// responded; diagonal entries are always zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Stage2Counts {
    pub y_resp: [u32; 3],
    pub m_non: [[u32; 3]; 3],
    pub y_non: [[u32; 3]; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
struct RawTrialCounts {
    n1: [u32; 3],
    z1: [u32; 3],
    #[serde(flatten, default, skip_serializing_if = "Option::is_none")]
    stage2: Option<Stage2Counts>,
}

/// Aggregated counts of a full two-stage trial.
///
/// `stage2` is `None` only for a trial whose second stage has not been
/// observed at all; when present it must account for every participant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawTrialCounts", into = "RawTrialCounts")]
pub struct TrialCounts {
    n1: [u32; 3],
    z1: [u32; 3],
    stage2: Option<Stage2Counts>,
}

impl TryFrom<RawTrialCounts> for TrialCounts {
    type Error = Error;

    fn try_from(raw: RawTrialCounts) -> Result<Self> {
        TrialCounts::new(raw.n1, raw.z1, raw.stage2)
    }
}

impl From<TrialCounts> for RawTrialCounts {
    fn from(c: TrialCounts) -> Self {
        RawTrialCounts {
            n1: c.n1,
            z1: c.z1,
            stage2: c.stage2,
        }
    }
}

impl TrialCounts {
    pub fn new(n1: [u32; 3], z1: [u32; 3], stage2: Option<Stage2Counts>) -> Result<Self> {
        for k in 0..3 {
            if z1[k] > n1[k] {
                return Err(Error::InvalidCounts(format!(
                    "z1[{}]={} exceeds n1={}",
                    TreatmentId::ALL[k],
                    z1[k],
                    n1[k]
                )));
            }
        }
        if let Some(s2) = &stage2 {
            for k in 0..3 {
                let t = TreatmentId::ALL[k];
                if s2.y_resp[k] > z1[k] {
                    return Err(Error::InvalidCounts(format!(
                        "y_resp[{t}]={} exceeds z1={}",
                        s2.y_resp[k], z1[k]
                    )));
                }
                if s2.m_non[k][k] != 0 || s2.y_non[k][k] != 0 {
                    return Err(Error::InvalidCounts(format!(
                        "non-responders to {t} cannot repeat {t}"
                    )));
                }
                let mut moved = 0u32;
                for j in 0..3 {
                    if s2.y_non[k][j] > s2.m_non[k][j] {
                        return Err(Error::InvalidCounts(format!(
                            "y_non[{t}][{}]={} exceeds m_non={}",
                            TreatmentId::ALL[j],
                            s2.y_non[k][j],
                            s2.m_non[k][j]
                        )));
                    }
                    moved += s2.m_non[k][j];
                }
                if moved != n1[k] - z1[k] {
                    return Err(Error::InvalidCounts(format!(
                        "{moved} non-responders to {t} re-randomized but {} did not respond",
                        n1[k] - z1[k]
                    )));
                }
            }
        }
        Ok(Self { n1, z1, stage2 })
    }

    /// Counts with no second-stage observations.
    pub fn stage1_only(n1: [u32; 3], z1: [u32; 3]) -> Result<Self> {
        Self::new(n1, z1, None)
    }

    pub fn zero() -> Self {
        Self {
            n1: [0; 3],
            z1: [0; 3],
            stage2: Some(Stage2Counts::default()),
        }
    }

    pub fn n1(&self) -> [u32; 3] {
        self.n1
    }

    pub fn z1(&self) -> [u32; 3] {
        self.z1
    }

    pub fn stage2(&self) -> Option<&Stage2Counts> {
        self.stage2.as_ref()
    }

    pub fn total(&self) -> u32 {
        self.n1.iter().sum()
    }
}

/// Tallies records into [`TrialCounts`]; each record is re-validated.
pub fn aggregate_counts(records: &[ParticipantRecord]) -> Result<TrialCounts> {
    let mut n1 = [0u32; 3];
    let mut z1 = [0u32; 3];
    let mut s2 = Stage2Counts::default();
    for r in records {
        r.validate()?;
        let k1 = r.stage1_treatment.index();
        let k2 = r.stage2_treatment.index();
        n1[k1] += 1;
        if r.stage1_response {
            z1[k1] += 1;
            s2.y_resp[k1] += u32::from(r.stage2_response);
        } else {
            s2.m_non[k1][k2] += 1;
            s2.y_non[k1][k2] += u32::from(r.stage2_response);
        }
    }
    TrialCounts::new(n1, z1, Some(s2))
}

/// Stage-2 counts by treatment `k` and subgroup `j`: index 0 holds stage-1
/// responders (who stayed on `k`), index 1 stage-1 non-responders who
/// switched to `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SubgroupCounts {
    n2: [[u32; 2]; 3],
    z2: [[u32; 2]; 3],
}

impl SubgroupCounts {
    pub fn new(n2: [[u32; 2]; 3], z2: [[u32; 2]; 3]) -> Result<Self> {
        for k in 0..3 {
            for j in 0..2 {
                if z2[k][j] > n2[k][j] {
                    return Err(Error::InvalidCounts(format!(
                        "z2[{}][{}]={} exceeds n2={}",
                        TreatmentId::ALL[k],
                        j + 1,
                        z2[k][j],
                        n2[k][j]
                    )));
                }
            }
        }
        Ok(Self { n2, z2 })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn n2(&self) -> [[u32; 2]; 3] {
        self.n2
    }

    pub fn z2(&self) -> [[u32; 2]; 3] {
        self.z2
    }

    /// Total participants in subgroup `j` (0 or 1) across treatments.
    pub fn subgroup_size(&self, j: usize) -> u32 {
        self.n2.iter().map(|row| row[j]).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.n2.iter().flatten().all(|&n| n == 0)
    }
}

/// Splits stage-2 data into the responder and non-responder subgroups.
pub fn pool_subgroups(counts: &TrialCounts) -> SubgroupCounts {
    let Some(s2) = counts.stage2() else {
        return SubgroupCounts::empty();
    };
    let mut n2 = [[0u32; 2]; 3];
    let mut z2 = [[0u32; 2]; 3];
    for k in 0..3 {
        n2[k][0] = counts.z1[k];
        z2[k][0] = s2.y_resp[k];
        for from in 0..3 {
            if from != k {
                n2[k][1] += s2.m_non[from][k];
                z2[k][1] += s2.y_non[from][k];
            }
        }
    }
    SubgroupCounts { n2, z2 }
}
