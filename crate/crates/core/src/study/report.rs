//! Aggregation of replications and the CSV/JSON report files.
//!
//! Files written by [`write_reports`]:
//!
//! - `delta_summary.csv`: scenario, N, method, delta1_mean, delta1_sd,
//!   delta2_mean, delta2_sd (empty for BJSM)
//! - `estimation_summary.csv`: scenario, N, method, treatment, bias, rmse;
//!   the row with treatment `avg` holds mean |bias| and mean rmse
//! - `delta_draws.csv`: scenario, N, method, replication, delta1, delta2
//! - `study_meta.json`: config, seed, crate version, wall time and per-cell
//!   replication counts
//!
//! Reals are written in shortest round-trip form, so reading the files back
//! reproduces the report exactly.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Method, StudyConfig, StudyReport};
use crate::error::{Error, Result};
use crate::scenario::ScenarioSpec;
use crate::trial::TreatmentId;
use crate::weights::DeltaPair;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "SNSMART_OUT_DIR";

/// `$SNSMART_OUT_DIR`, or `snsmart-out` in the working directory.
pub fn default_out_dir() -> PathBuf {
    std::env::var_os(OUT_DIR_ENV).map_or_else(|| PathBuf::from("snsmart-out"), PathBuf::from)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreatmentError {
    pub bias: f64,
    pub rmse: f64,
}

/// Results of one method in one (scenario, N) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub scenario: String,
    pub n_total: u32,
    pub method: Method,
    /// Indexed by treatment A, B, C.
    pub treatments: [TreatmentError; 3],
    pub mean_abs_bias: f64,
    pub mean_rmse: f64,
    pub delta_mean: Option<DeltaPair>,
    /// Across-replication sample standard deviations.
    pub delta_sd: Option<[f64; 2]>,
    /// Per-replication δ, keyed by replication index.
    pub delta_draws: Vec<(u32, [f64; 2])>,
    pub replications: u32,
    pub excluded: u32,
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Folds per-replication estimates (in replication order) into a cell.
pub(super) fn aggregate_cell(
    spec: &ScenarioSpec,
    n_total: u32,
    method: Method,
    fits: impl Iterator<Item = (u32, ([f64; 3], Option<DeltaPair>))>,
    excluded: u32,
) -> CellReport {
    let mut err_sum = [0.0; 3];
    let mut sq_sum = [0.0; 3];
    let mut draws = Vec::new();
    let mut used = 0u32;
    for (r, (pi_hat, delta)) in fits {
        used += 1;
        for k in 0..3 {
            let e = pi_hat[k] - spec.stage1_rates[k];
            err_sum[k] += e;
            sq_sum[k] += e * e;
        }
        if let Some(d) = delta {
            draws.push((r, d.as_array()));
        }
    }
    let n = f64::from(used.max(1));
    let treatments = std::array::from_fn(|k| TreatmentError {
        bias: err_sum[k] / n,
        rmse: (sq_sum[k] / n).sqrt(),
    });
    let mean_abs_bias = treatments.iter().map(|t: &TreatmentError| t.bias.abs()).sum::<f64>() / 3.0;
    let mean_rmse = treatments.iter().map(|t| t.rmse).sum::<f64>() / 3.0;

    let (delta_mean, delta_sd) = if method.has_delta() && !draws.is_empty() {
        let d1: Vec<f64> = draws.iter().map(|(_, d)| d[0]).collect();
        let d2: Vec<f64> = draws.iter().map(|(_, d)| d[1]).collect();
        let (m1, s1) = mean_sd(&d1);
        let (m2, s2) = mean_sd(&d2);
        // means of values in [0, 1] stay in [0, 1] up to rounding
        let pair = DeltaPair::new(m1.clamp(0.0, 1.0), m2.clamp(0.0, 1.0)).ok();
        (pair, Some([s1, s2]))
    } else {
        (None, None)
    };

    CellReport {
        scenario: spec.name.clone(),
        n_total,
        method,
        treatments,
        mean_abs_bias,
        mean_rmse,
        delta_mean,
        delta_sd,
        delta_draws: if method.has_delta() { draws } else { Vec::new() },
        replications: used,
        excluded,
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct MetaCell {
    scenario: String,
    n_total: u32,
    method: Method,
    replications: u32,
    excluded: u32,
}

#[derive(Debug, Serialize, Deserialize)]
struct Meta {
    config: StudyConfig,
    master_seed: u64,
    versions: BTreeMap<String, String>,
    wall_time_secs: f64,
    cells: Vec<MetaCell>,
}

fn csv_writer(path: &Path) -> Result<csv::Writer<File>> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

fn finish(mut w: csv::Writer<File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

/// Writes the four report files into `out_dir`, creating it if needed.
pub fn write_reports(report: &StudyReport, out_dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let summary_path = out_dir.join("delta_summary.csv");
    let estimation_path = out_dir.join("estimation_summary.csv");
    let draws_path = out_dir.join("delta_draws.csv");
    let meta_path = out_dir.join("study_meta.json");

    let mut w = csv_writer(&summary_path)?;
    w.write_record(["scenario", "N", "method", "delta1_mean", "delta1_sd", "delta2_mean", "delta2_sd"])?;
    for c in &report.cells {
        let m = c.delta_mean.map(|d| d.as_array());
        w.write_record([
            c.scenario.clone(),
            c.n_total.to_string(),
            c.method.to_string(),
            opt(m.map(|d| d[0])),
            opt(c.delta_sd.map(|s| s[0])),
            opt(m.map(|d| d[1])),
            opt(c.delta_sd.map(|s| s[1])),
        ])?;
    }
    finish(w, &summary_path)?;

    let mut w = csv_writer(&estimation_path)?;
    w.write_record(["scenario", "N", "method", "treatment", "bias", "rmse"])?;
    for c in &report.cells {
        let rows = TreatmentId::ALL
            .iter()
            .map(|t| (t.to_string(), c.treatments[t.index()]))
            .chain(std::iter::once((
                "avg".to_string(),
                TreatmentError {
                    bias: c.mean_abs_bias,
                    rmse: c.mean_rmse,
                },
            )));
        for (label, e) in rows {
            w.write_record([
                c.scenario.clone(),
                c.n_total.to_string(),
                c.method.to_string(),
                label,
                e.bias.to_string(),
                e.rmse.to_string(),
            ])?;
        }
    }
    finish(w, &estimation_path)?;

    let mut w = csv_writer(&draws_path)?;
    w.write_record(["scenario", "N", "method", "replication", "delta1", "delta2"])?;
    for c in &report.cells {
        for (r, d) in &c.delta_draws {
            w.write_record([
                c.scenario.clone(),
                c.n_total.to_string(),
                c.method.to_string(),
                r.to_string(),
                d[0].to_string(),
                d[1].to_string(),
            ])?;
        }
    }
    finish(w, &draws_path)?;

    let meta = Meta {
        config: report.config.clone(),
        master_seed: report.config.master_seed,
        versions: BTreeMap::from([(
            env!("CARGO_PKG_NAME").to_string(),
            env!("CARGO_PKG_VERSION").to_string(),
        )]),
        wall_time_secs: report.wall_time_secs,
        cells: report
            .cells
            .iter()
            .map(|c| MetaCell {
                scenario: c.scenario.clone(),
                n_total: c.n_total,
                method: c.method,
                replications: c.replications,
                excluded: c.excluded,
            })
            .collect(),
    };
    let text = serde_json::to_string_pretty(&meta)?;
    fs::write(&meta_path, text + "\n").map_err(|e| Error::io(&meta_path, e))?;

    Ok(vec![summary_path, estimation_path, draws_path, meta_path])
}

type Key = (String, u32, Method);

fn csv_rows(path: &Path, header: &[&str]) -> Result<Vec<csv::StringRecord>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::Reader::from_reader(file);
    if reader.headers()?.iter().ne(header.iter().copied()) {
        return Err(Error::Config(format!("{}: unexpected header", path.display())));
    }
    Ok(reader.records().collect::<std::result::Result<_, _>>()?)
}

fn field<T: std::str::FromStr>(row: &csv::StringRecord, i: usize, path: &Path) -> Result<T> {
    row.get(i)
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| Error::Config(format!("{}: bad field {i} in {row:?}", path.display())))
}

fn opt_field(row: &csv::StringRecord, i: usize, path: &Path) -> Result<Option<f64>> {
    match row.get(i) {
        Some("") => Ok(None),
        _ => field(row, i, path).map(Some),
    }
}

fn key(row: &csv::StringRecord, path: &Path) -> Result<Key> {
    Ok((
        row.get(0).unwrap_or_default().to_string(),
        field(row, 1, path)?,
        field::<String>(row, 2, path)?.parse()?,
    ))
}

/// Reads a report directory written by [`write_reports`] back into memory.
pub fn read_reports(out_dir: &Path) -> Result<StudyReport> {
    let meta_path = out_dir.join("study_meta.json");
    let text = fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
    let meta: Meta = serde_json::from_str(&text)?;

    let mut cells: Vec<CellReport> = meta
        .cells
        .iter()
        .map(|m| CellReport {
            scenario: m.scenario.clone(),
            n_total: m.n_total,
            method: m.method,
            treatments: [TreatmentError { bias: 0.0, rmse: 0.0 }; 3],
            mean_abs_bias: 0.0,
            mean_rmse: 0.0,
            delta_mean: None,
            delta_sd: None,
            delta_draws: Vec::new(),
            replications: m.replications,
            excluded: m.excluded,
        })
        .collect();
    let index: BTreeMap<Key, usize> = cells
        .iter()
        .enumerate()
        .map(|(i, c)| ((c.scenario.clone(), c.n_total, c.method), i))
        .collect();
    let lookup = |k: &Key, path: &Path| {
        index
            .get(k)
            .copied()
            .ok_or_else(|| Error::Config(format!("{}: cell {k:?} not in study_meta.json", path.display())))
    };

    let path = out_dir.join("delta_summary.csv");
    let header = ["scenario", "N", "method", "delta1_mean", "delta1_sd", "delta2_mean", "delta2_sd"];
    for row in csv_rows(&path, &header)? {
        let c = &mut cells[lookup(&key(&row, &path)?, &path)?];
        let vals = [3, 4, 5, 6].map(|i| opt_field(&row, i, &path));
        if let [Ok(Some(m1)), Ok(Some(s1)), Ok(Some(m2)), Ok(Some(s2))] = vals {
            c.delta_mean = Some(DeltaPair::new(m1, m2)?);
            c.delta_sd = Some([s1, s2]);
        }
    }

    let path = out_dir.join("estimation_summary.csv");
    for row in csv_rows(&path, &["scenario", "N", "method", "treatment", "bias", "rmse"])? {
        let c = &mut cells[lookup(&key(&row, &path)?, &path)?];
        let e = TreatmentError {
            bias: field(&row, 4, &path)?,
            rmse: field(&row, 5, &path)?,
        };
        match row.get(3).unwrap_or_default() {
            "avg" => {
                c.mean_abs_bias = e.bias;
                c.mean_rmse = e.rmse;
            }
            t => {
                let t: TreatmentId = t.parse().map_err(Error::Config)?;
                c.treatments[t.index()] = e;
            }
        }
    }

    let path = out_dir.join("delta_draws.csv");
    for row in csv_rows(&path, &["scenario", "N", "method", "replication", "delta1", "delta2"])? {
        let c = &mut cells[lookup(&key(&row, &path)?, &path)?];
        c.delta_draws
            .push((field(&row, 3, &path)?, [field(&row, 4, &path)?, field(&row, 5, &path)?]));
    }

    Ok(StudyReport {
        config: meta.config,
        cells,
        wall_time_secs: meta.wall_time_secs,
    })
}
