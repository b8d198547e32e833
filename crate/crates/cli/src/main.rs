//! `snsmart`: analyze snSMART data, simulate trials and run Monte Carlo studies.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 invalid input
//! data, 3 any other failure.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::{Map, Value};
use snsmart_core::study::default_out_dir;
use snsmart_core::{
    aggregate_counts, bjsm_fit, builtin_scenario, fit_power_prior, mpp_fit, parse_participants,
    pool_subgroups, run_study, simulate_participants, write_participants, write_reports, Error,
    EstimateResult, McmcConfig, PriorConfig, RngStream, ScenarioSpec, Strategy, StudyConfig,
};

#[derive(Parser)]
#[command(name = "snsmart", version, about = "Power prior estimation for small-n SMART designs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate stage-1 response rates from a participant CSV
    Analyze {
        /// Participant CSV (id,stage1_treatment,stage1_response,stage2_treatment,stage2_response)
        #[arg(long)]
        data: PathBuf,
        /// PLC, MLC, BOM, FET, MPP, BJSM, FIXED0, FIXED1 or FIXED(d1,d2)
        #[arg(long, required_unless_present = "delta")]
        method: Option<String>,
        /// Fixed power parameters, shorthand for --method "FIXED(d1,d2)"
        #[arg(long, value_name = "D1,D2", conflicts_with = "method")]
        delta: Option<String>,
        /// Prior settings, e.g. a_pi=1,b_pi=1,a_delta=2,b_delta=2
        #[arg(long, value_name = "K=V,...")]
        prior: Option<String>,
        /// Sampler settings, e.g. burn_in=1000,kept_samples=5000,seed=7
        #[arg(long, value_name = "K=V,...")]
        mcmc: Option<String>,
    },
    /// Simulate one trial and write participant-level CSV
    Simulate {
        /// Built-in scenario id (1-7) or a scenario JSON file
        #[arg(long)]
        scenario: String,
        /// Total sample size, a multiple of 3
        #[arg(long)]
        n: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output file; standard output if omitted
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a Monte Carlo study described by a JSON config
    Study {
        #[arg(long)]
        config: PathBuf,
        /// Output directory [default: $SNSMART_OUT_DIR or ./snsmart-out]
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads; overrides the config's parallelism
        #[arg(long)]
        threads: Option<usize>,
    },
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

type CliResult<T> = Result<T, Failure>;

fn io_failure(path: &Path, e: io::Error) -> Failure {
    Failure::Lib(Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

/// Turns `k=v,k=v` into a JSON object, reading values as numbers.
fn key_values(text: &str) -> CliResult<Map<String, Value>> {
    let mut map = Map::new();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| Failure::Usage(format!("expected key=value, got {part:?}")))?;
        let value = if let Ok(i) = v.trim().parse::<u64>() {
            Value::from(i)
        } else if let Ok(x) = v.trim().parse::<f64>() {
            Value::from(x)
        } else {
            return Err(Failure::Usage(format!("value of {k:?} is not a number: {v:?}")));
        };
        map.insert(k.trim().to_string(), value);
    }
    Ok(map)
}

fn parse_prior(text: Option<&str>) -> CliResult<PriorConfig> {
    let Some(text) = text else {
        return Ok(PriorConfig::default());
    };
    let prior: PriorConfig = serde_json::from_value(Value::Object(key_values(text)?))
        .map_err(|e| Failure::Usage(format!("--prior: {e}")))?;
    prior.validate()?;
    Ok(prior)
}

fn parse_mcmc(text: Option<&str>) -> CliResult<McmcConfig> {
    let Some(text) = text else {
        return Ok(McmcConfig::default());
    };
    let mut map = key_values(text)?;
    let seed = map.remove("seed");
    let stream = map.remove("stream");
    let mut mcmc: McmcConfig = serde_json::from_value(Value::Object(map))
        .map_err(|e| Failure::Usage(format!("--mcmc: {e}")))?;
    let as_u64 = |v: Option<Value>, name: &str, default: u64| match v {
        None => Ok(default),
        Some(v) => v
            .as_u64()
            .ok_or_else(|| Failure::Usage(format!("--mcmc: {name} must be a non-negative integer"))),
    };
    mcmc.seed = RngStream::new(
        as_u64(seed, "seed", mcmc.seed.seed)?,
        as_u64(stream, "stream", mcmc.seed.stream_id)?,
    );
    mcmc.validate()?;
    Ok(mcmc)
}

fn analyze(
    data: &Path,
    method: Option<&str>,
    delta: Option<&str>,
    prior: Option<&str>,
    mcmc: Option<&str>,
) -> CliResult<EstimateResult> {
    let prior = parse_prior(prior)?;
    let mcmc = parse_mcmc(mcmc)?;
    let method = match (method, delta) {
        (_, Some(d)) => format!("FIXED({d})"),
        (Some(m), None) => m.to_string(),
        (None, None) => unreachable!("clap requires --method or --delta"),
    };
    let file = File::open(data).map_err(|e| io_failure(data, e))?;
    let counts = aggregate_counts(&parse_participants(file)?)?;
    let sub = pool_subgroups(&counts);
    let result = match method.trim().to_ascii_uppercase().as_str() {
        "MPP" => mpp_fit(&counts, &sub, &prior, &mcmc)?,
        "BJSM" => bjsm_fit(&counts, &prior, &mcmc)?,
        other => {
            let strategy: Strategy = other.parse().map_err(|e: Error| Failure::Usage(e.to_string()))?;
            fit_power_prior(&counts, &sub, &prior, strategy)?
        }
    };
    Ok(result)
}

fn load_scenario(arg: &str) -> CliResult<ScenarioSpec> {
    if let Ok(id) = arg.parse::<u32>() {
        return builtin_scenario(id).map_err(|e| Failure::Usage(e.to_string()));
    }
    let path = Path::new(arg);
    let text = fs::read_to_string(path).map_err(|e| io_failure(path, e))?;
    let spec: ScenarioSpec = serde_json::from_str(&text)
        .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    spec.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    Ok(spec)
}

fn simulate(scenario: &str, n: u32, seed: u64, out: Option<&Path>) -> CliResult<()> {
    let spec = load_scenario(scenario)?;
    let records = simulate_participants(&spec, n, RngStream::new(seed, 0))
        .map_err(|e| Failure::Usage(e.to_string()))?;
    match out {
        Some(path) => {
            let file = File::create(path).map_err(|e| io_failure(path, e))?;
            write_participants(&records, BufWriter::new(file))?;
        }
        None => write_participants(&records, io::stdout().lock())?,
    }
    Ok(())
}

fn study(config: &Path, out: Option<PathBuf>, threads: Option<usize>) -> CliResult<()> {
    let text = fs::read_to_string(config).map_err(|e| io_failure(config, e))?;
    let mut cfg: StudyConfig = serde_json::from_str(&text)
        .map_err(|e| Failure::Usage(format!("{}: {e}", config.display())))?;
    if let Some(t) = threads {
        cfg.parallelism = t;
    }
    cfg.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    let report = run_study(&cfg)?;
    let out = out.unwrap_or_else(default_out_dir);
    let written = write_reports(&report, &out)?;
    let mut stdout = io::stdout().lock();
    for path in written {
        writeln!(stdout, "{}", path.display()).map_err(|e| io_failure(Path::new("<stdout>"), e))?;
    }
    eprintln!(
        "{} cells, {} replications each, {:.1}s",
        report.cells.len(),
        cfg.replications,
        report.wall_time_secs
    );
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Analyze {
            data,
            method,
            delta,
            prior,
            mcmc,
        } => {
            let result = analyze(&data, method.as_deref(), delta.as_deref(), prior.as_deref(), mcmc.as_deref())?;
            for flag in &result.diagnostics.flags {
                eprintln!("warning: {flag}");
            }
            let json = serde_json::to_string_pretty(&result).map_err(Error::from)?;
            println!("{json}");
            Ok(())
        }
        Command::Simulate { scenario, n, seed, out } => simulate(&scenario, n, seed, out.as_deref()),
        Command::Study { config, out, threads } => study(&config, out, threads),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Lib(e)) => {
            eprintln!("error: {e}");
            if e.is_data_error() {
                ExitCode::from(2)
            } else if matches!(e, Error::Config(_)) {
                ExitCode::from(1)
            } else {
                ExitCode::from(3)
            }
        }
    }
}
