//! `bellsim`: predict, simulate, analyze and reproduce Bell-test coincidence
//! experiments.
//!
//! Exit codes: 0 success, 1 I/O or config error, 2 usage error, 3 incomplete
//! data (a statistic needs a setting the counts file lacks).

mod output;

use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bellsim::analytic::{qt_coincidence_prob, realist_coincidence_prob};
use bellsim::bellstats::subtract_accidentals;
use bellsim::formats::{counts_csv_string, parse_config, read_counts_csv, read_stream_tsv, write_stream_tsv};
use bellsim::harness::{Scenario, DEFAULT_SEED};
use bellsim::simulator::{build_time_spectrum, run_angle_scan, simulate_run};
use bellsim::{Angle, CountsTable, Error, Statistic};
use clap::{Parser, Subcommand, ValueEnum};

const EXIT_IO: u8 = 1;
const EXIT_INCOMPLETE: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "bellsim", version, about = "Bell-test coincidence simulation and accidental-subtraction analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print coincidence probabilities of an ideal model as CSV.
    Predict {
        #[arg(long, value_enum)]
        model: Model,
        /// Relative polariser angles in degrees, comma separated.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true, required = true)]
        angles: Vec<f64>,
    },
    /// Simulate one run and an angle scan from a config file.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `master_seed` from the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Directory receiving streamA.tsv, streamB.tsv and counts.csv.
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate Bell-test statistics on a counts file.
    Analyze {
        counts: PathBuf,
        /// Also report the statistics after removing the accidental estimates.
        #[arg(long)]
        subtract_accidentals: bool,
        /// Statistics to report, comma separated.
        #[arg(long, value_delimiter = ',', default_values_t = Statistic::ALL.map(|s| s.name().to_string()))]
        tests: Vec<String>,
        /// Write the (adjusted, if requested) coincidence curve as `phi_deg,rate` CSV.
        #[arg(long)]
        emit_curve: Option<PathBuf>,
    },
    /// Run a reproduction scenario; exits 0 iff every expectation holds.
    Reproduce {
        #[arg(value_enum)]
        scenario: ScenarioArg,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
    },
    /// Histogram tB − tA for two stream files as `dt_ns,count,correlated` CSV.
    Spectrum {
        stream_a: PathBuf,
        stream_b: PathBuf,
        #[arg(long, default_value_t = -100.0, allow_negative_numbers = true)]
        lo_ns: f64,
        #[arg(long, default_value_t = 100.0, allow_negative_numbers = true)]
        hi_ns: f64,
        #[arg(long, default_value_t = 1.0)]
        bin_ns: f64,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Model {
    Qt,
    Realist,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ScenarioArg {
    #[value(name = "aspect1981")]
    Aspect1981,
    RateScaling,
    RemovalPattern,
    #[value(name = "tittel1997")]
    Tittel1997,
    RealistCurve,
    CrossMethod,
}

impl From<ScenarioArg> for Scenario {
    fn from(s: ScenarioArg) -> Self {
        match s {
            ScenarioArg::Aspect1981 => Scenario::Aspect1981,
            ScenarioArg::RateScaling => Scenario::RateScaling,
            ScenarioArg::RemovalPattern => Scenario::RemovalPattern,
            ScenarioArg::Tittel1997 => Scenario::Tittel1997,
            ScenarioArg::RealistCurve => Scenario::RealistCurve,
            ScenarioArg::CrossMethod => Scenario::CrossMethod,
        }
    }
}

/// A failure carrying the process exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::MissingSetting(_) => EXIT_INCOMPLETE,
            _ => EXIT_IO,
        };
        Failure { code, message: e.to_string() }
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure { code: EXIT_IO, message: format!("{}: {e}", path.display()) }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| io_failure(path, e))
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), Failure> {
    fs::write(path, contents).map_err(|e| io_failure(path, e))
}

fn predict(model: Model, angles: &[f64]) -> Result<u8, Failure> {
    let curve = match model {
        Model::Qt => qt_coincidence_prob,
        Model::Realist => realist_coincidence_prob,
    };
    let rows: Vec<(f64, f64)> = angles.iter().map(|&d| (d, curve(Angle::from_degrees(d)))).collect();
    print!("{}", output::prediction_csv(&rows));
    Ok(0)
}

fn simulate(config: &Path, seed: Option<u64>, out: &Path) -> Result<u8, Failure> {
    let mut cfg = parse_config(&read(config)?)?;
    if let Some(seed) = seed {
        cfg.run.master_seed = seed;
    }
    fs::create_dir_all(out).map_err(|e| io_failure(out, e))?;

    let streams = simulate_run(&cfg.source, &cfg.detector_a, &cfg.detector_b, &cfg.run)?;
    for (name, stream) in [("streamA.tsv", &streams.a), ("streamB.tsv", &streams.b)] {
        let mut buf = Vec::new();
        write_stream_tsv(stream, &mut buf)?;
        write(&out.join(name), buf)?;
    }
    let table = run_angle_scan(&cfg.source, &cfg.detector_a, &cfg.detector_b, &cfg.run, &cfg.relative_angles)?;
    write(&out.join("counts.csv"), counts_csv_string(&table))?;
    eprintln!(
        "{} emissions, {} + {} detections; counts for {} settings written to {}",
        streams.emissions,
        streams.a.len(),
        streams.b.len(),
        table.rows().len(),
        out.display()
    );
    Ok(0)
}

/// Prints one line per test; returns whether every test had its settings.
fn report_block(table: &CountsTable, tests: &[Statistic]) -> Result<bool, Failure> {
    let mut complete = true;
    for &t in tests {
        match t.evaluate(table) {
            Ok(r) => println!("{}", output::result_line(&r)),
            Err(Error::MissingSetting(s)) => {
                eprintln!("{t}: missing setting `{s}`");
                complete = false;
            }
            Err(e @ (Error::DegenerateInput(_) | Error::PreconditionViolation(_))) => {
                eprintln!("{t}: {e}");
            }
            Err(e) => return Err(e.into()),
        }
    }
    Ok(complete)
}

fn analyze(counts: &Path, subtract: bool, tests: &[String], emit_curve: Option<&Path>) -> Result<u8, Failure> {
    let tests = tests
        .iter()
        .map(|t| t.parse::<Statistic>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|message| Failure { code: 2, message })?;
    let raw = read_counts_csv(&read(counts)?)
        .map_err(|e| Failure { code: EXIT_IO, message: format!("{}: {e}", counts.display()) })?;

    let complete = if subtract {
        println!("# raw");
        let raw_complete = report_block(&raw, &tests)?;
        let adjusted = subtract_accidentals(&raw).map_err(|e| match e {
            Error::PreconditionViolation(message) => Failure { code: EXIT_INCOMPLETE, message },
            e => e.into(),
        })?;
        println!("# adjusted");
        let adj_complete = report_block(&adjusted, &tests)?;
        if let Some(path) = emit_curve {
            write_curve(path, &adjusted)?;
        }
        raw_complete && adj_complete
    } else {
        let complete = report_block(&raw, &tests)?;
        if let Some(path) = emit_curve {
            write_curve(path, &raw)?;
        }
        complete
    };
    Ok(if complete { 0 } else { EXIT_INCOMPLETE })
}

fn write_curve(path: &Path, table: &CountsTable) -> Result<(), Failure> {
    let rows: Vec<(f64, f64)> = table
        .angle_rows()
        .filter_map(|r| match r.setting {
            bellsim::Setting::Relative(d) => Some((d, r.coincidences)),
            _ => None,
        })
        .collect();
    write(path, output::curve_csv(&rows))
}

fn reproduce(scenario: Scenario, seed: u64) -> Result<u8, Failure> {
    let report = scenario.run(seed)?;
    print!("{report}");
    Ok(if report.passed() { 0 } else { EXIT_IO })
}

fn spectrum(a: &Path, b: &Path, lo_ns: f64, hi_ns: f64, bin_ns: f64) -> Result<u8, Failure> {
    let open = |p: &Path| -> Result<_, Failure> {
        let f = fs::File::open(p).map_err(|e| io_failure(p, e))?;
        read_stream_tsv(BufReader::new(f))
            .map_err(|e| Failure { code: EXIT_IO, message: format!("{}: {e}", p.display()) })
    };
    let (sa, sb) = (open(a)?, open(b)?);
    let sp = build_time_spectrum(&sa, &sb, lo_ns * 1e-9, hi_ns * 1e-9, bin_ns * 1e-9)
        .map_err(|e| Failure { code: 2, message: e.to_string() })?;
    print!("{}", output::spectrum_csv(&sp));
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Predict { model, angles } => predict(*model, angles),
        Command::Simulate { config, seed, out } => simulate(config, *seed, out),
        Command::Analyze { counts, subtract_accidentals, tests, emit_curve } => {
            analyze(counts, *subtract_accidentals, tests, emit_curve.as_deref())
        }
        Command::Reproduce { scenario, seed } => reproduce((*scenario).into(), *seed),
        Command::Spectrum { stream_a, stream_b, lo_ns, hi_ns, bin_ns } => {
            spectrum(stream_a, stream_b, *lo_ns, *hi_ns, *bin_ns)
        }
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
