//! On-disk formats. Every file starts with a `# format=1` line.
//!
//! `counts.csv`:
//!
//! ```text
//! # format=1
//! setting,coincidences,accidentals,singlesA,singlesB
//! phi:22.5,87,23,,
//! z,126,46,,
//! Z,248,90,,
//! ```
//!
//! Stream `.tsv`: `timestamp_ns<TAB>truth_tag`, the tag being
//! `emission:<id>:<lambda_deg>`, `noise`, or `-` when unknown.
//!
//! Config documents are TOML with `[source]`, `[detectorA]`, `[detectorB]` and
//! `[run]` tables. Angles are degrees, times nanoseconds, rates per second.

use std::io::{BufRead, Write};

use serde::Deserialize;

use crate::analytic::PolarizerSetting;
use crate::counts::{CountsRow, CountsTable, Setting};
use crate::error::{Error, Result};
use crate::simulator::{DetectionStream, DetectorConfig, LambdaDistribution, RunConfig, SourceConfig, Truth};

pub const FORMAT_LINE: &str = "# format=1";
pub const COUNTS_HEADER: [&str; 5] = ["setting", "coincidences", "accidentals", "singlesA", "singlesB"];
pub const STREAM_HEADER: &str = "timestamp_ns\ttruth_tag";

const NS_PER_S: f64 = 1e9;

fn ns_to_s(v: f64) -> f64 {
    v / NS_PER_S
}

fn s_to_ns(v: f64) -> f64 {
    v * NS_PER_S
}

fn parse_err(line: usize, reason: impl Into<String>) -> Error {
    Error::Parse { line, reason: reason.into() }
}

fn check_format_line(first: Option<&str>) -> Result<()> {
    match first.map(str::trim_end) {
        Some(FORMAT_LINE) => Ok(()),
        Some(l) if l.starts_with("# format=") => Err(parse_err(1, format!("unsupported version `{l}`"))),
        _ => Err(parse_err(1, format!("expected `{FORMAT_LINE}`"))),
    }
}

fn opt_cell(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

pub fn write_counts_csv(table: &CountsTable, out: &mut impl Write) -> Result<()> {
    writeln!(out, "{FORMAT_LINE}")?;
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(COUNTS_HEADER).map_err(io)?;
    for r in table.rows() {
        w.write_record([
            r.setting.to_string(),
            r.coincidences.to_string(),
            opt_cell(r.accidentals),
            opt_cell(r.singles_a),
            opt_cell(r.singles_b),
        ])
        .map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

pub fn counts_csv_string(table: &CountsTable) -> String {
    let mut buf = Vec::new();
    write_counts_csv(table, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("ascii output")
}

pub fn read_counts_csv(text: &str) -> Result<CountsTable> {
    check_format_line(text.lines().next())?;
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).has_headers(true).from_reader(text.as_bytes());
    let header = rdr.headers().map_err(|e| parse_err(2, e.to_string()))?.clone();
    if header.iter().collect::<Vec<_>>() != COUNTS_HEADER {
        return Err(parse_err(2, format!("expected header `{}`", COUNTS_HEADER.join(","))));
    }
    let mut table = CountsTable::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_err(line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let setting: Setting = rec[0].trim().parse().map_err(|e: String| parse_err(line, e))?;
        let num = |i: usize| -> Result<Option<f64>> {
            let cell = rec[i].trim();
            if cell.is_empty() {
                return Ok(None);
            }
            cell.parse::<f64>()
                .map(Some)
                .map_err(|_| parse_err(line, format!("column {} is not a number: `{cell}`", COUNTS_HEADER[i])))
        };
        let coincidences = num(1)?.ok_or_else(|| parse_err(line, "coincidences cell is empty"))?;
        let row = CountsRow { setting, coincidences, accidentals: num(2)?, singles_a: num(3)?, singles_b: num(4)? };
        table.insert(row).map_err(|e| parse_err(line, e.to_string()))?;
    }
    Ok(table)
}

fn truth_tag(t: Option<&Truth>) -> String {
    match t {
        None => "-".into(),
        Some(Truth::Noise) => "noise".into(),
        Some(Truth::Emission { id, lambda }) => format!("emission:{id}:{}", lambda.to_degrees()),
    }
}

fn parse_truth_tag(tag: &str, line: usize) -> Result<Option<Truth>> {
    match tag {
        "-" => Ok(None),
        "noise" => Ok(Some(Truth::Noise)),
        _ => {
            let bad = || parse_err(line, format!("bad truth tag `{tag}`"));
            let rest = tag.strip_prefix("emission:").ok_or_else(bad)?;
            let (id, deg) = rest.split_once(':').ok_or_else(bad)?;
            let id = id.parse().map_err(|_| bad())?;
            let deg: f64 = deg.parse().map_err(|_| bad())?;
            Ok(Some(Truth::Emission { id, lambda: deg.to_radians() }))
        }
    }
}

pub fn write_stream_tsv(stream: &DetectionStream, out: &mut impl Write) -> Result<()> {
    writeln!(out, "{FORMAT_LINE}")?;
    writeln!(out, "{STREAM_HEADER}")?;
    let truth = stream.truth();
    for (i, t) in stream.timestamps().iter().enumerate() {
        writeln!(out, "{}\t{}", s_to_ns(*t), truth_tag(truth.map(|tr| &tr[i])))?;
    }
    Ok(())
}

/// Reads a stream file. Truth is kept only if every line carries a tag.
pub fn read_stream_tsv(input: impl BufRead) -> Result<DetectionStream> {
    let mut times = Vec::new();
    let mut truth = Vec::new();
    let mut all_tagged = true;
    for (idx, line) in input.lines().enumerate() {
        let line = line?;
        let n = idx + 1;
        match n {
            1 => check_format_line(Some(&line))?,
            2 if line.trim_end() == STREAM_HEADER => {}
            2 => return Err(parse_err(2, format!("expected header `{STREAM_HEADER}`"))),
            _ if line.trim().is_empty() || line.starts_with('#') => {}
            _ => {
                let mut cols = line.split('\t');
                let t: f64 =
                    cols.next().and_then(|c| c.trim().parse().ok()).ok_or_else(|| parse_err(n, "bad timestamp"))?;
                match parse_truth_tag(cols.next().unwrap_or("-").trim(), n)? {
                    Some(tr) => truth.push(tr),
                    None => all_tagged = false,
                }
                times.push(ns_to_s(t));
            }
        }
    }
    if times.windows(2).any(|w| w[1] < w[0]) {
        return Err(parse_err(0, "timestamps are not sorted"));
    }
    if all_tagged {
        DetectionStream::with_truth(times, truth)
    } else {
        DetectionStream::new(times)
    }
}

/// `armA = 22.5` or `armA = "absent"`.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum ArmDoc {
    Degrees(f64),
    Named(String),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum LambdaDoc {
    Named(String),
    Weights(Vec<f64>),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct SourceDoc {
    emission_rate: f64,
    pulse_lifetime: f64,
    min_gap: f64,
    lambda_distribution: LambdaDoc,
}

impl Default for SourceDoc {
    fn default() -> Self {
        SourceDoc {
            emission_rate: SourceConfig::default().emission_rate,
            pulse_lifetime: 5.0,
            min_gap: 0.0,
            lambda_distribution: LambdaDoc::Named("uniform".into()),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct DetectorDoc {
    efficiency: f64,
    dark_rate: f64,
    jitter_sigma: f64,
}

impl Default for DetectorDoc {
    fn default() -> Self {
        DetectorDoc { efficiency: 1.0, dark_rate: 0.0, jitter_sigma: 0.0 }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
#[allow(non_snake_case)]
struct RunDoc {
    armA: ArmDoc,
    armB: ArmDoc,
    duration: f64,
    window_lo: f64,
    window_hi: f64,
    accidental_delay: f64,
    master_seed: u64,
    run_index: u32,
    relative_angles: Vec<f64>,
}

impl Default for RunDoc {
    fn default() -> Self {
        RunDoc {
            armA: ArmDoc::Degrees(0.0),
            armB: ArmDoc::Degrees(0.0),
            duration: 1e9,
            window_lo: -3.0,
            window_hi: 17.0,
            accidental_delay: 100.0,
            master_seed: 0,
            run_index: 0,
            relative_angles: DEFAULT_SCAN_ANGLES.to_vec(),
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct ConfigDoc {
    source: SourceDoc,
    #[serde(rename = "detectorA")]
    detector_a: DetectorDoc,
    #[serde(rename = "detectorB")]
    detector_b: DetectorDoc,
    run: RunDoc,
}

/// Relative angles scanned when a config names none.
pub const DEFAULT_SCAN_ANGLES: [f64; 5] = [0.0, 22.5, 45.0, 67.5, 90.0];

/// A fully validated simulation setup read from a config document.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub source: SourceConfig,
    pub detector_a: DetectorConfig,
    pub detector_b: DetectorConfig,
    pub run: RunConfig,
    pub relative_angles: Vec<f64>,
}

fn arm(doc: &ArmDoc, key: &str) -> Result<PolarizerSetting> {
    match doc {
        ArmDoc::Degrees(d) if d.is_finite() => Ok(PolarizerSetting::degrees(*d)),
        ArmDoc::Named(s) if s == "absent" => Ok(PolarizerSetting::Absent),
        _ => Err(Error::Config { key: key.into(), reason: "expected an angle in degrees or \"absent\"".into() }),
    }
}

/// The field named in a serde/toml error message, if any.
fn offending_key(msg: &str) -> String {
    for marker in ["unknown field `", "missing field `"] {
        if let Some(rest) = msg.split(marker).nth(1) {
            if let Some(key) = rest.split('`').next() {
                return key.to_string();
            }
        }
    }
    msg.lines()
        .find_map(|l| l.trim().strip_prefix("in `").and_then(|r| r.split('`').next()))
        .unwrap_or("document")
        .to_string()
}

pub fn parse_config(text: &str) -> Result<SimulationConfig> {
    let doc: ConfigDoc = toml::from_str(text).map_err(|e| {
        let msg = e.message().to_string();
        Error::Config { key: offending_key(&msg), reason: msg }
    })?;
    let lambda_distribution = match doc.source.lambda_distribution {
        LambdaDoc::Named(s) if s == "uniform" => LambdaDistribution::Uniform,
        LambdaDoc::Weights(w) => LambdaDistribution::Tabulated(w),
        LambdaDoc::Named(s) => {
            return Err(Error::Config {
                key: "lambda_distribution".into(),
                reason: format!("unknown distribution `{s}`"),
            })
        }
    };
    let source = SourceConfig {
        emission_rate: doc.source.emission_rate,
        pulse_lifetime: ns_to_s(doc.source.pulse_lifetime),
        min_gap: ns_to_s(doc.source.min_gap),
        lambda_distribution,
    };
    let det = |d: &DetectorDoc| DetectorConfig {
        efficiency: d.efficiency,
        dark_rate: d.dark_rate,
        jitter_sigma: ns_to_s(d.jitter_sigma),
    };
    let r = &doc.run;
    let run = RunConfig {
        arm_a: arm(&r.armA, "armA")?,
        arm_b: arm(&r.armB, "armB")?,
        duration: ns_to_s(r.duration),
        window_lo: ns_to_s(r.window_lo),
        window_hi: ns_to_s(r.window_hi),
        accidental_delay: ns_to_s(r.accidental_delay),
        master_seed: r.master_seed,
        run_index: r.run_index,
    };
    if r.relative_angles.is_empty() || r.relative_angles.iter().any(|a| !a.is_finite()) {
        return Err(Error::Config { key: "relative_angles".into(), reason: "need at least one finite angle".into() });
    }
    let cfg = SimulationConfig {
        source,
        detector_a: det(&doc.detector_a),
        detector_b: det(&doc.detector_b),
        run,
        relative_angles: r.relative_angles.clone(),
    };
    cfg.source.validate()?;
    cfg.detector_a.validate("detectorA")?;
    cfg.detector_b.validate("detectorB")?;
    cfg.run.validate()?;
    Ok(cfg)
}
