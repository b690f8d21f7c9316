//! End-to-end tests of the `bellsim` binary: output formats and exit codes.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const TABLE_I: &str = "\
# format=1
setting,coincidences,accidentals,singlesA,singlesB
phi:0,96,23,,
phi:22.5,87,23,,
phi:45,63,23,,
phi:67.5,38,23,,
phi:90,28,23,,
z,126,46,,
Z,248,90,,
";

fn bellsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bellsim")).args(args).output().expect("run bellsim")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn write_file(dir: &TempDir, name: &str, text: &str) -> String {
    let path = dir.path().join(name);
    fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn predict_rows() {
    let o = bellsim(&["predict", "--model", "realist", "--angles", "90"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o), "# format=1\nphi_deg,probability\n90,0.125000000\n");

    let o = bellsim(&["predict", "--model", "qt", "--angles", "0,22.5,67.5"]);
    let out = stdout(&o);
    assert!(out.contains("\n0,0.500000000\n"));
    assert!(out.contains("\n22.5,0.426776695\n"));
    assert!(out.contains("\n67.5,0.073223305\n"));
}

#[test]
fn predict_usage_errors_exit_2() {
    assert_eq!(bellsim(&["predict", "--model", "bohm", "--angles", "0"]).status.code(), Some(2));
    assert_eq!(bellsim(&["predict", "--model", "qt", "--angles", "x"]).status.code(), Some(2));
    assert_eq!(bellsim(&["predict", "--model", "qt"]).status.code(), Some(2));
}

#[test]
fn analyze_table_i_raw_and_adjusted() {
    let dir = TempDir::new().unwrap();
    let counts = write_file(&dir, "counts.csv", TABLE_I);

    let o = bellsim(&["analyze", &counts]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.lines().any(|l| l == "chsh,-0.117,0,false"), "{out}");
    assert!(out.lines().any(|l| l == "visibility,0.548,0.707,false"), "{out}");

    let o = bellsim(&["analyze", &counts, "--subtract-accidentals", "--tests", "chsh,visibility"]);
    assert!(o.status.success());
    let out = stdout(&o);
    let adjusted: Vec<&str> = out.lines().skip_while(|l| *l != "# adjusted").skip(1).collect();
    assert_eq!(adjusted.len(), 2, "{out}");
    let chsh: Vec<&str> = adjusted[0].split(',').collect();
    assert_eq!(chsh[0], "chsh");
    assert!(chsh[1].parse::<f64>().unwrap() > 0.0);
    assert_eq!(chsh[3], "true");
}

#[test]
fn analyze_emits_curve() {
    let dir = TempDir::new().unwrap();
    let counts = write_file(&dir, "counts.csv", TABLE_I);
    let curve = dir.path().join("curve.csv");
    let o = bellsim(&["analyze", &counts, "--subtract-accidentals", "--emit-curve", curve.to_str().unwrap()]);
    assert!(o.status.success());
    let text = fs::read_to_string(curve).unwrap();
    assert!(text.starts_with("# format=1\nphi_deg,rate\n0,73\n22.5,64\n"), "{text}");
    assert_eq!(text.lines().count(), 7);
}

#[test]
fn analyze_missing_setting_exits_3_but_reports_the_rest() {
    let dir = TempDir::new().unwrap();
    let no_big_z: String = TABLE_I.lines().filter(|l| !l.starts_with("Z,")).map(|l| format!("{l}\n")).collect();
    let counts = write_file(&dir, "counts.csv", &no_big_z);
    let o = bellsim(&["analyze", &counts, "--tests", "chsh,visibility"]);
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(stdout(&o), "visibility,0.548,0.707,false\n");
    assert!(stderr(&o).contains("chsh"));
}

#[test]
fn analyze_malformed_csv_exits_1_with_line_number() {
    let dir = TempDir::new().unwrap();
    let bad = TABLE_I.replace("phi:45,63", "phi:45,sixty-three");
    let counts = write_file(&dir, "counts.csv", &bad);
    let o = bellsim(&["analyze", &counts]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 5"), "{}", stderr(&o));

    let missing = dir.path().join("nope.csv");
    assert_eq!(bellsim(&["analyze", missing.to_str().unwrap()]).status.code(), Some(1));
    assert_eq!(bellsim(&["analyze", &write_file(&dir, "ok.csv", TABLE_I), "--tests", "bell"]).status.code(), Some(2));
}

#[test]
fn analyze_negative_subtraction_is_an_error() {
    let dir = TempDir::new().unwrap();
    let counts = write_file(&dir, "counts.csv", &TABLE_I.replace("phi:90,28,23", "phi:90,28,40"));
    let o = bellsim(&["analyze", &counts, "--subtract-accidentals"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("phi:90"));
}

#[test]
fn simulate_writes_three_files_deterministically() {
    let dir = TempDir::new().unwrap();
    let config = write_file(
        &dir,
        "cfg.toml",
        "[source]\nemission_rate = 2e6\n[detectorA]\nefficiency = 0.2\ndark_rate = 1e4\n\
         [detectorB]\nefficiency = 0.2\n[run]\nduration = 1e6\n",
    );
    let mut outputs = Vec::new();
    for name in ["one", "two"] {
        let out = dir.path().join(name);
        let o = bellsim(&["simulate", "--config", &config, "--seed", "17", "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
        outputs.push(["streamA.tsv", "streamB.tsv", "counts.csv"].map(|f| fs::read(out.join(f)).unwrap()));
    }
    assert_eq!(outputs[0], outputs[1]);
    let stream = String::from_utf8(outputs[0][0].clone()).unwrap();
    assert!(stream.starts_with("# format=1\ntimestamp_ns\ttruth_tag\n"));
    assert!(stream.contains("\tnoise\n") && stream.contains("\temission:"));

    // a different seed changes the streams
    let out = dir.path().join("three");
    bellsim(&["simulate", "--config", &config, "--seed", "18", "--out", out.to_str().unwrap()]);
    assert_ne!(fs::read(out.join("streamA.tsv")).unwrap(), outputs[0][0]);
}

#[test]
fn simulate_zero_duration_gives_empty_outputs() {
    let dir = TempDir::new().unwrap();
    let config = write_file(&dir, "cfg.toml", "[run]\nduration = 0\n");
    let out = dir.path().join("out");
    let o = bellsim(&["simulate", "--config", &config, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["streamA.tsv", "streamB.tsv"] {
        assert_eq!(fs::read_to_string(out.join(f)).unwrap(), "# format=1\ntimestamp_ns\ttruth_tag\n");
    }
    let counts = fs::read_to_string(out.join("counts.csv")).unwrap();
    for line in counts.lines().skip(2) {
        let cells: Vec<&str> = line.split(',').collect();
        assert_eq!((cells[1], cells[2], cells[3], cells[4]), ("0", "0", "0", "0"), "{line}");
    }
}

#[test]
fn simulate_config_errors_name_the_key() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    for (text, key) in [
        ("[source]\nemission_rat = 5\n", "emission_rat"),
        ("[detectorA]\nefficiency = 1.5\n", "efficiency"),
        ("[run]\nwindow_lo = 5.0\nwindow_hi = 1.0\n", "window"),
        ("[run]\narmB = \"sideways\"\n", "armB"),
    ] {
        let config = write_file(&dir, "cfg.toml", text);
        let o = bellsim(&["simulate", "--config", &config, "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(1), "{text}");
        assert!(stderr(&o).contains(key), "{text}: {}", stderr(&o));
    }
}

#[test]
fn aspect_like_config_has_a_quarter_accidentals() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let config = configs_dir().join("aspect_like.toml");
    let o = bellsim(&["simulate", "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (mut raw, mut acc) = (0.0, 0.0);
    for line in fs::read_to_string(out.join("counts.csv")).unwrap().lines().skip(2) {
        let cells: Vec<&str> = line.split(',').collect();
        raw += cells[1].parse::<f64>().unwrap();
        acc += cells[2].parse::<f64>().unwrap();
    }
    let fraction = acc / raw;
    assert!((0.15..=0.35).contains(&fraction), "{fraction}");

    // the simulated counts file analyses cleanly, with and without subtraction
    let o = bellsim(&["analyze", out.join("counts.csv").to_str().unwrap(), "--subtract-accidentals"]);
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn reproduce_scenarios() {
    let o = bellsim(&["reproduce", "aspect1981"]);
    assert!(o.status.success(), "{}", stdout(&o));
    let out = stdout(&o);
    assert!(out.contains("verdict flips"), "{out}");

    let o = bellsim(&["reproduce", "removal-pattern"]);
    assert!(o.status.success(), "{}", stdout(&o));
    assert!(stdout(&o).contains("A1/A = 2"));

    assert!(bellsim(&["reproduce", "tittel1997"]).status.success());
    assert_eq!(bellsim(&["reproduce", "nosuch"]).status.code(), Some(2));
}

#[test]
fn spectrum_of_simulated_streams() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let config = configs_dir().join("clean_pulses.toml");
    let o = bellsim(&["simulate", "--config", config.to_str().unwrap(), "--seed", "3", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (a, b) = (out.join("streamA.tsv"), out.join("streamB.tsv"));
    let o = bellsim(&["spectrum", a.to_str().unwrap(), b.to_str().unwrap(), "--lo-ns", "-20", "--hi-ns", "20"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.starts_with("# format=1\ndt_ns,count,correlated\n-20,0,0\n"), "{text}");
    // no noise and no jitter: nothing before zero delay
    let before_zero: u64 = text
        .lines()
        .skip(2)
        .filter(|l| l.starts_with('-'))
        .map(|l| l.split(',').nth(1).unwrap().parse::<u64>().unwrap())
        .sum();
    assert_eq!(before_zero, 0);
}
