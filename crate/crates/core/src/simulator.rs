//! Event-level Monte Carlo of a pulsed classical-light source feeding two
//! polariser-plus-detector arms, and the time-stamp analysis run on its output.
//!
//! Each emission carries a common polarisation λ. Arm A registers the pulse
//! at the emission time; arm B registers it after an exponentially
//! distributed delay (the spread of detection times within one pulse). Both
//! arms decide independently, with probability `efficiency × cos²(λ − axis)`,
//! so the model is factorable. Detector noise is an independent Poisson
//! process per arm.
//!
//! All times are seconds.

use rand::distr::weighted::WeightedIndex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};
use std::f64::consts::PI;

use crate::analytic::{singles_prob, Angle, HiddenState, PolarizerSetting};
use crate::counts::{CountsRow, CountsTable, Setting};
use crate::error::{Error, Result};

pub const DEFAULT_PULSE_LIFETIME: f64 = 5e-9;
pub const DEFAULT_WINDOW_LO: f64 = -3e-9;
pub const DEFAULT_WINDOW_HI: f64 = 17e-9;
pub const DEFAULT_ACCIDENTAL_DELAY: f64 = 100e-9;
pub const DEFAULT_BIN_WIDTH: f64 = 1e-9;

/// How λ is drawn for each emission.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum LambdaDistribution {
    #[default]
    Uniform,
    /// Relative weights of equal-width bins spanning `[0, π)`; uniform within a bin.
    Tabulated(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SourceConfig {
    /// Mean emission rate before dead-time thinning, per second.
    pub emission_rate: f64,
    /// Decay constant of the detection-time spread within a pulse.
    pub pulse_lifetime: f64,
    /// Emissions closer than this to the previous accepted one are dropped.
    pub min_gap: f64,
    pub lambda_distribution: LambdaDistribution,
}

impl Default for SourceConfig {
    fn default() -> Self {
        SourceConfig {
            emission_rate: 1e5,
            pulse_lifetime: DEFAULT_PULSE_LIFETIME,
            min_gap: 0.0,
            lambda_distribution: LambdaDistribution::Uniform,
        }
    }
}

fn config_err(key: &str, reason: impl Into<String>) -> Error {
    Error::Config { key: key.to_string(), reason: reason.into() }
}

fn require(cond: bool, key: &str, reason: &str) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(config_err(key, reason))
    }
}

impl SourceConfig {
    pub fn validate(&self) -> Result<()> {
        require(self.emission_rate.is_finite() && self.emission_rate > 0.0, "emission_rate", "must be > 0")?;
        require(self.pulse_lifetime.is_finite() && self.pulse_lifetime >= 0.0, "pulse_lifetime", "must be >= 0")?;
        require(self.min_gap.is_finite() && self.min_gap >= 0.0, "min_gap", "must be >= 0")?;
        if let LambdaDistribution::Tabulated(w) = &self.lambda_distribution {
            require(
                !w.is_empty() && w.iter().all(|v| v.is_finite() && *v >= 0.0) && w.iter().sum::<f64>() > 0.0,
                "lambda_distribution",
                "weights must be non-negative with a positive sum",
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorConfig {
    /// Scale factor on the transmitted intensity; detection probability is
    /// `efficiency × intensity`.
    pub efficiency: f64,
    /// Signal-independent detections per second.
    pub dark_rate: f64,
    /// Standard deviation of Gaussian timestamp noise.
    pub jitter_sigma: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig { efficiency: 1.0, dark_rate: 0.0, jitter_sigma: 0.0 }
    }
}

impl DetectorConfig {
    pub fn validate(&self, prefix: &str) -> Result<()> {
        let key = |k: &str| format!("{prefix}.{k}");
        require(
            self.efficiency.is_finite() && self.efficiency > 0.0 && self.efficiency <= 1.0,
            &key("efficiency"),
            "must be in (0, 1]",
        )?;
        require(self.dark_rate.is_finite() && self.dark_rate >= 0.0, &key("dark_rate"), "must be >= 0")?;
        require(self.jitter_sigma.is_finite() && self.jitter_sigma >= 0.0, &key("jitter_sigma"), "must be >= 0")?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunConfig {
    pub arm_a: PolarizerSetting,
    pub arm_b: PolarizerSetting,
    pub duration: f64,
    /// Coincidence window on `Δt = tB − tA`.
    pub window_lo: f64,
    pub window_hi: f64,
    pub accidental_delay: f64,
    pub master_seed: u64,
    pub run_index: u32,
}

impl RunConfig {
    pub fn new(arm_a: PolarizerSetting, arm_b: PolarizerSetting, duration: f64) -> Self {
        RunConfig {
            arm_a,
            arm_b,
            duration,
            window_lo: DEFAULT_WINDOW_LO,
            window_hi: DEFAULT_WINDOW_HI,
            accidental_delay: DEFAULT_ACCIDENTAL_DELAY,
            master_seed: 0,
            run_index: 0,
        }
    }

    pub fn with_seed(mut self, master_seed: u64, run_index: u32) -> Self {
        self.master_seed = master_seed;
        self.run_index = run_index;
        self
    }

    pub fn window_width(&self) -> f64 {
        self.window_hi - self.window_lo
    }

    pub fn validate(&self) -> Result<()> {
        require(self.duration.is_finite() && self.duration >= 0.0, "duration", "must be >= 0")?;
        require(
            self.window_lo.is_finite() && self.window_hi.is_finite() && self.window_lo < self.window_hi,
            "window_hi",
            "must exceed window_lo",
        )?;
        check_delay(self.accidental_delay, self.window_lo, self.window_hi)
            .map_err(|_| config_err("accidental_delay", "must be at least 5x the window width"))
    }
}

fn check_delay(delay: f64, lo: f64, hi: f64) -> Result<()> {
    // inclusive, with rounding slack: the default 100 ns delay is exactly 5x the 20 ns window
    if !(delay.is_finite() && delay >= 5.0 * (hi - lo) * (1.0 - 1e-9)) {
        return Err(Error::PreconditionViolation(format!(
            "delay {delay} s must be at least 5x the window width {} s",
            hi - lo
        )));
    }
    Ok(())
}

/// Where a detection came from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Truth {
    Emission { id: u64, lambda: f64 },
    Noise,
}

impl Truth {
    pub fn emission_id(&self) -> Option<u64> {
        match self {
            Truth::Emission { id, .. } => Some(*id),
            Truth::Noise => None,
        }
    }
}

/// Detector timestamps in non-decreasing order, optionally with their origin.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DetectionStream {
    timestamps: Vec<f64>,
    truth: Option<Vec<Truth>>,
}

impl DetectionStream {
    pub fn new(timestamps: Vec<f64>) -> Result<Self> {
        Self::build(timestamps, None)
    }

    pub fn with_truth(timestamps: Vec<f64>, truth: Vec<Truth>) -> Result<Self> {
        if truth.len() != timestamps.len() {
            return Err(Error::PreconditionViolation("truth and timestamps differ in length".into()));
        }
        Self::build(timestamps, Some(truth))
    }

    fn build(timestamps: Vec<f64>, truth: Option<Vec<Truth>>) -> Result<Self> {
        if timestamps.iter().any(|t| !t.is_finite()) {
            return Err(Error::PreconditionViolation("non-finite timestamp".into()));
        }
        if timestamps.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::PreconditionViolation("timestamps are not sorted".into()));
        }
        Ok(DetectionStream { timestamps, truth })
    }

    fn from_events(mut events: Vec<(f64, Truth)>) -> Self {
        events.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (timestamps, truth) = events.into_iter().unzip();
        DetectionStream { timestamps, truth: Some(truth) }
    }

    pub fn timestamps(&self) -> &[f64] {
        &self.timestamps
    }

    pub fn truth(&self) -> Option<&[Truth]> {
        self.truth.as_deref()
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    /// The same stream with every timestamp moved later by `delay`.
    pub fn shifted(&self, delay: f64) -> Self {
        DetectionStream { timestamps: self.timestamps.iter().map(|t| t + delay).collect(), truth: self.truth.clone() }
    }
}

/// The two streams of one run plus the number of emissions behind them.
#[derive(Debug, Clone, PartialEq)]
pub struct RunStreams {
    pub a: DetectionStream,
    pub b: DetectionStream,
    pub emissions: u64,
}

/// Generator for one (run, setting) pair. Identical inputs always give the
/// same sequence; different `(run_index, setting)` pairs select disjoint
/// ChaCha streams.
pub fn run_rng(master_seed: u64, run_index: u32, setting: u32) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(((run_index as u64) << 32) | setting as u64);
    rng
}

enum LambdaSampler {
    Uniform,
    Tabulated(WeightedIndex<f64>, f64),
}

impl LambdaSampler {
    fn new(dist: &LambdaDistribution) -> Result<Self> {
        Ok(match dist {
            LambdaDistribution::Uniform => LambdaSampler::Uniform,
            LambdaDistribution::Tabulated(w) => LambdaSampler::Tabulated(
                WeightedIndex::new(w).map_err(|e| config_err("lambda_distribution", e.to_string()))?,
                PI / w.len() as f64,
            ),
        })
    }

    fn sample(&self, rng: &mut impl Rng) -> f64 {
        match self {
            LambdaSampler::Uniform => rng.random::<f64>() * PI,
            LambdaSampler::Tabulated(idx, width) => (idx.sample(rng) as f64 + rng.random::<f64>()) * width,
        }
    }
}

fn jitter(sigma: f64) -> Option<Normal<f64>> {
    (sigma > 0.0).then(|| Normal::new(0.0, sigma).expect("validated sigma"))
}

fn poisson_times(rate: f64, duration: f64, rng: &mut impl Rng) -> Vec<f64> {
    let mut out = Vec::new();
    if rate <= 0.0 || duration <= 0.0 {
        return out;
    }
    let gap = Exp::new(rate).expect("validated rate");
    let mut t = gap.sample(rng);
    while t < duration {
        out.push(t);
        t += gap.sample(rng);
    }
    out
}

/// Simulates one run at the settings in `run`.
pub fn simulate_run(
    source: &SourceConfig,
    det_a: &DetectorConfig,
    det_b: &DetectorConfig,
    run: &RunConfig,
) -> Result<RunStreams> {
    simulate_setting(source, det_a, det_b, run, 0)
}

/// As [`simulate_run`], drawing from the generator stream of `setting`.
pub fn simulate_setting(
    source: &SourceConfig,
    det_a: &DetectorConfig,
    det_b: &DetectorConfig,
    run: &RunConfig,
    setting: u32,
) -> Result<RunStreams> {
    source.validate()?;
    det_a.validate("detectorA")?;
    det_b.validate("detectorB")?;
    run.validate()?;

    let mut rng = run_rng(run.master_seed, run.run_index, setting);
    let lambda = LambdaSampler::new(&source.lambda_distribution)?;
    let pulse = (source.pulse_lifetime > 0.0).then(|| Exp::new(1.0 / source.pulse_lifetime).expect("validated"));
    let (jitter_a, jitter_b) = (jitter(det_a.jitter_sigma), jitter(det_b.jitter_sigma));

    let mut a = Vec::new();
    let mut b = Vec::new();
    let mut emissions = 0u64;
    let mut last_accepted = f64::NEG_INFINITY;
    for t in poisson_times(source.emission_rate, run.duration, &mut rng) {
        if t - last_accepted < source.min_gap {
            continue;
        }
        last_accepted = t;
        let l = lambda.sample(&mut rng);
        let hidden = HiddenState::new(Angle::from_radians(l));
        let truth = Truth::Emission { id: emissions, lambda: l };
        emissions += 1;

        let (ua, ub): (f64, f64) = (rng.random(), rng.random());
        if ua < det_a.efficiency * singles_prob(run.arm_a, hidden) {
            let noise = jitter_a.map_or(0.0, |n| n.sample(&mut rng));
            a.push((t + noise, truth));
        }
        if ub < det_b.efficiency * singles_prob(run.arm_b, hidden) {
            let spread = pulse.map_or(0.0, |p| p.sample(&mut rng));
            let noise = jitter_b.map_or(0.0, |n| n.sample(&mut rng));
            b.push((t + spread + noise, truth));
        }
    }
    a.extend(poisson_times(det_a.dark_rate, run.duration, &mut rng).into_iter().map(|t| (t, Truth::Noise)));
    b.extend(poisson_times(det_b.dark_rate, run.duration, &mut rng).into_iter().map(|t| (t, Truth::Noise)));

    Ok(RunStreams { a: DetectionStream::from_events(a), b: DetectionStream::from_events(b), emissions })
}

/// Pairs each B detection, in time order, with the earliest still-unpaired A
/// detection satisfying `window_lo ≤ tB − tA ≤ window_hi`. Every detection is
/// used at most once. Returns `(index in A, index in B)` pairs.
///
/// Because all eligibility intervals have the same width, this greedy pass
/// yields a maximum matching.
pub fn match_coincidences(a: &[f64], b: &[f64], window_lo: f64, window_hi: f64) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    let mut next = 0;
    for (j, &tb) in b.iter().enumerate() {
        while next < a.len() && tb - a[next] > window_hi {
            next += 1;
        }
        if next < a.len() && tb - a[next] >= window_lo {
            pairs.push((next, j));
            next += 1;
        }
    }
    pairs
}

pub fn count_coincidences(a: &DetectionStream, b: &DetectionStream, window_lo: f64, window_hi: f64) -> usize {
    match_coincidences(a.timestamps(), b.timestamps(), window_lo, window_hi).len()
}

/// Coincidences whose two detections come from the same emission.
pub fn count_true_coincidences(
    a: &DetectionStream,
    b: &DetectionStream,
    window_lo: f64,
    window_hi: f64,
) -> Option<usize> {
    let (ta, tb) = (a.truth()?, b.truth()?);
    Some(
        match_coincidences(a.timestamps(), b.timestamps(), window_lo, window_hi)
            .into_iter()
            .filter(|&(i, j)| matches!((ta[i].emission_id(), tb[j].emission_id()), (Some(x), Some(y)) if x == y))
            .count(),
    )
}

/// Histogram of `Δt = tB − tA` over `[range_lo, range_hi)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSpectrum {
    pub bin_width: f64,
    pub range_lo: f64,
    pub range_hi: f64,
    pub bins: Vec<u64>,
    /// Share of `bins` whose pair came from one emission; empty without truth data.
    pub correlated: Vec<u64>,
}

impl TimeSpectrum {
    pub fn total(&self) -> u64 {
        self.bins.iter().sum()
    }

    /// Lower edge of bin `i`.
    pub fn bin_start(&self, i: usize) -> f64 {
        self.range_lo + i as f64 * self.bin_width
    }

    pub fn bin_of(&self, dt: f64) -> Option<usize> {
        if !(dt >= self.range_lo && dt < self.range_hi) {
            return None;
        }
        Some((((dt - self.range_lo) / self.bin_width).floor() as usize).min(self.bins.len() - 1))
    }
}

/// Time spectrum pairing every B detection with its nearest A detection inside
/// the range. A detections may be reused.
pub fn build_time_spectrum(
    a: &DetectionStream,
    b: &DetectionStream,
    range_lo: f64,
    range_hi: f64,
    bin_width: f64,
) -> Result<TimeSpectrum> {
    if !(bin_width > 0.0 && bin_width.is_finite()) {
        return Err(Error::PreconditionViolation(format!("bin width {bin_width} must be > 0")));
    }
    if range_lo >= range_hi || range_lo.is_nan() || range_hi.is_nan() {
        return Err(Error::PreconditionViolation("range_lo must be below range_hi".into()));
    }
    let n = ((range_hi - range_lo) / bin_width).ceil() as usize;
    let truth = a.truth().zip(b.truth());
    let mut spectrum = TimeSpectrum {
        bin_width,
        range_lo,
        range_hi,
        bins: vec![0; n],
        correlated: if truth.is_some() { vec![0; n] } else { Vec::new() },
    };
    let ta = a.timestamps();
    for (j, &tb) in b.timestamps().iter().enumerate() {
        // eligible A: range_lo <= tb - ta < range_hi, a contiguous index block
        let first = ta.partition_point(|&t| tb - t >= range_hi);
        let end = ta.partition_point(|&t| tb - t >= range_lo);
        if first >= end {
            continue;
        }
        let split = ta.partition_point(|&t| t <= tb).clamp(first, end);
        let before = (split > first).then(|| split - 1);
        let after = (split < end).then_some(split);
        let i = match (before, after) {
            (Some(p), Some(q)) => {
                if tb - ta[p] <= ta[q] - tb {
                    p
                } else {
                    q
                }
            }
            (Some(p), None) => p,
            (None, Some(q)) => q,
            (None, None) => continue,
        };
        let Some(bin) = spectrum.bin_of(tb - ta[i]) else { continue };
        spectrum.bins[bin] += 1;
        if let Some((tra, trb)) = truth {
            if matches!((tra[i].emission_id(), trb[j].emission_id()), (Some(x), Some(y)) if x == y) {
                spectrum.correlated[bin] += 1;
            }
        }
    }
    Ok(spectrum)
}

/// Accidental estimate by delaying stream A far enough to break every
/// same-emission pairing and recounting with the same window.
pub fn estimate_accidentals_delay(
    a: &DetectionStream,
    b: &DetectionStream,
    delay: f64,
    window_lo: f64,
    window_hi: f64,
) -> Result<usize> {
    check_delay(delay, window_lo, window_hi)?;
    Ok(count_coincidences(&a.shifted(delay), b, window_lo, window_hi))
}

/// Accidental estimate from the singles rates: `rA · rB · window · duration`.
pub fn estimate_accidentals_singles(
    rate_a: f64,
    rate_b: f64,
    window_lo: f64,
    window_hi: f64,
    duration: f64,
) -> Result<f64> {
    for (name, v) in [("rateA", rate_a), ("rateB", rate_b), ("duration", duration)] {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(Error::PreconditionViolation(format!("{name} = {v} must be >= 0")));
        }
    }
    if window_hi < window_lo || window_lo.is_nan() || window_hi.is_nan() {
        return Err(Error::PreconditionViolation("window_hi < window_lo".into()));
    }
    Ok(rate_a * rate_b * (window_hi - window_lo) * duration)
}

/// Counting results for one simulated run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSummary {
    pub emissions: u64,
    pub singles_a: usize,
    pub singles_b: usize,
    pub coincidences: usize,
    /// Coincidences made of two detections of the same emission.
    pub true_coincidences: usize,
    pub accidentals_delay: usize,
    pub duration: f64,
}

impl RunSummary {
    pub fn rate_a(&self) -> f64 {
        rate(self.singles_a, self.duration)
    }

    pub fn rate_b(&self) -> f64 {
        rate(self.singles_b, self.duration)
    }
}

fn rate(count: usize, duration: f64) -> f64 {
    if duration > 0.0 {
        count as f64 / duration
    } else {
        0.0
    }
}

pub fn summarize_run(streams: &RunStreams, run: &RunConfig) -> Result<RunSummary> {
    let (lo, hi) = (run.window_lo, run.window_hi);
    Ok(RunSummary {
        emissions: streams.emissions,
        singles_a: streams.a.len(),
        singles_b: streams.b.len(),
        coincidences: count_coincidences(&streams.a, &streams.b, lo, hi),
        true_coincidences: count_true_coincidences(&streams.a, &streams.b, lo, hi).unwrap_or(0),
        accidentals_delay: estimate_accidentals_delay(&streams.a, &streams.b, run.accidental_delay, lo, hi)?,
        duration: run.duration,
    })
}

/// Simulate and summarise one run in a single call.
pub fn simulate_and_summarize(
    source: &SourceConfig,
    det_a: &DetectorConfig,
    det_b: &DetectorConfig,
    run: &RunConfig,
    setting: u32,
) -> Result<RunSummary> {
    let streams = simulate_setting(source, det_a, det_b, run, setting)?;
    summarize_run(&streams, run)
}

/// The polariser settings of a scan: every relative angle, then `z` and `Z`.
/// Arm A keeps the base axis (0° if the base run has it absent).
pub fn scan_settings(base_run: &RunConfig, relative_angles_deg: &[f64]) -> Vec<(Setting, RunConfig)> {
    let axis = match base_run.arm_a {
        PolarizerSetting::Present(a) => a,
        PolarizerSetting::Absent => Angle::ZERO,
    };
    let at = |arm_a, arm_b| RunConfig { arm_a, arm_b, ..*base_run };
    let present = PolarizerSetting::Present(axis);
    relative_angles_deg
        .iter()
        .map(|&d| (Setting::Relative(d), at(present, PolarizerSetting::Present(axis + Angle::from_degrees(d)))))
        .chain([
            (Setting::OneAbsent, at(present, PolarizerSetting::Absent)),
            (Setting::BothAbsent, at(PolarizerSetting::Absent, PolarizerSetting::Absent)),
        ])
        .collect()
}

/// Runs every scan setting (in parallel, each on its own generator stream)
/// and returns summaries in setting order.
pub fn run_scan_summaries(
    source: &SourceConfig,
    det_a: &DetectorConfig,
    det_b: &DetectorConfig,
    base_run: &RunConfig,
    relative_angles_deg: &[f64],
) -> Result<Vec<(Setting, RunSummary)>> {
    if relative_angles_deg.is_empty() {
        return Err(Error::PreconditionViolation("no relative angles to scan".into()));
    }
    let settings = scan_settings(base_run, relative_angles_deg);
    std::thread::scope(|s| {
        let handles: Vec<_> = settings
            .iter()
            .enumerate()
            .map(|(i, (setting, run))| {
                s.spawn(move || simulate_and_summarize(source, det_a, det_b, run, i as u32).map(|r| (*setting, r)))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("scan worker panicked")).collect()
    })
}

/// A full angle scan assembled into a counts table with delay-method
/// accidentals and singles rates on every row.
pub fn run_angle_scan(
    source: &SourceConfig,
    det_a: &DetectorConfig,
    det_b: &DetectorConfig,
    base_run: &RunConfig,
    relative_angles_deg: &[f64],
) -> Result<CountsTable> {
    let summaries = run_scan_summaries(source, det_a, det_b, base_run, relative_angles_deg)?;
    CountsTable::from_rows(summaries.into_iter().map(|(setting, s)| {
        CountsRow::new(setting, s.coincidences as f64)
            .with_accidentals(s.accidentals_delay as f64)
            .with_singles(s.rate_a(), s.rate_b())
    }))
}
