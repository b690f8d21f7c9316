//! Closed-form and quadrature coincidence predictions.
//!
//! Two ideal curves are provided in closed form:
//!
//! * quantum, same-channel: `P(φ) = ½ cos²φ`
//! * classical pulses with a uniformly distributed common polarisation λ and
//!   Malus-law detectors: `P(φ) = ⅛ + ¼ cos²φ = ¼ + ⅛ cos 2φ`
//!
//! The second one is the λ-average of a product of single-arm probabilities.
//! [`hv_coincidence_prob`] evaluates that average numerically for arbitrary
//! weights and responses, so the closed form can be checked against it and
//! non-ideal local models can be explored.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::counts::{CountsRow, CountsTable, Setting};
use crate::error::{Error, Result};

/// Default number of midpoint panels on `[0, π)`.
pub const DEFAULT_PANELS: usize = 4096;

/// Fewest panels [`hv_coincidence_prob`] accepts.
pub const MIN_PANELS: usize = 16;

/// Allowed deviation of `∫ weight` from 1.
pub const WEIGHT_NORM_TOLERANCE: f64 = 1e-6;

/// A plane angle. Stored in radians; constructed and displayed in degrees at
/// the edges of the program.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
pub struct Angle(f64);

impl Angle {
    pub const ZERO: Angle = Angle(0.0);

    pub fn from_radians(rad: f64) -> Self {
        Angle(rad)
    }

    pub fn from_degrees(deg: f64) -> Self {
        Angle(deg.to_radians())
    }

    pub fn radians(self) -> f64 {
        self.0
    }

    pub fn degrees(self) -> f64 {
        self.0.to_degrees()
    }

    /// The same direction folded into `[0, π)`. Polariser axes repeat every 180°.
    pub fn axis(self) -> Self {
        let r = self.0.rem_euclid(PI);
        // rem_euclid can round up to exactly π for tiny negative inputs
        Angle(if r >= PI { 0.0 } else { r })
    }
}

impl std::ops::Add for Angle {
    type Output = Angle;
    fn add(self, rhs: Angle) -> Angle {
        Angle(self.0 + rhs.0)
    }
}

impl std::ops::Sub for Angle {
    type Output = Angle;
    fn sub(self, rhs: Angle) -> Angle {
        Angle(self.0 - rhs.0)
    }
}

impl fmt::Display for Angle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}°", self.degrees())
    }
}

/// A polariser in front of a detector, or no polariser at all.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PolarizerSetting {
    Present(Angle),
    Absent,
}

impl PolarizerSetting {
    pub fn degrees(deg: f64) -> Self {
        PolarizerSetting::Present(Angle::from_degrees(deg))
    }
}

/// Common polarisation direction shared by the two pulses of one emission.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HiddenState(Angle);

impl HiddenState {
    pub fn new(lambda: Angle) -> Self {
        HiddenState(lambda.axis())
    }

    pub fn lambda(self) -> Angle {
        self.0
    }
}

/// Quantum prediction for same-channel coincidences at relative angle `phi`.
pub fn qt_coincidence_prob(phi: Angle) -> f64 {
    let c = phi.radians().cos();
    0.5 * c * c
}

/// Closed-form classical-pulse prediction at relative angle `phi`.
pub fn realist_coincidence_prob(phi: Angle) -> f64 {
    0.25 + 0.125 * (2.0 * phi.radians()).cos()
}

/// Malus-law detection probability of one arm for a given λ.
pub fn singles_prob(setting: PolarizerSetting, lambda: HiddenState) -> f64 {
    match setting {
        PolarizerSetting::Absent => 1.0,
        PolarizerSetting::Present(axis) => {
            let c = (lambda.lambda() - axis).radians().cos();
            c * c
        }
    }
}

pub type WeightFn = dyn Fn(f64) -> f64 + Send + Sync;
pub type ResponseFn = dyn Fn(PolarizerSetting, f64) -> f64 + Send + Sync;

/// A factorable local hidden-variable model: a density over λ ∈ [0, π) and
/// one detection-probability function per arm. λ is passed in radians.
#[derive(Clone)]
pub struct HvModelSpec {
    pub weight: Arc<WeightFn>,
    pub response_a: Arc<ResponseFn>,
    pub response_b: Arc<ResponseFn>,
}

impl HvModelSpec {
    pub fn new(
        weight: impl Fn(f64) -> f64 + Send + Sync + 'static,
        response_a: impl Fn(PolarizerSetting, f64) -> f64 + Send + Sync + 'static,
        response_b: impl Fn(PolarizerSetting, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        HvModelSpec { weight: Arc::new(weight), response_a: Arc::new(response_a), response_b: Arc::new(response_b) }
    }

    /// Uniform λ and Malus-law responses on both arms.
    pub fn malus_uniform() -> Self {
        let malus = |s: PolarizerSetting, l: f64| singles_prob(s, HiddenState::new(Angle::from_radians(l)));
        HvModelSpec::new(|_| 1.0 / PI, malus, malus)
    }
}

impl Default for HvModelSpec {
    fn default() -> Self {
        HvModelSpec::malus_uniform()
    }
}

impl fmt::Debug for HvModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("HvModelSpec { .. }")
    }
}

/// Which side of the apparatus a response belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arm {
    A,
    B,
}

fn midpoint_nodes(panels: usize) -> impl Iterator<Item = (f64, f64)> {
    let h = PI / panels as f64;
    (0..panels).map(move |i| ((i as f64 + 0.5) * h, h))
}

fn check_panels(panels: usize) -> Result<()> {
    if panels < MIN_PANELS {
        return Err(Error::PreconditionViolation(format!(
            "quadrature needs at least {MIN_PANELS} panels, got {panels}"
        )));
    }
    Ok(())
}

fn checked_weight(spec: &HvModelSpec, lambda: f64) -> Result<f64> {
    let w = (spec.weight)(lambda);
    if !w.is_finite() || w < 0.0 {
        return Err(Error::InvalidSpec(format!("weight({lambda}) = {w}")));
    }
    Ok(w)
}

fn checked_response(f: &ResponseFn, arm: Arm, setting: PolarizerSetting, lambda: f64) -> Result<f64> {
    let r = f(setting, lambda);
    if !(0.0..=1.0).contains(&r) {
        return Err(Error::InvalidSpec(format!("response {arm:?}({setting:?}, {lambda}) = {r} outside [0, 1]")));
    }
    Ok(r)
}

/// Midpoint-rule integral of the weight over `[0, π)`.
pub fn weight_integral(spec: &HvModelSpec, panels: usize) -> Result<f64> {
    check_panels(panels)?;
    midpoint_nodes(panels).try_fold(0.0, |acc, (l, h)| Ok(acc + checked_weight(spec, l)? * h))
}

fn integrate(spec: &HvModelSpec, panels: usize, mut integrand: impl FnMut(f64) -> Result<f64>) -> Result<f64> {
    check_panels(panels)?;
    let mut norm = 0.0;
    let mut total = 0.0;
    for (l, h) in midpoint_nodes(panels) {
        let w = checked_weight(spec, l)?;
        norm += w * h;
        total += w * integrand(l)? * h;
    }
    if (norm - 1.0).abs() > WEIGHT_NORM_TOLERANCE {
        return Err(Error::InvalidSpec(format!("weight integrates to {norm}, not 1")));
    }
    Ok(total.clamp(0.0, 1.0))
}

/// λ-averaged coincidence probability of a factorable model, by the midpoint
/// rule with `panels` equal subintervals of `[0, π)`.
///
/// The integrand is π-periodic and smooth for the usual models, where the
/// midpoint rule converges geometrically.
pub fn hv_coincidence_prob(
    spec: &HvModelSpec,
    setting_a: PolarizerSetting,
    setting_b: PolarizerSetting,
    panels: usize,
) -> Result<f64> {
    integrate(spec, panels, |l| {
        let pa = checked_response(&*spec.response_a, Arm::A, setting_a, l)?;
        let pb = checked_response(&*spec.response_b, Arm::B, setting_b, l)?;
        Ok(pa * pb)
    })
}

/// λ-averaged single-arm detection probability.
pub fn hv_singles_prob(spec: &HvModelSpec, arm: Arm, setting: PolarizerSetting, panels: usize) -> Result<f64> {
    let f = match arm {
        Arm::A => &spec.response_a,
        Arm::B => &spec.response_b,
    };
    integrate(spec, panels, |l| checked_response(&**f, arm, setting, l))
}

/// An analytic source of coincidence probabilities.
#[derive(Debug, Clone)]
pub enum PredictionModel {
    Qt,
    RealistClosedForm,
    GeneralHv(HvModelSpec),
}

impl PredictionModel {
    /// Coincidence probability with both polarisers present at relative angle `phi`.
    pub fn coincidence(&self, phi: Angle) -> Result<f64> {
        match self {
            PredictionModel::Qt => Ok(qt_coincidence_prob(phi)),
            PredictionModel::RealistClosedForm => Ok(realist_coincidence_prob(phi)),
            PredictionModel::GeneralHv(spec) => hv_coincidence_prob(
                spec,
                PolarizerSetting::Present(Angle::ZERO),
                PolarizerSetting::Present(phi),
                DEFAULT_PANELS,
            ),
        }
    }

    /// Coincidence probability with the B polariser removed.
    pub fn one_absent(&self) -> Result<f64> {
        match self {
            PredictionModel::Qt | PredictionModel::RealistClosedForm => Ok(0.5),
            PredictionModel::GeneralHv(spec) => hv_coincidence_prob(
                spec,
                PolarizerSetting::Present(Angle::ZERO),
                PolarizerSetting::Absent,
                DEFAULT_PANELS,
            ),
        }
    }

    /// Coincidence probability with both polarisers removed.
    pub fn both_absent(&self) -> Result<f64> {
        match self {
            PredictionModel::Qt | PredictionModel::RealistClosedForm => Ok(1.0),
            PredictionModel::GeneralHv(spec) => {
                hv_coincidence_prob(spec, PolarizerSetting::Absent, PolarizerSetting::Absent, DEFAULT_PANELS)
            }
        }
    }
}

/// Evaluates `model` at each relative angle plus the one- and both-absent
/// configurations, giving a probability table shaped like measured counts.
pub fn model_counts_table(model: &PredictionModel, angles: &[Angle]) -> Result<CountsTable> {
    if angles.is_empty() {
        return Err(Error::PreconditionViolation("no angles given".into()));
    }
    let mut table = CountsTable::new();
    for &phi in angles {
        table.insert(CountsRow::new(Setting::Relative(phi.degrees()), model.coincidence(phi)?))?;
    }
    table.insert(CountsRow::new(Setting::OneAbsent, model.one_absent()?))?;
    table.insert(CountsRow::new(Setting::BothAbsent, model.both_absent()?))?;
    Ok(table)
}
