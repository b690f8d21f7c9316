//! Bell test statistics for rotationally invariant, symmetric, single-channel
//! experiments, accidental subtraction, and the Clauser–Horne inequality checks.
//!
//! With `x = R(22.5°)`, `y = R(67.5°)`, `z = R(a, ∞)`, `Z = R(∞, ∞)`:
//!
//! | statistic  | value                   | local limit | assumption     |
//! |------------|-------------------------|-------------|----------------|
//! | standard   | `4(x − y)/(x + y)`      | 2           | fair sampling  |
//! | visibility | `(max − min)/(max + min)` | 1/√2      | fair sampling  |
//! | CHSH       | `(3x − y − 2z)/Z`       | 0           | no enhancement |
//! | Freedman   | `(x − y)/Z`             | 1/4         | no enhancement |
//!
//! All four are ratios, so counts, rates and probabilities may be mixed
//! freely as long as one table uses one unit.

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;

use crate::counts::{CountsRow, CountsTable};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Statistic {
    Std,
    Visibility,
    Chsh,
    Freedman,
}

impl Statistic {
    pub const ALL: [Statistic; 4] = [Statistic::Std, Statistic::Visibility, Statistic::Chsh, Statistic::Freedman];

    pub fn limit(self) -> f64 {
        match self {
            Statistic::Std => 2.0,
            Statistic::Visibility => FRAC_1_SQRT_2,
            Statistic::Chsh => 0.0,
            Statistic::Freedman => 0.25,
        }
    }

    pub fn assumption(self) -> Assumption {
        match self {
            Statistic::Std | Statistic::Visibility => Assumption::FairSampling,
            Statistic::Chsh | Statistic::Freedman => Assumption::NoEnhancement,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Statistic::Std => "std",
            Statistic::Visibility => "visibility",
            Statistic::Chsh => "chsh",
            Statistic::Freedman => "freedman",
        }
    }

    /// Evaluates this statistic on a table.
    pub fn evaluate(self, table: &CountsTable) -> Result<BellResult> {
        match self {
            Statistic::Std => s_std(table.x()?, table.y()?),
            Statistic::Visibility => s_visibility_table(table),
            Statistic::Chsh => s_chsh(table),
            Statistic::Freedman => s_freedman(table),
        }
    }
}

impl fmt::Display for Statistic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Statistic {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Statistic::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| format!("unknown test `{s}` (expected std, visibility, chsh or freedman)"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Assumption {
    FairSampling,
    NoEnhancement,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BellResult {
    pub statistic: Statistic,
    pub value: f64,
    pub limit: f64,
    pub assumption: Assumption,
    pub violated: bool,
}

impl BellResult {
    pub fn new(statistic: Statistic, value: f64) -> Self {
        let limit = statistic.limit();
        BellResult { statistic, value, limit, assumption: statistic.assumption(), violated: value > limit }
    }
}

impl fmt::Display for BellResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} = {:.4} (limit {:.4}, {:?}){}",
            self.statistic,
            self.value,
            self.limit,
            self.assumption,
            if self.violated { " VIOLATED" } else { "" }
        )
    }
}

fn nonneg(name: &str, v: f64) -> Result<()> {
    if !v.is_finite() || v < 0.0 {
        return Err(Error::PreconditionViolation(format!("{name} = {v} must be finite and >= 0")));
    }
    Ok(())
}

pub fn s_std(x: f64, y: f64) -> Result<BellResult> {
    nonneg("x", x)?;
    nonneg("y", y)?;
    if x + y == 0.0 {
        return Err(Error::DegenerateInput("x + y = 0".into()));
    }
    Ok(BellResult::new(Statistic::Std, 4.0 * (x - y) / (x + y)))
}

pub fn s_visibility(max: f64, min: f64) -> Result<BellResult> {
    nonneg("min", min)?;
    nonneg("max", max)?;
    if max < min {
        return Err(Error::PreconditionViolation(format!("max {max} < min {min}")));
    }
    if max + min == 0.0 {
        return Err(Error::DegenerateInput("max + min = 0".into()));
    }
    Ok(BellResult::new(Statistic::Visibility, (max - min) / (max + min)))
}

/// Visibility of the relative-angle rows of a table.
pub fn s_visibility_table(table: &CountsTable) -> Result<BellResult> {
    let mut rows = table.angle_rows().map(|r| r.coincidences).peekable();
    if rows.peek().is_none() {
        return Err(Error::MissingSetting("phi:*".into()));
    }
    let (min, max) = rows.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    s_visibility(max, min)
}

fn normalizer(table: &CountsTable) -> Result<f64> {
    let z = table.big_z()?;
    if z == 0.0 {
        return Err(Error::DegenerateInput("Z = 0".into()));
    }
    Ok(z)
}

pub fn s_chsh(table: &CountsTable) -> Result<BellResult> {
    let (x, y, z) = (table.x()?, table.y()?, table.z()?);
    let big_z = normalizer(table)?;
    Ok(BellResult::new(Statistic::Chsh, (3.0 * x - y - 2.0 * z) / big_z))
}

pub fn s_freedman(table: &CountsTable) -> Result<BellResult> {
    let (x, y) = (table.x()?, table.y()?);
    let big_z = normalizer(table)?;
    Ok(BellResult::new(Statistic::Freedman, (x - y) / big_z))
}

/// Subtracts each row's accidental estimate from its coincidences. Rows
/// without an estimate are an error, as is any row that would go negative;
/// nothing is clamped.
pub fn subtract_accidentals(table: &CountsTable) -> Result<CountsTable> {
    let rows = table
        .rows()
        .iter()
        .map(|r| {
            let acc = r
                .accidentals
                .ok_or_else(|| Error::PreconditionViolation(format!("no accidental estimate for {}", r.setting)))?;
            let value = r.coincidences - acc;
            if value < 0.0 {
                return Err(Error::NegativeResult { key: r.setting.to_string(), value });
            }
            Ok(CountsRow { accidentals: None, coincidences: value, ..r.clone() })
        })
        .collect::<Result<Vec<_>>>()?;
    CountsTable::from_rows(rows)
}

/// Coincidence and singles probabilities at the four settings `a, a′, b, b′`,
/// optionally with the polariser-absent coincidences.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ProbabilityQuad {
    pub p12_ab: f64,
    pub p12_ab_prime: f64,
    pub p12_a_prime_b: f64,
    pub p12_a_prime_b_prime: f64,
    pub p1_a_prime: f64,
    pub p2_b: f64,
    pub p12_a_prime_inf: Option<f64>,
    pub p12_inf_b: Option<f64>,
    pub p12_inf_inf: Option<f64>,
}

impl ProbabilityQuad {
    /// Rotationally invariant quad at spacing φ: `p12(φ)` three times, `p12(3φ)` once.
    pub fn symmetric(p_phi: f64, p_3phi: f64, p1: f64, p2: f64) -> Self {
        ProbabilityQuad {
            p12_ab: p_phi,
            p12_ab_prime: p_3phi,
            p12_a_prime_b: p_phi,
            p12_a_prime_b_prime: p_phi,
            p1_a_prime: p1,
            p2_b: p2,
            ..Default::default()
        }
    }

    pub fn with_absent(mut self, a_prime_inf: f64, inf_b: f64, inf_inf: f64) -> Self {
        self.p12_a_prime_inf = Some(a_prime_inf);
        self.p12_inf_b = Some(inf_b);
        self.p12_inf_inf = Some(inf_inf);
        self
    }

    fn validate(&self) -> Result<()> {
        let fields = [
            ("p12(a,b)", Some(self.p12_ab)),
            ("p12(a,b')", Some(self.p12_ab_prime)),
            ("p12(a',b)", Some(self.p12_a_prime_b)),
            ("p12(a',b')", Some(self.p12_a_prime_b_prime)),
            ("p1(a')", Some(self.p1_a_prime)),
            ("p2(b)", Some(self.p2_b)),
            ("p12(a',inf)", self.p12_a_prime_inf),
            ("p12(inf,b)", self.p12_inf_b),
            ("p12(inf,inf)", self.p12_inf_inf),
        ];
        for (name, v) in fields {
            if let Some(v) = v {
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::PreconditionViolation(format!("{name} = {v} outside [0, 1]")));
                }
            }
        }
        Ok(())
    }

    fn correlation_sum(&self) -> f64 {
        self.p12_ab - self.p12_ab_prime + self.p12_a_prime_b + self.p12_a_prime_b_prime
    }
}

/// Outcome of a two-sided inequality `lower ≤ value ≤ upper`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundsReport {
    pub value: f64,
    pub lower: f64,
    pub upper: f64,
    pub satisfied: bool,
    /// `value / p12(∞,∞)` for the no-enhancement form; comparable to S_C.
    pub normalized: Option<f64>,
}

impl BoundsReport {
    fn new(value: f64, lower: f64, upper: f64) -> Self {
        BoundsReport { value, lower, upper, satisfied: lower <= value && value <= upper, normalized: None }
    }

    pub fn upper_violated(&self) -> bool {
        self.value > self.upper
    }
}

/// `−1 ≤ p12(a,b) − p12(a,b′) + p12(a′,b) + p12(a′,b′) − p1(a′) − p2(b) ≤ 0`.
///
/// Holds for every factorable model whatever the detector efficiencies.
pub fn check_min_assumption_chsh(q: &ProbabilityQuad) -> Result<BoundsReport> {
    q.validate()?;
    Ok(BoundsReport::new(q.correlation_sum() - q.p1_a_prime - q.p2_b, -1.0, 0.0))
}

/// `−p12(∞,∞) ≤ p12(a,b) − p12(a,b′) + p12(a′,b) + p12(a′,b′) − p12(a′,∞) − p12(∞,b) ≤ 0`.
///
/// Requires the polariser-absent fields and the no-enhancement assumption.
pub fn check_no_enhancement_chsh(q: &ProbabilityQuad) -> Result<BoundsReport> {
    q.validate()?;
    let missing = || Error::MissingSetting("polariser-absent probabilities".into());
    let a_inf = q.p12_a_prime_inf.ok_or_else(missing)?;
    let inf_b = q.p12_inf_b.ok_or_else(missing)?;
    let inf_inf = q.p12_inf_inf.ok_or_else(missing)?;
    if inf_inf == 0.0 {
        return Err(Error::DegenerateInput("p12(inf,inf) = 0".into()));
    }
    let value = q.correlation_sum() - a_inf - inf_b;
    let mut report = BoundsReport::new(value, -inf_inf, 0.0);
    report.normalized = Some(value / inf_inf);
    Ok(report)
}

/// The six-number lemma behind both inequalities: for `0 ≤ x1, x2 ≤ X` and
/// `0 ≤ y1, y2 ≤ Y`, `U = x1·y1 − x1·y2 + x2·y1 + x2·y2 − Y·x2 − X·y1` lies in `[−XY, 0]`.
pub fn ch_theorem_u(x1: f64, x2: f64, y1: f64, y2: f64, big_x: f64, big_y: f64) -> Result<BoundsReport> {
    for (name, v, bound) in [("x1", x1, big_x), ("x2", x2, big_x), ("y1", y1, big_y), ("y2", y2, big_y)] {
        if !(v >= 0.0 && v <= bound) {
            return Err(Error::PreconditionViolation(format!("{name} = {v} outside [0, {bound}]")));
        }
    }
    let u = x1 * y1 - x1 * y2 + x2 * y1 + x2 * y2 - big_y * x2 - big_x * y1;
    // the bound is exact in real arithmetic; allow rounding in the products
    let slack = 8.0 * f64::EPSILON * (big_x * big_y).max(1.0);
    let mut report = BoundsReport::new(u, -big_x * big_y, 0.0);
    report.satisfied = u >= report.lower - slack && u <= report.upper + slack;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::counts::{aspect_1981_published_adjusted, aspect_1981_raw, Setting};

    const QT_X: f64 = 0.426_776_695_296_636_9;
    const QT_Y: f64 = 0.073_223_304_703_363_12;
    const LR_X: f64 = 0.338_388_347_648_318_4;
    const LR_Y: f64 = 0.161_611_652_351_681_6;

    fn table(x: f64, y: f64, z: f64, big_z: f64) -> CountsTable {
        CountsTable::from_rows([
            CountsRow::new(Setting::Relative(22.5), x),
            CountsRow::new(Setting::Relative(67.5), y),
            CountsRow::new(Setting::OneAbsent, z),
            CountsRow::new(Setting::BothAbsent, big_z),
        ])
        .unwrap()
    }

    #[test]
    fn std_statistic() {
        assert_eq!(s_std(3.0, 3.0).unwrap().value, 0.0);
        let qt = s_std(QT_X, QT_Y).unwrap();
        assert!((qt.value - 2.0 * 2f64.sqrt()).abs() < 1e-9 && qt.violated);
        let lr = s_std(LR_X, LR_Y).unwrap();
        assert!((lr.value - 2f64.sqrt()).abs() < 1e-9 && !lr.violated);
        assert!(matches!(s_std(0.0, 0.0), Err(Error::DegenerateInput(_))));
    }

    #[test]
    fn visibility_statistic() {
        assert!((s_visibility(96.0, 28.0).unwrap().value - 0.548_387).abs() < 1e-6);
        assert!((s_visibility(73.0, 5.0).unwrap().value - 0.871_795).abs() < 1e-6);
        assert_eq!(s_visibility(7.0, 7.0).unwrap().value, 0.0);
        assert!(matches!(s_visibility(0.0, 0.0), Err(Error::DegenerateInput(_))));
        assert!(s_visibility(1.0, 2.0).is_err());
        assert_eq!(Statistic::Visibility.limit(), FRAC_1_SQRT_2);
    }

    #[test]
    fn chsh_statistic() {
        let raw = s_chsh(&table(87.0, 38.0, 126.0, 248.0)).unwrap();
        assert!((raw.value - -0.121).abs() <= 0.01 && !raw.violated);
        let adj = s_chsh(&table(64.0, 16.0, 81.0, 158.0)).unwrap();
        assert!((adj.value - 0.096).abs() <= 0.01 && adj.violated);
        let qt = s_chsh(&table(QT_X, QT_Y, 0.5, 1.0)).unwrap();
        assert!((qt.value - (2f64.sqrt() - 1.0) / 2.0).abs() < 1e-9);

        let mut no_z = CountsTable::new();
        no_z.insert(CountsRow::new(Setting::Relative(22.5), 1.0)).unwrap();
        no_z.insert(CountsRow::new(Setting::Relative(67.5), 1.0)).unwrap();
        no_z.insert(CountsRow::new(Setting::OneAbsent, 1.0)).unwrap();
        assert_eq!(s_chsh(&no_z), Err(Error::MissingSetting("Z".into())));
        assert!(matches!(s_chsh(&table(0.0, 0.0, 0.0, 0.0)), Err(Error::DegenerateInput(_))));
    }

    #[test]
    fn freedman_statistic() {
        let qt = s_freedman(&table(QT_X, QT_Y, 0.5, 1.0)).unwrap();
        assert!((qt.value - 2f64.sqrt() / 4.0).abs() < 1e-9 && qt.violated);
        let lr = s_freedman(&table(LR_X, LR_Y, 0.5, 1.0)).unwrap();
        assert!((lr.value - 2f64.sqrt() / 8.0).abs() < 1e-9 && !lr.violated);
        assert_eq!(s_freedman(&table(2.0, 2.0, 1.0, 5.0)).unwrap().value, 0.0);
    }

    #[test]
    fn subtraction_of_fixture() {
        let adj = subtract_accidentals(&aspect_1981_raw()).unwrap();
        let published = aspect_1981_published_adjusted();
        assert!(!adj.has_accidentals());
        for (a, p) in adj.rows().iter().zip(published.rows()) {
            assert_eq!(a.setting, p.setting);
            assert!((a.coincidences - p.coincidences).abs() <= 1.0, "{:?}", a.setting);
        }
        assert_eq!(adj.z().unwrap(), 80.0);
        assert_eq!(adj.big_z().unwrap(), 158.0);
        // the input is untouched
        assert_eq!(aspect_1981_raw().z().unwrap(), 126.0);
    }

    #[test]
    fn subtraction_identity_and_errors() {
        let zero = CountsTable::from_rows([
            CountsRow::new(Setting::Relative(0.0), 5.0).with_accidentals(0.0),
            CountsRow::new(Setting::BothAbsent, 9.0).with_accidentals(0.0),
        ])
        .unwrap();
        let out = subtract_accidentals(&zero).unwrap();
        assert_eq!(out.coincidences(Setting::Relative(0.0)).unwrap(), 5.0);
        assert_eq!(out.big_z().unwrap(), 9.0);

        let over =
            CountsTable::from_rows([CountsRow::new(Setting::Relative(90.0), 5.0).with_accidentals(7.0)]).unwrap();
        assert_eq!(subtract_accidentals(&over), Err(Error::NegativeResult { key: "phi:90".into(), value: -2.0 }));

        let bare = CountsTable::from_rows([CountsRow::new(Setting::OneAbsent, 5.0)]).unwrap();
        assert!(subtract_accidentals(&bare).is_err());
    }

    #[test]
    fn min_assumption_checks() {
        let zero = check_min_assumption_chsh(&ProbabilityQuad::default()).unwrap();
        assert_eq!(zero.value, 0.0);
        assert!(zero.satisfied);

        let lr = check_min_assumption_chsh(&ProbabilityQuad::symmetric(LR_X, LR_Y, 0.5, 0.5)).unwrap();
        assert!((lr.value - -0.146_446_609_4).abs() < 1e-9 && lr.satisfied);

        let qt = check_min_assumption_chsh(&ProbabilityQuad::symmetric(QT_X, QT_Y, 0.5, 0.5)).unwrap();
        assert!((qt.value - 0.207_106_781_2).abs() < 1e-9);
        assert!(!qt.satisfied && qt.upper_violated());

        let bad = ProbabilityQuad { p2_b: 1.5, ..Default::default() };
        assert!(check_min_assumption_chsh(&bad).is_err());
    }

    #[test]
    fn no_enhancement_checks() {
        let zero = check_no_enhancement_chsh(&ProbabilityQuad::default().with_absent(0.0, 0.0, 1.0)).unwrap();
        assert_eq!(zero.value, 0.0);
        assert!(zero.satisfied);

        let lr = ProbabilityQuad::symmetric(LR_X, LR_Y, 0.5, 0.5).with_absent(0.5, 0.5, 1.0);
        let r = check_no_enhancement_chsh(&lr).unwrap();
        assert!((r.value - -0.146_446_609_4).abs() < 1e-9 && r.satisfied);
        let sc = s_chsh(&table(LR_X, LR_Y, 0.5, 1.0)).unwrap().value;
        assert!((r.normalized.unwrap() - sc).abs() < 1e-12);

        let z = 248.0;
        let aspect = ProbabilityQuad::symmetric(87.0 / z, 38.0 / z, 0.0, 0.0).with_absent(126.0 / z, 126.0 / z, 1.0);
        let r = check_no_enhancement_chsh(&aspect).unwrap();
        assert!((r.value * z - -29.0).abs() < 1e-9 && r.satisfied);

        assert!(matches!(check_no_enhancement_chsh(&ProbabilityQuad::default()), Err(Error::MissingSetting(_))));
        assert!(matches!(
            check_no_enhancement_chsh(&ProbabilityQuad::default().with_absent(0.0, 0.0, 0.0)),
            Err(Error::DegenerateInput(_))
        ));
    }

    #[test]
    fn six_number_lemma() {
        let r = ch_theorem_u(0.0, 0.0, 0.0, 0.0, 1.0, 1.0).unwrap();
        assert_eq!(r.value, 0.0);
        assert!(r.satisfied);
        let r = ch_theorem_u(1.0, 1.0, 1.0, 1.0, 1.0, 1.0).unwrap();
        assert_eq!(r.value, 0.0);
        assert!(r.satisfied);
        assert!(ch_theorem_u(2.0, 0.0, 0.0, 0.0, 1.0, 1.0).is_err());
        assert!(ch_theorem_u(0.0, 0.0, -0.1, 0.0, 1.0, 1.0).is_err());
        assert!(ch_theorem_u(f64::NAN, 0.0, 0.0, 0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn statistic_names_parse() {
        for s in Statistic::ALL {
            assert_eq!(s.name().parse::<Statistic>().unwrap(), s);
        }
        assert!("bell".parse::<Statistic>().is_err());
    }
}
