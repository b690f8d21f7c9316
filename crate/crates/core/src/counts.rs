//! Coincidence tables: counts (or rates, or probabilities) per polariser setting.

use std::fmt;

use crate::error::{Error, Result};

/// Relative angles closer than this (in degrees) name the same setting.
pub const ANGLE_MATCH_DEG: f64 = 1e-9;

/// Relative angle of the `x` entry used by the Bell statistics.
pub const X_ANGLE_DEG: f64 = 22.5;
/// Relative angle of the `y` entry.
pub const Y_ANGLE_DEG: f64 = 67.5;

/// Which configuration a row of counts was taken at.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Setting {
    /// Both polarisers present, axes `deg` degrees apart.
    Relative(f64),
    /// One polariser removed (`z`).
    OneAbsent,
    /// Both polarisers removed (`Z`).
    BothAbsent,
}

impl Setting {
    fn rank(&self) -> (u8, f64) {
        match *self {
            Setting::Relative(d) => (0, d),
            Setting::OneAbsent => (1, 0.0),
            Setting::BothAbsent => (2, 0.0),
        }
    }

    pub fn matches(&self, other: &Setting) -> bool {
        match (self, other) {
            (Setting::Relative(a), Setting::Relative(b)) => (a - b).abs() <= ANGLE_MATCH_DEG,
            (Setting::OneAbsent, Setting::OneAbsent) | (Setting::BothAbsent, Setting::BothAbsent) => true,
            _ => false,
        }
    }
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Setting::Relative(d) => write!(f, "phi:{d}"),
            Setting::OneAbsent => f.write_str("z"),
            Setting::BothAbsent => f.write_str("Z"),
        }
    }
}

impl std::str::FromStr for Setting {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "z" => Ok(Setting::OneAbsent),
            "Z" => Ok(Setting::BothAbsent),
            _ => {
                let deg = s
                    .strip_prefix("phi:")
                    .ok_or_else(|| format!("unknown setting `{s}`"))?
                    .parse::<f64>()
                    .map_err(|e| format!("bad angle in `{s}`: {e}"))?;
                if !deg.is_finite() {
                    return Err(format!("bad angle in `{s}`"));
                }
                Ok(Setting::Relative(deg))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CountsRow {
    pub setting: Setting,
    pub coincidences: f64,
    pub accidentals: Option<f64>,
    /// Singles rate of detector A, counts per second.
    pub singles_a: Option<f64>,
    pub singles_b: Option<f64>,
}

impl CountsRow {
    pub fn new(setting: Setting, coincidences: f64) -> Self {
        CountsRow { setting, coincidences, accidentals: None, singles_a: None, singles_b: None }
    }

    pub fn with_accidentals(mut self, accidentals: f64) -> Self {
        self.accidentals = Some(accidentals);
        self
    }

    pub fn with_singles(mut self, a: f64, b: f64) -> Self {
        self.singles_a = Some(a);
        self.singles_b = Some(b);
        self
    }

    fn validate(&self) -> Result<()> {
        let key = self.setting.to_string();
        let fields = [
            ("coincidences", Some(self.coincidences)),
            ("accidentals", self.accidentals),
            ("singlesA", self.singles_a),
            ("singlesB", self.singles_b),
        ];
        for (name, v) in fields {
            if let Some(v) = v {
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::PreconditionViolation(format!("{key} {name} = {v} must be finite and >= 0")));
                }
            }
        }
        Ok(())
    }
}

/// Rows ordered by relative angle, then `z`, then `Z`. Each setting appears at
/// most once and every value is non-negative.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CountsTable {
    rows: Vec<CountsRow>,
}

impl CountsTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_rows(rows: impl IntoIterator<Item = CountsRow>) -> Result<Self> {
        let mut t = CountsTable::new();
        for r in rows {
            t.insert(r)?;
        }
        Ok(t)
    }

    pub fn insert(&mut self, row: CountsRow) -> Result<()> {
        row.validate()?;
        if self.get(&row.setting).is_some() {
            return Err(Error::PreconditionViolation(format!("duplicate setting {}", row.setting)));
        }
        let pos = self
            .rows
            .partition_point(|r| r.setting.rank().partial_cmp(&row.setting.rank()) == Some(std::cmp::Ordering::Less));
        self.rows.insert(pos, row);
        Ok(())
    }

    pub fn rows(&self) -> &[CountsRow] {
        &self.rows
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn get(&self, setting: &Setting) -> Option<&CountsRow> {
        self.rows.iter().find(|r| r.setting.matches(setting))
    }

    /// Coincidences at `setting`, or [`Error::MissingSetting`].
    pub fn coincidences(&self, setting: Setting) -> Result<f64> {
        self.get(&setting).map(|r| r.coincidences).ok_or_else(|| Error::MissingSetting(setting.to_string()))
    }

    pub fn angle_rows(&self) -> impl Iterator<Item = &CountsRow> {
        self.rows.iter().filter(|r| matches!(r.setting, Setting::Relative(_)))
    }

    pub fn x(&self) -> Result<f64> {
        self.coincidences(Setting::Relative(X_ANGLE_DEG))
    }

    pub fn y(&self) -> Result<f64> {
        self.coincidences(Setting::Relative(Y_ANGLE_DEG))
    }

    pub fn z(&self) -> Result<f64> {
        self.coincidences(Setting::OneAbsent)
    }

    pub fn big_z(&self) -> Result<f64> {
        self.coincidences(Setting::BothAbsent)
    }

    pub fn has_accidentals(&self) -> bool {
        self.rows.iter().any(|r| r.accidentals.is_some())
    }

    /// Every count, accidental and singles rate multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        let scale = |v: Option<f64>| v.map(|v| v * factor);
        CountsTable::from_rows(self.rows.iter().map(|r| CountsRow {
            setting: r.setting,
            coincidences: r.coincidences * factor,
            accidentals: scale(r.accidentals),
            singles_a: scale(r.singles_a),
            singles_b: scale(r.singles_b),
        }))
    }

    /// Sum of accidentals over sum of coincidences, across rows that carry both.
    pub fn accidental_fraction(&self) -> Option<f64> {
        let (acc, raw) = self
            .rows
            .iter()
            .filter_map(|r| r.accidentals.map(|a| (a, r.coincidences)))
            .fold((0.0, 0.0), |(sa, sr), (a, r)| (sa + a, sr + r));
        (raw > 0.0).then(|| acc / raw)
    }
}

/// The raw counts of the 1981 single-channel experiment: relative angles
/// 0–90° in 22.5° steps, then `z` and `Z`, with the accidental estimates.
pub fn aspect_1981_raw() -> CountsTable {
    let rows = [
        (Setting::Relative(0.0), 96.0, 23.0),
        (Setting::Relative(22.5), 87.0, 23.0),
        (Setting::Relative(45.0), 63.0, 23.0),
        (Setting::Relative(67.5), 38.0, 23.0),
        (Setting::Relative(90.0), 28.0, 23.0),
        (Setting::OneAbsent, 126.0, 46.0),
        (Setting::BothAbsent, 248.0, 90.0),
    ];
    CountsTable::from_rows(rows.into_iter().map(|(s, c, a)| CountsRow::new(s, c).with_accidentals(a)))
        .expect("fixture is valid")
}

/// The adjusted row as published alongside [`aspect_1981_raw`]. Its `z` entry
/// (81) differs by one from `126 − 46`.
pub fn aspect_1981_published_adjusted() -> CountsTable {
    let rows = [
        (Setting::Relative(0.0), 73.0),
        (Setting::Relative(22.5), 64.0),
        (Setting::Relative(45.0), 40.0),
        (Setting::Relative(67.5), 16.0),
        (Setting::Relative(90.0), 5.0),
        (Setting::OneAbsent, 81.0),
        (Setting::BothAbsent, 158.0),
    ];
    CountsTable::from_rows(rows.into_iter().map(|(s, c)| CountsRow::new(s, c))).expect("fixture is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_are_kept_in_setting_order() {
        let t = CountsTable::from_rows([
            CountsRow::new(Setting::BothAbsent, 4.0),
            CountsRow::new(Setting::Relative(67.5), 1.0),
            CountsRow::new(Setting::OneAbsent, 2.0),
            CountsRow::new(Setting::Relative(22.5), 3.0),
        ])
        .unwrap();
        let order: Vec<String> = t.rows().iter().map(|r| r.setting.to_string()).collect();
        assert_eq!(order, ["phi:22.5", "phi:67.5", "z", "Z"]);
        assert_eq!(t.x().unwrap(), 3.0);
        assert_eq!(t.big_z().unwrap(), 4.0);
    }

    #[test]
    fn rejects_duplicates_and_negatives() {
        let mut t = CountsTable::new();
        t.insert(CountsRow::new(Setting::Relative(45.0), 1.0)).unwrap();
        assert!(t.insert(CountsRow::new(Setting::Relative(45.0 + 1e-12), 2.0)).is_err());
        assert!(t.insert(CountsRow::new(Setting::OneAbsent, -1.0)).is_err());
        assert!(t.insert(CountsRow::new(Setting::OneAbsent, f64::NAN)).is_err());
    }

    #[test]
    fn missing_setting_is_named() {
        let t = CountsTable::new();
        assert_eq!(t.big_z(), Err(Error::MissingSetting("Z".into())));
        assert_eq!(t.x(), Err(Error::MissingSetting("phi:22.5".into())));
    }

    #[test]
    fn setting_text_form() {
        for s in ["phi:0", "phi:22.5", "phi:-10", "z", "Z"] {
            assert_eq!(s.parse::<Setting>().unwrap().to_string(), s);
        }
        assert!("phi:abc".parse::<Setting>().is_err());
        assert!("x".parse::<Setting>().is_err());
        assert!("phi:inf".parse::<Setting>().is_err());
    }

    #[test]
    fn fixture_accidental_fraction() {
        let f = aspect_1981_raw().accidental_fraction().unwrap();
        assert!((f - 251.0 / 686.0).abs() < 1e-12);
        assert_eq!(aspect_1981_published_adjusted().accidental_fraction(), None);
    }
}
