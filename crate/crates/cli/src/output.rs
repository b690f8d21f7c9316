//! Text rendering for command output.

use bellsim::formats::FORMAT_LINE;
use bellsim::BellResult;

/// A number rounded to `places` decimals with trailing zeros (and a bare
/// trailing point) removed: `-0.117`, `0`, `2`, `0.707`.
pub fn trimmed(v: f64, places: usize) -> String {
    let s = format!("{v:.places$}");
    let s = if s.contains('.') { s.trim_end_matches('0').trim_end_matches('.') } else { &s };
    match s {
        "-0" => "0".to_string(),
        s => s.to_string(),
    }
}

/// `name,value,limit,violated` with three-decimal values.
pub fn result_line(r: &BellResult) -> String {
    format!("{},{},{},{}", r.statistic.name(), trimmed(r.value, 3), trimmed(r.limit, 3), r.violated)
}

/// Angles print in their shortest exact form: `90`, `22.5`.
pub fn degrees(d: f64) -> String {
    if d == 0.0 {
        "0".to_string()
    } else {
        d.to_string()
    }
}

/// The `phi_deg,probability` table printed by `predict`.
pub fn prediction_csv(rows: &[(f64, f64)]) -> String {
    let mut out = format!("{FORMAT_LINE}\nphi_deg,probability\n");
    for (phi, p) in rows {
        out.push_str(&format!("{},{p:.9}\n", degrees(*phi)));
    }
    out
}

/// The `phi_deg,rate` table written by `analyze --emit-curve`.
pub fn curve_csv(rows: &[(f64, f64)]) -> String {
    let mut out = format!("{FORMAT_LINE}\nphi_deg,rate\n");
    for (phi, rate) in rows {
        out.push_str(&format!("{},{rate}\n", degrees(*phi)));
    }
    out
}

/// The `dt_ns,count,correlated` table written by `spectrum`.
pub fn spectrum_csv(sp: &bellsim::TimeSpectrum) -> String {
    let mut out = format!("{FORMAT_LINE}\ndt_ns,count,correlated\n");
    for (i, &c) in sp.bins.iter().enumerate() {
        let correlated = sp.correlated.get(i).map(|c| c.to_string()).unwrap_or_default();
        out.push_str(&format!("{},{c},{correlated}\n", trimmed(sp.bin_start(i) * 1e9, 6)));
    }
    out
}
