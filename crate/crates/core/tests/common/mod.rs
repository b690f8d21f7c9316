//! Helpers shared by the integration suites: random model and table
//! generators, and a brute-force matching oracle.

#![allow(dead_code)]

use std::f64::consts::PI;

use bellsim::analytic::{hv_coincidence_prob, hv_singles_prob, Arm, DEFAULT_PANELS};
use bellsim::bellstats::ProbabilityQuad;
use bellsim::{Angle, CountsRow, CountsTable, HvModelSpec, PolarizerSetting, Setting};
use rand::Rng;

/// Parameters of a random factorable model:
/// density `(1 + ε·cos 2(λ − θ)) / π` and, per arm, a response
/// `η·(c + (1 − c)·cos²(λ − axis))` with polariser present and `η` absent.
#[derive(Debug, Clone, Copy)]
pub struct ModelParams {
    pub epsilon: f64,
    pub theta: f64,
    pub eta_a: f64,
    pub eta_b: f64,
    pub floor_a: f64,
    pub floor_b: f64,
}

impl ModelParams {
    pub fn random(rng: &mut impl Rng) -> Self {
        ModelParams {
            epsilon: rng.random_range(-0.95..0.95),
            theta: rng.random_range(0.0..PI),
            eta_a: rng.random_range(0.0..=1.0),
            eta_b: rng.random_range(0.0..=1.0),
            floor_a: rng.random_range(0.0..=1.0),
            floor_b: rng.random_range(0.0..=1.0),
        }
    }

    pub fn spec(self) -> HvModelSpec {
        let response = |eta: f64, floor: f64| {
            move |s: PolarizerSetting, l: f64| match s {
                PolarizerSetting::Absent => eta,
                PolarizerSetting::Present(axis) => {
                    let c = (l - axis.radians()).cos();
                    eta * (floor + (1.0 - floor) * c * c)
                }
            }
        };
        let (eps, theta) = (self.epsilon, self.theta);
        HvModelSpec::new(
            move |l| (1.0 + eps * (2.0 * (l - theta)).cos()) / PI,
            response(self.eta_a, self.floor_a),
            response(self.eta_b, self.floor_b),
        )
    }
}

fn present(deg: f64) -> PolarizerSetting {
    PolarizerSetting::Present(Angle::from_degrees(deg))
}

/// Every probability entering the CHSH-type inequalities for settings
/// `a, a′` on arm A and `b, b′` on arm B, by quadrature.
pub fn quad_for(spec: &HvModelSpec, a: f64, a_prime: f64, b: f64, b_prime: f64) -> ProbabilityQuad {
    let p12 = |sa, sb| hv_coincidence_prob(spec, sa, sb, DEFAULT_PANELS).unwrap();
    ProbabilityQuad {
        p12_ab: p12(present(a), present(b)),
        p12_ab_prime: p12(present(a), present(b_prime)),
        p12_a_prime_b: p12(present(a_prime), present(b)),
        p12_a_prime_b_prime: p12(present(a_prime), present(b_prime)),
        p1_a_prime: hv_singles_prob(spec, Arm::A, present(a_prime), DEFAULT_PANELS).unwrap(),
        p2_b: hv_singles_prob(spec, Arm::B, present(b), DEFAULT_PANELS).unwrap(),
        ..Default::default()
    }
    .with_absent(
        p12(present(a_prime), PolarizerSetting::Absent),
        p12(PolarizerSetting::Absent, present(b)),
        p12(PolarizerSetting::Absent, PolarizerSetting::Absent),
    )
}

/// Size of a maximum matching between `a` and `b` where `b[j]` may pair with
/// `a[i]` when `lo ≤ b[j] − a[i] ≤ hi`, by augmenting paths.
pub fn brute_force_matching(a: &[f64], b: &[f64], lo: f64, hi: f64) -> usize {
    fn augment(j: usize, adj: &[Vec<usize>], seen: &mut [bool], owner: &mut [Option<usize>]) -> bool {
        for &i in &adj[j] {
            if !seen[i] {
                seen[i] = true;
                if owner[i].is_none_or(|k| augment(k, adj, seen, owner)) {
                    owner[i] = Some(j);
                    return true;
                }
            }
        }
        false
    }
    let adj: Vec<Vec<usize>> =
        b.iter().map(|&tb| (0..a.len()).filter(|&i| (lo..=hi).contains(&(tb - a[i]))).collect()).collect();
    let mut owner = vec![None; a.len()];
    (0..b.len()).filter(|&j| augment(j, &adj, &mut vec![false; a.len()], &mut owner)).count()
}

/// A sorted stream of up to `max_len` timestamps on a coarse grid, so that
/// ties and window-edge coincidences are common.
pub fn random_stream(rng: &mut impl Rng, max_len: usize) -> Vec<f64> {
    let n = rng.random_range(0..=max_len);
    let mut v: Vec<f64> = (0..n).map(|_| rng.random_range(0..60) as f64).collect();
    v.sort_by(f64::total_cmp);
    v
}

/// A complete table (angle rows, z and Z) with positive random counts.
pub fn random_table(rng: &mut impl Rng) -> CountsTable {
    let mut c = || rng.random_range(1.0..1e4);
    CountsTable::from_rows([
        CountsRow::new(Setting::Relative(0.0), c()),
        CountsRow::new(Setting::Relative(22.5), c()),
        CountsRow::new(Setting::Relative(45.0), c()),
        CountsRow::new(Setting::Relative(67.5), c()),
        CountsRow::new(Setting::Relative(90.0), c()),
        CountsRow::new(Setting::OneAbsent, c()),
        CountsRow::new(Setting::BothAbsent, c()),
    ])
    .unwrap()
}
