//! Runs every reproduction scenario and prints its report.

use bellsim::harness::{Scenario, DEFAULT_SEED};

fn main() {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(DEFAULT_SEED);
    let mut all_passed = true;
    for scenario in Scenario::ALL {
        let t0 = std::time::Instant::now();
        match scenario.run(seed) {
            Ok(report) => {
                println!("{report}");
                println!("({:.2}s)\n", t0.elapsed().as_secs_f64());
                all_passed &= report.passed();
            }
            Err(e) => {
                println!("{}: error: {e}\n", scenario.name());
                all_passed = false;
            }
        }
    }
    std::process::exit(if all_passed { 0 } else { 1 });
}
