//! Simulation and analysis of optical Bell-test experiments, with emphasis on
//! how subtracting "accidental" coincidences moves the test statistics.
//!
//! * [`analytic`]: quantum and classical-pulse coincidence curves, plus a
//!   quadrature integrator for general factorable hidden-variable models.
//! * [`bellstats`]: the standard, visibility, CHSH and Freedman statistics,
//!   accidental subtraction, and the Clauser–Horne inequality checks.
//! * [`simulator`]: event-level Monte Carlo of time-stamped detections,
//!   coincidence counting, time spectra, and both accidental estimators.
//! * [`harness`]: end-to-end scenario reproductions with pass/fail checks.
//! * [`formats`]: the `counts.csv`, stream `.tsv` and config file formats.

pub mod analytic;
pub mod bellstats;
pub mod counts;
pub mod error;
pub mod formats;
pub mod harness;
pub mod simulator;

pub use analytic::{Angle, HiddenState, HvModelSpec, PolarizerSetting, PredictionModel};
pub use bellstats::{Assumption, BellResult, BoundsReport, ProbabilityQuad, Statistic};
pub use counts::{CountsRow, CountsTable, Setting};
pub use error::{Error, Result};
pub use simulator::{DetectionStream, DetectorConfig, RunConfig, SourceConfig, TimeSpectrum};
