//! Power analysis for covariate-adjusted (ANCOVA) versus unadjusted analyses
//! of 1:1 randomized controlled trials with a continuous outcome.
//!
//! The crate is split into three layers:
//!
//! - [`normal_math`]: standard normal density, CDF, quantile and `erfc`.
//! - [`power_engine`]: closed-form power, sample size, power ratio, its
//!   second-order expansion in `R²` and the `1 + R²/2` rule of thumb.
//! - [`trial_simulator`]: Monte Carlo trials fitted by OLS, used to check the
//!   analytic values empirically.
//!
//! Throughout, `N` is the *total* sample size across both arms, so the
//! variance of the unadjusted effect estimate is `σ²(1/n₁ + 1/n₂) = 4σ²/N`.

pub mod error;
pub mod normal_math;
pub mod power_engine;
pub mod trial_simulator;

pub use error::{Error, Result};
pub use normal_math::Probability;
pub use power_engine::{ExpansionParams, PowerRatioReport, SeriesCoefficients, TrialDesign};
pub use trial_simulator::{Parallelism, SimConfig, SimResult, TestKind};
