//! Closed-form power for adjusted and unadjusted analyses.
//!
//! Conventions used everywhere in this module:
//!
//! - `n_total` is the total number of subjects across *both* arms of a 1:1
//!   trial, so `ν² = (4σ²/N)(1 − R²)` is the variance of the effect estimate.
//!   Sample sizes stay continuous; rounding happens at the CLI boundary.
//! - `r` may be signed. Only `R²` enters any formula.
//! - Tests are two-sided at level `alpha`.

use crate::error::{domain, usage, Result};
use crate::normal_math::{cdf, erfc_unchecked, pdf, quantile, Probability};

use std::f64::consts::{FRAC_1_SQRT_2, PI};

/// Design of a 1:1 randomized trial with a continuous outcome.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialDesign {
    /// Two-sided significance level.
    pub alpha: Probability,
    /// Constant treatment effect, in outcome units.
    pub tau: f64,
    /// Outcome standard deviation within arm.
    pub sigma: f64,
    /// Total sample size over both arms.
    pub n_total: f64,
    /// Correlation between the baseline covariate and the outcome.
    pub r: f64,
}

impl TrialDesign {
    pub fn new(alpha: Probability, tau: f64, sigma: f64, n_total: f64, r: f64) -> Result<Self> {
        let design = Self {
            alpha,
            tau,
            sigma,
            n_total,
            r,
        };
        design.validate()?;
        Ok(design)
    }

    pub fn validate(&self) -> Result<()> {
        check_alpha(self.alpha)?;
        if !self.tau.is_finite() {
            return Err(domain(format!("tau must be finite, got {}", self.tau)));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(domain(format!(
                "sigma must be positive, got {}",
                self.sigma
            )));
        }
        if !(self.n_total > 0.0 && self.n_total.is_finite()) {
            return Err(domain(format!(
                "total sample size must be positive, got {}",
                self.n_total
            )));
        }
        check_r(self.r)
    }

    /// `|τ|/ν`, the standardized effect.
    fn signal(&self) -> Result<f64> {
        Ok(self.tau.abs() / asymptotic_variance(self)?.sqrt())
    }
}

/// The `(a, b)` reparameterization used to expand the power ratio around `R = 0`.
///
/// `a = Φ⁻¹(α/2)` and `b = Φ⁻¹(p̃) − a`, so that `p̃ = Φ(a + b)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpansionParams {
    pub a: f64,
    pub b: f64,
    pub target_power: Probability,
}

/// Coefficients of `p(R²)/p̃ ≈ c0 + c2·R²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesCoefficients {
    pub c0: f64,
    pub c2: f64,
}

impl ExpansionParams {
    /// Second-order coefficients, evaluated through `erfc` in the printed form.
    ///
    /// `c0` is algebraically 1; it is kept as computed so callers can check it.
    pub fn series_coefficients(&self) -> SeriesCoefficients {
        let s = self.a + self.b;
        let denom = erfc_unchecked(-s * FRAC_1_SQRT_2);
        let c0 = (2.0 - erfc_unchecked(s * FRAC_1_SQRT_2)) / denom;
        let c2 = self.b * (-0.5 * s * s).exp() / ((2.0 * PI).sqrt() * denom);
        SeriesCoefficients { c0, c2 }
    }

    /// `c2` written as `b·φ(a+b)/(2p̃)`; equal to the erfc form up to rounding.
    pub fn slope_via_density(&self) -> f64 {
        self.b * pdf(self.a + self.b) / (2.0 * self.target_power.value())
    }

    /// `Φ(a + b/√(1−s))/p̃` as a function of `s = R²`. Defined for all `s < 1`,
    /// including negative `s`, so it can be differenced across zero.
    pub fn ratio_at_r2(&self, s: f64) -> f64 {
        cdf(self.a + self.b / (1.0 - s).sqrt()) / self.target_power.value()
    }

    /// Central-difference estimate of `d(p(R²)/p̃)/d(R²)` at `R² = 0`.
    pub fn finite_difference_slope(&self, step: f64) -> f64 {
        (self.ratio_at_r2(step) - self.ratio_at_r2(-step)) / (2.0 * step)
    }
}

/// Exact, series and rule-of-thumb power ratios tabulated over a grid of `R`.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerRatioReport {
    pub alpha: Probability,
    pub target_power: Probability,
    pub coefficients: SeriesCoefficients,
    pub r_grid: Vec<f64>,
    pub exact_ratio: Vec<f64>,
    pub series_ratio: Vec<f64>,
    pub thumb_ratio: Vec<f64>,
    pub max_abs_err_series: f64,
    pub max_abs_err_thumb: f64,
}

fn check_alpha(alpha: Probability) -> Result<()> {
    let a = alpha.value();
    if a > 0.0 && a < 1.0 {
        Ok(())
    } else {
        Err(domain(format!("alpha must lie in (0, 1), got {a}")))
    }
}

fn check_r(r: f64) -> Result<()> {
    if !r.is_finite() {
        return Err(domain(format!("correlation must be finite, got {r}")));
    }
    if r * r >= 1.0 {
        return Err(domain(format!(
            "degenerate correlation r = {r}: r^2 must be < 1 (the covariate would determine the outcome)"
        )));
    }
    Ok(())
}

/// Rejects `p̃ ≤ α/2` (where `b ≤ 0`) and anything outside `(0, 1)`.
fn powered_params(alpha: Probability, target_power: Probability) -> Result<ExpansionParams> {
    let params = expansion_params(alpha, target_power)?;
    if target_power.value() <= 0.5 * alpha.value() {
        return Err(domain(format!(
            "target power {} must exceed alpha/2 = {}",
            target_power,
            0.5 * alpha.value()
        )));
    }
    Ok(params)
}

/// `ν² = (4σ²/N)(1 − R²)`.
pub fn asymptotic_variance(design: &TrialDesign) -> Result<f64> {
    design.validate()?;
    let sigma2 = design.sigma * design.sigma;
    Ok(4.0 * sigma2 / design.n_total * (1.0 - design.r * design.r))
}

/// Two-sided power `Φ(a − |τ|/ν) + Φ(a + |τ|/ν)` with `a = Φ⁻¹(α/2)`.
pub fn exact_power_two_term(design: &TrialDesign) -> Result<Probability> {
    let signal = design.signal()?;
    let a = quantile(0.5 * design.alpha.value());
    Probability::new(cdf(a - signal) + cdf(a + signal))
}

/// One-term approximation `Φ(a + |τ|/ν)`, dropping the far rejection tail.
pub fn approx_power_one_term(design: &TrialDesign) -> Result<Probability> {
    let signal = design.signal()?;
    let a = quantile(0.5 * design.alpha.value());
    Probability::new(cdf(a + signal))
}

/// The term dropped by [`approx_power_one_term`]: `Φ(a − |τ|/ν)`.
pub fn power_gap(design: &TrialDesign) -> Result<f64> {
    let signal = design.signal()?;
    let a = quantile(0.5 * design.alpha.value());
    Ok(cdf(a - signal))
}

/// Total sample size giving one-term power `target_power` in an unadjusted
/// analysis: `N = (4σ²/τ²)(Φ⁻¹(p̃) − Φ⁻¹(α/2))²`.
pub fn required_sample_size(
    alpha: Probability,
    target_power: Probability,
    tau: f64,
    sigma: f64,
) -> Result<f64> {
    check_alpha(alpha)?;
    if tau == 0.0 || !tau.is_finite() {
        return Err(domain(format!(
            "tau must be finite and nonzero for a finite sample size, got {tau}"
        )));
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(domain(format!("sigma must be positive, got {sigma}")));
    }
    let params = powered_params(alpha, target_power)?;
    let root_n = 2.0 * sigma / tau.abs() * params.b;
    Ok(root_n * root_n)
}

/// `a` and `b` for the given level and reference power.
pub fn expansion_params(alpha: Probability, target_power: Probability) -> Result<ExpansionParams> {
    check_alpha(alpha)?;
    let p = target_power.value();
    if !(p > 0.0 && p < 1.0) {
        return Err(domain(format!("target power must lie in (0, 1), got {p}")));
    }
    let a = quantile(0.5 * alpha.value());
    let b = quantile(p) - a;
    Ok(ExpansionParams { a, b, target_power })
}

/// Power of the adjusted analysis run at the sample size that gives the
/// unadjusted analysis power `target_power`: `Φ(a + b/√(1−R²))`.
pub fn adjusted_power_at_fixed_n(
    alpha: Probability,
    target_power: Probability,
    r: f64,
) -> Result<Probability> {
    check_r(r)?;
    let params = powered_params(alpha, target_power)?;
    Probability::new(cdf(params.a + params.b / (1.0 - r * r).sqrt()))
}

/// `p(R²)/p̃`.
pub fn power_ratio_exact(alpha: Probability, target_power: Probability, r: f64) -> Result<f64> {
    Ok(adjusted_power_at_fixed_n(alpha, target_power, r)?.value() / target_power.value())
}

/// Second-order coefficients `c0`, `c2` of the power ratio in `R²`.
pub fn series_coefficients(
    alpha: Probability,
    target_power: Probability,
) -> Result<SeriesCoefficients> {
    Ok(powered_params(alpha, target_power)?.series_coefficients())
}

/// `c0 + c2·R²`.
pub fn power_ratio_series(alpha: Probability, target_power: Probability, r: f64) -> Result<f64> {
    check_r(r)?;
    let SeriesCoefficients { c0, c2 } = series_coefficients(alpha, target_power)?;
    Ok(c0 + c2 * r * r)
}

/// `1 + R²/2`.
pub fn rule_of_thumb(r: f64) -> Result<f64> {
    check_r(r)?;
    Ok(1.0 + 0.5 * r * r)
}

/// Evaluates the three ratios pointwise over `r_grid` (nonempty, ascending).
pub fn ratio_report(
    alpha: Probability,
    target_power: Probability,
    r_grid: &[f64],
) -> Result<PowerRatioReport> {
    if r_grid.is_empty() {
        return Err(usage("correlation grid is empty"));
    }
    if r_grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(usage("correlation grid must be sorted ascending"));
    }
    for &r in r_grid {
        check_r(r)?;
    }
    let params = powered_params(alpha, target_power)?;
    let coefficients = params.series_coefficients();

    let exact_ratio: Vec<f64> = r_grid.iter().map(|r| params.ratio_at_r2(r * r)).collect();
    let series_ratio: Vec<f64> = r_grid
        .iter()
        .map(|r| coefficients.c0 + coefficients.c2 * r * r)
        .collect();
    let thumb_ratio: Vec<f64> = r_grid.iter().map(|r| 1.0 + 0.5 * r * r).collect();

    let max_err = |approx: &[f64]| {
        exact_ratio
            .iter()
            .zip(approx)
            .map(|(e, a)| (e - a).abs())
            .fold(0.0, f64::max)
    };
    let max_abs_err_series = max_err(&series_ratio);
    let max_abs_err_thumb = max_err(&thumb_ratio);

    Ok(PowerRatioReport {
        alpha,
        target_power,
        coefficients,
        r_grid: r_grid.to_vec(),
        exact_ratio,
        series_ratio,
        thumb_ratio,
        max_abs_err_series,
        max_abs_err_thumb,
    })
}

/// Uniform grid `0, step, 2·step, …` up to and including `r_max` (within a
/// relative slack of 1e-9 so that `0.5/0.05` lands on 0.5).
pub fn uniform_grid(r_max: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(usage(format!("grid step must be positive, got {step}")));
    }
    if !(r_max >= 0.0 && r_max.is_finite()) {
        return Err(usage(format!(
            "grid upper end must be nonnegative, got {r_max}"
        )));
    }
    let count = (r_max / step * (1.0 + 1e-9)).floor() as usize;
    Ok((0..=count).map(|i| i as f64 * step).collect())
}
