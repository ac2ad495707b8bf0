use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};

use covadj::power_engine::{
    adjusted_power_at_fixed_n, approx_power_one_term, asymptotic_variance, exact_power_two_term,
    expansion_params, power_gap, power_ratio_exact, power_ratio_series, ratio_report,
    required_sample_size, rule_of_thumb, series_coefficients, uniform_grid,
};
use covadj::trial_simulator::{run_campaign_with, Parallelism, SimConfig, TestKind};
use covadj::{Error, Probability, TrialDesign};

use crate::output::{Cell, Format, OutputDocument, Table};
use crate::CliError;

/// Power of covariate-adjusted vs. unadjusted analyses of 1:1 randomized trials.
///
/// `--n` is always the total sample size across both arms.
#[derive(Debug, Parser)]
#[command(name = "covadj", version)]
pub struct Cli {
    /// Output format.
    #[arg(long, value_enum, global = true, default_value_t = Format::Json)]
    pub format: Format,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Power of a trial design (one-term approximation unless --exact).
    Power(PowerArgs),
    /// Total sample size for an unadjusted analysis to reach a target power.
    SampleSize(SampleSizeArgs),
    /// Adjusted/unadjusted power ratio at one correlation.
    Ratio(RatioArgs),
    /// Power ratio table over a grid of correlations.
    Curve(CurveArgs),
    /// Coefficients of the second-order expansion of the power ratio in R².
    Expand(ExpandArgs),
    /// Monte Carlo rejection rate for simulated trials.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Args)]
pub struct PowerArgs {
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub tau: f64,
    #[arg(long)]
    pub sigma: f64,
    /// Total sample size (both arms); may be fractional.
    #[arg(long)]
    pub n: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub r: f64,
    /// Report the two-term power and the dropped term.
    #[arg(long)]
    pub exact: bool,
}

#[derive(Debug, Clone, Args)]
pub struct SampleSizeArgs {
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.80)]
    pub power: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub tau: f64,
    #[arg(long)]
    pub sigma: f64,
    /// Also report the smallest even integer not below N.
    #[arg(long)]
    pub round_even: bool,
}

#[derive(Debug, Clone, Args)]
pub struct RatioArgs {
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.80)]
    pub power: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub r: f64,
}

#[derive(Debug, Clone, Args)]
pub struct CurveArgs {
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.80)]
    pub power: f64,
    #[arg(long, default_value_t = 0.5)]
    pub r_max: f64,
    #[arg(long, default_value_t = 0.05)]
    pub step: f64,
}

#[derive(Debug, Clone, Args)]
pub struct ExpandArgs {
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.80)]
    pub power: f64,
    /// Step in R² for the central-difference check of c2.
    #[arg(long, default_value_t = 1e-5)]
    pub fd_step: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TestArg {
    /// Student t critical value with the residual degrees of freedom.
    T,
    /// Normal (Wald) critical value.
    Z,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// Total subjects; must be even.
    #[arg(long)]
    pub n: u64,
    #[arg(long, allow_negative_numbers = true)]
    pub tau: f64,
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub rho: f64,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value_t = 10_000)]
    pub reps: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = TestArg::T)]
    pub test: TestArg,
    /// Fit ANCOVA (true) or compare arm means (false).
    #[arg(long, action = ArgAction::Set, default_value_t = true)]
    pub adjust: bool,
    /// Worker threads: 0 uses the global pool, 1 runs sequentially.
    /// Results do not depend on this setting.
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
}

fn flag_error(flag: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Core(Error::Domain(format!("{flag}: {msg}")))
}

fn open_probability(flag: &str, v: f64) -> Result<Probability, CliError> {
    Probability::new_open(v).map_err(|_| flag_error(flag, format!("must lie in (0, 1), got {v}")))
}

fn positive(flag: &str, v: f64) -> Result<f64, CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(flag_error(flag, format!("must be positive, got {v}")))
    }
}

fn finite(flag: &str, v: f64) -> Result<f64, CliError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(flag_error(flag, format!("must be finite, got {v}")))
    }
}

/// Correlation flags: `r² ≥ 1` is a degenerate design.
fn correlation(flag: &str, v: f64) -> Result<f64, CliError> {
    let v = finite(flag, v)?;
    if v * v >= 1.0 {
        return Err(flag_error(
            flag,
            format!("degenerate correlation {v}: the outcome would be fully determined by the covariate (need r^2 < 1)"),
        ));
    }
    Ok(v)
}

pub fn execute(command: &Command) -> Result<OutputDocument, CliError> {
    match command {
        Command::Power(args) => cmd_power(args),
        Command::SampleSize(args) => cmd_sample_size(args),
        Command::Ratio(args) => cmd_ratio(args),
        Command::Curve(args) => cmd_curve(args),
        Command::Expand(args) => cmd_expand(args),
        Command::Simulate(args) => cmd_simulate(args),
    }
}

pub fn cmd_power(args: &PowerArgs) -> Result<OutputDocument, CliError> {
    let design = TrialDesign::new(
        open_probability("--alpha", args.alpha)?,
        finite("--tau", args.tau)?,
        positive("--sigma", args.sigma)?,
        positive("--n", args.n)?,
        correlation("--r", args.r)?,
    )?;
    let variance = asymptotic_variance(&design)?;
    let one_term = approx_power_one_term(&design)?.value();
    let doc = OutputDocument::new()
        .field("alpha", args.alpha)
        .field("tau", args.tau)
        .field("sigma", args.sigma)
        .field("n", args.n)
        .field("r", args.r)
        .field("nu", variance.sqrt());
    if args.exact {
        Ok(doc
            .field("method", "two_term")
            .field("power", exact_power_two_term(&design)?.value())
            .field("one_term_power", one_term)
            .field("gap", power_gap(&design)?))
    } else {
        Ok(doc.field("method", "one_term").field("power", one_term))
    }
}

pub fn cmd_sample_size(args: &SampleSizeArgs) -> Result<OutputDocument, CliError> {
    let alpha = open_probability("--alpha", args.alpha)?;
    let power = open_probability("--power", args.power)?;
    let tau = finite("--tau", args.tau)?;
    let sigma = positive("--sigma", args.sigma)?;
    let n = required_sample_size(alpha, power, tau, sigma)?;
    let doc = OutputDocument::new()
        .field("alpha", args.alpha)
        .field("power", args.power)
        .field("tau", args.tau)
        .field("sigma", args.sigma)
        .field("n", n);
    if args.round_even {
        Ok(doc.field("n_even", round_up_even(n)))
    } else {
        Ok(doc)
    }
}

/// Smallest even integer `≥ n`.
pub fn round_up_even(n: f64) -> u64 {
    let up = n.ceil() as u64;
    up + up % 2
}

pub fn cmd_ratio(args: &RatioArgs) -> Result<OutputDocument, CliError> {
    let alpha = open_probability("--alpha", args.alpha)?;
    let power = open_probability("--power", args.power)?;
    let r = correlation("--r", args.r)?;
    let coef = series_coefficients(alpha, power)?;
    Ok(OutputDocument::new()
        .field("alpha", args.alpha)
        .field("power", args.power)
        .field("r", args.r)
        .field(
            "adjusted_power",
            adjusted_power_at_fixed_n(alpha, power, r)?.value(),
        )
        .field("exact", power_ratio_exact(alpha, power, r)?)
        .field("series", power_ratio_series(alpha, power, r)?)
        .field("thumb", rule_of_thumb(r)?)
        .field("c0", coef.c0)
        .field("c2", coef.c2))
}

pub fn cmd_curve(args: &CurveArgs) -> Result<OutputDocument, CliError> {
    let alpha = open_probability("--alpha", args.alpha)?;
    let power = open_probability("--power", args.power)?;
    if args.r_max >= 1.0 {
        return Err(flag_error(
            "--r-max",
            format!(
                "grid reaches |R| >= 1 ({}), a degenerate correlation",
                args.r_max
            ),
        ));
    }
    let grid = uniform_grid(
        finite("--r-max", args.r_max)?,
        positive("--step", args.step)?,
    )?;
    let report = ratio_report(alpha, power, &grid)?;

    let rows = (0..report.r_grid.len())
        .map(|i| {
            let exact = report.exact_ratio[i];
            vec![
                Cell::Real(report.r_grid[i]),
                Cell::Real(exact),
                Cell::Real(report.series_ratio[i]),
                Cell::Real(report.thumb_ratio[i]),
                Cell::Real((exact - report.series_ratio[i]).abs()),
                Cell::Real((exact - report.thumb_ratio[i]).abs()),
            ]
        })
        .collect();
    let columns = [
        "r",
        "exact",
        "series",
        "thumb",
        "abs_err_series",
        "abs_err_thumb",
    ]
    .map(String::from)
    .to_vec();
    Ok(OutputDocument::new()
        .field("alpha", args.alpha)
        .field("power", args.power)
        .field("r_max", args.r_max)
        .field("step", args.step)
        .field("c0", report.coefficients.c0)
        .field("c2", report.coefficients.c2)
        .field("max_abs_err_series", report.max_abs_err_series)
        .field("max_abs_err_thumb", report.max_abs_err_thumb)
        .with_table(Table { columns, rows }))
}

pub fn cmd_expand(args: &ExpandArgs) -> Result<OutputDocument, CliError> {
    let alpha = open_probability("--alpha", args.alpha)?;
    let power = open_probability("--power", args.power)?;
    let step = positive("--fd-step", args.fd_step)?;
    if power.value() <= 0.5 * alpha.value() {
        return Err(flag_error(
            "--power",
            format!("must exceed alpha/2 = {}", 0.5 * alpha.value()),
        ));
    }
    let params = expansion_params(alpha, power)?;
    let coef = params.series_coefficients();
    Ok(OutputDocument::new()
        .field("alpha", args.alpha)
        .field("power", args.power)
        .field("a", params.a)
        .field("b", params.b)
        .field("c0", coef.c0)
        .field("c2", coef.c2)
        .field("c2_density_form", params.slope_via_density())
        .field("c2_finite_difference", params.finite_difference_slope(step))
        .field("fd_step", step))
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<OutputDocument, CliError> {
    if !args.n.is_multiple_of(2) {
        return Err(CliError::Core(Error::Usage(format!(
            "--n must be even for a 1:1 split, got {}; use an even total such as {}",
            args.n,
            args.n + 1
        ))));
    }
    let config = SimConfig {
        n_subjects: args.n as usize,
        tau: finite("--tau", args.tau)?,
        sigma: positive("--sigma", args.sigma)?,
        rho: correlation("--rho", args.rho)?,
        alpha: open_probability("--alpha", args.alpha)?,
        n_reps: args.reps,
        seed: args.seed,
        test_kind: match args.test {
            TestArg::T => TestKind::StudentT,
            TestArg::Z => TestKind::WaldZ,
        },
        adjust: args.adjust,
    };
    let parallelism = match args.threads {
        0 => Parallelism::Global,
        1 => Parallelism::Sequential,
        k => Parallelism::Threads(k),
    };
    let result = run_campaign_with(&config, parallelism)?;
    Ok(OutputDocument::new()
        .field("n", args.n)
        .field("tau", args.tau)
        .field("sigma", args.sigma)
        .field("rho", args.rho)
        .field("alpha", args.alpha)
        .field("reps", args.reps)
        .field("seed", args.seed)
        .field(
            "test",
            match args.test {
                TestArg::T => "t",
                TestArg::Z => "z",
            },
        )
        .field("adjust", args.adjust)
        .field("df", config.residual_df())
        .field("critical_value", result.critical_value)
        .field("rejection_rate", result.rejection_rate.value())
        .field("mc_stderr", result.mc_stderr)
        .field("mean_tau_hat", result.mean_tau_hat)
        .field("empirical_se_tau_hat", result.empirical_se_tau_hat)
        .field("analytic_se", result.analytic_se)
        .field("analytic_power", result.analytic_power.value())
        .field("n_reps_completed", result.n_reps_completed)
        .field("n_reps_skipped", result.n_reps_skipped))
}
