//! Monte Carlo replication of 1:1 trials with one baseline covariate.
//!
//! Each replication draws its data from a ChaCha8 stream keyed by
//! `(seed, rep_index)`, so any single replication can be regenerated in
//! isolation and the campaign result does not depend on how replications are
//! scheduled across threads. Per-replication results are collected in index
//! order and reduced sequentially.

use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use statrs::function::beta::ln_beta;

use crate::error::{domain, usage, Error, Result};
use crate::normal_math::{quantile, Probability};
use crate::power_engine::{asymptotic_variance, exact_power_two_term, TrialDesign};

/// Covariate sample variance below which the ANCOVA design is treated as collinear.
pub const COLLINEARITY_THRESHOLD: f64 = 1e-12;

/// Rejection rule applied to `τ̂ / se(τ̂)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TestKind {
    /// Compare against the normal quantile `z₁₋α/₂`.
    WaldZ,
    /// Compare against the Student t quantile with the fit's residual df.
    #[default]
    StudentT,
}

/// How replications are scheduled. Results are identical for every choice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Parallelism {
    Sequential,
    /// Rayon's global pool.
    #[default]
    Global,
    /// A dedicated pool with this many threads.
    Threads(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    /// Total subjects; must be even for an exact 1:1 split.
    pub n_subjects: usize,
    pub tau: f64,
    /// Marginal outcome SD within arm.
    pub sigma: f64,
    /// True covariate/outcome correlation within arm.
    pub rho: f64,
    pub alpha: Probability,
    pub n_reps: u64,
    pub seed: u64,
    pub test_kind: TestKind,
    /// Fit ANCOVA when true, otherwise the two-sample difference of means.
    pub adjust: bool,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.n_subjects.is_multiple_of(2) {
            return Err(usage(format!(
                "number of subjects must be even for a 1:1 split, got {}",
                self.n_subjects
            )));
        }
        if self.n_subjects < 4 {
            return Err(usage(format!(
                "at least 4 subjects are needed, got {}",
                self.n_subjects
            )));
        }
        if self.n_reps == 0 {
            return Err(usage("number of replications must be at least 1"));
        }
        if !self.tau.is_finite() {
            return Err(domain(format!("tau must be finite, got {}", self.tau)));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(domain(format!(
                "sigma must be positive, got {}",
                self.sigma
            )));
        }
        if !self.rho.is_finite() || self.rho * self.rho >= 1.0 {
            return Err(domain(format!(
                "degenerate correlation rho = {}: rho^2 must be < 1",
                self.rho
            )));
        }
        let a = self.alpha.value();
        if !(a > 0.0 && a < 1.0) {
            return Err(domain(format!("alpha must lie in (0, 1), got {a}")));
        }
        Ok(())
    }

    /// Residual degrees of freedom of the configured analysis.
    pub fn residual_df(&self) -> u64 {
        let n = self.n_subjects as u64;
        if self.adjust {
            n - 3
        } else {
            n - 2
        }
    }

    /// The analytic design matching this campaign. The unadjusted analysis
    /// does not use the covariate, so its design has `R = 0`.
    pub fn analytic_design(&self) -> Result<TrialDesign> {
        let r = if self.adjust { self.rho } else { 0.0 };
        TrialDesign::new(self.alpha, self.tau, self.sigma, self.n_subjects as f64, r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub treated: bool,
    pub covariate: f64,
    pub outcome: f64,
}

/// Effect estimate from one fitted replication.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectFit {
    pub tau_hat: f64,
    pub se_tau_hat: f64,
    pub df: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimResult {
    pub rejection_rate: Probability,
    /// Binomial standard error of `rejection_rate`.
    pub mc_stderr: f64,
    pub mean_tau_hat: f64,
    /// Standard deviation of `τ̂` across completed replications.
    pub empirical_se_tau_hat: f64,
    /// `ν` for the matching analytic design.
    pub analytic_se: f64,
    /// Two-term analytic power for the matching design.
    pub analytic_power: Probability,
    pub critical_value: f64,
    pub n_reps_completed: u64,
    pub n_reps_skipped: u64,
}

/// The random stream for replication `rep_index`.
fn replication_rng(seed: u64, rep_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep_index);
    rng
}

/// Standard normal draw by inversion of a uniform on the open unit interval.
#[inline]
fn standard_normal(rng: &mut impl RngCore) -> f64 {
    const SCALE: f64 = 1.0 / (1u64 << 53) as f64;
    let u = ((rng.next_u64() >> 11) as f64 + 0.5) * SCALE;
    quantile(u)
}

/// Draws one trial: an exactly balanced random assignment, a standard normal
/// covariate `x`, and `y = τ·t + σρ·x + ε` with `ε ~ N(0, σ²(1−ρ²))`.
pub fn generate_trial(config: &SimConfig, rep_index: u64) -> Result<Vec<Observation>> {
    config.validate()?;
    Ok(draw_trial(config, rep_index))
}

fn draw_trial(config: &SimConfig, rep_index: u64) -> Vec<Observation> {
    let n = config.n_subjects;
    let mut rng = replication_rng(config.seed, rep_index);

    let mut arms: Vec<bool> = (0..n).map(|i| i < n / 2).collect();
    arms.shuffle(&mut rng);

    let slope = config.sigma * config.rho;
    let noise_sd = config.sigma * (1.0 - config.rho * config.rho).sqrt();
    arms.into_iter()
        .map(|treated| {
            let covariate = standard_normal(&mut rng);
            let noise = standard_normal(&mut rng);
            let effect = if treated { config.tau } else { 0.0 };
            Observation {
                treated,
                covariate,
                outcome: effect + slope * covariate + noise_sd * noise,
            }
        })
        .collect()
}

fn arm_sizes(data: &[Observation]) -> (usize, usize) {
    let treated = data.iter().filter(|o| o.treated).count();
    (treated, data.len() - treated)
}

/// OLS of outcome on (intercept, treatment, covariate).
pub fn fit_ancova(data: &[Observation]) -> Result<EffectFit> {
    let n = data.len();
    if n < 4 {
        return Err(usage(format!("ANCOVA needs at least 4 rows, got {n}")));
    }
    let (n1, n0) = arm_sizes(data);
    if n1 == 0 || n0 == 0 {
        return Err(usage("both arms must be present"));
    }
    let nf = n as f64;

    // Centering the covariate leaves the treatment coefficient unchanged and
    // keeps the normal equations well conditioned.
    let mean_x = data.iter().map(|o| o.covariate).sum::<f64>() / nf;
    let mut sxx = 0.0;
    let mut stx = 0.0;
    let mut sy = 0.0;
    let mut sty = 0.0;
    let mut sxy = 0.0;
    for o in data {
        let x = o.covariate - mean_x;
        let t = if o.treated { 1.0 } else { 0.0 };
        sxx += x * x;
        stx += t * x;
        sy += o.outcome;
        sty += t * o.outcome;
        sxy += x * o.outcome;
    }
    if sxx / (nf - 1.0) < COLLINEARITY_THRESHOLD {
        return Err(Error::Numerical(
            "covariate has (near) zero variance; design is collinear".into(),
        ));
    }

    let n1f = n1 as f64;
    let gram = [[nf, n1f, 0.0], [n1f, n1f, stx], [0.0, stx, sxx]];
    let chol = Cholesky3::new(&gram)?;
    let beta = chol.solve([sy, sty, sxy]);
    let inv_tt = chol.solve([0.0, 1.0, 0.0])[1];

    let rss: f64 = data
        .iter()
        .map(|o| {
            let t = if o.treated { 1.0 } else { 0.0 };
            let fitted = beta[0] + beta[1] * t + beta[2] * (o.covariate - mean_x);
            let e = o.outcome - fitted;
            e * e
        })
        .sum();
    let df = (n - 3) as u64;
    let s2 = rss / df as f64;
    Ok(EffectFit {
        tau_hat: beta[1],
        se_tau_hat: (s2 * inv_tt).sqrt(),
        df,
    })
}

/// Difference of arm means with the pooled-variance standard error.
pub fn fit_unadjusted(data: &[Observation]) -> Result<EffectFit> {
    let (n1, n0) = arm_sizes(data);
    if n1 == 0 || n0 == 0 {
        return Err(usage("both arms must be present"));
    }
    let n = data.len();
    if n < 3 {
        return Err(usage(format!(
            "two-sample analysis needs at least 3 rows, got {n}"
        )));
    }
    let mean_of = |arm: bool, size: usize| {
        data.iter()
            .filter(|o| o.treated == arm)
            .map(|o| o.outcome)
            .sum::<f64>()
            / size as f64
    };
    let m1 = mean_of(true, n1);
    let m0 = mean_of(false, n0);
    let ss: f64 = data
        .iter()
        .map(|o| {
            let d = o.outcome - if o.treated { m1 } else { m0 };
            d * d
        })
        .sum();
    let df = (n - 2) as u64;
    let pooled = ss / df as f64;
    Ok(EffectFit {
        tau_hat: m1 - m0,
        se_tau_hat: (pooled * (1.0 / n1 as f64 + 1.0 / n0 as f64)).sqrt(),
        df,
    })
}

/// Cholesky factor of a 3×3 symmetric positive-definite matrix.
struct Cholesky3 {
    l: [[f64; 3]; 3],
}

impl Cholesky3 {
    fn new(a: &[[f64; 3]; 3]) -> Result<Self> {
        let scale = a[0][0].max(a[1][1]).max(a[2][2]);
        let mut l = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..=i {
                let dot: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
                if i == j {
                    let d = a[i][i] - dot;
                    if d <= COLLINEARITY_THRESHOLD * scale {
                        return Err(Error::Numerical(
                            "design matrix is singular (collinear columns)".into(),
                        ));
                    }
                    l[i][i] = d.sqrt();
                } else {
                    l[i][j] = (a[i][j] - dot) / l[j][j];
                }
            }
        }
        Ok(Self { l })
    }

    fn solve(&self, b: [f64; 3]) -> [f64; 3] {
        let l = &self.l;
        let mut z = [0.0; 3];
        for i in 0..3 {
            let dot: f64 = (0..i).map(|k| l[i][k] * z[k]).sum();
            z[i] = (b[i] - dot) / l[i][i];
        }
        let mut x = [0.0; 3];
        for i in (0..3).rev() {
            let dot: f64 = (i + 1..3).map(|k| l[k][i] * x[k]).sum();
            x[i] = (z[i] - dot) / l[i][i];
        }
        x
    }
}

/// Regularized incomplete beta `I_x(a, b)` by Lentz's continued fraction.
fn incomplete_beta(a: f64, b: f64, x: f64) -> Result<f64> {
    if x <= 0.0 {
        return Ok(0.0);
    }
    if x >= 1.0 {
        return Ok(1.0);
    }
    let front = (a * x.ln() + b * (-x).ln_1p() - ln_beta(a, b)).exp();
    if x > (a + 1.0) / (a + b + 2.0) {
        return Ok(1.0 - front * beta_continued_fraction(b, a, 1.0 - x)? / b);
    }
    Ok(front * beta_continued_fraction(a, b, x)? / a)
}

fn beta_continued_fraction(a: f64, b: f64, x: f64) -> Result<f64> {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
    const MAX_ITER: usize = 100_000;

    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < EPS {
            return Ok(h);
        }
    }
    Err(Error::Numerical(format!(
        "incomplete beta continued fraction did not converge for a={a}, b={b}, x={x}"
    )))
}

/// `P(|T| > t)` for Student t with `df` degrees of freedom, `t ≥ 0`.
pub fn student_t_two_sided_tail(t: f64, df: f64) -> Result<f64> {
    incomplete_beta(0.5 * df, 0.5, df / (df + t * t))
}

/// Two-sided critical value `t₁₋α/₂,df`, found by bisection on the t tail.
pub fn student_t_critical(alpha: Probability, df: u64) -> Result<f64> {
    let a = alpha.value();
    if !(a > 0.0 && a < 1.0) {
        return Err(domain(format!("alpha must lie in (0, 1), got {a}")));
    }
    if df == 0 {
        return Err(domain("degrees of freedom must be at least 1"));
    }
    let dff = df as f64;
    let mut lo = 0.0;
    let mut hi = 1.0;
    while student_t_two_sided_tail(hi, dff)? > a {
        lo = hi;
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(Error::Numerical(
                "t critical value bracket overflowed".into(),
            ));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if student_t_two_sided_tail(mid, dff)? > a {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Critical value used by a campaign.
pub fn critical_value(config: &SimConfig) -> Result<f64> {
    match config.test_kind {
        TestKind::WaldZ => Ok(-quantile(0.5 * config.alpha.value())),
        TestKind::StudentT => student_t_critical(config.alpha, config.residual_df()),
    }
}

#[derive(Clone, Copy)]
enum RepOutcome {
    Fitted { tau_hat: f64, rejected: bool },
    Skipped,
}

fn run_replication(config: &SimConfig, critical: f64, rep_index: u64) -> RepOutcome {
    let data = draw_trial(config, rep_index);
    let fit = if config.adjust {
        fit_ancova(&data)
    } else {
        fit_unadjusted(&data)
    };
    match fit {
        Ok(fit) => RepOutcome::Fitted {
            tau_hat: fit.tau_hat,
            rejected: (fit.tau_hat / fit.se_tau_hat).abs() > critical,
        },
        Err(_) => RepOutcome::Skipped,
    }
}

/// Runs the campaign on rayon's global pool.
pub fn run_campaign(config: &SimConfig) -> Result<SimResult> {
    run_campaign_with(config, Parallelism::Global)
}

pub fn run_campaign_with(config: &SimConfig, parallelism: Parallelism) -> Result<SimResult> {
    config.validate()?;
    let critical = critical_value(config)?;
    let design = config.analytic_design()?;
    let analytic_se = asymptotic_variance(&design)?.sqrt();
    let analytic_power = exact_power_two_term(&design)?;

    let run_par = || -> Vec<RepOutcome> {
        (0..config.n_reps)
            .into_par_iter()
            .map(|i| run_replication(config, critical, i))
            .collect()
    };
    let outcomes: Vec<RepOutcome> = match parallelism {
        Parallelism::Sequential => (0..config.n_reps)
            .map(|i| run_replication(config, critical, i))
            .collect(),
        Parallelism::Global => run_par(),
        Parallelism::Threads(threads) => rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::Numerical(format!("could not build thread pool: {e}")))?
            .install(run_par),
    };

    summarize(&outcomes, analytic_se, analytic_power, critical)
}

fn summarize(
    outcomes: &[RepOutcome],
    analytic_se: f64,
    analytic_power: Probability,
    critical_value: f64,
) -> Result<SimResult> {
    let mut completed = 0u64;
    let mut rejections = 0u64;
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for outcome in outcomes {
        if let RepOutcome::Fitted { tau_hat, rejected } = *outcome {
            completed += 1;
            rejections += rejected as u64;
            let delta = tau_hat - mean;
            mean += delta / completed as f64;
            m2 += delta * (tau_hat - mean);
        }
    }
    let skipped = outcomes.len() as u64 - completed;
    if completed == 0 {
        return Err(Error::Numerical(format!(
            "all {skipped} replications failed to fit"
        )));
    }
    let rate = rejections as f64 / completed as f64;
    let empirical_se = if completed > 1 {
        (m2 / (completed - 1) as f64).sqrt()
    } else {
        0.0
    };
    Ok(SimResult {
        rejection_rate: Probability::new(rate)?,
        mc_stderr: (rate * (1.0 - rate) / completed as f64).sqrt(),
        mean_tau_hat: mean,
        empirical_se_tau_hat: empirical_se,
        analytic_se,
        analytic_power,
        critical_value,
        n_reps_completed: completed,
        n_reps_skipped: skipped,
    })
}
