//! Standard normal distribution kernels.
//!
//! `erfc` is the primitive. The CDF is defined from it, which keeps full
//! relative accuracy deep in the lower tail; the quantile starts from
//! Wichura's AS 241 rational approximation and is polished by one Halley
//! step against that CDF.

#![allow(clippy::excessive_precision)]

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;

use crate::error::{domain, Result};

/// `1/√(2π)`
pub const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
const SQRT_2PI: f64 = 2.506_628_274_631_000_7;

/// Beyond this magnitude Φ is reported as exactly 0 or 1.
pub const CDF_SATURATION: f64 = 38.0;

/// A probability in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
pub struct Probability(f64);

impl Probability {
    pub fn new(value: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&value) {
            Ok(Self(value))
        } else {
            Err(domain(format!(
                "probability must lie in [0, 1], got {value}"
            )))
        }
    }

    /// Accepts only the open interval `(0, 1)`.
    pub fn new_open(value: f64) -> Result<Self> {
        if value > 0.0 && value < 1.0 {
            Ok(Self(value))
        } else {
            Err(domain(format!(
                "probability must lie in (0, 1), got {value}"
            )))
        }
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }
}

impl From<Probability> for f64 {
    fn from(p: Probability) -> f64 {
        p.0
    }
}

impl fmt::Display for Probability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Standard normal density.
pub fn std_normal_pdf(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(domain(format!(
            "normal density needs a finite argument, got {x}"
        )));
    }
    Ok(pdf(x))
}

/// Standard normal CDF Φ. Infinite arguments map to 0 and 1.
pub fn std_normal_cdf(x: f64) -> Result<Probability> {
    if x.is_nan() {
        return Err(domain("normal CDF of NaN"));
    }
    Ok(Probability(cdf(x)))
}

/// Standard normal quantile Φ⁻¹ on the open interval `(0, 1)`.
pub fn std_normal_quantile(p: Probability) -> Result<f64> {
    let p = p.value();
    if !(p > 0.0 && p < 1.0) {
        return Err(domain(format!("normal quantile needs 0 < p < 1, got {p}")));
    }
    Ok(quantile(p))
}

/// Complementary error function.
pub fn erfc(x: f64) -> Result<f64> {
    if x.is_nan() {
        return Err(domain("erfc of NaN"));
    }
    Ok(erfc_unchecked(x))
}

#[inline]
pub(crate) fn pdf(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

#[inline]
pub(crate) fn cdf(x: f64) -> f64 {
    if x < -CDF_SATURATION {
        0.0
    } else if x > CDF_SATURATION {
        1.0
    } else {
        0.5 * erfc_unchecked(-x * FRAC_1_SQRT_2)
    }
}

/// Φ⁻¹ for `p` strictly inside `(0, 1)`; callers validate.
pub(crate) fn quantile(p: f64) -> f64 {
    debug_assert!(p > 0.0 && p < 1.0);
    if p > 0.5 {
        // 1 - p is exact here, and the refinement is done in the lower tail
        // where Φ carries full relative precision.
        return -lower_quantile(1.0 - p);
    }
    lower_quantile(p)
}

fn lower_quantile(p: f64) -> f64 {
    let x = as241(p);
    // Near the subnormal range exp(x²/2) overflows; AS 241 alone is used.
    if p == 0.5 || x < -37.0 {
        return x;
    }
    // Halley step on f(x) = Φ(x) - p.
    let err = cdf(x) - p;
    let u = err * SQRT_2PI * (0.5 * x * x).exp();
    x - u / (1.0 + 0.5 * x * u)
}

fn as241(p: f64) -> f64 {
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        return q * poly(&AS_A, r) / poly1(&AS_B, r);
    }
    let tail = if q < 0.0 { p } else { 1.0 - p };
    let r = (-tail.ln()).sqrt();
    let z = if r <= 5.0 {
        let r = r - 1.6;
        poly(&AS_C, r) / poly1(&AS_D, r)
    } else {
        let r = r - 5.0;
        poly(&AS_E, r) / poly1(&AS_F, r)
    };
    if q < 0.0 {
        -z
    } else {
        z
    }
}

pub(crate) fn erfc_unchecked(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    let ax = x.abs();
    let negative = x < 0.0;
    if ax < 0.84375 {
        let y = if ax < 1.0 / (1u64 << 56) as f64 {
            ax
        } else {
            let z = ax * ax;
            let ratio = poly(&PP, z) / poly1(&QQ, z);
            if ax < 0.25 {
                ax + ax * ratio
            } else {
                0.5 + (ax * ratio + (ax - 0.5))
            }
        };
        return if negative { 1.0 + y } else { 1.0 - y };
    }
    if ax < 1.25 {
        let s = ax - 1.0;
        let ratio = poly(&PA, s) / poly1(&QA, s);
        return if negative {
            1.0 + ERX + ratio
        } else {
            1.0 - ERX - ratio
        };
    }
    if ax >= 28.0 || (negative && ax > 6.0) {
        return if negative { 2.0 } else { 0.0 };
    }
    let s = 1.0 / (ax * ax);
    let ratio = if ax < 1.0 / 0.35 {
        poly(&RA, s) / poly1(&SA, s)
    } else {
        poly(&RB, s) / poly1(&SB, s)
    };
    // Split x*x so the large part of the exponent is exact.
    let hi = f64::from_bits(ax.to_bits() & 0xffff_ffff_0000_0000);
    let r = (-hi * hi - 0.5625).exp() * ((hi - ax) * (hi + ax) + ratio).exp();
    if negative {
        2.0 - r / ax
    } else {
        r / ax
    }
}

#[inline]
fn poly(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

/// `1 + x·poly(coeffs, x)`, the form all denominators take.
#[inline]
fn poly1(coeffs: &[f64], x: f64) -> f64 {
    1.0 + x * poly(coeffs, x)
}

// Coefficients from FreeBSD msun s_erf.c (Sun Microsystems, 1993), the same
// tables used by Go's math.Erfc. Polynomials are stored lowest order first.
const ERX: f64 = 8.45062911510467529297e-01;

// erfc on [0, 0.84375]
const PP: [f64; 5] = [
    1.28379167095512558561e-01,
    -3.25042107247001499370e-01,
    -2.84817495755985104766e-02,
    -5.77027029648944159157e-03,
    -2.37630166566501626084e-05,
];
const QQ: [f64; 5] = [
    3.97917223959155352819e-01,
    6.50222499887672944485e-02,
    5.08130628187576562776e-03,
    1.32494738004321644526e-04,
    -3.96022827877536812320e-06,
];

// erfc on [0.84375, 1.25]
const PA: [f64; 7] = [
    -2.36211856075265944077e-03,
    4.14856118683748331666e-01,
    -3.72207876035701323847e-01,
    3.18346619901161753674e-01,
    -1.10894694282396677476e-01,
    3.54783043256182359371e-02,
    -2.16637559486879084300e-03,
];
const QA: [f64; 6] = [
    1.06420880400844228286e-01,
    5.40397917702171048937e-01,
    7.18286544141962662868e-02,
    1.26171219808761642112e-01,
    1.36370839120290507362e-02,
    1.19844998467991074170e-02,
];

// erfc on [1.25, 1/0.35]
const RA: [f64; 8] = [
    -9.86494403484714822705e-03,
    -6.93858572707181764372e-01,
    -1.05586262253232909814e+01,
    -6.23753324503260060396e+01,
    -1.62396669462573470355e+02,
    -1.84605092906711035994e+02,
    -8.12874355063065934246e+01,
    -9.81432934416914548592e+00,
];
const SA: [f64; 8] = [
    1.96512716674392571292e+01,
    1.37657754143519042600e+02,
    4.34565877475229228821e+02,
    6.45387271733267880336e+02,
    4.29008140027567833386e+02,
    1.08635005541779435134e+02,
    6.57024977031928170135e+00,
    -6.04244152148580987438e-02,
];

// erfc on [1/0.35, 28]
const RB: [f64; 7] = [
    -9.86494292470009928597e-03,
    -7.99283237680523006574e-01,
    -1.77579549177547519889e+01,
    -1.60636384855821916062e+02,
    -6.37566443368389627722e+02,
    -1.02509513161107724954e+03,
    -4.83519191608651397019e+02,
];
const SB: [f64; 7] = [
    3.03380607434824582924e+01,
    3.25792512996573918826e+02,
    1.53672958608443695994e+03,
    3.19985821950859553908e+03,
    2.55305040643316442583e+03,
    4.74528541206955367215e+02,
    -2.24409524465858183362e+01,
];

// Wichura, Algorithm AS 241 (PPND16), Applied Statistics 37(3), 1988.
// Central region |p - 0.5| <= 0.425.
const AS_A: [f64; 8] = [
    3.3871328727963666080E0,
    1.3314166789178437745E+2,
    1.9715909503065514427E+3,
    1.3731693765509461125E+4,
    4.5921953931549871457E+4,
    6.7265770927008700853E+4,
    3.3430575583588128105E+4,
    2.5090809287301226727E+3,
];
const AS_B: [f64; 7] = [
    4.2313330701600911252E+1,
    6.8718700749205790830E+2,
    5.3941960214247511077E+3,
    2.1213794301586595867E+4,
    3.9307895800092710610E+4,
    2.8729085735721942674E+4,
    5.2264952788528545610E+3,
];
// Intermediate tail, sqrt(-ln q) < 5.
const AS_C: [f64; 8] = [
    1.42343711074968357734E0,
    4.63033784615654529590E0,
    5.76949722146069140550E0,
    3.64784832476320460504E0,
    1.27045825245236838258E0,
    2.41780725177450611770E-1,
    2.27238449892691845833E-2,
    7.74545014278341407640E-4,
];
const AS_D: [f64; 7] = [
    2.05319162663775882187E0,
    1.67638483018380384940E0,
    6.89767334985100004550E-1,
    1.48103976427480074590E-1,
    1.51986665636164571966E-2,
    5.47593808499534494600E-4,
    1.05075007164441684324E-9,
];
// Far tail.
const AS_E: [f64; 8] = [
    6.65790464350110377720E0,
    5.46378491116411436990E0,
    1.78482653991729133580E0,
    2.96560571828504891230E-1,
    2.65321895265761230930E-2,
    1.24266094738807843860E-3,
    2.71155556874348757815E-5,
    2.01033439929228813265E-7,
];
const AS_F: [f64; 7] = [
    5.99832206555887937690E-1,
    1.36929880922735805310E-1,
    1.48753612908506148525E-2,
    7.86869131145613259100E-4,
    1.84631831751005468180E-5,
    1.42151175831644588870E-7,
    2.04426310338993978564E-15,
];
