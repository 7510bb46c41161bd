//! Scalar special functions and the skew-Normal density family.
//!
//! Everything here uses the *standard* normal cdf `Φ(x) = P(Z ≤ x)`.
//! The unnormalised convention `∫_{-∞}^x e^{-s²/2} ds = √(2π) Φ(x)` is only
//! exposed through [`paper_phi_big`] for literal-formula checks; drifts of
//! the form `∂x log Φ` do not see the constant.
//!
//! Tails are handled with the scaled complementary error function
//! `erfcx(y) = e^{y²} erfc(y)`, so log-cdfs and inverse Mills ratios stay
//! finite for arguments far beyond the underflow point of `Φ`.

use std::f64::consts::{FRAC_1_SQRT_2, LN_2, PI};

use serde::{Deserialize, Serialize};

use crate::chirality::Chirality;
use crate::error::{invalid, Result};

pub const SQRT_2PI: f64 = 2.506_628_274_631_000_7;
pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;
/// √(2/π), the inverse Mills ratio at zero.
pub const SQRT_2_OVER_PI: f64 = 0.797_884_560_802_865_4;

const FRAC_1_SQRT_PI: f64 = 0.564_189_583_547_756_3;

/// Beyond this |x| the cdf is evaluated in log space.
const LOG_SPACE_CUTOFF: f64 = 8.0;

/// `e^{y²} erfc(y)` for `y ≥ 0`.
fn erfcx_nonneg(y: f64) -> f64 {
    debug_assert!(y >= 0.0);
    if y < 2.0 {
        (y * y).exp() * libm::erfc(y)
    } else {
        // Laplace continued fraction, evaluated bottom-up.
        let terms = if y < 4.0 { 80 } else { 40 };
        let mut t = y;
        for n in (1..=terms).rev() {
            t = y + 0.5 * n as f64 / t;
        }
        FRAC_1_SQRT_PI / t
    }
}

/// Scaled complementary error function `e^{y²} erfc(y)`.
pub fn erfcx(y: f64) -> f64 {
    if y >= 0.0 {
        erfcx_nonneg(y)
    } else {
        2.0 * (y * y).exp() - erfcx_nonneg(-y)
    }
}

pub fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / SQRT_2PI
}

pub fn log_std_normal_pdf(x: f64) -> f64 {
    -0.5 * x * x - LN_SQRT_2PI
}

/// `P(Z ≤ x)` for a standard normal `Z`.
pub fn std_normal_cdf(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x < 0.0 {
        0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
    } else {
        1.0 - 0.5 * libm::erfc(x * FRAC_1_SQRT_2)
    }
}

/// `log Φ(x)`, finite for arbitrarily negative `x`.
pub fn log_std_normal_cdf(x: f64) -> f64 {
    if x < -LOG_SPACE_CUTOFF {
        (0.5 * erfcx_nonneg(-x * FRAC_1_SQRT_2)).ln() - 0.5 * x * x
    } else if x > LOG_SPACE_CUTOFF {
        (-0.5 * libm::erfc(x * FRAC_1_SQRT_2)).ln_1p()
    } else if x < 0.0 {
        (0.5 * libm::erfc(-x * FRAC_1_SQRT_2)).ln()
    } else {
        (-0.5 * libm::erfc(x * FRAC_1_SQRT_2)).ln_1p()
    }
}

/// `log(φ(x)/Φ(x))`, the log of the inverse Mills ratio.
pub fn log_mills(x: f64) -> f64 {
    if x < 0.0 {
        0.5 * (2.0 / PI).ln() - erfcx_nonneg(-x * FRAC_1_SQRT_2).ln()
    } else {
        log_std_normal_pdf(x) - log_std_normal_cdf(x)
    }
}

/// Inverse Mills ratio `φ(x)/Φ(x)`.
pub fn mills(x: f64) -> f64 {
    if x < 0.0 {
        SQRT_2_OVER_PI / erfcx_nonneg(-x * FRAC_1_SQRT_2)
    } else {
        log_mills(x).exp()
    }
}

/// `Φ̃(x) = ∫_{-∞}^x e^{-s²/2} ds = √(2π) Φ(x)`, the unnormalised cdf convention.
pub fn paper_phi_big(x: f64) -> f64 {
    SQRT_2PI * std_normal_cdf(x)
}

/// Location / scale / shape of a skew-Normal law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SkewNormalParams {
    pub location: f64,
    pub scale: f64,
    pub shape: f64,
}

impl SkewNormalParams {
    pub fn new(location: f64, scale: f64, shape: f64) -> Result<Self> {
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(invalid("scale", format!("must be positive and finite, got {scale}")));
        }
        if !location.is_finite() || !shape.is_finite() {
            return Err(invalid("location/shape", "must be finite"));
        }
        Ok(Self {
            location,
            scale,
            shape,
        })
    }

    /// Converts the time/skewness parametrisation `Q(x,t) ∝ e^{-x²/2t} Φ(αx)`
    /// into standard form: scale `√t`, shape `α√t`.
    pub fn from_time_skewness(location: f64, t: f64, alpha: f64) -> Result<Self> {
        if !(t > 0.0) {
            return Err(invalid("t", format!("must be positive, got {t}")));
        }
        Self::new(location, t.sqrt(), alpha * t.sqrt())
    }

    /// Inverse of [`Self::from_time_skewness`]: returns `(t, α)`.
    pub fn to_time_skewness(&self) -> (f64, f64) {
        (self.scale * self.scale, self.shape / self.scale)
    }

    pub fn delta(&self) -> f64 {
        self.shape / (1.0 + self.shape * self.shape).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtendedSkewNormalParams {
    pub location: f64,
    pub scale: f64,
    pub shape: f64,
    pub truncation: f64,
}

impl ExtendedSkewNormalParams {
    pub fn new(location: f64, scale: f64, shape: f64, truncation: f64) -> Result<Self> {
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(invalid("scale", format!("must be positive and finite, got {scale}")));
        }
        if !location.is_finite() || !shape.is_finite() || !truncation.is_finite() {
            return Err(invalid("location/shape/truncation", "must be finite"));
        }
        Ok(Self {
            location,
            scale,
            shape,
            truncation,
        })
    }
}

pub fn sn_log_pdf(x: f64, p: &SkewNormalParams) -> f64 {
    let z = (x - p.location) / p.scale;
    LN_2 - p.scale.ln() + log_std_normal_pdf(z) + log_std_normal_cdf(p.shape * z)
}

/// `2/scale · φ(z) Φ(shape·z)`, `z = (x − location)/scale`.
pub fn sn_pdf(x: f64, p: &SkewNormalParams) -> f64 {
    sn_log_pdf(x, p).exp()
}

/// Mean, variance and standardised third moment of a skew-Normal law.
pub fn sn_moments(p: &SkewNormalParams) -> (f64, f64, f64) {
    let bd = SQRT_2_OVER_PI * p.delta();
    let mean = p.location + p.scale * bd;
    let var_factor = 1.0 - bd * bd;
    let variance = p.scale * p.scale * var_factor;
    let skew = 0.5 * (4.0 - PI) * bd.powi(3) / var_factor.powf(1.5);
    (mean, variance, skew)
}

pub fn esn_log_pdf(x: f64, p: &ExtendedSkewNormalParams) -> f64 {
    let z = (x - p.location) / p.scale;
    let norm = log_std_normal_cdf(p.truncation / (1.0 + p.shape * p.shape).sqrt());
    -p.scale.ln() + log_std_normal_pdf(z) + log_std_normal_cdf(p.truncation + p.shape * z) - norm
}

/// `(1/scale) φ(z) Φ(τ + shape·z) / Φ(τ/√(1+shape²))` with truncation `τ`.
pub fn esn_pdf(x: f64, p: &ExtendedSkewNormalParams) -> f64 {
    esn_log_pdf(x, p).exp()
}

/// Half-Normal density supported on the `chirality` side of `origin`.
pub fn half_normal_pdf(x: f64, variance: f64, origin: f64, chirality: Chirality) -> f64 {
    let d = chirality.sign() * (x - origin);
    if d < 0.0 {
        return 0.0;
    }
    let sd = variance.sqrt();
    2.0 * std_normal_pdf(d / sd) / sd
}

/// Gaussian density with the given mean and variance.
pub fn normal_pdf(x: f64, mean: f64, variance: f64) -> f64 {
    let sd = variance.sqrt();
    std_normal_pdf((x - mean) / sd) / sd
}

pub fn normal_log_pdf(x: f64, mean: f64, variance: f64) -> f64 {
    let sd = variance.sqrt();
    log_std_normal_pdf((x - mean) / sd) - sd.ln()
}

pub fn normal_cdf(x: f64, mean: f64, variance: f64) -> f64 {
    std_normal_cdf((x - mean) / variance.sqrt())
}
