//! Scalar kernels. Everything goes through `libm` so results do not depend on
//! the platform's libm and the crate stays `no_std`.

use core::f64::consts::PI;

#[inline]
pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub fn abs(x: f64) -> f64 {
    libm::fabs(x)
}

#[inline]
pub fn floor(x: f64) -> f64 {
    libm::floor(x)
}

#[inline]
pub fn ceil(x: f64) -> f64 {
    libm::ceil(x)
}

#[inline]
pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

#[inline]
pub fn to_radians(deg: f64) -> f64 {
    deg * (PI / 180.0)
}

#[inline]
pub fn to_degrees(rad: f64) -> f64 {
    rad * (180.0 / PI)
}

#[inline]
pub fn sin_deg(deg: f64) -> f64 {
    libm::sin(to_radians(deg))
}

#[inline]
pub fn cos_deg(deg: f64) -> f64 {
    libm::cos(to_radians(deg))
}

/// Two-argument arc-tangent in degrees, in (-180, 180].
#[inline]
pub fn atan2_deg(y: f64, x: f64) -> f64 {
    wrap_deg(to_degrees(libm::atan2(y, x)))
}

/// Wraps an angle in degrees to (-180, 180].
pub fn wrap_deg(angle: f64) -> f64 {
    let w = angle - 360.0 * floor((angle + 180.0) / 360.0);
    if w <= -180.0 {
        w + 360.0
    } else if w > 180.0 {
        w - 360.0
    } else {
        w
    }
}

/// Signed wrap-aware difference `a - b` in degrees.
#[inline]
pub fn angle_diff_deg(a: f64, b: f64) -> f64 {
    wrap_deg(a - b)
}

/// Circular mean of headings in degrees via atan2 of summed sines and cosines.
pub fn circular_mean_deg<I: IntoIterator<Item = f64>>(angles: I) -> f64 {
    let (mut s, mut c) = (0.0, 0.0);
    for a in angles {
        s += sin_deg(a);
        c += cos_deg(a);
    }
    atan2_deg(s, c)
}

/// Standard normal CDF.
#[inline]
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / core::f64::consts::SQRT_2)
}

/// `log(exp(a) + exp(b))`.
#[inline]
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + libm::log1p(exp(lo - hi))
}

/// `log(sum(exp(x)))`, centred on the maximum. Empty input gives `-inf`.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    let sum: f64 = values.iter().map(|&x| exp(x - max)).sum();
    max + ln(sum)
}

/// `ln(2π)`.
pub const LN_2PI: f64 = 1.837_877_066_409_345_5;
