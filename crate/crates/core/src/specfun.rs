//! Scalar special functions used by the rectenna model.
//!
//! Provides the principal branch of the Lambert-W function and the modified
//! Bessel functions of the first kind of orders zero and one. Every function
//! has a form that stays finite for large arguments: the Bessel functions come
//! in exponentially scaled and logarithmic variants, and W0 can be solved from
//! `ln u` directly so the rectenna transfer function never overflows.

use crate::error::{Error, Result};

/// Above this argument the Bessel functions switch from the power series to
/// the asymptotic expansion of the scaled functions.
pub const LARGE_ARGUMENT: f64 = 30.0;

/// Lambert-W arguments above this are solved in the log domain.
const LOG_DOMAIN_W: f64 = 1e200;

const SERIES_REL_TOL: f64 = 1e-17;
const MAX_SERIES_TERMS: usize = 1000;
const HALLEY_STEP_TOL: f64 = 1e-14;
const MAX_ROOT_ITER: usize = 100;

fn check_nonneg(name: &str, x: f64) -> Result<()> {
    if x.is_nan() || x < 0.0 {
        return Err(Error::Domain(format!("{name} requires a nonnegative argument, got {x}")));
    }
    Ok(())
}

// ── Lambert W ───────────────────────────────────────────────────────────────

/// Principal branch W0 of the Lambert-W function on `[0, ∞)`.
///
/// Halley iteration on `w·e^w = u`. Very large `u` is handed to
/// [`lambert_w0_from_log`].
pub fn lambert_w0(u: f64) -> Result<f64> {
    check_nonneg("lambert_w0", u)?;
    if u == 0.0 {
        return Ok(0.0);
    }
    if u.is_infinite() {
        return Ok(f64::INFINITY);
    }
    if u > LOG_DOMAIN_W {
        return Ok(lambert_w0_from_log(u.ln()));
    }
    let mut w = if u > std::f64::consts::E {
        let l1 = u.ln();
        let l2 = l1.ln();
        l1 - l2 + l2 / l1
    } else {
        u.ln_1p()
    };
    for _ in 0..MAX_ROOT_ITER {
        let ew = w.exp();
        let f = w * ew - u;
        let wp1 = w + 1.0;
        let step = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1));
        w -= step;
        if step.abs() <= HALLEY_STEP_TOL * w.abs().max(f64::MIN_POSITIVE) {
            break;
        }
    }
    Ok(w)
}

/// W0(u) given only `ln u`, by solving `w + ln w = ln u`.
///
/// Intended for `ln u > 1`; smaller inputs are exponentiated and passed to
/// [`lambert_w0`], where no overflow is possible.
pub fn lambert_w0_from_log(ln_u: f64) -> f64 {
    if ln_u.is_nan() {
        return f64::NAN;
    }
    if ln_u <= 1.0 {
        return lambert_w0(ln_u.exp()).unwrap_or(f64::NAN);
    }
    if ln_u.is_infinite() {
        return f64::INFINITY;
    }
    let l2 = ln_u.ln();
    let mut w = ln_u - l2 + l2 / ln_u;
    for _ in 0..MAX_ROOT_ITER {
        let f = w + w.ln() - ln_u;
        let d1 = 1.0 + 1.0 / w;
        let d2 = -1.0 / (w * w);
        let step = (f / d1) / (1.0 - f * d2 / (2.0 * d1 * d1));
        w -= step;
        if step.abs() <= HALLEY_STEP_TOL * w {
            break;
        }
    }
    w
}

/// Returns `W0(a·e^a·e^L) − a` for `a > 0`, `L ≥ 0`.
///
/// The offset is solved directly from `δ + ln(1 + δ/a) = L`, so it keeps full
/// relative accuracy when `L` is tiny, where forming `W0(u) − a` would cancel.
pub fn lambert_w0_offset(a: f64, log_gain: f64) -> f64 {
    debug_assert!(a > 0.0);
    if log_gain <= 0.0 {
        return 0.0;
    }
    if log_gain.is_infinite() {
        return f64::INFINITY;
    }
    // F(δ) is increasing and concave, so Newton from the left is monotone.
    let mut delta = if log_gain < 1.0 {
        log_gain * a / (a + 1.0)
    } else {
        (lambert_w0_from_log(a.ln() + a + log_gain) - a).max(0.0)
    };
    for _ in 0..MAX_ROOT_ITER {
        let f = delta + (delta / a).ln_1p() - log_gain;
        let df = 1.0 + 1.0 / (a + delta);
        let step = f / df;
        delta -= step;
        if step.abs() <= 1e-15 * delta {
            break;
        }
    }
    delta
}

// ── Modified Bessel functions ───────────────────────────────────────────────

/// `I0(x) − 1` from the power series, accurate in the relative sense even for tiny `x`.
fn i0_minus_one_series(x: f64) -> f64 {
    let q = 0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 0.0;
    for k in 1..MAX_SERIES_TERMS {
        let kf = k as f64;
        term *= q / (kf * kf);
        sum += term;
        if term <= SERIES_REL_TOL * sum {
            break;
        }
    }
    sum
}

fn i1_series(x: f64) -> f64 {
    let q = 0.25 * x * x;
    let mut term = 0.5 * x;
    let mut sum = term;
    for k in 1..MAX_SERIES_TERMS {
        let kf = k as f64;
        term *= q / (kf * (kf + 1.0));
        sum += term;
        if term <= SERIES_REL_TOL * sum {
            break;
        }
    }
    sum
}

/// Asymptotic expansion of `√(2πx)·e^{-x}·I_ν(x)` for order `nu` ∈ {0, 1}.
fn scaled_asymptotic_sum(nu: f64, x: f64) -> f64 {
    let mu = 4.0 * nu * nu;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        let odd = (2 * k - 1) as f64;
        let next = term * (odd * odd - mu) / (8.0 * k as f64 * x);
        if next.abs() >= term.abs() {
            break;
        }
        term = next;
        sum += term;
        if term.abs() <= SERIES_REL_TOL * sum.abs() {
            break;
        }
    }
    sum
}

fn asymptotic_prefactor(x: f64) -> f64 {
    1.0 / (2.0 * std::f64::consts::PI * x).sqrt()
}

/// Modified Bessel function `I0(x)`.
///
/// Returns `+∞` once the value exceeds the double range (x ≳ 713); use
/// [`bessel_i0_log`] or [`bessel_i0_scaled`] there.
pub fn bessel_i0(x: f64) -> Result<f64> {
    check_nonneg("bessel_i0", x)?;
    if x < LARGE_ARGUMENT {
        Ok(1.0 + i0_minus_one_series(x))
    } else {
        Ok(x.exp() * asymptotic_prefactor(x) * scaled_asymptotic_sum(0.0, x))
    }
}

/// Exponentially scaled `e^{-x}·I0(x)`.
pub fn bessel_i0_scaled(x: f64) -> Result<f64> {
    check_nonneg("bessel_i0_scaled", x)?;
    if x < LARGE_ARGUMENT {
        Ok((-x).exp() * (1.0 + i0_minus_one_series(x)))
    } else {
        Ok(asymptotic_prefactor(x) * scaled_asymptotic_sum(0.0, x))
    }
}

/// `ln I0(x)`, finite for every finite `x ≥ 0`.
pub fn bessel_i0_log(x: f64) -> Result<f64> {
    check_nonneg("bessel_i0_log", x)?;
    if x < LARGE_ARGUMENT {
        Ok(i0_minus_one_series(x).ln_1p())
    } else {
        Ok(x + (asymptotic_prefactor(x) * scaled_asymptotic_sum(0.0, x)).ln())
    }
}

/// Modified Bessel function `I1(x)`; `+∞` past the double range.
pub fn bessel_i1(x: f64) -> Result<f64> {
    check_nonneg("bessel_i1", x)?;
    if x < LARGE_ARGUMENT {
        Ok(i1_series(x))
    } else {
        Ok(x.exp() * asymptotic_prefactor(x) * scaled_asymptotic_sum(1.0, x))
    }
}

/// Exponentially scaled `e^{-x}·I1(x)`.
pub fn bessel_i1_scaled(x: f64) -> Result<f64> {
    check_nonneg("bessel_i1_scaled", x)?;
    if x < LARGE_ARGUMENT {
        Ok((-x).exp() * i1_series(x))
    } else {
        Ok(asymptotic_prefactor(x) * scaled_asymptotic_sum(1.0, x))
    }
}

/// `ln I1(x)`; `-∞` at `x = 0`.
pub fn bessel_i1_log(x: f64) -> Result<f64> {
    check_nonneg("bessel_i1_log", x)?;
    if x == 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    if x < LARGE_ARGUMENT {
        Ok(i1_series(x).ln())
    } else {
        Ok(x + (asymptotic_prefactor(x) * scaled_asymptotic_sum(1.0, x)).ln())
    }
}

/// `I1(x) / (x·I0(x))`, with the limit 1/2 at `x = 0`.
pub fn bessel_i1_over_x_i0(x: f64) -> Result<f64> {
    check_nonneg("bessel_i1_over_x_i0", x)?;
    if x == 0.0 {
        return Ok(0.5);
    }
    if x < LARGE_ARGUMENT {
        Ok(i1_series(x) / (x * (1.0 + i0_minus_one_series(x))))
    } else {
        Ok(scaled_asymptotic_sum(1.0, x) / (x * scaled_asymptotic_sum(0.0, x)))
    }
}
