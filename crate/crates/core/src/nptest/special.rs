//! Incomplete gamma and error functions, with log-domain variants for
//! differences of tails.

use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

const EPS: f64 = 1e-16;
const TINY: f64 = 1e-300;
const MAX_ITER: usize = 10_000;

/// `ln(1 - exp(x))` for `x <= 0`.
pub fn ln_1m_exp(x: f64) -> f64 {
    if x > -std::f64::consts::LN_2 {
        (-x.exp_m1()).ln()
    } else {
        (-x.exp()).ln_1p()
    }
}

/// `ln(exp(a) + exp(b))`.
pub fn ln_add_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if lo == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

fn check(s: f64, x: f64) -> Result<()> {
    if !(s > 0.0 && s.is_finite()) || !(x >= 0.0) {
        return Err(Error::Domain(format!("incomplete gamma needs s > 0 and x >= 0, got s = {s}, x = {x}")));
    }
    Ok(())
}

/// Series for `ln gamma(s, x)` (lower, unregularized); converges for all x,
/// used for `x < s + 1`.
fn ln_lower_series(s: f64, x: f64) -> f64 {
    if x == 0.0 {
        return f64::NEG_INFINITY;
    }
    let mut term = 1.0 / s;
    let mut sum = term;
    let mut a = s;
    for _ in 0..MAX_ITER {
        a += 1.0;
        term *= x / a;
        sum += term;
        if term.abs() < sum.abs() * EPS {
            break;
        }
    }
    -x + s * x.ln() + sum.ln()
}

/// Continued fraction (modified Lentz) for `ln Gamma(s, x)` (upper,
/// unregularized), used for `x >= s + 1`.
fn ln_upper_cf(s: f64, x: f64) -> f64 {
    if x == f64::INFINITY {
        return f64::NEG_INFINITY;
    }
    let mut b = x + 1.0 - s;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..MAX_ITER {
        let an = -(i as f64) * (i as f64 - s);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    -x + s * x.ln() + h.ln()
}

/// `ln gamma(s, x) = ln int_0^x t^(s-1) e^(-t) dt`.
pub fn ln_inc_gamma_lower(s: f64, x: f64) -> Result<f64> {
    check(s, x)?;
    Ok(if x < s + 1.0 {
        ln_lower_series(s, x)
    } else {
        let g = ln_gamma(s);
        g + ln_1m_exp(ln_upper_cf(s, x) - g)
    })
}

/// `ln Gamma(s, x) = ln int_x^inf t^(s-1) e^(-t) dt`.
pub fn ln_inc_gamma_upper(s: f64, x: f64) -> Result<f64> {
    check(s, x)?;
    Ok(if x < s + 1.0 {
        let g = ln_gamma(s);
        g + ln_1m_exp(ln_lower_series(s, x) - g)
    } else {
        ln_upper_cf(s, x)
    })
}

/// Upper incomplete gamma `Gamma(s, x)`.
pub fn inc_gamma_upper(s: f64, x: f64) -> Result<f64> {
    ln_inc_gamma_upper(s, x).map(f64::exp)
}

/// Lower incomplete gamma `gamma(s, x)`.
pub fn inc_gamma_lower(s: f64, x: f64) -> Result<f64> {
    ln_inc_gamma_lower(s, x).map(f64::exp)
}

/// `ln(Gamma(s, x1) - Gamma(s, x2))` for `0 <= x1 <= x2 <= inf`: the log
/// mass of `t^(s-1) e^(-t)` on `[x1, x2]`, without cancellation when both
/// ends are in the same tail.
pub fn ln_inc_gamma_diff(s: f64, x1: f64, x2: f64) -> Result<f64> {
    check(s, x1)?;
    if !(x2 >= x1) {
        return Err(Error::Domain(format!("expected x1 <= x2, got {x1} > {x2}")));
    }
    if x1 == x2 {
        return Ok(f64::NEG_INFINITY);
    }
    let split = s + 1.0;
    Ok(if x2 <= split {
        let hi = ln_lower_series(s, x2);
        hi + ln_1m_exp(ln_lower_series(s, x1) - hi)
    } else if x1 >= split {
        let hi = ln_upper_cf(s, x1);
        hi + ln_1m_exp(ln_upper_cf(s, x2) - hi)
    } else {
        let g = ln_gamma(s);
        let rest = (ln_lower_series(s, x1) - g).exp() + (ln_upper_cf(s, x2) - g).exp();
        g + (-rest).ln_1p()
    })
}

const LN_SQRT_PI: f64 = 0.572_364_942_924_700_087_071_713_675_677;

/// Error function.
pub fn erf(x: f64) -> f64 {
    if x == 0.0 || x.is_nan() {
        return x;
    }
    let x2 = x * x;
    let v = if x2 < 1.5 {
        (ln_lower_series(0.5, x2) - LN_SQRT_PI).exp()
    } else {
        1.0 - (ln_upper_cf(0.5, x2) - LN_SQRT_PI).exp()
    };
    v.copysign(x)
}

/// `ln erfc(x)`, finite for every finite `x`.
pub fn ln_erfc(x: f64) -> f64 {
    if x.is_nan() {
        return x;
    }
    if x <= 0.0 {
        return (1.0 + erf(-x)).ln();
    }
    let x2 = x * x;
    if x2 < 1.5 {
        ln_1m_exp(ln_lower_series(0.5, x2) - LN_SQRT_PI)
    } else {
        ln_upper_cf(0.5, x2) - LN_SQRT_PI
    }
}

/// Complementary error function.
pub fn erfc(x: f64) -> f64 {
    ln_erfc(x).exp()
}

/// Standard normal log-survival `ln P(Z > z)`.
pub fn ln_norm_sf(z: f64) -> f64 {
    ln_erfc(z / std::f64::consts::SQRT_2) - std::f64::consts::LN_2
}

/// `ln(Phi(x) - Phi(y))` for `x >= y`, stable in both tails.
pub fn ln_norm_cdf_diff(x: f64, y: f64) -> Result<f64> {
    if !(x >= y) {
        return Err(Error::Domain(format!("expected x >= y, got {x} < {y}")));
    }
    if x == y {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(if y >= 0.0 {
        let hi = ln_norm_sf(y);
        hi + ln_1m_exp(ln_norm_sf(x) - hi)
    } else if x <= 0.0 {
        let hi = ln_norm_sf(-x);
        hi + ln_1m_exp(ln_norm_sf(-y) - hi)
    } else {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        (0.5 * (erf(x * r) + erf(-y * r))).ln()
    })
}
