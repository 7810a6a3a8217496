//! Closed-form log-likelihood ratios for the single-AP ring with LOS path
//! loss.
//!
//! With `kappa = 4 pi f / c`, `Delta0 = R_in^2 - R_min^2` and
//! `Delta1 = R_out^2 - R_in^2`:
//!
//! * fading, exponent `nu`: with `u(R) = (kappa R)^nu / a` and
//!   `s = 1 + 2 / nu`,
//!   `M = ln(Delta1 / Delta0) + ln[G(s, u(R_min)) - G(s, u(R_in))]
//!        - ln[G(s, u(R_in)) - G(s, u(R_out))]`
//!   where `G` is the upper incomplete gamma. For `nu = 2`,
//!   `G(2, u) = V(u) = e^(-u) (1 + u)`.
//! * log-normal shadowing: with `A = 10 log10 a`,
//!   `beta = 10 nu / ln 10`, `w(R) = (A - beta ln(kappa R)) / sigma + 2 sigma / beta`,
//!   `M = ln(Delta1 / Delta0) + ln[Phi(w(R_min)) - Phi(w(R_in))]
//!        - ln[Phi(w(R_in)) - Phi(w(R_out))]`.
//!
//! The area prefactor is `Delta1 / Delta0` in every case: each hypothesis
//! density carries `1 / Delta_i` from the uniform-in-area UE law.

use super::special::{ln_1m_exp, ln_inc_gamma_diff, ln_norm_cdf_diff};
use super::RingModel;
use crate::error::{Error, Result};

fn check_attenuation(a: f64) -> Result<()> {
    if a > 0.0 && a.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("attenuation must be positive and finite, got {a}")))
    }
}

fn combine(model: &RingModel, ln_in: f64, ln_out: f64, a: f64) -> Result<f64> {
    if ln_in == f64::NEG_INFINITY && ln_out == f64::NEG_INFINITY {
        return Err(Error::BothDensitiesZero(a));
    }
    let r = &model.ring;
    Ok((r.delta_outside() / r.delta_inside()).ln() + ln_in - ln_out)
}

/// `ln V(u)` with `V(u) = e^(-u) (1 + u)`, accurate for small `u`.
fn ln_v(u: f64) -> f64 {
    if u < 0.5 {
        // -u + ln(1 + u) = sum_{k >= 2} (-1)^(k+1) u^k / k
        let mut pow = u * u;
        let mut sum = 0.0;
        let mut k = 2.0;
        loop {
            let term = pow / k;
            if (k as i64) % 2 == 0 {
                sum -= term;
            } else {
                sum += term;
            }
            if term < 1e-17 * sum.abs() {
                break;
            }
            pow *= u;
            k += 1.0;
        }
        sum
    } else {
        -u + u.ln_1p()
    }
}

/// `ln(V(u1) - V(u2))` for `u1 < u2`.
fn ln_v_diff(u1: f64, u2: f64) -> f64 {
    let hi = ln_v(u1);
    hi + ln_1m_exp(ln_v(u2) - hi)
}

fn u_of(model: &RingModel, r: f64, a: f64) -> f64 {
    (model.params.nu * (model.params.wavenumber() * r).ln() - a.ln()).exp()
}

/// Fading LLR for any path-loss exponent, via incomplete gamma differences.
pub fn llr_fading(model: &RingModel, a: f64) -> Result<f64> {
    model.validate()?;
    check_attenuation(a)?;
    let s = 1.0 + 2.0 / model.params.nu;
    let r = &model.ring;
    let (u_min, u_in, u_out) = (u_of(model, r.r_min, a), u_of(model, r.r_in, a), u_of(model, r.r_out, a));
    let ln_in = ln_inc_gamma_diff(s, u_min, u_in)?;
    let ln_out = ln_inc_gamma_diff(s, u_in, u_out)?;
    combine(model, ln_in, ln_out, a)
}

/// Fading LLR for `nu = 2` in terms of `V(u) = e^(-u) (1 + u)`.
pub fn llr_fading_nu2(model: &RingModel, a: f64) -> Result<f64> {
    model.validate()?;
    check_attenuation(a)?;
    if model.params.nu != 2.0 {
        return Err(Error::InvalidConfig(format!("nu = 2 closed form called with nu = {}", model.params.nu)));
    }
    let r = &model.ring;
    let (u_min, u_in, u_out) = (u_of(model, r.r_min, a), u_of(model, r.r_in, a), u_of(model, r.r_out, a));
    combine(model, ln_v_diff(u_min, u_in), ln_v_diff(u_in, u_out), a)
}

/// Fading LLR for `nu = 3`, with `Gamma(5/3, .)` differences.
pub fn llr_fading_nu3(model: &RingModel, a: f64) -> Result<f64> {
    if model.params.nu != 3.0 {
        return Err(Error::InvalidConfig(format!("nu = 3 closed form called with nu = {}", model.params.nu)));
    }
    llr_fading(model, a)
}

/// LLR under log-normal shadowing without fading.
pub fn llr_shadowing(model: &RingModel, a: f64) -> Result<f64> {
    model.validate()?;
    check_attenuation(a)?;
    let sigma = model.params.sigma_s_db;
    if !(sigma > 0.0) {
        return Err(Error::DegenerateShadowing);
    }
    let beta = 10.0 * model.params.nu / std::f64::consts::LN_10;
    let a_db = 10.0 * a.log10();
    let kappa = model.params.wavenumber();
    let w = |r: f64| (a_db - beta * (kappa * r).ln()) / sigma + 2.0 * sigma / beta;
    let r = &model.ring;
    let (w_min, w_in, w_out) = (w(r.r_min), w(r.r_in), w(r.r_out));
    combine(model, ln_norm_cdf_diff(w_min, w_in)?, ln_norm_cdf_diff(w_in, w_out)?, a)
}

/// Limit of the fading LLR as `a -> inf`:
/// `ln[(Delta1 / Delta0) (R_in^p - R_min^p) / (R_out^p - R_in^p)]`, `p = nu + 2`.
pub fn llr_fading_limit(model: &RingModel) -> f64 {
    let r = &model.ring;
    let p = model.params.nu + 2.0;
    let num = r.r_in.powf(p) - r.r_min.powf(p);
    let den = r.r_out.powf(p) - r.r_in.powf(p);
    (r.delta_outside() / r.delta_inside() * num / den).ln()
}
