//! Neyman-Pearson machinery: exact and estimated log-likelihood ratios,
//! the threshold test and the GLRT.

mod closed_form;
mod histogram;
mod quadrature;
pub mod special;

pub use closed_form::{llr_fading, llr_fading_limit, llr_fading_nu2, llr_fading_nu3, llr_shadowing};
pub use histogram::{fit_quantized_pdfs, QuantizedPdfPair};
pub use quadrature::{integrate, integrate_log, ln_conditional_density, ln_density, llr_numeric_multi, llr_numeric_oracle};

use serde::{Deserialize, Serialize};

use crate::channel::ChannelParams;
use crate::error::{Error, Result};
use crate::geometry::{RegionLabel, RingScenario};

/// Conditional law of the attenuation given the UE distance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Likelihood {
    /// Rayleigh fading: exponential power gain, no shadowing.
    Fading,
    /// Log-normal shadowing, independent across positions, no fading.
    Shadowing,
}

/// Single-AP ring with LOS path loss: the setting of the closed forms.
#[derive(Debug, Clone, PartialEq)]
pub struct RingModel {
    pub ring: RingScenario,
    pub params: ChannelParams,
}

impl RingModel {
    pub fn new(ring: RingScenario, params: ChannelParams) -> Result<Self> {
        let m = Self { ring, params };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        self.ring.validate()?;
        self.params.validate()
    }
}

/// A likelihood-ratio statistic `M(a)` for one scalar attenuation.
#[derive(Debug, Clone, PartialEq)]
pub enum LlrModel {
    FadingNu2(RingModel),
    FadingNu3(RingModel),
    ShadowingUncorr(RingModel),
    NumericOracle(RingModel, Likelihood),
    QuantizedHistogram(QuantizedPdfPair),
}

impl LlrModel {
    pub fn llr(&self, a: f64) -> Result<f64> {
        match self {
            LlrModel::FadingNu2(m) => llr_fading_nu2(m, a),
            LlrModel::FadingNu3(m) => llr_fading_nu3(m, a),
            LlrModel::ShadowingUncorr(m) => llr_shadowing(m, a),
            LlrModel::NumericOracle(m, lik) => llr_numeric_oracle(m, *lik, a),
            LlrModel::QuantizedHistogram(q) => Ok(q.llr(a)),
        }
    }

    /// Closed-form model matching the channel settings of `m`.
    pub fn closed_form(m: RingModel, lik: Likelihood) -> Result<Self> {
        match lik {
            Likelihood::Shadowing => Ok(LlrModel::ShadowingUncorr(m)),
            Likelihood::Fading if m.params.nu == 2.0 => Ok(LlrModel::FadingNu2(m)),
            Likelihood::Fading if m.params.nu == 3.0 => Ok(LlrModel::FadingNu3(m)),
            Likelihood::Fading => Err(Error::InvalidConfig(format!(
                "no closed form for nu = {}; use the numeric oracle",
                m.params.nu
            ))),
        }
    }
}

/// NP decision: `H0` iff `M >= Lambda`.
pub fn np_decide(llr: f64, lambda: f64) -> RegionLabel {
    if llr >= lambda {
        RegionLabel::H0
    } else {
        RegionLabel::H1
    }
}

/// GLRT statistic: the H0 likelihood `p(obs | H0)` on the ring, for
/// observations that are i.i.d. given the position.
pub fn glrt_score(model: &RingModel, lik: Likelihood, obs: &[f64]) -> Result<f64> {
    ln_density(model, lik, RegionLabel::H0, obs).map(f64::exp)
}

/// `ln p(obs | H0)`, the log-domain GLRT statistic.
pub fn glrt_ln_score(model: &RingModel, lik: Likelihood, obs: &[f64]) -> Result<f64> {
    ln_density(model, lik, RegionLabel::H0, obs)
}

/// GLRT decision: `H0` iff `p >= Lambda`.
pub fn glrt_decide(density: f64, lambda: f64) -> RegionLabel {
    if density >= lambda {
        RegionLabel::H0
    } else {
        RegionLabel::H1
    }
}
