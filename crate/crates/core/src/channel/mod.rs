//! Channel model: path loss, shadowing, Rayleigh fading and fading averaging.

mod shadowing;

pub use shadowing::{generate_grid_map, generate_shadowing_map, GridField, ShadowingMap};

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{LinkState, Position, RegionLabel, Scenario};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Links shorter than this are evaluated at this distance.
pub const MIN_LINK_DISTANCE: f64 = 0.1;

/// Spatial structure of the shadowing field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ShadowingKind {
    /// Exponentially correlated in space with decorrelation distance `d_c`.
    #[default]
    Correlated,
    /// Independent draw for every observation.
    Uncorrelated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelParams {
    /// Carrier frequency in Hz.
    pub f: f64,
    /// Path-loss exponent of the LOS model.
    pub nu: f64,
    pub sigma_s_db: f64,
    /// Shadowing decorrelation distance in meters.
    pub d_c: f64,
    pub c: f64,
    pub shadowing: ShadowingKind,
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self {
            f: 2.12e9,
            nu: 2.0,
            sigma_s_db: 8.0,
            d_c: 75.0,
            c: SPEED_OF_LIGHT,
            shadowing: ShadowingKind::Correlated,
        }
    }
}

impl ChannelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.f > 0.0 && self.f.is_finite()) {
            return Err(Error::InvalidConfig(format!("carrier frequency must be positive, got {}", self.f)));
        }
        if !(self.nu >= 1.0 && self.nu.is_finite()) {
            return Err(Error::InvalidConfig(format!("path-loss exponent must be >= 1, got {}", self.nu)));
        }
        if !(self.sigma_s_db >= 0.0 && self.sigma_s_db.is_finite()) {
            return Err(Error::InvalidConfig(format!("shadowing std must be >= 0, got {}", self.sigma_s_db)));
        }
        if !(self.d_c > 0.0 && self.d_c.is_finite()) {
            return Err(Error::InvalidConfig(format!("decorrelation distance must be positive, got {}", self.d_c)));
        }
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::InvalidConfig("speed of light must be positive".into()));
        }
        Ok(())
    }

    /// `4 pi f / c`.
    pub fn wavenumber(&self) -> f64 {
        4.0 * std::f64::consts::PI * self.f / self.c
    }
}

pub fn db_to_linear(x_db: f64) -> f64 {
    10f64.powf(x_db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

fn check_distance(d: f64) -> Result<()> {
    if d > 0.0 && d.is_finite() {
        Ok(())
    } else {
        Err(Error::NonPositiveDistance(d))
    }
}

/// LOS path loss `10 nu log10(4 pi f d / c)` in dB.
pub fn path_loss_los_db(params: &ChannelParams, d: f64) -> Result<f64> {
    check_distance(d)?;
    Ok(10.0 * params.nu * (params.wavenumber() * d).log10())
}

/// NLOS path loss in dB for an AP mounted at height `h_ap`.
pub fn path_loss_nlos_db(params: &ChannelParams, d: f64, h_ap: f64) -> Result<f64> {
    check_distance(d)?;
    if !(h_ap > 0.0) {
        return Err(Error::Domain(format!("AP height must be positive, got {h_ap}")));
    }
    Ok(40.0 * (1.0 - 4e-3 * h_ap) * (d / 1e3).log10() - 18.0 * h_ap.log10() + 21.0 * (params.f / 1e6).log10() + 80.0)
}

pub fn path_loss_db(params: &ChannelParams, d: f64, h_ap: f64, state: LinkState) -> Result<f64> {
    match state {
        LinkState::Los => path_loss_los_db(params, d),
        LinkState::Nlos => path_loss_nlos_db(params, d, h_ap),
    }
}

/// One attenuation observation across all APs.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    /// Linear attenuations, one per AP.
    pub a: Vec<f64>,
    pub label: Option<RegionLabel>,
    pub position: Option<Position>,
    /// Link states at the true position, when known.
    pub links: Option<Vec<LinkState>>,
}

impl FeatureVector {
    pub fn new(a: Vec<f64>) -> Result<Self> {
        if let Some(bad) = a.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::Data(format!("attenuation must be positive and finite, got {bad}")));
        }
        Ok(Self { a, label: None, position: None, links: None })
    }

    pub fn with_label(mut self, label: RegionLabel) -> Self {
        self.label = Some(label);
        self
    }

    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    pub fn to_db(&self) -> Vec<f64> {
        self.a.iter().map(|&v| linear_to_db(v)).collect()
    }
}

/// Deterministic per-AP mean attenuation in dB at `ue` (path loss plus
/// shadowing), together with the link states.
pub fn mean_attenuation_db<R: Rng + ?Sized>(
    scenario: &Scenario,
    params: &ChannelParams,
    map: &ShadowingMap,
    ue: &Position,
    rng: &mut R,
) -> Result<(Vec<f64>, Vec<LinkState>)> {
    let aps = scenario.access_points();
    let mut out = Vec::with_capacity(aps.len());
    let mut links = Vec::with_capacity(aps.len());
    for (n, ap) in aps.iter().enumerate() {
        let state = scenario.los_state(ue, n)?;
        let d = ue.distance(&ap.position).max(MIN_LINK_DISTANCE);
        let pl = path_loss_db(params, d, ap.height, state)?;
        out.push(pl + map.value(n, ue, rng)?);
        links.push(state);
    }
    Ok((out, links))
}

/// Draws one attenuation vector at `ue`. With fading the power gain `1/a` is
/// exponential with mean `10^(-A_dB/10)`.
pub fn sample_attenuation<R: Rng + ?Sized>(
    scenario: &Scenario,
    params: &ChannelParams,
    map: &ShadowingMap,
    ue: &Position,
    fading: bool,
    rng: &mut R,
) -> Result<FeatureVector> {
    if !scenario.in_area(ue) {
        return Err(Error::OutsideArea { x: ue.x, y: ue.y });
    }
    let (mean_db, links) = mean_attenuation_db(scenario, params, map, ue, rng)?;
    let a = mean_db
        .iter()
        .map(|&m| {
            let lin = db_to_linear(m);
            if fading {
                let e: f64 = Exp1.sample(rng);
                lin / e
            } else {
                lin
            }
        })
        .collect();
    Ok(FeatureVector {
        a,
        label: Some(scenario.region_of(ue)?),
        position: Some(*ue),
        links: Some(links),
    })
}

/// Componentwise arithmetic mean of `k_f` observations at one position.
pub fn average_fading(samples: &[FeatureVector], k_f: usize) -> Result<FeatureVector> {
    if samples.len() != k_f || k_f == 0 {
        return Err(Error::DimensionMismatch { expected: k_f, found: samples.len() });
    }
    let n = samples[0].len();
    let mut acc = vec![0.0; n];
    for s in samples {
        if s.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: s.len() });
        }
        for (a, v) in acc.iter_mut().zip(&s.a) {
            *a += v;
        }
    }
    acc.iter_mut().for_each(|v| *v /= k_f as f64);
    Ok(FeatureVector {
        a: acc,
        label: samples[0].label,
        position: samples[0].position,
        links: samples[0].links.clone(),
    })
}

/// Draws `n_points` positions uniformly from `region` (`None`: whole area)
/// and returns one `k_f`-averaged observation per position. With
/// `fading = false` the average is over identical draws and `k_f` only
/// affects the raw draw count.
#[allow(clippy::too_many_arguments)]
pub fn build_dataset<R: Rng + ?Sized>(
    scenario: &Scenario,
    params: &ChannelParams,
    map: &ShadowingMap,
    n_points: usize,
    k_f: usize,
    region: Option<RegionLabel>,
    fading: bool,
    rng: &mut R,
) -> Result<Vec<FeatureVector>> {
    if n_points == 0 || k_f == 0 {
        return Err(Error::InvalidConfig("n_points and k_f must be at least 1".into()));
    }
    let mut out = Vec::with_capacity(n_points);
    for _ in 0..n_points {
        let ue = scenario.sample_uniform(region, rng);
        out.push(observe(scenario, params, map, &ue, k_f, fading, rng)?);
    }
    Ok(out)
}

/// One `k_f`-averaged observation at a fixed position.
pub fn observe<R: Rng + ?Sized>(
    scenario: &Scenario,
    params: &ChannelParams,
    map: &ShadowingMap,
    ue: &Position,
    k_f: usize,
    fading: bool,
    rng: &mut R,
) -> Result<FeatureVector> {
    if k_f == 1 || !fading {
        return sample_attenuation(scenario, params, map, ue, fading, rng);
    }
    // Shadowing is fixed at a position, so uncorrelated shadowing is drawn
    // once and shared by the k_f fading draws.
    let (mean_db, links) = mean_attenuation_db(scenario, params, map, ue, rng)?;
    let mut a = vec![0.0; mean_db.len()];
    for _ in 0..k_f {
        for (acc, &m) in a.iter_mut().zip(&mean_db) {
            let e: f64 = Exp1.sample(rng);
            *acc += db_to_linear(m) / e;
        }
    }
    a.iter_mut().for_each(|v| *v /= k_f as f64);
    Ok(FeatureVector {
        a,
        label: Some(scenario.region_of(ue)?),
        position: Some(*ue),
        links: Some(links),
    })
}
