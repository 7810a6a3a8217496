//! Estimated distance approach: invert the path loss into per-AP distance
//! estimates, fit a position by least squares and threshold its signed
//! distance to the ROI border.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{linear_to_db, ChannelParams, FeatureVector, MIN_LINK_DISTANCE};
use crate::error::{Error, Result};
use crate::geometry::{AccessPoint, LinkState, Position, RegionLabel, Scenario};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EdaConfig {
    /// Random starting points in addition to the area centroid.
    pub starts: usize,
    /// Gradient-norm tolerance of the Gauss-Newton iterations.
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
    /// Decision threshold `d_delta` in meters.
    pub d_delta: f64,
}

impl Default for EdaConfig {
    fn default() -> Self {
        Self { starts: 10, tol: 1e-8, max_iter: 200, seed: 0, d_delta: 0.0 }
    }
}

/// Inverse of a path-loss law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Inversion {
    pub distance: f64,
    /// The attenuation fell outside `[PL(d_min), PL(d_max)]`.
    pub clamped: bool,
}

/// Distance at which the path loss equals `a_db`, clamped to `[d_min, d_max]`.
/// Both laws are affine in `log10 d`, so the inverse is explicit.
pub fn invert_path_loss(
    params: &ChannelParams,
    a_db: f64,
    h_ap: f64,
    state: LinkState,
    d_min: f64,
    d_max: f64,
) -> Result<Inversion> {
    if !a_db.is_finite() {
        return Err(Error::Domain(format!("attenuation {a_db} dB is not finite")));
    }
    let log_d = match state {
        LinkState::Los => a_db / (10.0 * params.nu) - params.wavenumber().log10(),
        LinkState::Nlos => {
            if !(h_ap > 0.0) {
                return Err(Error::Domain(format!("AP height must be positive, got {h_ap}")));
            }
            let slope = 40.0 * (1.0 - 4e-3 * h_ap);
            let offset = -18.0 * h_ap.log10() + 21.0 * (params.f / 1e6).log10() + 80.0;
            (a_db - offset) / slope + 3.0
        }
    };
    let d = 10f64.powf(log_d);
    if d < d_min {
        Ok(Inversion { distance: d_min, clamped: true })
    } else if d > d_max {
        Ok(Inversion { distance: d_max, clamped: true })
    } else {
        Ok(Inversion { distance: d, clamped: false })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PositionEstimate {
    pub position: Position,
    /// Sum of squared distance residuals at `position`.
    pub residual: f64,
    /// Fewer than three APs: the fit does not pin down a point.
    pub ambiguous: bool,
    pub clamped: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdaModel {
    pub scenario: Scenario,
    pub params: ChannelParams,
    pub config: EdaConfig,
    starts: Vec<Position>,
}

/// `sum_n (|x - p_n| - L_n)^2`.
pub fn distance_residual(aps: &[AccessPoint], dist: &[f64], x: &Position) -> f64 {
    aps.iter().zip(dist).map(|(ap, l)| (x.distance(&ap.position) - l).powi(2)).sum()
}

impl EdaModel {
    pub fn new(scenario: Scenario, params: ChannelParams, config: EdaConfig) -> Result<Self> {
        scenario.validate()?;
        params.validate()?;
        if !(config.tol > 0.0) || config.max_iter == 0 {
            return Err(Error::InvalidConfig("EDA needs a positive tolerance and iteration budget".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut starts = vec![scenario.centroid()];
        starts.extend((0..config.starts).map(|_| scenario.sample_uniform(None, &mut rng)));
        Ok(Self { scenario, params, config, starts })
    }

    pub fn with_threshold(mut self, d_delta: f64) -> Self {
        self.config.d_delta = d_delta;
        self
    }

    fn link_states(&self, a: &FeatureVector) -> Result<Vec<LinkState>> {
        match (&a.links, &self.scenario) {
            (Some(l), _) if l.len() == a.len() => Ok(l.clone()),
            (Some(l), _) => Err(Error::DimensionMismatch { expected: a.len(), found: l.len() }),
            (None, Scenario::Ring(_)) => Ok(vec![LinkState::Los; a.len()]),
            (None, Scenario::Urban(_)) => Err(Error::Data("EDA needs the link states of each observation".into())),
        }
    }

    /// Per-AP distance estimates from an observation.
    pub fn distances(&self, a: &FeatureVector) -> Result<(Vec<f64>, bool)> {
        let aps = self.scenario.access_points();
        if a.len() != aps.len() {
            return Err(Error::DimensionMismatch { expected: aps.len(), found: a.len() });
        }
        let states = self.link_states(a)?;
        let bb = self.scenario.bounding_box();
        let d_max = (bb.x1 - bb.x0).hypot(bb.y1 - bb.y0);
        let mut clamped = false;
        let mut out = Vec::with_capacity(aps.len());
        for ((ap, &v), &state) in aps.iter().zip(&a.a).zip(&states) {
            let inv = invert_path_loss(&self.params, linear_to_db(v), ap.height, state, MIN_LINK_DISTANCE, d_max)?;
            clamped |= inv.clamped;
            out.push(inv.distance);
        }
        Ok((out, clamped))
    }

    /// Least-squares position fit from the distance estimates.
    pub fn estimate_position(&self, a: &FeatureVector) -> Result<PositionEstimate> {
        let (dist, clamped) = self.distances(a)?;
        let aps = self.scenario.access_points();
        if aps.len() == 1 {
            // Any point on the circle fits; take the one nearest the centroid.
            let c = self.scenario.centroid();
            let p = aps[0].position;
            let (dx, dy) = (c.x - p.x, c.y - p.y);
            let r = dx.hypot(dy);
            let (ux, uy) = if r > 0.0 { (dx / r, dy / r) } else { (1.0, 0.0) };
            let position = Position::new(p.x + dist[0] * ux, p.y + dist[0] * uy);
            return Ok(PositionEstimate { position, residual: 0.0, ambiguous: true, clamped });
        }
        let mut best: Option<(Position, f64)> = None;
        let mut worst_grad = 0.0f64;
        for start in &self.starts {
            match self.gauss_newton(&aps, &dist, *start) {
                Ok((p, f)) => {
                    if best.is_none_or(|(_, b)| f < b) {
                        best = Some((p, f));
                    }
                }
                Err(g) => worst_grad = worst_grad.max(g),
            }
        }
        let (position, residual) = best.ok_or(Error::NonConvergence { residual: worst_grad })?;
        Ok(PositionEstimate { position, residual, ambiguous: aps.len() < 3, clamped })
    }

    /// Damped Newton / Gauss-Newton with step halving. Returns the point and objective, or
    /// the last gradient norm on failure.
    fn gauss_newton(&self, aps: &[AccessPoint], dist: &[f64], start: Position) -> std::result::Result<(Position, f64), f64> {
        let scale = 1.0 + dist.iter().sum::<f64>();
        let mut x = start;
        let mut f = distance_residual(aps, dist, &x);
        let mut grad_norm = f64::INFINITY;
        for _ in 0..self.config.max_iter {
            // J^T J, J^T r for residuals r_n = |x - p_n| - L_n, and the
            // second-order term sum r_n (I - u u^T) / |x - p_n|.
            let (mut a11, mut a12, mut a22, mut g1, mut g2) = (0.0, 0.0, 0.0, 0.0, 0.0);
            let (mut s11, mut s12, mut s22) = (0.0, 0.0, 0.0);
            for (ap, l) in aps.iter().zip(dist) {
                let (dx, dy) = (x.x - ap.position.x, x.y - ap.position.y);
                let r = dx.hypot(dy).max(1e-9);
                let (jx, jy) = (dx / r, dy / r);
                let res = r - l;
                a11 += jx * jx;
                a12 += jx * jy;
                a22 += jy * jy;
                g1 += jx * res;
                g2 += jy * res;
                s11 += res * (1.0 - jx * jx) / r;
                s12 -= res * jx * jy / r;
                s22 += res * (1.0 - jy * jy) / r;
            }
            grad_norm = 2.0 * g1.hypot(g2);
            if grad_norm <= self.config.tol * scale {
                return Ok((x, f));
            }
            // Newton step when the full Hessian is positive definite,
            // otherwise Gauss-Newton with light Levenberg damping.
            let (h11, h12, h22) = (a11 + s11, a12 + s12, a22 + s22);
            let (b11, b12, b22) = if h11 > 0.0 && h11 * h22 - h12 * h12 > 1e-12 * (h11 + h22).powi(2) {
                (h11, h12, h22)
            } else {
                let mu = 1e-9 * (a11 + a22) + 1e-300;
                (a11 + mu, a12, a22 + mu)
            };
            let det = b11 * b22 - b12 * b12;
            let sx = -(b22 * g1 - b12 * g2) / det;
            let sy = -(b11 * g2 - b12 * g1) / det;
            let mut t = 1.0;
            let mut moved = false;
            for _ in 0..60 {
                let cand = Position::new(x.x + t * sx, x.y + t * sy);
                let fc = distance_residual(aps, dist, &cand);
                if fc < f {
                    x = cand;
                    f = fc;
                    moved = true;
                    break;
                }
                t *= 0.5;
            }
            if !moved {
                // No representable decrease along the Gauss-Newton direction.
                return Ok((x, f));
            }
        }
        Err(grad_norm)
    }

    /// Signed border distance of the estimated position; larger favors H1.
    pub fn score(&self, a: &FeatureVector) -> Result<f64> {
        let est = self.estimate_position(a)?;
        Ok(self.scenario.signed_border_distance(&est.position))
    }
}

/// EDA decision: `H0` iff the estimated signed border distance is below `d_delta`.
pub fn eda_decide(model: &EdaModel, a: &FeatureVector) -> Result<RegionLabel> {
    Ok(decide_distance(model.score(a)?, model.config.d_delta))
}

pub fn decide_distance(d_b: f64, d_delta: f64) -> RegionLabel {
    if d_b < d_delta {
        RegionLabel::H0
    } else {
        RegionLabel::H1
    }
}
