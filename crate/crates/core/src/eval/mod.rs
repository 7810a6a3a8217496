//! Threshold calibration, error-rate estimation, ROC sweeps and averaging
//! over shadowing maps.
//!
//! Every score follows one orientation: larger values favor H1, and a
//! threshold `lambda` decides H1 iff `score > lambda`.

mod experiment;

pub use experiment::{evaluate_model, run_experiment, scenario_id, simulate_grid, simulate_map, train_model, Experiment, ExperimentResult, MapData, MapResult, ModelContext, ModelSpec, OperatingPoint, TrainedModel};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::FeatureVector;
use crate::error::{Error, Result};
use crate::geometry::RegionLabel;

const Z95: f64 = 1.959_963_984_540_054;

/// Wilson score interval at 95% for `k` successes out of `n`.
pub fn wilson(k: usize, n: usize) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let p = k as f64 / n;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = Z95 * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    let lo = if k == 0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if k as f64 == n { 1.0 } else { (center + half).min(1.0) };
    (lo, hi)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rates {
    pub p_fa: f64,
    pub p_md: f64,
    pub n_h0: usize,
    pub n_h1: usize,
    pub fa_ci: (f64, f64),
    pub md_ci: (f64, f64),
}

/// Empirical FA and MD frequencies with Wilson intervals.
pub fn estimate_rates(decisions: &[RegionLabel], truth: &[RegionLabel]) -> Result<Rates> {
    if decisions.len() != truth.len() {
        return Err(Error::DimensionMismatch { expected: truth.len(), found: decisions.len() });
    }
    let (mut n0, mut n1, mut fa, mut md) = (0, 0, 0, 0);
    for (d, t) in decisions.iter().zip(truth) {
        match t {
            RegionLabel::H0 => {
                n0 += 1;
                fa += usize::from(*d == RegionLabel::H1);
            }
            RegionLabel::H1 => {
                n1 += 1;
                md += usize::from(*d == RegionLabel::H0);
            }
        }
    }
    if n0 == 0 || n1 == 0 {
        return Err(Error::EmptyClass("rate estimation needs both classes".into()));
    }
    Ok(rates_from_counts(fa, n0, md, n1))
}

fn rates_from_counts(fa: usize, n0: usize, md: usize, n1: usize) -> Rates {
    Rates {
        p_fa: fa as f64 / n0 as f64,
        p_md: md as f64 / n1 as f64,
        n_h0: n0,
        n_h1: n1,
        fa_ci: wilson(fa, n0),
        md_ci: wilson(md, n1),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub threshold: f64,
    /// FA frequency of the calibration scores at `threshold`.
    pub empirical_fa: f64,
    /// All calibration scores are equal.
    pub degenerate: bool,
}

/// Smallest threshold whose empirical FA on `scores_h0` does not exceed
/// `target_fa`: with `k = floor(target_fa n)`, `lambda` is the
/// `(n - k)`-th smallest score.
pub fn calibrate_threshold(scores_h0: &[f64], target_fa: f64) -> Result<Calibration> {
    if scores_h0.is_empty() {
        return Err(Error::EmptyClass("no H0 scores to calibrate on".into()));
    }
    if !(target_fa > 0.0 && target_fa <= 1.0) {
        return Err(Error::InvalidConfig(format!("target FA must lie in (0, 1], got {target_fa}")));
    }
    if scores_h0.iter().any(|s| s.is_nan()) {
        return Err(Error::Data("NaN score".into()));
    }
    let mut s = scores_h0.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    let k = ((target_fa * n as f64) + 1e-9).floor() as usize;
    let degenerate = s[0] == s[n - 1];
    if degenerate {
        log::warn!("calibration scores are constant; FA can only be 0 or 1");
    }
    let threshold = if k >= n {
        f64::NEG_INFINITY
    } else {
        if k == 0 {
            log::warn!("target FA {target_fa} is below 1/{n}; using the largest calibration score");
        }
        s[n - k - 1]
    };
    let fa = s.len() - s.partition_point(|&x| x <= threshold);
    Ok(Calibration { threshold, empirical_fa: fa as f64 / n as f64, degenerate })
}

pub fn decide(score: f64, threshold: f64) -> RegionLabel {
    if score > threshold {
        RegionLabel::H1
    } else {
        RegionLabel::H0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub p_fa: f64,
    pub p_md: f64,
    pub fa_ci: (f64, f64),
    pub md_ci: (f64, f64),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RocMeta {
    pub scenario: String,
    pub model: String,
    pub seed: u64,
}

/// Operating points ordered by increasing threshold (so `P_FA` is
/// non-increasing and `P_MD` non-decreasing along the list).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
    pub n_h0: usize,
    pub n_h1: usize,
    pub meta: RocMeta,
}

fn sorted(v: &[f64]) -> Result<Vec<f64>> {
    if v.iter().any(|s| s.is_nan()) {
        return Err(Error::Data("NaN score".into()));
    }
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    Ok(s)
}

fn count_above(sorted: &[f64], t: f64) -> usize {
    sorted.len() - sorted.partition_point(|&x| x <= t)
}

/// ROC from raw scores. Thresholds sit at the midpoints between
/// consecutive distinct pooled scores, plus `-inf` and `+inf` for the two
/// trivial corners; with `n_thresholds` the midpoints are subsampled
/// evenly by rank.
pub fn roc_from_scores(scores_h0: &[f64], scores_h1: &[f64], n_thresholds: Option<usize>) -> Result<RocCurve> {
    if scores_h0.is_empty() || scores_h1.is_empty() {
        return Err(Error::EmptyClass("ROC needs scores from both classes".into()));
    }
    let s0 = sorted(scores_h0)?;
    let s1 = sorted(scores_h1)?;
    let mut pooled: Vec<f64> = s0.iter().chain(&s1).copied().collect();
    pooled.sort_by(f64::total_cmp);
    pooled.dedup();
    let mut mids: Vec<f64> = pooled
        .windows(2)
        .map(|w| {
            let m = 0.5 * (w[0] + w[1]);
            if m.is_finite() {
                m
            } else {
                w[0]
            }
        })
        .collect();
    if let Some(cap) = n_thresholds {
        if cap >= 2 && mids.len() > cap {
            let last = mids.len() - 1;
            mids = (0..cap).map(|i| mids[i * last / (cap - 1)]).collect();
        }
    }
    let mut thresholds = vec![f64::NEG_INFINITY];
    thresholds.extend(mids);
    thresholds.push(f64::INFINITY);
    let (n0, n1) = (s0.len(), s1.len());
    let points = thresholds
        .into_iter()
        .map(|t| {
            let fa = count_above(&s0, t);
            let md = n1 - count_above(&s1, t);
            let r = rates_from_counts(fa, n0, md, n1);
            RocPoint { threshold: t, p_fa: r.p_fa, p_md: r.p_md, fa_ci: r.fa_ci, md_ci: r.md_ci }
        })
        .collect();
    Ok(RocCurve { points, n_h0: n0, n_h1: n1, meta: RocMeta::default() })
}

/// Scores both test sets (in parallel) and sweeps the ROC.
pub fn roc_sweep<F>(score_fn: F, test_h0: &[FeatureVector], test_h1: &[FeatureVector], n_thresholds: Option<usize>) -> Result<RocCurve>
where
    F: Fn(&FeatureVector) -> Result<f64> + Sync,
{
    let s0 = score_all(&score_fn, test_h0)?;
    let s1 = score_all(&score_fn, test_h1)?;
    roc_from_scores(&s0, &s1, n_thresholds)
}

pub fn score_all<F>(score_fn: &F, data: &[FeatureVector]) -> Result<Vec<f64>>
where
    F: Fn(&FeatureVector) -> Result<f64> + Sync,
{
    data.par_iter().map(score_fn).collect()
}

impl RocCurve {
    pub fn with_meta(mut self, meta: RocMeta) -> Self {
        self.meta = meta;
        self
    }

    /// `(P_FA, P_MD)` pairs sorted by `P_FA`, keeping the lowest `P_MD` at
    /// each `P_FA` and enforcing a non-increasing `P_MD` (lower envelope).
    pub fn envelope(&self) -> Vec<(f64, f64)> {
        let mut pts: Vec<(f64, f64)> = self.points.iter().map(|p| (p.p_fa, p.p_md)).collect();
        lower_envelope(&mut pts)
    }

    /// `P_MD` at a given `P_FA`, linearly interpolated along the envelope.
    pub fn md_at_fa(&self, fa: f64) -> f64 {
        interpolate(&self.envelope(), fa)
    }

    /// Area under the curve of detection probability `1 - P_MD` against `P_FA`.
    pub fn auc(&self) -> f64 {
        let env = self.envelope();
        env.windows(2).map(|w| (w[1].0 - w[0].0) * (2.0 - w[0].1 - w[1].1) / 2.0).sum()
    }

    /// CSV with columns `threshold,p_fa,p_md,p_fa_lo,p_fa_hi,p_md_lo,p_md_hi`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("threshold,p_fa,p_md,p_fa_lo,p_fa_hi,p_md_lo,p_md_hi\n");
        for p in &self.points {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                p.threshold, p.p_fa, p.p_md, p.fa_ci.0, p.fa_ci.1, p.md_ci.0, p.md_ci.1
            ));
        }
        out
    }
}

fn lower_envelope(pts: &mut Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(pts.len());
    for &(fa, md) in pts.iter() {
        let md = out.last().map_or(md, |&(_, m): &(f64, f64)| md.min(m));
        match out.last() {
            Some(&(f, _)) if f == fa => {}
            _ => out.push((fa, md)),
        }
    }
    out
}

/// Linear interpolation of `y(x)` on points sorted by `x`, clamped at the ends.
pub fn interpolate(pts: &[(f64, f64)], x: f64) -> f64 {
    if pts.is_empty() {
        return f64::NAN;
    }
    if x <= pts[0].0 {
        return pts[0].1;
    }
    let i = pts.partition_point(|p| p.0 < x);
    if i >= pts.len() {
        return pts[pts.len() - 1].1;
    }
    let (x0, y0) = pts[i - 1];
    let (x1, y1) = pts[i];
    if x1 == x0 {
        y1
    } else {
        y0 + (y1 - y0) * (x - x0) / (x1 - x0)
    }
}

/// `P_FA` grid for map averaging: log-spaced from 1e-4 plus a linear grid.
pub fn default_fa_grid() -> Vec<f64> {
    let mut g: Vec<f64> = (0..=160).map(|i| 10f64.powf(-4.0 + 4.0 * i as f64 / 160.0)).collect();
    g.extend((0..=100).map(|i| i as f64 / 100.0));
    g.sort_by(f64::total_cmp);
    g.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    g
}

/// Mean `P_MD` across curves at matched `P_FA` (linear interpolation).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AveragedRoc {
    pub p_fa: Vec<f64>,
    pub p_md: Vec<f64>,
    pub n_curves: usize,
}

impl AveragedRoc {
    pub fn md_at_fa(&self, fa: f64) -> f64 {
        let pts: Vec<(f64, f64)> = self.p_fa.iter().copied().zip(self.p_md.iter().copied()).collect();
        interpolate(&pts, fa)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("p_fa,p_md\n");
        for (f, m) in self.p_fa.iter().zip(&self.p_md) {
            out.push_str(&format!("{f},{m}\n"));
        }
        out
    }
}

pub fn average_curves(curves: &[&RocCurve], grid: &[f64]) -> AveragedRoc {
    let envs: Vec<Vec<(f64, f64)>> = curves.iter().map(|c| c.envelope()).collect();
    let p_md = grid
        .iter()
        .map(|&fa| envs.iter().map(|e| interpolate(e, fa)).sum::<f64>() / envs.len().max(1) as f64)
        .collect();
    AveragedRoc { p_fa: grid.to_vec(), p_md, n_curves: curves.len() }
}

/// Kendall rank correlation (tau-a) by direct pair counting.
pub fn kendall_tau(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch { expected: a.len(), found: b.len() });
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::Data("Kendall tau needs at least two points".into()));
    }
    let mut s = 0i64;
    for i in 0..n {
        for j in 0..i {
            let x = (a[i] - a[j]).signum() * (b[i] - b[j]).signum();
            if x > 0.0 {
                s += 1;
            } else if x < 0.0 {
                s -= 1;
            }
        }
    }
    Ok(s as f64 / (n * (n - 1) / 2) as f64)
}
