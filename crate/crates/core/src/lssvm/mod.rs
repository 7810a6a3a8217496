//! Least-squares support vector machines with a Gaussian kernel: the
//! two-class LS-SVM and the one-class LS-SVM, both trained by solving a
//! linear system.
//!
//! Two-class: with `H = K + I / C` the dual is
//! `[0 1^T; 1 H] [b; c] = [0; t]`, solved as `eta = H^-1 1`, `nu = H^-1 t`,
//! `b = 1^T nu / 1^T eta`, `c = nu - b eta`, and `t~(a) = sum_i c_i k(a_i, a) + b`.
//!
//! One-class: minimizing `w^T w / 2 + C/2 sum e_i^2 + b` subject to
//! `-b - w^T phi(a_i) = e_i` gives `w = -sum u_i phi(a_i)`, `sum u_i = -1` and
//! `H u = b 1`, so `u = -eta / 1^T eta`, `b = -1 / 1^T eta`. The novelty
//! score is the constraint residual `e(a) = -b - w^T phi(a)`: small on the
//! training support, tending to `-b > 0` far from it.

mod solve;

pub use solve::{gaussian, SolveReport, SolverConfig, SolverKind};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel::FeatureVector;
use crate::error::{Error, Result};
use crate::features::{db_row, db_rows, labels, Standardizer};
use crate::geometry::RegionLabel;
use crate::textfmt::{TextReader, TextWriter};
use solve::{norm, KernelSystem};

/// Resolved kernel hyper-parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelConfig {
    /// Bandwidth `gamma_k` in `exp(-|x - y|^2 / (2 gamma_k^2))`.
    pub gamma: f64,
    pub c: f64,
}

impl KernelConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma.is_finite() && self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::InvalidConfig(format!("kernel needs gamma > 0 and C > 0, got {self:?}")));
        }
        Ok(())
    }
}

/// Gaussian kernel between two standardized inputs.
pub fn kernel(x: &[f64], y: &[f64], cfg: &KernelConfig) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), found: y.len() });
    }
    Ok(gaussian(x, y, 1.0 / (2.0 * cfg.gamma * cfg.gamma)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SvmConfig {
    /// Kernel bandwidth; median pairwise distance of the training inputs when unset.
    pub bandwidth: Option<f64>,
    pub c: f64,
    /// Training sets larger than this are subsampled uniformly.
    pub max_train: usize,
    pub seed: u64,
    pub solver: SolverConfig,
}

impl Default for SvmConfig {
    fn default() -> Self {
        Self { bandwidth: None, c: 10.0, max_train: 20_000, seed: 0, solver: SolverConfig::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SvmVariant {
    TwoClass,
    OneClass,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel {
    pub variant: SvmVariant,
    pub kernel: KernelConfig,
    pub standardizer: Standardizer,
    /// Standardized training inputs.
    pub support: Vec<Vec<f64>>,
    /// Expansion coefficients: `t~(a) = sum_i coef_i k(support_i, a) + bias`.
    pub coef: Vec<f64>,
    pub bias: f64,
    /// Solver diagnostics; not persisted.
    pub report: Option<SolveReport>,
}

/// Median pairwise distance over at most 1000 evenly spaced points.
pub fn median_bandwidth(xs: &[Vec<f64>]) -> f64 {
    let step = xs.len().div_ceil(1000).max(1);
    let pts: Vec<&Vec<f64>> = xs.iter().step_by(step).collect();
    let mut d: Vec<f64> = Vec::with_capacity(pts.len() * pts.len() / 2);
    for i in 0..pts.len() {
        for j in 0..i {
            d.push(pts[i].iter().zip(pts[j]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt());
        }
    }
    if d.is_empty() {
        return 1.0;
    }
    let mid = d.len() / 2;
    let (_, m, _) = d.select_nth_unstable_by(mid, f64::total_cmp);
    if *m > 0.0 {
        *m
    } else {
        1.0
    }
}

fn subsample<'a>(data: &'a [FeatureVector], cfg: &SvmConfig) -> Vec<&'a FeatureVector> {
    if data.len() <= cfg.max_train {
        return data.iter().collect();
    }
    log::info!("subsampling {} training points to {}", data.len(), cfg.max_train);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut idx = rand::seq::index::sample(&mut rng, data.len(), cfg.max_train).into_vec();
    idx.sort_unstable();
    idx.into_iter().map(|i| &data[i]).collect()
}

fn prepare(data: &[&FeatureVector], cfg: &SvmConfig) -> Result<(Standardizer, Vec<Vec<f64>>, KernelConfig)> {
    if !(cfg.c > 0.0) {
        return Err(Error::InvalidConfig(format!("C must be positive, got {}", cfg.c)));
    }
    let dim = data[0].len();
    if let Some(v) = data.iter().find(|v| v.len() != dim) {
        return Err(Error::DimensionMismatch { expected: dim, found: v.len() });
    }
    let rows: Vec<Vec<f64>> = data.iter().map(|v| db_row(v)).collect();
    let standardizer = Standardizer::fit(&rows)?;
    let xs: Vec<Vec<f64>> = rows.iter().map(|r| standardizer.transform(r)).collect::<Result<_>>()?;
    let gamma = cfg.bandwidth.unwrap_or_else(|| median_bandwidth(&xs));
    let kernel = KernelConfig { gamma, c: cfg.c };
    kernel.validate()?;
    Ok((standardizer, xs, kernel))
}

fn target(label: RegionLabel) -> f64 {
    f64::from(label.label())
}

/// Two-class LS-SVM with targets `t = -1` for H0 and `+1` for H1.
pub fn train_twoclass(data: &[FeatureVector], cfg: &SvmConfig) -> Result<SvmModel> {
    let ls = labels(data)?;
    if !ls.contains(&RegionLabel::H0) || !ls.contains(&RegionLabel::H1) {
        return Err(Error::EmptyClass("two-class training needs both labels".into()));
    }
    let picked = subsample(data, cfg);
    let ls = labels(&picked.iter().map(|v| (*v).clone()).collect::<Vec<_>>())?;
    if !ls.contains(&RegionLabel::H0) || !ls.contains(&RegionLabel::H1) {
        return Err(Error::EmptyClass("subsample lost one of the classes".into()));
    }
    let (standardizer, xs, kernel) = prepare(&picked, cfg)?;
    let t: Vec<f64> = ls.iter().map(|&l| target(l)).collect();
    let n = xs.len();
    let sys = KernelSystem::new(&xs, kernel.gamma, kernel.c, &cfg.solver)?;
    let (eta, it1) = sys.solve(&vec![1.0; n])?;
    let (nu, it2) = sys.solve(&t)?;
    let bias = nu.iter().sum::<f64>() / eta.iter().sum::<f64>();
    let coef: Vec<f64> = nu.iter().zip(&eta).map(|(v, e)| v - bias * e).collect();
    let hc = sys.apply(&coef);
    let mut r: Vec<f64> = hc.iter().zip(&t).map(|(h, t)| h + bias - t).collect();
    r.push(coef.iter().sum());
    let residual = norm(&r) / norm(&t);
    let report = SolveReport { dense: sys.is_dense(), ridge: sys.ridge(), iterations: it1 + it2, residual };
    drop(sys);
    finish(SvmVariant::TwoClass, kernel, standardizer, xs, coef, bias, report)
}

/// One-class LS-SVM on H0 data only.
pub fn train_oneclass(data_h0: &[FeatureVector], cfg: &SvmConfig) -> Result<SvmModel> {
    if data_h0.iter().any(|v| v.label == Some(RegionLabel::H1)) {
        return Err(Error::Data("h1-rows-present: one-class training data contains H1 rows".into()));
    }
    if data_h0.len() < 2 {
        return Err(Error::EmptyClass("one-class training needs at least two points".into()));
    }
    let picked = subsample(data_h0, cfg);
    let (standardizer, xs, kernel) = prepare(&picked, cfg)?;
    let n = xs.len();
    let sys = KernelSystem::new(&xs, kernel.gamma, kernel.c, &cfg.solver)?;
    let (eta, it) = sys.solve(&vec![1.0; n])?;
    let s: f64 = eta.iter().sum();
    let bias = -1.0 / s;
    let u: Vec<f64> = eta.iter().map(|e| -e / s).collect();
    let hu = sys.apply(&u);
    let mut r: Vec<f64> = hu.iter().map(|h| h - bias).collect();
    r.push(u.iter().sum::<f64>() + 1.0);
    let residual = norm(&r) / (bias.abs() * (n as f64).sqrt());
    let coef = u.iter().map(|v| -v).collect();
    let report = SolveReport { dense: sys.is_dense(), ridge: sys.ridge(), iterations: it, residual };
    drop(sys);
    finish(SvmVariant::OneClass, kernel, standardizer, xs, coef, bias, report)
}

fn finish(
    variant: SvmVariant,
    kernel: KernelConfig,
    standardizer: Standardizer,
    support: Vec<Vec<f64>>,
    coef: Vec<f64>,
    bias: f64,
    report: SolveReport,
) -> Result<SvmModel> {
    if !bias.is_finite() || coef.iter().any(|c| !c.is_finite()) {
        return Err(Error::SingularSystem("non-finite dual solution".into()));
    }
    if report.residual > 1e-8 {
        log::warn!("LS-SVM KKT residual {:e} above 1e-8", report.residual);
    }
    Ok(SvmModel { variant, kernel, standardizer, support, coef, bias, report: Some(report) })
}

impl SvmModel {
    pub fn n_inputs(&self) -> usize {
        self.standardizer.dim()
    }

    fn standardized(&self, a: &FeatureVector) -> Result<Vec<f64>> {
        if a.len() != self.n_inputs() {
            return Err(Error::DimensionMismatch { expected: self.n_inputs(), found: a.len() });
        }
        self.standardizer.transform(&db_row(a))
    }

    /// Soft output on a standardized input.
    pub fn output_raw(&self, x: &[f64]) -> f64 {
        let inv = 1.0 / (2.0 * self.kernel.gamma * self.kernel.gamma);
        self.support.iter().zip(&self.coef).map(|(s, c)| c * gaussian(s, x, inv)).sum::<f64>() + self.bias
    }

    /// Soft output `t~(a) = w^T phi(a) + b`.
    pub fn output(&self, a: &FeatureVector) -> Result<f64> {
        Ok(self.output_raw(&self.standardized(a)?))
    }

    /// Score oriented so that larger values favor H1: `t~(a)` for the
    /// two-class machine, `-t~(a)` for the one-class machine.
    pub fn score(&self, a: &FeatureVector) -> Result<f64> {
        let t = self.output(a)?;
        Ok(match self.variant {
            SvmVariant::TwoClass => t,
            SvmVariant::OneClass => -t,
        })
    }

    /// `||w||^2 = sum_ij c_i c_j k(a_i, a_j)`.
    pub fn weight_norm_sq(&self) -> f64 {
        let inv = 1.0 / (2.0 * self.kernel.gamma * self.kernel.gamma);
        let mut s = 0.0;
        for (i, xi) in self.support.iter().enumerate() {
            for (j, xj) in self.support.iter().enumerate() {
                s += self.coef[i] * self.coef[j] * gaussian(xi, xj, inv);
            }
        }
        s
    }

    pub fn to_text(&self) -> String {
        let mut w = TextWriter::default();
        let variant = match self.variant {
            SvmVariant::TwoClass => "twoclass",
            SvmVariant::OneClass => "oneclass",
        };
        w.words("irlv-svm", &["1", variant, "gaussian"]);
        w.reals("gamma", &[self.kernel.gamma]);
        w.reals("c", &[self.kernel.c]);
        w.reals("bias", &[self.bias]);
        w.reals("mean", &self.standardizer.mean);
        w.reals("scale", &self.standardizer.scale);
        w.ints("support", &[self.support.len(), self.n_inputs()]);
        for x in &self.support {
            w.reals("x", x);
        }
        w.reals("coef", &self.coef);
        w.finish()
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut r = TextReader::new(text);
        let head = r.expect("irlv-svm")?;
        if head.len() != 3 || head[0] != "1" || head[2] != "gaussian" {
            return Err(Error::Data("unsupported SVM file header".into()));
        }
        let variant = match head[1] {
            "twoclass" => SvmVariant::TwoClass,
            "oneclass" => SvmVariant::OneClass,
            other => return Err(Error::Data(format!("unknown SVM variant '{other}'"))),
        };
        let gamma = r.reals("gamma", 1)?[0];
        let c = r.reals("c", 1)?[0];
        let kernel = KernelConfig { gamma, c };
        kernel.validate().map_err(|e| Error::Data(e.to_string()))?;
        let bias = r.reals("bias", 1)?[0];
        let mean = r.parse::<f64>("mean", None)?;
        let dim = mean.len();
        let scale = r.reals("scale", dim)?;
        let shape: Vec<usize> = r.parse("support", Some(2))?;
        if shape[1] != dim {
            return Err(Error::Data("support dimension disagrees with standardizer".into()));
        }
        let support = (0..shape[0]).map(|_| r.reals("x", dim)).collect::<Result<_>>()?;
        let coef = r.reals("coef", shape[0])?;
        Ok(Self { variant, kernel, standardizer: Standardizer { mean, scale }, support, coef, bias, report: None })
    }
}

/// Two-class soft output `t~(a)`.
pub fn score(model: &SvmModel, a: &FeatureVector) -> Result<f64> {
    model.output(a)
}

/// One-class novelty score `-t~(a)`; larger means farther from the H0 support.
pub fn oc_score(model: &SvmModel, a: &FeatureVector) -> Result<f64> {
    Ok(-model.output(a)?)
}

/// Two-class decision: `H1` iff `t~(a) > lambda`.
pub fn decide(score: f64, lambda: f64) -> RegionLabel {
    if score > lambda {
        RegionLabel::H1
    } else {
        RegionLabel::H0
    }
}

/// One-class decision: `H0` iff the novelty score is below `lambda`.
pub fn oc_decide(score: f64, lambda: f64) -> RegionLabel {
    if score < lambda {
        RegionLabel::H0
    } else {
        RegionLabel::H1
    }
}

/// Picks `(bandwidth, C)` from a grid by validation mean squared error
/// `(t - t~)^2` of the two-class machine.
pub fn grid_search(
    train: &[FeatureVector],
    valid: &[FeatureVector],
    bandwidths: &[f64],
    cs: &[f64],
    base: &SvmConfig,
) -> Result<(f64, f64)> {
    let vt: Vec<f64> = labels(valid)?.into_iter().map(target).collect();
    let mut best: Option<(f64, f64, f64)> = None;
    for &g in bandwidths {
        for &c in cs {
            let cfg = SvmConfig { bandwidth: Some(g), c, ..base.clone() };
            let m = train_twoclass(train, &cfg)?;
            let mut mse = 0.0;
            for (v, t) in valid.iter().zip(&vt) {
                let e = m.output(v)? - t;
                mse += e * e;
            }
            mse /= valid.len().max(1) as f64;
            if best.is_none_or(|(b, _, _)| mse < b) {
                best = Some((mse, g, c));
            }
        }
    }
    best.map(|(_, g, c)| (g, c)).ok_or_else(|| Error::InvalidConfig("empty hyper-parameter grid".into()))
}

/// Standardized dB rows of a dataset under a model's standardizer.
pub fn standardize_rows(model: &SvmModel, data: &[FeatureVector]) -> Result<Vec<Vec<f64>>> {
    db_rows(data).iter().map(|r| model.standardizer.transform(r)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn fv(a_db: &[f64], label: RegionLabel) -> FeatureVector {
        FeatureVector::new(a_db.iter().map(|d| 10f64.powf(d / 10.0)).collect()).unwrap().with_label(label)
    }

    fn random_set(n: usize, seed: u64) -> Vec<FeatureVector> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let h1 = rng.random_bool(0.5);
                let base = if h1 { 70.0 } else { 60.0 };
                fv(
                    &[base + rng.random_range(-8.0..8.0), base + rng.random_range(-8.0..8.0)],
                    if h1 { RegionLabel::H1 } else { RegionLabel::H0 },
                )
            })
            .collect()
    }

    fn k_matrix(m: &SvmModel) -> Vec<Vec<f64>> {
        m.support.iter().map(|x| m.support.iter().map(|y| kernel(x, y, &m.kernel).unwrap()).collect()).collect()
    }

    /// `omega(beta, b)` with `w = sum_i beta_i phi(a_i)`.
    fn twoclass_objective(k: &[Vec<f64>], t: &[f64], c: f64, beta: &[f64], b: f64) -> f64 {
        let kb: Vec<f64> = k.iter().map(|row| row.iter().zip(beta).map(|(k, b)| k * b).sum()).collect();
        let wtw: f64 = beta.iter().zip(&kb).map(|(b, k)| b * k).sum();
        let e2: f64 = t.iter().zip(&kb).map(|(t, f)| (t * (f + b) - 1.0).powi(2)).sum();
        0.5 * wtw + 0.5 * c * e2
    }

    fn oneclass_objective(k: &[Vec<f64>], c: f64, beta: &[f64], b: f64) -> f64 {
        let kb: Vec<f64> = k.iter().map(|row| row.iter().zip(beta).map(|(k, b)| k * b).sum()).collect();
        let wtw: f64 = beta.iter().zip(&kb).map(|(b, k)| b * k).sum();
        let e2: f64 = kb.iter().map(|f| (-b - f).powi(2)).sum();
        0.5 * wtw + 0.5 * c * e2 + b
    }

    #[test]
    fn kernel_checks() {
        let cfg = KernelConfig { gamma: 2.0, c: 1.0 };
        assert_eq!(kernel(&[1.0, 2.0], &[1.0, 2.0], &cfg).unwrap(), 1.0);
        assert!((kernel(&[0.0, 0.0], &[2.0, 0.0], &cfg).unwrap() - 0.606_530_659_712_633_4).abs() < 1e-15);
        assert!(kernel(&[0.0], &[0.0, 1.0], &cfg).is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..50 {
            let x: Vec<f64> = (0..3).map(|_| rng.random_range(-3.0..3.0)).collect();
            let y: Vec<f64> = (0..3).map(|_| rng.random_range(-3.0..3.0)).collect();
            let (a, b) = (kernel(&x, &y, &cfg).unwrap(), kernel(&y, &x, &cfg).unwrap());
            assert_eq!(a, b);
            assert!(a > 0.0 && a <= 1.0);
        }
    }

    #[test]
    fn symmetric_pair() {
        let data = vec![fv(&[50.0], RegionLabel::H0), fv(&[60.0], RegionLabel::H1)];
        let m = train_twoclass(&data, &SvmConfig::default()).unwrap();
        assert!(m.bias.abs() < 1e-14);
        assert!((m.coef[0] + m.coef[1]).abs() < 1e-14);
        assert!(m.coef[1] > 0.0);
    }

    #[test]
    fn twoclass_constraints_and_optimality() {
        let data = random_set(120, 1);
        let m = train_twoclass(&data, &SvmConfig { bandwidth: Some(0.8), ..Default::default() }).unwrap();
        let rep = m.report.unwrap();
        assert!(rep.dense && rep.residual <= 1e-8, "{rep:?}");
        let t: Vec<f64> = labels(&data).unwrap().into_iter().map(target).collect();
        // e_i = t_i t~_i - 1 and, from the dual, e_i = -t_i c_i / C.
        for (i, x) in m.support.iter().enumerate() {
            let e = t[i] * m.output_raw(x) - 1.0;
            assert!((e + t[i] * m.coef[i] / m.kernel.c).abs() < 1e-6);
        }
        let k = k_matrix(&m);
        let c = m.kernel.c;
        let best = twoclass_objective(&k, &t, c, &m.coef, m.bias);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let dir: Vec<f64> = (0..=m.coef.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
            for eps in [1e-3, -1e-3] {
                let beta: Vec<f64> = m.coef.iter().zip(&dir).map(|(b, d)| b + eps * d).collect();
                let v = twoclass_objective(&k, &t, c, &beta, m.bias + eps * dir[m.coef.len()]);
                assert!(v >= best - 1e-9 * best.abs().max(1.0), "{v} < {best}");
            }
        }
    }

    #[test]
    fn oneclass_optimality_and_orientation() {
        let data: Vec<FeatureVector> =
            random_set(200, 2).into_iter().filter(|v| v.label == Some(RegionLabel::H0)).collect();
        let m = train_oneclass(&data, &SvmConfig::default()).unwrap();
        assert!(m.report.unwrap().residual <= 1e-8);
        assert!(m.bias < 0.0);
        let k = k_matrix(&m);
        let c = m.kernel.c;
        let best = oneclass_objective(&k, c, &m.coef, m.bias);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..50 {
            let dir: Vec<f64> = (0..=m.coef.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
            for eps in [1e-4, -1e-4] {
                let beta: Vec<f64> = m.coef.iter().zip(&dir).map(|(b, d)| b + eps * d).collect();
                let v = oneclass_objective(&k, c, &beta, m.bias + eps * dir[m.coef.len()]);
                assert!(v >= best - 1e-12 * best.abs().max(1.0), "{v} < {best}");
            }
        }
        // Far from the training mass the score tends to -b.
        let far = fv(&[200.0, 200.0], RegionLabel::H1);
        assert!((oc_score(&m, &far).unwrap() + m.bias).abs() < 1e-12);
        let mean_in: f64 = data.iter().map(|v| oc_score(&m, v).unwrap()).sum::<f64>() / data.len() as f64;
        assert!(mean_in < -m.bias);
    }

    #[test]
    fn oneclass_identical_points() {
        let data: Vec<FeatureVector> = (0..30).map(|_| fv(&[55.0, 65.0], RegionLabel::H0)).collect();
        let m = train_oneclass(&data, &SvmConfig::default()).unwrap();
        let s0 = oc_score(&m, &data[0]).unwrap();
        assert!(data.iter().all(|v| (oc_score(&m, v).unwrap() - s0).abs() < 1e-12));
        assert!(train_oneclass(&[data[0].clone(), fv(&[1.0, 1.0], RegionLabel::H1)], &SvmConfig::default()).is_err());
    }

    #[test]
    fn oneclass_thresholds() {
        let data: Vec<FeatureVector> = random_set(80, 3).into_iter().filter(|v| v.label == Some(RegionLabel::H0)).collect();
        let m = train_oneclass(&data, &SvmConfig::default()).unwrap();
        let s: Vec<f64> = data.iter().map(|v| oc_score(&m, v).unwrap()).collect();
        let (lo, hi) = s.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
        assert!(s.iter().all(|&x| oc_decide(x, lo - 1.0) == RegionLabel::H1));
        assert!(s.iter().all(|&x| oc_decide(x, hi + 1.0) == RegionLabel::H0));
        for &x in &s {
            let mut was_h1 = false;
            for k in (0..40).rev() {
                let d = oc_decide(x, lo + (hi - lo) * k as f64 / 39.0);
                assert!(!(was_h1 && d == RegionLabel::H0));
                was_h1 = d == RegionLabel::H1;
            }
        }
    }

    #[test]
    fn decide_and_continuity() {
        let data = random_set(100, 4);
        let m = train_twoclass(&data, &SvmConfig::default()).unwrap();
        assert!(data.iter().all(|v| decide(score(&m, v).unwrap(), f64::INFINITY) == RegionLabel::H0));
        for v in data.iter().take(10) {
            let x = db_row(v);
            let moved = FeatureVector::new(x.iter().map(|d| 10f64.powf((d + 1e-7) / 10.0)).collect()).unwrap();
            assert!((score(&m, v).unwrap() - score(&m, &moved).unwrap()).abs() < 1e-5);
        }
    }

    #[test]
    fn pcg_matches_dense_model() {
        let data = random_set(150, 5);
        let dense = train_twoclass(&data, &SvmConfig::default()).unwrap();
        let cfg = SvmConfig { solver: SolverConfig { kind: SolverKind::Pcg, ..Default::default() }, ..Default::default() };
        let pcg = train_twoclass(&data, &cfg).unwrap();
        assert!(!pcg.report.unwrap().dense && pcg.report.unwrap().residual <= 1e-8);
        for v in &data {
            assert!((dense.output(v).unwrap() - pcg.output(v).unwrap()).abs() < 1e-7);
        }
    }

    #[test]
    fn weight_norm_stabilizes_on_finite_alphabet() {
        let alphabet = [(55.0, RegionLabel::H0), (58.0, RegionLabel::H0), (61.0, RegionLabel::H1), (64.0, RegionLabel::H1), (59.5, RegionLabel::H1)];
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut norms = Vec::new();
        for s in [200, 400, 800, 1600] {
            let data: Vec<FeatureVector> = (0..s)
                .map(|_| {
                    let (a, l) = alphabet[rng.random_range(0..alphabet.len())];
                    fv(&[a], l)
                })
                .collect();
            let m = train_twoclass(&data, &SvmConfig { bandwidth: Some(0.5), ..Default::default() }).unwrap();
            norms.push(m.weight_norm_sq());
        }
        for w in norms.windows(2).skip(1) {
            assert!((w[1] / w[0] - 1.0).abs() < 0.1, "{norms:?}");
        }
    }

    #[test]
    fn subsampling_and_round_trip() {
        let data = random_set(300, 6);
        let m = train_twoclass(&data, &SvmConfig { max_train: 100, ..Default::default() }).unwrap();
        assert_eq!(m.support.len(), 100);
        let back = SvmModel::from_text(&m.to_text()).unwrap();
        assert_eq!(back, SvmModel { report: None, ..m.clone() });
        for v in data.iter().take(20) {
            assert_eq!(back.output(v).unwrap(), m.output(v).unwrap());
        }
        assert!(SvmModel::from_text("irlv-svm 1 twoclass poly\n").is_err());
    }

    #[test]
    fn grid_search_prefers_sane_values() {
        let train = random_set(150, 7);
        let valid = random_set(100, 8);
        let (g, c) = grid_search(&train, &valid, &[1e-3, 1.0], &[10.0], &SvmConfig::default()).unwrap();
        assert_eq!((g, c), (1.0, 10.0));
    }

    #[test]
    fn median_bandwidth_of_line() {
        let xs: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64]).collect();
        // Distances 1,1,1,1,2,2,2,3,3,4: element 5 of the sorted list is 2.
        assert_eq!(median_bandwidth(&xs), 2.0);
        assert_eq!(median_bandwidth(&[vec![1.0], vec![1.0]]), 1.0);
    }
}
