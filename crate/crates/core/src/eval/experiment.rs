//! Monte Carlo experiments: per shadowing map, simulate data, train a
//! verifier, sweep its ROC; then average over maps.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{average_curves, calibrate_threshold, default_fa_grid, estimate_rates, score_all, AveragedRoc, Rates, RocCurve, RocMeta};
use crate::channel::{build_dataset, generate_grid_map, observe, ChannelParams, FeatureVector, ShadowingMap};
use crate::eda::{EdaConfig, EdaModel};
use crate::error::{Error, Result};
use crate::features::split_by_label;
use crate::geometry::{Position, RegionLabel, Scenario};
use crate::lssvm::{self, SvmConfig, SvmModel};
use crate::mlp::{self, Mlp, MlpConfig};
use crate::nptest::{fit_quantized_pdfs, glrt_ln_score, Likelihood, LlrModel, QuantizedPdfPair, RingModel};

/// Stream used for the pooled quantized-NP training maps, far from the
/// per-map streams `0, 1, 2, ...`.
const POOL_STREAM: u64 = 1 << 40;

fn default_hidden() -> Vec<usize> {
    vec![5, 5]
}
fn default_lr() -> f64 {
    0.05
}
fn default_epochs() -> usize {
    50
}
fn default_batch() -> usize {
    32
}
fn default_levels() -> usize {
    300
}
fn default_np_samples() -> usize {
    1_000_000
}
fn default_pool_maps() -> usize {
    20
}
fn default_pseudo() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModelSpec {
    /// Exact NP test on the single-AP ring.
    Np { likelihood: Likelihood },
    /// NP test with histogram PMFs fitted on `n_samples` draws pooled over
    /// `pool_maps` independent shadowing maps.
    NpQuantized {
        #[serde(default = "default_levels")]
        levels: usize,
        #[serde(default = "default_np_samples")]
        n_samples: usize,
        #[serde(default = "default_pool_maps")]
        pool_maps: usize,
        #[serde(default = "default_pseudo")]
        pseudo_count: f64,
    },
    MlpCe {
        #[serde(default = "default_hidden")]
        hidden: Vec<usize>,
        #[serde(default = "default_lr")]
        learning_rate: f64,
        #[serde(default = "default_epochs")]
        epochs: usize,
        #[serde(default = "default_batch")]
        batch_size: usize,
    },
    MlpMse {
        #[serde(default = "default_hidden")]
        hidden: Vec<usize>,
        #[serde(default = "default_lr")]
        learning_rate: f64,
        #[serde(default = "default_epochs")]
        epochs: usize,
        #[serde(default = "default_batch")]
        batch_size: usize,
    },
    Lssvm {
        #[serde(default)]
        svm: SvmConfig,
        /// Candidate bandwidths scored by validation MSE; empty keeps
        /// `svm.bandwidth`.
        #[serde(default)]
        tune_bandwidths: Vec<f64>,
    },
    Oclssvm {
        #[serde(default)]
        svm: SvmConfig,
    },
    Autoencoder {
        /// Full layer sizes including input and output; a default stack
        /// is used when unset.
        #[serde(default)]
        sizes: Option<Vec<usize>>,
        #[serde(default = "default_lr")]
        learning_rate: f64,
        #[serde(default = "default_epochs")]
        epochs: usize,
        #[serde(default = "default_batch")]
        batch_size: usize,
    },
    Glrt { likelihood: Likelihood },
    Eda {
        #[serde(default)]
        eda: EdaConfig,
    },
}

impl ModelSpec {
    pub fn id(&self) -> &'static str {
        match self {
            ModelSpec::Np { .. } => "np",
            ModelSpec::NpQuantized { .. } => "np-quantized",
            ModelSpec::MlpCe { .. } => "mlp-ce",
            ModelSpec::MlpMse { .. } => "mlp-mse",
            ModelSpec::Lssvm { .. } => "lssvm",
            ModelSpec::Oclssvm { .. } => "oclssvm",
            ModelSpec::Autoencoder { .. } => "autoencoder",
            ModelSpec::Glrt { .. } => "glrt",
            ModelSpec::Eda { .. } => "eda",
        }
    }

    /// Trained on H0 rows only.
    pub fn is_one_class(&self) -> bool {
        matches!(self, ModelSpec::Oclssvm { .. } | ModelSpec::Autoencoder { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Experiment {
    pub scenario: Scenario,
    pub channel: ChannelParams,
    pub model: ModelSpec,
    /// Training points `S` per map (validation split included).
    pub n_train: usize,
    /// Fading draws averaged per observation.
    #[serde(default = "one")]
    pub k_f: usize,
    pub fading: bool,
    pub n_maps: usize,
    /// Test points per class per map.
    pub n_test: usize,
    #[serde(default = "default_validation")]
    pub validation_fraction: f64,
    #[serde(default = "default_targets")]
    pub target_fa: Vec<f64>,
    pub seed: u64,
    /// Node spacing of correlated shadowing grids, in meters.
    #[serde(default = "default_spacing")]
    pub map_spacing: f64,
    /// Cap on ROC thresholds per map.
    #[serde(default = "default_thresholds")]
    pub n_thresholds: Option<usize>,
}

fn one() -> usize {
    1
}
fn default_validation() -> f64 {
    0.2
}
fn default_targets() -> Vec<f64> {
    vec![0.05, 0.1, 0.2]
}
fn default_spacing() -> f64 {
    1.0
}
fn default_thresholds() -> Option<usize> {
    Some(2001)
}

impl Experiment {
    pub fn new(scenario: Scenario, channel: ChannelParams, model: ModelSpec) -> Self {
        Self {
            scenario,
            channel,
            model,
            n_train: 1000,
            k_f: 1,
            fading: true,
            n_maps: 1,
            n_test: 10_000,
            validation_fraction: default_validation(),
            target_fa: default_targets(),
            seed: 0,
            map_spacing: default_spacing(),
            n_thresholds: default_thresholds(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        self.channel.validate()?;
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        if self.n_train == 0 || self.n_maps == 0 || self.n_test == 0 || self.k_f == 0 {
            return bad("n_train, n_maps, n_test and k_f must be at least 1");
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return bad("validation_fraction must lie in (0, 1)");
        }
        if self.target_fa.iter().any(|&t| !(t > 0.0 && t < 1.0)) {
            return bad("target_fa values must lie in (0, 1)");
        }
        if !(self.map_spacing > 0.0) {
            return bad("map_spacing must be positive");
        }
        match &self.model {
            ModelSpec::Np { likelihood } | ModelSpec::Glrt { likelihood } => {
                if !matches!(self.scenario, Scenario::Ring(_)) {
                    return bad("np and glrt models need the ring scenario");
                }
                if (*likelihood == Likelihood::Fading) != self.fading {
                    return bad("likelihood does not match the fading setting");
                }
                if matches!(self.model, ModelSpec::Np { .. }) && self.k_f != 1 {
                    return bad("the exact NP test takes a single observation (k_f = 1)");
                }
            }
            ModelSpec::NpQuantized { levels, n_samples, pool_maps, pseudo_count } => {
                if self.scenario.n_aps() != 1 {
                    return bad("the quantized NP test needs a single AP");
                }
                if *levels == 0 || *n_samples == 0 || *pool_maps == 0 || !(*pseudo_count >= 0.0) {
                    return bad("quantized NP needs positive levels, samples and maps");
                }
            }
            _ => {}
        }
        Ok(())
    }

    fn map_rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }

    fn make_map<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<ShadowingMap> {
        generate_grid_map(&self.channel, &self.scenario.bounding_box(), self.map_spacing, self.scenario.n_aps(), rng)
    }

    pub fn context(&self) -> ModelContext<'_> {
        ModelContext { n_inputs: self.scenario.n_aps(), scenario: Some(&self.scenario), channel: Some(&self.channel) }
    }

    /// Memory-heavy fits run one map at a time.
    fn parallel_maps(&self) -> bool {
        match &self.model {
            ModelSpec::Lssvm { svm, .. } | ModelSpec::Oclssvm { svm } => self.n_train.min(svm.max_train) <= 5000,
            _ => true,
        }
    }
}

/// A fitted verifier; `score` is oriented so that larger values favor H1.
#[derive(Debug, Clone)]
pub enum TrainedModel {
    Np(LlrModel),
    Mlp(Mlp),
    Svm(SvmModel),
    Glrt(RingModel, Likelihood),
    Eda(EdaModel),
}

impl TrainedModel {
    pub fn score(&self, a: &FeatureVector) -> Result<f64> {
        match self {
            TrainedModel::Np(m) => {
                first(a).and_then(|x| m.llr(x)).map(|l| -l)
            }
            TrainedModel::Mlp(m) => m.score(a),
            TrainedModel::Svm(m) => m.score(a),
            TrainedModel::Glrt(m, lik) => glrt_ln_score(m, *lik, &a.a).map(|l| -l),
            TrainedModel::Eda(m) => m.score(a),
        }
    }

    /// Fitted parameters as text; `None` for verifiers built from the
    /// scenario alone (exact NP, GLRT, EDA).
    pub fn to_text(&self) -> Option<String> {
        match self {
            TrainedModel::Np(LlrModel::QuantizedHistogram(q)) => Some(q.to_text()),
            TrainedModel::Mlp(m) => Some(m.to_text()),
            TrainedModel::Svm(m) => Some(m.to_text()),
            _ => None,
        }
    }

    /// Reads any file written by `to_text`, dispatching on its first word.
    pub fn from_text(text: &str) -> Result<Self> {
        match text.split_whitespace().next() {
            Some("irlv-histogram") => Ok(TrainedModel::Np(LlrModel::QuantizedHistogram(QuantizedPdfPair::from_text(text)?))),
            Some("irlv-mlp") => Ok(TrainedModel::Mlp(Mlp::from_text(text)?)),
            Some("irlv-svm") => Ok(TrainedModel::Svm(SvmModel::from_text(text)?)),
            other => Err(Error::Data(format!("unrecognized model file (starts with {other:?})"))),
        }
    }

    /// Short training summary: loss trace end or solver residual.
    pub fn report(&self) -> String {
        match self {
            TrainedModel::Mlp(m) => format!("final loss {:e}", m.loss_trace.last().copied().unwrap_or(f64::NAN)),
            TrainedModel::Svm(m) => match &m.report {
                Some(r) => format!("solver residual {:e}, dense {}, iterations {}", r.residual, r.dense, r.iterations),
                None => String::new(),
            },
            _ => String::new(),
        }
    }
}

fn first(a: &FeatureVector) -> Result<f64> {
    if a.len() != 1 {
        return Err(Error::DimensionMismatch { expected: 1, found: a.len() });
    }
    Ok(a.a[0])
}

/// What a trainer may need beyond the rows: model-based verifiers (NP,
/// GLRT, EDA) need the geometry and channel.
#[derive(Debug, Clone, Copy)]
pub struct ModelContext<'a> {
    pub n_inputs: usize,
    pub scenario: Option<&'a Scenario>,
    pub channel: Option<&'a ChannelParams>,
}

impl ModelContext<'_> {
    fn ring_model(&self) -> Result<RingModel> {
        match (self.scenario, self.channel) {
            (Some(Scenario::Ring(r)), Some(c)) => RingModel::new(r.clone(), c.clone()),
            _ => Err(Error::InvalidConfig("ring scenario and channel required".into())),
        }
    }
}

/// Fits `spec` on labeled training rows (H0 rows only for one-class kinds).
/// `valid` feeds hyper-parameter selection where the spec asks for it.
pub fn train_model(
    spec: &ModelSpec,
    ctx: &ModelContext,
    train: &[FeatureVector],
    valid: Option<&[FeatureVector]>,
    seed: u64,
) -> Result<TrainedModel> {
    let n_in = ctx.n_inputs;
    let mlp_cfg = |hidden: &[usize], learning_rate: f64, epochs: usize, batch_size: usize| MlpConfig {
        learning_rate,
        epochs,
        batch_size,
        seed,
        ..MlpConfig::classifier(n_in, hidden)
    };
    Ok(match spec {
        ModelSpec::Np { likelihood } => TrainedModel::Np(LlrModel::closed_form(ctx.ring_model()?, *likelihood)?),
        ModelSpec::NpQuantized { levels, pseudo_count, .. } => {
            let (h0, h1) = split_by_label(train)?;
            let h0: Vec<f64> = h0.iter().map(first).collect::<Result<_>>()?;
            let h1: Vec<f64> = h1.iter().map(first).collect::<Result<_>>()?;
            TrainedModel::Np(LlrModel::QuantizedHistogram(fit_quantized_pdfs(&h0, &h1, *levels, *pseudo_count)?))
        }
        ModelSpec::MlpCe { hidden, learning_rate, epochs, batch_size } => {
            TrainedModel::Mlp(mlp::train_ce(&mlp_cfg(hidden, *learning_rate, *epochs, *batch_size), train)?)
        }
        ModelSpec::MlpMse { hidden, learning_rate, epochs, batch_size } => {
            TrainedModel::Mlp(mlp::train_mse(&mlp_cfg(hidden, *learning_rate, *epochs, *batch_size), train)?)
        }
        ModelSpec::Lssvm { svm, tune_bandwidths } => {
            let mut cfg = SvmConfig { seed, ..svm.clone() };
            if let (false, Some(v)) = (tune_bandwidths.is_empty(), valid) {
                let (g, _) = lssvm::grid_search(train, v, tune_bandwidths, &[cfg.c], &cfg)?;
                cfg.bandwidth = Some(g);
            }
            TrainedModel::Svm(lssvm::train_twoclass(train, &cfg)?)
        }
        ModelSpec::Oclssvm { svm } => TrainedModel::Svm(lssvm::train_oneclass(train, &SvmConfig { seed, ..svm.clone() })?),
        ModelSpec::Autoencoder { sizes, learning_rate, epochs, batch_size } => {
            let base = match sizes {
                Some(s) => MlpConfig::autoencoder(s.clone()),
                None => MlpConfig::default_autoencoder(n_in),
            };
            let cfg = MlpConfig { learning_rate: *learning_rate, epochs: *epochs, batch_size: *batch_size, seed, ..base };
            TrainedModel::Mlp(mlp::train_autoencoder(&cfg, train)?)
        }
        ModelSpec::Glrt { likelihood } => TrainedModel::Glrt(ctx.ring_model()?, *likelihood),
        ModelSpec::Eda { eda } => match (ctx.scenario, ctx.channel) {
            (Some(s), Some(c)) => TrainedModel::Eda(EdaModel::new(s.clone(), c.clone(), EdaConfig { seed, ..eda.clone() })?),
            _ => return Err(Error::InvalidConfig("eda needs the scenario and channel".into())),
        },
    })
}

/// Quantized PMFs from draws over `pool_maps` independent maps.
fn fit_pooled_np(exp: &Experiment, levels: usize, n_samples: usize, pool_maps: usize, pseudo: f64) -> Result<TrainedModel> {
    let per_map = n_samples.div_ceil(pool_maps);
    let parts: Vec<Result<(Vec<f64>, Vec<f64>)>> = (0..pool_maps as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = exp.map_rng(POOL_STREAM + i);
            let map = exp.make_map(&mut rng)?;
            let data = build_dataset(&exp.scenario, &exp.channel, &map, per_map, exp.k_f, None, exp.fading, &mut rng)?;
            let (h0, h1) = split_by_label(&data)?;
            Ok((h0.iter().map(|f| f.a[0]).collect(), h1.iter().map(|f| f.a[0]).collect()))
        })
        .collect();
    let (mut h0, mut h1) = (Vec::new(), Vec::new());
    for p in parts {
        let (a, b) = p?;
        h0.extend(a);
        h1.extend(b);
    }
    Ok(TrainedModel::Np(LlrModel::QuantizedHistogram(fit_quantized_pdfs(&h0, &h1, levels, pseudo)?)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    pub target_fa: f64,
    pub threshold: f64,
    /// Rates on the test set at the validation-calibrated threshold.
    pub rates: Rates,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapResult {
    pub map: usize,
    pub roc: RocCurve,
    pub operating: Vec<OperatingPoint>,
    pub train_report: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub maps: Vec<MapResult>,
    /// Maps whose training or evaluation failed, with the error.
    pub skipped: Vec<(usize, String)>,
    pub average: AveragedRoc,
}

impl ExperimentResult {
    /// Map-averaged `P_MD` at `fa`.
    pub fn md_at_fa(&self, fa: f64) -> f64 {
        self.average.md_at_fa(fa)
    }

    /// Per-map `P_MD` values at `fa`.
    pub fn md_per_map(&self, fa: f64) -> Vec<f64> {
        self.maps.iter().map(|m| m.roc.md_at_fa(fa)).collect()
    }

    /// Mean of the per-map `P_MD` at `fa` with a normal 95% interval
    /// (across maps; a single map gives the Wilson interval of its test set).
    pub fn md_ci(&self, fa: f64) -> (f64, f64, f64) {
        let v = self.md_per_map(fa);
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        if v.len() == 1 {
            let roc = &self.maps[0].roc;
            let k = (mean * roc.n_h1 as f64).round() as usize;
            let (lo, hi) = super::wilson(k, roc.n_h1);
            return (mean, lo, hi);
        }
        let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
        let half = super::Z95 * (var / n).sqrt();
        (mean, (mean - half).max(0.0), (mean + half).min(1.0))
    }
}

/// Rows drawn for one map: training and validation (one-class kinds get
/// H0 rows only) and `n_test` test rows per class.
#[derive(Debug, Clone, PartialEq)]
pub struct MapData {
    pub train: Vec<FeatureVector>,
    pub valid: Vec<FeatureVector>,
    pub test_h0: Vec<FeatureVector>,
    pub test_h1: Vec<FeatureVector>,
    /// Seed handed to the trainer.
    pub train_seed: u64,
}

/// Draws the data of map `index` exactly as `run_experiment` does.
pub fn simulate_map(exp: &Experiment, index: usize) -> Result<MapData> {
    exp.validate()?;
    let mut rng = exp.map_rng(index as u64);
    let map = exp.make_map(&mut rng)?;
    let (train, valid, train_seed) = draw_training(exp, &map, &mut rng)?;
    let (test_h0, test_h1) = draw_test(exp, &map, &mut rng)?;
    Ok(MapData { train, valid, test_h0, test_h1, train_seed })
}

type Rows = Vec<FeatureVector>;

fn draw_training(exp: &Experiment, map: &ShadowingMap, rng: &mut ChaCha8Rng) -> Result<(Rows, Rows, u64)> {
    let region = exp.model.is_one_class().then_some(RegionLabel::H0);
    let mut data = build_dataset(&exp.scenario, &exp.channel, map, exp.n_train, exp.k_f, region, exp.fading, rng)?;
    let n_val = ((exp.n_train as f64 * exp.validation_fraction).round() as usize).clamp(1, exp.n_train.saturating_sub(1).max(1));
    let valid = data.split_off(exp.n_train - n_val);
    let seed: u64 = rng.random();
    Ok((data, valid, seed))
}

fn draw_test(exp: &Experiment, map: &ShadowingMap, rng: &mut ChaCha8Rng) -> Result<(Rows, Rows)> {
    let h0 = build_dataset(&exp.scenario, &exp.channel, map, exp.n_test, exp.k_f, Some(RegionLabel::H0), exp.fading, rng)?;
    let h1 = build_dataset(&exp.scenario, &exp.channel, map, exp.n_test, exp.k_f, Some(RegionLabel::H1), exp.fading, rng)?;
    Ok((h0, h1))
}

fn run_map(exp: &Experiment, index: usize, shared: Option<&TrainedModel>) -> Result<MapResult> {
    let mut rng = exp.map_rng(index as u64);
    let map = exp.make_map(&mut rng)?;
    let (data, valid, seed) = draw_training(exp, &map, &mut rng)?;
    let model = match shared {
        Some(m) => m.clone(),
        None => train_model(&exp.model, &exp.context(), &data, Some(&valid), seed)?,
    };
    drop(data);

    let (test_h0, test_h1) = draw_test(exp, &map, &mut rng)?;
    let score = |a: &FeatureVector| model.score(a);
    let valid_h0: Vec<FeatureVector> = valid.into_iter().filter(|f| f.label == Some(RegionLabel::H0)).collect();
    let s_val = score_all(&score, &valid_h0)?;
    let s0 = score_all(&score, &test_h0)?;
    let s1 = score_all(&score, &test_h1)?;

    let roc = super::roc_from_scores(&s0, &s1, exp.n_thresholds)?.with_meta(RocMeta {
        scenario: scenario_id(&exp.scenario).into(),
        model: exp.model.id().into(),
        seed: exp.seed,
    });
    let mut operating = Vec::with_capacity(exp.target_fa.len());
    if !s_val.is_empty() {
        let truth: Vec<RegionLabel> = std::iter::repeat_n(RegionLabel::H0, s0.len()).chain(std::iter::repeat_n(RegionLabel::H1, s1.len())).collect();
        for &t in &exp.target_fa {
            let cal = calibrate_threshold(&s_val, t)?;
            let decisions: Vec<RegionLabel> = s0.iter().chain(&s1).map(|&s| super::decide(s, cal.threshold)).collect();
            operating.push(OperatingPoint { target_fa: t, threshold: cal.threshold, rates: estimate_rates(&decisions, &truth)? });
        }
    } else {
        log::warn!("map {index}: no H0 validation rows, operating points skipped");
    }
    Ok(MapResult { map: index, roc, operating, train_report: model.report() })
}

/// ROC of a fitted model on a labeled test set.
pub fn evaluate_model(model: &TrainedModel, test: &[FeatureVector], n_thresholds: Option<usize>) -> Result<RocCurve> {
    let (h0, h1) = split_by_label(test)?;
    super::roc_sweep(|a| model.score(a), &h0, &h1, n_thresholds)
}

/// One observation per node of an `n_side x n_side` grid spanning the
/// scenario's bounding box, on the map of stream 0 (a stand-in for a
/// measured attenuation grid).
pub fn simulate_grid(exp: &Experiment, n_side: usize) -> Result<Vec<FeatureVector>> {
    if n_side < 2 {
        return Err(Error::InvalidConfig("grid needs at least 2 nodes per side".into()));
    }
    let mut rng = exp.map_rng(0);
    let map = exp.make_map(&mut rng)?;
    let bb = exp.scenario.bounding_box();
    let mut out = Vec::with_capacity(n_side * n_side);
    for j in 0..n_side {
        for i in 0..n_side {
            let p = Position::new(
                bb.x0 + (bb.x1 - bb.x0) * i as f64 / (n_side - 1) as f64,
                bb.y0 + (bb.y1 - bb.y0) * j as f64 / (n_side - 1) as f64,
            );
            if exp.scenario.in_area(&p) {
                out.push(observe(&exp.scenario, &exp.channel, &map, &p, exp.k_f, exp.fading, &mut rng)?);
            }
        }
    }
    Ok(out)
}

pub fn scenario_id(s: &Scenario) -> &'static str {
    match s {
        Scenario::Ring(_) => "ring",
        Scenario::Urban(_) => "urban",
    }
}

/// Runs every map, skipping (and logging) maps whose training fails, and
/// averages the surviving curves on the default `P_FA` grid.
pub fn run_experiment(exp: &Experiment) -> Result<ExperimentResult> {
    exp.validate()?;
    let shared = match &exp.model {
        ModelSpec::NpQuantized { levels, n_samples, pool_maps, pseudo_count } => {
            Some(fit_pooled_np(exp, *levels, *n_samples, *pool_maps, *pseudo_count)?)
        }
        _ => None,
    };
    let run = |i: usize| run_map(exp, i, shared.as_ref());
    let outcomes: Vec<Result<MapResult>> = if exp.parallel_maps() {
        (0..exp.n_maps).into_par_iter().map(run).collect()
    } else {
        (0..exp.n_maps).map(run).collect()
    };
    let mut maps = Vec::new();
    let mut skipped = Vec::new();
    for (i, o) in outcomes.into_iter().enumerate() {
        match o {
            Ok(m) => maps.push(m),
            Err(e) if e.is_numeric() || matches!(e, Error::EmptyClass(_) | Error::Data(_)) => {
                log::warn!("map {i} skipped: {e}");
                skipped.push((i, e.to_string()));
            }
            Err(e) => return Err(e),
        }
    }
    if maps.is_empty() {
        let first = skipped.first().map_or(String::new(), |(_, e)| e.clone());
        return Err(Error::Data(format!("all {} maps failed, first error: {first}", exp.n_maps)));
    }
    if !skipped.is_empty() {
        log::warn!("{} of {} maps skipped", skipped.len(), exp.n_maps);
    }
    let curves: Vec<&RocCurve> = maps.iter().map(|m| &m.roc).collect();
    let average = average_curves(&curves, &default_fa_grid());
    Ok(ExperimentResult { maps, skipped, average })
}
