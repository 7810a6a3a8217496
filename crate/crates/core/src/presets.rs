//! Canned experiment bundles for each reproduced figure, at desk scale.
//! `quick` shrinks every size for smoke runs.

use serde::{Deserialize, Serialize};

use crate::channel::{ChannelParams, ShadowingKind};
use crate::error::{Error, Result};
use crate::eval::{Experiment, ModelSpec};
use crate::geometry::{RingScenario, Scenario, UrbanLayout, UrbanScenario};
use crate::lssvm::SvmConfig;
use crate::nptest::Likelihood;

pub const FIGURES: &[&str] = &["fig2", "fig5", "fig6", "fig8", "fig10", "fig11"];

/// Candidate LS-SVM bandwidths in standardized dB units.
pub const BANDWIDTHS: &[f64] = &[0.5, 1.0, 2.0, 4.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub name: String,
    pub experiment: Experiment,
}

/// Train/test study on a fixed attenuation grid (one map).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridStudy {
    pub base: Experiment,
    pub n_side: usize,
    pub n_train: usize,
    pub models: Vec<(String, ModelSpec)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Plan {
    Curves(Vec<Curve>),
    Grid(GridStudy),
}

pub fn ring() -> Scenario {
    Scenario::Ring(RingScenario::new(0.1, 2.0, 10.0).expect("valid ring"))
}

pub fn urban(aps: impl IntoIterator<Item = usize>) -> Scenario {
    let layout = UrbanLayout { aps: aps.into_iter().collect(), ..Default::default() };
    Scenario::Urban(UrbanScenario::crossroads(&layout).expect("valid layout"))
}

pub fn mlp_ce(hidden: &[usize], epochs: usize) -> ModelSpec {
    ModelSpec::MlpCe { hidden: hidden.to_vec(), learning_rate: 0.05, epochs, batch_size: 32 }
}

/// Smaller batches and a larger step for small training sets.
pub fn mlp_ce_small_data(hidden: &[usize], epochs: usize) -> ModelSpec {
    ModelSpec::MlpCe { hidden: hidden.to_vec(), learning_rate: 0.2, epochs, batch_size: 16 }
}

pub fn lssvm_tuned() -> ModelSpec {
    ModelSpec::Lssvm { svm: SvmConfig::default(), tune_bandwidths: BANDWIDTHS.to_vec() }
}

pub fn autoencoder(epochs: usize) -> ModelSpec {
    ModelSpec::Autoencoder { sizes: None, learning_rate: 1.0, epochs, batch_size: 16 }
}

/// The five single-AP ring channels: Rayleigh fading with nu = 2 and 3,
/// and uncorrelated shadowing with three spreads.
pub fn ring_channels() -> Vec<(String, ChannelParams, bool, Likelihood)> {
    let fading = |nu: f64| ChannelParams { nu, sigma_s_db: 0.0, ..Default::default() };
    let shadow = |s: f64| ChannelParams { sigma_s_db: s, shadowing: ShadowingKind::Uncorrelated, ..Default::default() };
    vec![
        ("fading-nu2".into(), fading(2.0), true, Likelihood::Fading),
        ("fading-nu3".into(), fading(3.0), true, Likelihood::Fading),
        ("shadowing-0.1".into(), shadow(0.1), false, Likelihood::Shadowing),
        ("shadowing-1.8".into(), shadow(1.8), false, Likelihood::Shadowing),
        ("shadowing-6".into(), shadow(6.0), false, Likelihood::Shadowing),
    ]
}

struct Sizes {
    quick: bool,
}

impl Sizes {
    fn n(&self, desk: usize, quick: usize) -> usize {
        if self.quick {
            quick
        } else {
            desk
        }
    }
}

fn exp(scenario: Scenario, channel: ChannelParams, model: ModelSpec, n_train: usize, n_test: usize, n_maps: usize) -> Experiment {
    Experiment { n_train, n_test, n_maps, seed: 1, ..Experiment::new(scenario, channel, model) }
}

pub fn figure(name: &str, quick: bool) -> Result<Plan> {
    let z = Sizes { quick };
    let urban_channel = ChannelParams::default();
    let mut curves = Vec::new();
    let mut push = |name: String, e: Experiment| curves.push(Curve { name, experiment: e });
    match name {
        "fig2" => {
            for (label, ch, fading, lik) in ring_channels() {
                let models = [
                    ("np", ModelSpec::Np { likelihood: lik }),
                    ("mlp-ce", mlp_ce(&[5, 5], z.n(50, 5))),
                    ("lssvm", ModelSpec::Lssvm { svm: SvmConfig::default(), tune_bandwidths: vec![] }),
                ];
                for (m, spec) in models {
                    let mut e = exp(ring(), ch.clone(), spec, z.n(100_000, 2000), z.n(100_000, 2000), 1);
                    e.fading = fading;
                    push(format!("{label}-{m}"), e);
                }
            }
        }
        "fig5" => {
            let np = ModelSpec::NpQuantized { levels: 300, n_samples: z.n(1_000_000, 20_000), pool_maps: z.n(20, 2), pseudo_count: 0.5 };
            let models = [("np-quantized", np), ("mlp-ce-5", mlp_ce_small_data(&[5], z.n(300, 5))), ("mlp-ce-20", mlp_ce_small_data(&[20], z.n(300, 5))), ("lssvm", lssvm_tuned())];
            for (m, spec) in models {
                let mut e = exp(urban([1]), urban_channel.clone(), spec, 1000, z.n(10_000, 1000), z.n(20, 2));
                e.fading = false;
                push(m.into(), e);
            }
        }
        "fig6" => {
            for s in [1000, 3000, 10_000] {
                let s = z.n(s, s / 10);
                push(format!("lssvm-S{s}"), exp(urban(2..=11), urban_channel.clone(), lssvm_tuned(), s, z.n(10_000, 1000), z.n(10, 2)));
                push(
                    format!("mlp-ce-S{s}"),
                    exp(urban(2..=11), urban_channel.clone(), mlp_ce(&[100, 100, 100], z.n(50, 3)), s, z.n(10_000, 1000), z.n(10, 2)),
                );
            }
        }
        "fig8" => {
            for (k_f, fading, tag) in [(1, true, "kf1"), (10, true, "kf10"), (1, false, "no-fading")] {
                let mut e = exp(urban(1..=5), urban_channel.clone(), lssvm_tuned(), z.n(5000, 500), z.n(50_000, 1000), z.n(20, 2));
                e.k_f = k_f;
                e.fading = fading;
                e.target_fa = vec![0.2];
                push(format!("lssvm-{tag}"), e.clone());
                e.model = mlp_ce(&[100, 100, 100], z.n(50, 3));
                push(format!("mlp-ce-{tag}"), e);
            }
            let mut e = exp(urban(1..=5), urban_channel.clone(), ModelSpec::Eda { eda: Default::default() }, z.n(5000, 500), z.n(50_000, 1000), z.n(20, 2));
            e.fading = false;
            e.target_fa = vec![0.2];
            push("eda-no-fading".into(), e);
        }
        "fig10" => {
            let one_class = [("oclssvm", ModelSpec::Oclssvm { svm: SvmConfig::default() }), ("autoencoder", autoencoder(z.n(200, 5)))];
            for (m, spec) in &one_class {
                for s in [1000, 5000] {
                    let s = z.n(s, s / 10);
                    push(format!("{m}-S{s}"), exp(urban(2..=11), urban_channel.clone(), spec.clone(), s, z.n(10_000, 1000), z.n(5, 2)));
                }
                let mut e = exp(urban(2..=11), urban_channel.clone(), spec.clone(), z.n(5000, 500), z.n(10_000, 1000), z.n(5, 2));
                e.k_f = 10;
                push(format!("{m}-kf10"), e.clone());
                e.k_f = 1;
                e.fading = false;
                push(format!("{m}-no-fading"), e);
            }
            for (m, spec) in [("lssvm", lssvm_tuned()), ("eda", ModelSpec::Eda { eda: Default::default() })] {
                let mut e = exp(urban(2..=11), urban_channel.clone(), spec, z.n(5000, 500), z.n(10_000, 1000), z.n(5, 2));
                e.fading = false;
                push(format!("{m}-no-fading"), e);
            }
        }
        "fig11" => {
            let base = exp(urban(2..=11), urban_channel, lssvm_tuned(), 1, 1, 1);
            let (n_side, n_train) = if quick { (30, 500) } else { (92, 5000) };
            return Ok(Plan::Grid(GridStudy {
                base,
                n_side,
                n_train,
                models: vec![("lssvm".into(), lssvm_tuned()), ("mlp-ce".into(), mlp_ce(&[100, 100, 100], z.n(50, 3)))],
            }));
        }
        other => return Err(Error::InvalidConfig(format!("unknown figure {other:?}; expected one of {}", FIGURES.join(", ")))),
    }
    Ok(Plan::Curves(curves))
}
