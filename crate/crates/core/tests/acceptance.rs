//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! `cargo test -p irlv --test acceptance -- 1 9` runs a subset. Failures are
//! reported but do not fail the binary unless `IRLV_ACCEPTANCE_STRICT=1`.

use std::cell::OnceCell;
use std::collections::BTreeMap;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use irlv::channel::{
    build_dataset, db_to_linear, generate_grid_map, generate_shadowing_map, path_loss_los_db, sample_attenuation, ChannelParams,
    FeatureVector, ShadowingKind, ShadowingMap,
};
use irlv::eval::{run_experiment, ExperimentResult};
use irlv::geometry::{Position, RegionLabel, RingScenario, Scenario};
use irlv::lssvm::{self, kernel, SvmConfig, SvmModel};
use irlv::mlp::{flatten, gradient_raw, init_layers, loss_raw, unflatten, Layer, Loss, MlpConfig};
use irlv::nptest::{llr_fading_nu2, llr_fading_nu3, llr_numeric_oracle, llr_shadowing, Likelihood, RingModel};
use irlv::presets::{self, Plan};

struct Outcome {
    pass: bool,
    detail: String,
}

type Results = BTreeMap<String, ExperimentResult>;

/// Runs the named curves of a preset (all when `only` is empty).
fn run_plan(figure: &str, only: &[&str]) -> Results {
    let Plan::Curves(curves) = presets::figure(figure, false).expect("preset") else { panic!("{figure} is not a curve plan") };
    let mut out = BTreeMap::new();
    for c in curves {
        if !only.is_empty() && !only.contains(&c.name.as_str()) {
            continue;
        }
        let t = Instant::now();
        let r = run_experiment(&c.experiment).unwrap_or_else(|e| panic!("{figure}/{}: {e}", c.name));
        eprintln!("  {figure}/{}: {} maps, {:.0} s", c.name, r.maps.len(), t.elapsed().as_secs_f64());
        out.insert(c.name, r);
    }
    out
}

fn ring_model(nu: f64, sigma: f64) -> RingModel {
    let params = ChannelParams { nu, sigma_s_db: sigma, shadowing: ShadowingKind::Uncorrelated, ..Default::default() };
    RingModel::new(RingScenario::new(0.1, 2.0, 10.0).unwrap(), params).unwrap()
}

fn c1() -> Outcome {
    let mut worst = 0.0f64;
    let mut notes = Vec::new();
    let mut pass = true;
    let variants: [(&str, f64, f64); 5] =
        [("fading nu=2", 2.0, 0.0), ("fading nu=3", 3.0, 0.0), ("shadowing 0.1", 2.0, 0.1), ("shadowing 1.8", 2.0, 1.8), ("shadowing 6", 2.0, 6.0)];
    for (name, nu, sigma) in variants {
        let m = ring_model(nu, sigma);
        let pl_lo = path_loss_los_db(&m.params, m.ring.r_min).unwrap();
        let pl_hi = path_loss_los_db(&m.params, m.ring.r_out).unwrap();
        let (lo, hi) = if sigma == 0.0 { (pl_lo - 5.0, pl_hi + 30.0) } else { (pl_lo - 4.0 * sigma - 1.0, pl_hi + 4.0 * sigma + 1.0) };
        let mut variant_worst = 0.0f64;
        for k in 0..200 {
            let a = db_to_linear(lo + (hi - lo) * k as f64 / 199.0);
            let closed = match (sigma == 0.0, nu == 2.0) {
                (true, true) => llr_fading_nu2(&m, a),
                (true, false) => llr_fading_nu3(&m, a),
                (false, _) => llr_shadowing(&m, a),
            };
            let lik = if sigma == 0.0 { Likelihood::Fading } else { Likelihood::Shadowing };
            match (closed, llr_numeric_oracle(&m, lik, a)) {
                (Ok(c), Ok(o)) => {
                    let err = (c - o).abs() / c.abs().max(o.abs()).max(1.0);
                    variant_worst = variant_worst.max(err);
                }
                (c, o) => {
                    pass = false;
                    notes.push(format!("{name}: evaluation failed at {:.2} dB ({:?} / {:?})", lo + (hi - lo) * k as f64 / 199.0, c.err(), o.err()));
                    break;
                }
            }
        }
        notes.push(format!("{name} [{lo:.1}, {hi:.1}] dB max {variant_worst:.1e}"));
        worst = worst.max(variant_worst);
    }
    pass &= worst <= 1e-6;
    Outcome { pass, detail: format!("worst relative error {worst:.2e} (tol 1e-6); {}", notes.join("; ")) }
}

const FIG2_FA: [f64; 3] = [0.05, 0.1, 0.2];

fn c2(r: &Results) -> Outcome {
    let mut worst = 0.0f64;
    let mut notes = Vec::new();
    for (label, ..) in presets::ring_channels() {
        let np = &r[&format!("{label}-np")].maps[0].roc;
        for m in ["mlp-ce", "lssvm"] {
            let ml = &r[&format!("{label}-{m}")].maps[0].roc;
            let diffs: Vec<String> = FIG2_FA
                .iter()
                .map(|&fa| {
                    let (a, b) = (np.md_at_fa(fa), ml.md_at_fa(fa));
                    worst = worst.max((a - b).abs());
                    format!("{b:.4}/{a:.4}")
                })
                .collect();
            notes.push(format!("{label} {m} {}", diffs.join(" ")));
        }
    }
    Outcome { pass: worst <= 0.03, detail: format!("max |P_MD(ML) - P_MD(NP)| {worst:.4} (tol 0.03); ML/NP at FA 0.05 0.1 0.2: {}", notes.join("; ")) }
}

/// `a` lies below `b` by more than three binomial standard deviations.
fn below(a: f64, na: usize, b: f64, nb: usize) -> bool {
    let sd = (a * (1.0 - a) / na as f64 + b * (1.0 - b) / nb as f64).sqrt();
    b - a > 3.0 * sd
}

fn c3(r: &Results) -> Outcome {
    let md = |label: &str, fa: f64| {
        let roc = &r[&format!("{label}-np")].maps[0].roc;
        (roc.md_at_fa(fa), roc.n_h1)
    };
    let mut pass = true;
    let mut notes = Vec::new();
    for fa in FIG2_FA {
        let (f2, f3, s01, s18, s6) = (md("fading-nu2", fa), md("fading-nu3", fa), md("shadowing-0.1", fa), md("shadowing-1.8", fa), md("shadowing-6", fa));
        let checks = [
            below(f3.0, f3.1, f2.0, f2.1),
            below(s01.0, s01.1, s18.0, s18.1),
            below(s18.0, s18.1, s6.0, s6.1),
            below(s18.0, s18.1, f2.0, f2.1),
            below(s18.0, s18.1, f3.0, f3.1),
        ];
        pass &= checks.iter().all(|&c| c);
        notes.push(format!(
            "FA {fa}: nu2 {:.4} nu3 {:.4} s0.1 {:.5} s1.8 {:.4} s6 {:.4}{}",
            f2.0,
            f3.0,
            s01.0,
            s18.0,
            s6.0,
            if checks.iter().all(|&c| c) { "" } else { " (order violated)" }
        ));
    }
    Outcome { pass, detail: format!("nu3 < nu2, s0.1 < s1.8 < s6, s1.8 < fading, 3 sigma apart; {}", notes.join("; ")) }
}

fn c4() -> Outcome {
    let r = run_plan("fig5", &[]);
    let np = r["np-quantized"].md_at_fa(0.1);
    let n_maps = r["np-quantized"].maps.len();
    let mut pass = n_maps >= 20;
    let mut notes = vec![format!("np-quantized {np:.4}")];
    for m in ["mlp-ce-5", "mlp-ce-20", "lssvm"] {
        let v = r[m].md_at_fa(0.1);
        pass &= v <= np && r[m].maps.len() >= 20;
        notes.push(format!("{m} {v:.4}"));
    }
    Outcome { pass, detail: format!("P_MD at FA 0.1 over {n_maps} maps: {}", notes.join(", ")) }
}

fn c5() -> Outcome {
    let r = run_plan("fig6", &["lssvm-S1000", "lssvm-S3000", "lssvm-S10000"]);
    let cis: Vec<(f64, f64, f64)> = ["lssvm-S1000", "lssvm-S3000", "lssvm-S10000"].iter().map(|k| r[*k].md_ci(0.1)).collect();
    let decreasing = cis.windows(2).all(|w| w[1].0 < w[0].0);
    let separated = cis[2].2 < cis[0].1;
    let notes: Vec<String> =
        ["1e3", "3e3", "1e4"].iter().zip(&cis).map(|(s, (m, lo, hi))| format!("S={s} {m:.4} [{lo:.4}, {hi:.4}]")).collect();
    Outcome { pass: decreasing && separated, detail: format!("LS-SVM P_MD at FA 0.1 (95% CI over maps): {}", notes.join(", ")) }
}

fn c6() -> Outcome {
    let r = run_plan("fig8", &["lssvm-kf1", "lssvm-kf10"]);
    let (k1, k10) = (r["lssvm-kf1"].md_at_fa(0.2), r["lssvm-kf10"].md_at_fa(0.2));
    let n_maps = r["lssvm-kf1"].maps.len().min(r["lssvm-kf10"].maps.len());
    let n_test = r["lssvm-kf1"].maps[0].roc.n_h0 + r["lssvm-kf1"].maps[0].roc.n_h1;
    let ratio = k1 / k10;
    let within = |v: f64, target: f64| v >= target / 3.0 && v <= target * 3.0;
    let pass = ratio >= 5.0 && within(k1, 0.1) && within(k10, 0.01) && n_maps >= 20 && n_test >= 100_000;
    Outcome {
        pass,
        detail: format!(
            "LS-SVM P_MD at FA 0.2 over {n_maps} maps ({n_test} test points each): k_f=1 {k1:.4}, k_f=10 {k10:.4}, ratio {ratio:.2} (need >= 5, magnitudes within x3 of 1e-1 and 1e-2)"
        ),
    }
}

const FIG10_CURVES: [&str; 4] = ["lssvm-no-fading", "oclssvm-no-fading", "autoencoder-no-fading", "eda-no-fading"];

fn mean_auc(r: &ExperimentResult) -> f64 {
    r.maps.iter().map(|m| m.roc.auc()).sum::<f64>() / r.maps.len() as f64
}

fn c7(r: &Results) -> Outcome {
    let eda = mean_auc(&r["eda-no-fading"]);
    let mut pass = true;
    let mut notes = vec![format!("eda {eda:.4}")];
    for m in &FIG10_CURVES[..3] {
        let a = mean_auc(&r[*m]);
        pass &= a - eda >= 0.05;
        notes.push(format!("{m} {a:.4} (+{:.4})", a - eda));
    }
    Outcome { pass, detail: format!("mean AUC over maps, margin >= 0.05 over EDA: {}", notes.join(", ")) }
}

fn c8(r: &Results) -> Outcome {
    let (two, one) = (r["lssvm-no-fading"].md_at_fa(0.1), r["oclssvm-no-fading"].md_at_fa(0.1));
    Outcome { pass: two <= one, detail: format!("P_MD at FA 0.1: two-class {two:.4}, one-class {one:.4}") }
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let norm = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    diff / norm.max(1e-8)
}

fn fd_gradient(layers: &[Layer], loss: Loss, xs: &[Vec<f64>], ts: &[Vec<f64>]) -> Vec<f64> {
    let p0 = flatten(layers);
    let mut work = layers.to_vec();
    let h = 1e-6;
    (0..p0.len())
        .map(|k| {
            let mut p = p0.clone();
            p[k] += h;
            unflatten(&mut work, &p);
            let up = loss_raw(&work, loss, xs, ts);
            p[k] = p0[k] - h;
            unflatten(&mut work, &p);
            let down = loss_raw(&work, loss, xs, ts);
            (up - down) / (2.0 * h)
        })
        .collect()
}

fn kernel_matrix(m: &SvmModel) -> Vec<Vec<f64>> {
    m.support.iter().map(|x| m.support.iter().map(|y| kernel(x, y, &m.kernel).unwrap()).collect()).collect()
}

fn mat_vec(k: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    k.iter().map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum()).collect()
}

/// Primal objectives written in the dual variables, `w = sum_i beta_i phi(a_i)`.
fn twoclass_objective(k: &[Vec<f64>], t: &[f64], c: f64, beta: &[f64], b: f64) -> f64 {
    let kb = mat_vec(k, beta);
    let wtw: f64 = beta.iter().zip(&kb).map(|(x, y)| x * y).sum();
    0.5 * wtw + 0.5 * c * t.iter().zip(&kb).map(|(t, f)| (t * (f + b) - 1.0).powi(2)).sum::<f64>()
}

fn oneclass_objective(k: &[Vec<f64>], c: f64, beta: &[f64], b: f64) -> f64 {
    let kb = mat_vec(k, beta);
    let wtw: f64 = beta.iter().zip(&kb).map(|(x, y)| x * y).sum();
    0.5 * wtw + 0.5 * c * kb.iter().map(|f| (-b - f).powi(2)).sum::<f64>() + b
}

/// Counts random perturbations of `(beta, b)` that lower the objective.
fn probe<F: Fn(&[f64], f64) -> f64>(f: F, beta: &[f64], b: f64, eps: f64, rng: &mut ChaCha8Rng) -> usize {
    let best = f(beta, b);
    let mut worse = 0;
    for _ in 0..50 {
        let dir: Vec<f64> = (0..=beta.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        for e in [eps, -eps] {
            let p: Vec<f64> = beta.iter().zip(&dir).map(|(x, d)| x + e * d).collect();
            if f(&p, b + e * dir[beta.len()]) < best - 1e-12 * best.abs().max(1.0) {
                worse += 1;
            }
        }
    }
    worse
}

fn c9() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst_grad = 0.0f64;
    for case in 0..20 {
        let n_in = rng.random_range(2..12);
        let (cfg, loss, n_out) = match case % 3 {
            0 => (MlpConfig::classifier(n_in, &[rng.random_range(2..6), rng.random_range(2..6)]), Loss::CrossEntropy, 1),
            1 => (MlpConfig::classifier(n_in, &[rng.random_range(2..8)]), Loss::Mse, 1),
            _ => (MlpConfig::default_autoencoder(n_in), Loss::Mse, n_in),
        };
        let layers = init_layers(&cfg, &mut rng).unwrap();
        let xs: Vec<Vec<f64>> = (0..8).map(|_| (0..n_in).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
        let ts: Vec<Vec<f64>> = if n_out == n_in {
            xs.clone()
        } else {
            (0..8).map(|_| vec![if rng.random_bool(0.5) { 1.0 } else { 0.0 }]).collect()
        };
        let (_, g) = gradient_raw(&layers, loss, &xs, &ts);
        worst_grad = worst_grad.max(rel_err(&g, &fd_gradient(&layers, loss, &xs, &ts)));
    }

    // LS-SVM on simulated 5-AP urban data.
    let scenario = presets::urban(1..=5);
    let params = ChannelParams::default();
    let map = generate_grid_map(&params, &scenario.bounding_box(), 2.0, scenario.n_aps(), &mut rng).unwrap();
    let data = build_dataset(&scenario, &params, &map, 600, 1, None, true, &mut rng).unwrap();
    let two = lssvm::train_twoclass(&data, &SvmConfig { bandwidth: Some(1.0), ..Default::default() }).unwrap();
    let h0: Vec<FeatureVector> = data.iter().filter(|v| v.label == Some(RegionLabel::H0)).cloned().collect();
    let one = lssvm::train_oneclass(&h0, &SvmConfig::default()).unwrap();

    let mut kkt = 0.0f64;
    let mut decreases = 0;
    for (m, is_two) in [(&two, true), (&one, false)] {
        let k = kernel_matrix(m);
        let c = m.kernel.c;
        let hb: Vec<f64> = mat_vec(&k, &m.coef).iter().zip(&m.coef).map(|(kb, b)| kb + b / c).collect();
        let (r, scale, eq) = if is_two {
            let t: Vec<f64> = data.iter().map(|v| f64::from(v.label.unwrap().label())).collect();
            let r: Vec<f64> = hb.iter().zip(&t).map(|(h, t)| h + m.bias - t).collect();
            (r, (t.len() as f64).sqrt(), m.coef.iter().sum::<f64>())
        } else {
            let r: Vec<f64> = hb.iter().map(|h| h + m.bias).collect();
            (r, m.bias.abs() * (hb.len() as f64).sqrt(), m.coef.iter().sum::<f64>() - 1.0)
        };
        let own = (r.iter().map(|x| x * x).sum::<f64>() + eq * eq).sqrt() / scale;
        kkt = kkt.max(own).max(m.report.unwrap().residual);
        decreases += if is_two {
            let t: Vec<f64> = data.iter().map(|v| f64::from(v.label.unwrap().label())).collect();
            probe(|b, bias| twoclass_objective(&k, &t, c, b, bias), &m.coef, m.bias, 1e-3, &mut rng)
        } else {
            probe(|b, bias| oneclass_objective(&k, c, b, bias), &m.coef, m.bias, 1e-4, &mut rng)
        };
    }
    Outcome {
        pass: worst_grad <= 1e-5 && kkt <= 1e-8 && decreases == 0,
        detail: format!(
            "backprop vs central differences max rel err {worst_grad:.2e} (tol 1e-5, 20 cases); LS-SVM KKT residual {kkt:.2e} (tol 1e-8); {decreases} of 200 optimality probes found a decrease"
        ),
    }
}

fn c10() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let params = ChannelParams::default();
    let pts = [Position::new(0.0, 0.0), Position::new(params.d_c, 0.0)];
    let n = 100_000;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for _ in 0..n {
        let map = generate_shadowing_map(&params, &pts, 1, &mut rng).unwrap();
        let (_, vals) = map.point_values().unwrap();
        let (x, y) = (vals[0][0], vals[0][1]);
        sxy += x * y;
        sxx += x * x;
        syy += y * y;
    }
    let rho = sxy / (sxx * syy).sqrt();
    let target = (-1.0f64).exp();
    let rho_err = (rho / target - 1.0).abs();

    let ring = Scenario::Ring(RingScenario::new(0.1, 2.0, 10.0).unwrap());
    let p = ChannelParams { sigma_s_db: 0.0, ..Default::default() };
    let map = ShadowingMap::zero(1);
    let ue = Position::new(5.0, 0.0);
    let a_db = path_loss_los_db(&p, 5.0).unwrap();
    let mean_gain = (0..n).map(|_| 1.0 / sample_attenuation(&ring, &p, &map, &ue, true, &mut rng).unwrap().a[0]).sum::<f64>() / n as f64;
    let gain_err = (mean_gain / db_to_linear(-a_db) - 1.0).abs();
    Outcome {
        pass: rho_err <= 0.05 && gain_err <= 0.01,
        detail: format!(
            "correlation at d_c {rho:.4} vs {target:.4} (rel err {rho_err:.3}, tol 0.05); fading mean gain rel err {gain_err:.4} (tol 0.01) over {n} draws"
        ),
    }
}

fn main() {
    let wanted: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let run = |k: usize| wanted.is_empty() || wanted.contains(&k);
    let fig2 = OnceCell::new();
    let fig10 = OnceCell::new();
    let names = [
        "closed-form LLR vs quadrature oracle",
        "ring: ML matches NP",
        "ring: NP orderings",
        "single-AP urban: ML beats quantized NP",
        "10-AP urban: P_MD falls with S",
        "5-AP urban: fading average effect",
        "fading-free urban: ML dominates EDA in AUC",
        "two-class beats one-class",
        "gradient and solver verification",
        "channel statistics",
    ];
    let mut failed = Vec::new();
    let total = Instant::now();
    for (i, name) in names.iter().enumerate() {
        let k = i + 1;
        if !run(k) {
            continue;
        }
        let t = Instant::now();
        let o = match k {
            1 => c1(),
            2 => c2(fig2.get_or_init(|| run_plan("fig2", &[]))),
            3 => c3(fig2.get_or_init(|| run_plan("fig2", &[]))),
            4 => c4(),
            5 => c5(),
            6 => c6(),
            7 => c7(fig10.get_or_init(|| run_plan("fig10", &FIG10_CURVES))),
            8 => c8(fig10.get_or_init(|| run_plan("fig10", &FIG10_CURVES))),
            9 => c9(),
            _ => c10(),
        };
        println!("criterion {k:>2} {} {name}: {} [{:.1} s]", if o.pass { "PASS" } else { "FAIL" }, o.detail, t.elapsed().as_secs_f64());
        if !o.pass {
            failed.push(k);
        }
    }
    println!("acceptance finished in {:.0} s; failed: {failed:?}", total.elapsed().as_secs_f64());
    if !failed.is_empty() && std::env::var("IRLV_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}
