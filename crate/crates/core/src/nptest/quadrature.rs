//! Direct numerical evaluation of the ring likelihoods by adaptive
//! Gauss-Kronrod quadrature over the UE distance.

use super::{Likelihood, RingModel};
use crate::channel::path_loss_los_db;
use crate::error::{Error, Result};
use crate::geometry::RegionLabel;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
// Gauss weights for the nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for i in 0..7 {
        let dx = h * XGK[i];
        let s = f(c - dx) + f(c + dx);
        k += WGK[i] * s;
        if i % 2 == 1 {
            g += WG[i / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Global adaptive Gauss-Kronrod integration of `f` over `[a, b]` split at
/// the given breakpoints. Returns `(integral, error estimate)`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, breaks: &[f64], rel_tol: f64, abs_tol: f64) -> (f64, f64) {
    let mut parts: Vec<(f64, f64, f64, f64)> = breaks
        .windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| {
            let (v, e) = gk15(&f, w[0], w[1]);
            (w[0], w[1], v, e)
        })
        .collect();
    for _ in 0..10_000 {
        let total: f64 = parts.iter().map(|p| p.2).sum();
        let err: f64 = parts.iter().map(|p| p.3).sum();
        if err <= (rel_tol * total.abs()).max(abs_tol) {
            break;
        }
        let (idx, _) = parts
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("at least one interval");
        let (a, b, _, _) = parts.swap_remove(idx);
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let (v1, e1) = gk15(&f, a, m);
        let (v2, e2) = gk15(&f, m, b);
        parts.push((a, m, v1, e1));
        parts.push((m, b, v2, e2));
    }
    (parts.iter().map(|p| p.2).sum(), parts.iter().map(|p| p.3).sum())
}

/// `ln int_lo^hi exp(g(t)) dt`, integrating `exp(g - max g)` so that the
/// result does not underflow when `g` is very negative.
pub fn integrate_log<G: Fn(f64) -> f64>(g: G, lo: f64, hi: f64, rel_tol: f64) -> f64 {
    const SCAN: usize = 256;
    let step = (hi - lo) / SCAN as f64;
    let mut best = (f64::NEG_INFINITY, 0usize);
    for i in 0..=SCAN {
        let v = g(lo + step * i as f64);
        if v > best.0 {
            best = (v, i);
        }
    }
    let shift = best.0;
    if shift == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let mut breaks: Vec<f64> = (0..=32).map(|i| lo + (hi - lo) * i as f64 / 32.0).collect();
    for off in [-1.0, 1.0] {
        let t = lo + step * (best.1 as f64 + off);
        if t > lo && t < hi {
            breaks.push(t);
        }
    }
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let (v, _) = integrate(|t| (g(t) - shift).exp(), &breaks, rel_tol, 0.0);
    shift + v.ln()
}

const LN_2PI_HALF: f64 = 0.918_938_533_204_672_741_780_329_736_406;

/// `ln p(a | d)` for one observation at distance `d`.
pub fn ln_conditional_density(model: &RingModel, lik: Likelihood, d: f64, a: f64) -> Result<f64> {
    let pl_db = path_loss_los_db(&model.params, d)?;
    Ok(match lik {
        Likelihood::Fading => {
            // Gain 1/a exponential with mean 1/m: p(a) = m exp(-m / a) / a^2.
            let ln_m = pl_db * std::f64::consts::LN_10 / 10.0;
            ln_m - 2.0 * a.ln() - (ln_m - a.ln()).exp()
        }
        Likelihood::Shadowing => {
            let sigma = model.params.sigma_s_db;
            if !(sigma > 0.0) {
                return Err(Error::DegenerateShadowing);
            }
            let z = (10.0 * a.log10() - pl_db) / sigma;
            (10.0 / std::f64::consts::LN_10).ln() - a.ln() - sigma.ln() - LN_2PI_HALF - 0.5 * z * z
        }
    })
}

/// `ln p(obs | H)` for observations that are i.i.d. given the UE distance
/// (fading draws at one position), with the distance uniform in area over
/// the region of `hyp`.
pub fn ln_density(model: &RingModel, lik: Likelihood, hyp: RegionLabel, obs: &[f64]) -> Result<f64> {
    model.validate()?;
    if obs.is_empty() {
        return Err(Error::DimensionMismatch { expected: 1, found: 0 });
    }
    if lik == Likelihood::Shadowing && obs.len() != 1 {
        return Err(Error::DimensionMismatch { expected: 1, found: obs.len() });
    }
    if let Some(bad) = obs.iter().find(|a| !(**a > 0.0 && a.is_finite())) {
        return Err(Error::Domain(format!("attenuation must be positive, got {bad}")));
    }
    let r = &model.ring;
    let (r0, r1, delta) = match hyp {
        RegionLabel::H0 => (r.r_min, r.r_in, r.delta_inside()),
        RegionLabel::H1 => (r.r_in, r.r_out, r.delta_outside()),
    };
    let ln_delta = delta.ln();
    // Substitute t = ln d; the area weight 2d/delta and the Jacobian d combine.
    let g = |t: f64| {
        let d = t.exp();
        let mut v = std::f64::consts::LN_2 + 2.0 * t - ln_delta;
        for &a in obs {
            v += ln_conditional_density(model, lik, d, a).unwrap_or(f64::NEG_INFINITY);
        }
        v
    };
    Ok(integrate_log(g, r0.ln(), r1.ln(), 1e-11))
}

/// `ln p(a | H0) - ln p(a | H1)` by quadrature.
pub fn llr_numeric_oracle(model: &RingModel, lik: Likelihood, a: f64) -> Result<f64> {
    llr_numeric_multi(model, lik, &[a])
}

/// Log-likelihood ratio of several i.i.d. observations taken at one position.
pub fn llr_numeric_multi(model: &RingModel, lik: Likelihood, obs: &[f64]) -> Result<f64> {
    let l0 = ln_density(model, lik, RegionLabel::H0, obs)?;
    let l1 = ln_density(model, lik, RegionLabel::H1, obs)?;
    let floor = f64::MIN_POSITIVE.ln();
    if l0 < floor && l1 < floor {
        return Err(Error::BothDensitiesZero(obs[0]));
    }
    Ok(l0 - l1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::ChannelParams;
    use crate::geometry::RingScenario;

    fn model(nu: f64, sigma: f64) -> RingModel {
        RingModel {
            ring: RingScenario::new(0.1, 2.0, 10.0).unwrap(),
            params: ChannelParams { nu, sigma_s_db: sigma, ..ChannelParams::default() },
        }
    }

    #[test]
    fn gauss_kronrod_on_smooth_integrands() {
        let (v, _) = integrate(|x: f64| x.powi(9), &[0.0, 1.0], 1e-14, 0.0);
        assert!((v - 0.1).abs() < 1e-15);
        let (v, _) = integrate(f64::exp, &[0.0, 0.5, 3.0], 1e-13, 0.0);
        assert!((v - (3f64.exp() - 1.0)).abs() < 1e-12);
        let (v, _) = integrate(|x: f64| 1.0 / (1.0 + 1e4 * x * x), &[-1.0, 1.0], 1e-12, 0.0);
        let exact = 2.0 * 100f64.atan() / 100.0;
        assert!(((v - exact) / exact).abs() < 1e-11);
    }

    #[test]
    fn log_integration_handles_underflow() {
        // int_0^1 exp(-2000 + x) dx = exp(-2000) (e - 1).
        let v = integrate_log(|x| -2000.0 + x, 0.0, 1.0, 1e-12);
        assert!((v - (-2000.0 + (1f64.exp() - 1.0).ln())).abs() < 1e-12);
        assert_eq!(integrate_log(|_| f64::NEG_INFINITY, 0.0, 1.0, 1e-12), f64::NEG_INFINITY);
    }

    fn density_mass(m: &RingModel, lik: Likelihood, hyp: RegionLabel) -> f64 {
        // Integrate p(a | H) over ln a.
        let g = |s: f64| {
            let a = s.exp();
            ln_density(m, lik, hyp, &[a]).unwrap() + s
        };
        integrate_log(g, 0.0, 30.0 * std::f64::consts::LN_10, 1e-10).exp()
    }

    #[test]
    fn densities_are_normalized() {
        for (m, lik) in [(model(2.0, 0.0), Likelihood::Fading), (model(3.0, 0.0), Likelihood::Fading), (model(2.0, 1.8), Likelihood::Shadowing)] {
            for hyp in [RegionLabel::H0, RegionLabel::H1] {
                let mass = density_mass(&m, lik, hyp);
                assert!((mass - 1.0).abs() < 1e-7, "{lik:?} {hyp:?}: {mass}");
            }
        }
    }

    #[test]
    fn llr_is_ratio_of_separate_densities() {
        let m = model(2.0, 0.0);
        for &a in &[1e4, 1e6, 1e8] {
            let l0 = ln_density(&m, Likelihood::Fading, RegionLabel::H0, &[a]).unwrap();
            let llr = llr_numeric_oracle(&m, Likelihood::Fading, a).unwrap();
            let l1 = ln_density(&m, Likelihood::Fading, RegionLabel::H1, &[a]).unwrap();
            assert!(((l0 - l1) - llr).abs() < 1e-12);
        }
    }

    #[test]
    fn extreme_attenuation_reports_both_zero() {
        let m = model(2.0, 0.1);
        assert!(matches!(llr_numeric_oracle(&m, Likelihood::Shadowing, 1e300), Err(Error::BothDensitiesZero(_))));
    }
}
