//! Legendre transform of the pressure, the Birkhoff spectrum and the L^q
//! spectrum of `mu_c`.

use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::LN_2;

use crate::config::Config;
use crate::ergodic_opt::{endpoints, EndpointEstimate};
use crate::error::{Error, Result};
use crate::symbolic::TorusPoint;
use crate::transfer::{pressure, pressure_curve, PressureCurve};

/// `integral of psi_c` against Lebesgue measure.
pub const BETA_0: f64 = -2.0 * LN_2;

/// Grid step in `t` for the pressure samples behind a spectrum.
const T_STEP: f64 = 0.25;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SpectrumKind {
    Birkhoff,
    Lq,
    Legendre,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleFlag {
    /// Within the width of the alpha bracket from it.
    NearAlpha,
    /// Within the width of the beta bracket from it.
    NearBeta,
    /// Below `-2 log 2`: minimized over `t <= 0`.
    LowerSide,
    Divergent,
    Unconverged,
}

impl SampleFlag {
    pub fn as_str(&self) -> &'static str {
        match self {
            SampleFlag::NearAlpha => "near_alpha",
            SampleFlag::NearBeta => "near_beta",
            SampleFlag::LowerSide => "lower_side",
            SampleFlag::Divergent => "divergent",
            SampleFlag::Unconverged => "unconverged",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpectrumSample {
    pub argument: f64,
    /// `None` when the value is presumed infinite.
    pub value: Option<f64>,
    pub bracket_width: f64,
    pub flag: Option<SampleFlag>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpectrumCurve {
    pub c: TorusPoint,
    pub kind: SpectrumKind,
    pub samples: Vec<SpectrumSample>,
    pub endpoints_used: Option<EndpointEstimate>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LegendreValue {
    pub value: f64,
    /// Where the minimum of `p(t) - beta t` was found.
    pub t: f64,
}

/// Minimizes `p(t) - beta t` over `[lo, hi]`: best sample first, then golden
/// section between its neighbours. Samples with a non-finite value count as
/// `+inf`; `eval` gives `p` between samples.
fn minimize(
    samples: &[(f64, f64)],
    beta: f64,
    lo: f64,
    hi: f64,
    tol: f64,
    mut eval: impl FnMut(f64) -> Result<f64>,
) -> Result<LegendreValue> {
    let tmin = samples.first().map_or(f64::INFINITY, |s| s.0);
    let tmax = samples.last().map_or(f64::NEG_INFINITY, |s| s.0);
    let slack = 1e-12 * (1.0 + lo.abs().max(hi.abs()));
    if tmin > lo + slack {
        return Err(Error::InsufficientCurve { needed: lo, available: tmin });
    }
    if tmax < hi - slack {
        return Err(Error::InsufficientCurve { needed: hi, available: tmax });
    }
    let inside: Vec<(f64, f64)> = samples
        .iter()
        .filter(|s| s.0 >= lo - slack && s.0 <= hi + slack && s.1.is_finite())
        .map(|&(t, p)| (t.clamp(lo, hi), p - beta * t.clamp(lo, hi)))
        .collect();
    let Some(i) = (0..inside.len()).min_by(|&a, &b| inside[a].1.total_cmp(&inside[b].1)) else {
        return Err(Error::DomainError("no finite pressure sample in the minimization range".into()));
    };
    let mut best = LegendreValue { value: inside[i].1, t: inside[i].0 };
    let a = if i > 0 { inside[i - 1].0 } else { lo };
    let b = if i + 1 < inside.len() { inside[i + 1].0 } else { hi };
    if b - a > tol {
        let mut f = |t: f64| eval(t).map(|p| p - beta * t);
        let g = 0.5 * (5f64.sqrt() - 1.0);
        let (mut a, mut b) = (a, b);
        let mut x1 = b - g * (b - a);
        let mut x2 = a + g * (b - a);
        let (mut f1, mut f2) = (f(x1)?, f(x2)?);
        for _ in 0..200 {
            if b - a <= tol {
                break;
            }
            if f1 <= f2 {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = b - g * (b - a);
                f1 = f(x1)?;
            } else {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + g * (b - a);
                f2 = f(x2)?;
            }
        }
        for (t, v) in [(x1, f1), (x2, f2)] {
            if v < best.value {
                best = LegendreValue { value: v, t };
            }
        }
    }
    Ok(best)
}

/// `p^*(beta) = min over 0 <= t <= log 2 / delta of p(t) - beta t`, valid for
/// `beta >= -2 log 2` and `beta <= beta(c) - delta`. `samples` are `(t, p(t))`
/// sorted by `t`; `eval` refines between them.
pub fn legendre_samples(
    samples: &[(f64, f64)],
    beta: f64,
    delta: f64,
    golden_tol: f64,
    eval: impl FnMut(f64) -> Result<f64>,
) -> Result<LegendreValue> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::DomainError(format!("Delta must be positive, got {delta}")));
    }
    if !(beta.is_finite() && beta >= BETA_0 - 1e-12) {
        return Err(Error::DomainError(format!("beta = {beta} is below -2 log 2")));
    }
    minimize(samples, beta, 0.0, LN_2 / delta, golden_tol, eval)
}

/// The mirror image for `beta <= -2 log 2` and `beta >= alpha(c) + delta`:
/// the minimum over `-log 2 / delta <= t <= 0`.
pub fn legendre_lower_samples(
    samples: &[(f64, f64)],
    beta: f64,
    delta: f64,
    golden_tol: f64,
    eval: impl FnMut(f64) -> Result<f64>,
) -> Result<LegendreValue> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::DomainError(format!("Delta must be positive, got {delta}")));
    }
    if !(beta.is_finite() && beta <= BETA_0 + 1e-12) {
        return Err(Error::DomainError(format!("beta = {beta} is above -2 log 2")));
    }
    minimize(samples, beta, -LN_2 / delta, 0.0, golden_tol, eval)
}

fn curve_samples(curve: &PressureCurve) -> Vec<(f64, f64)> {
    curve
        .samples
        .iter()
        .map(|(t, e)| (*t, if e.divergent { f64::INFINITY } else { e.midpoint() }))
        .collect()
}

fn pressure_eval<'a>(c: &'a TorusPoint, cfg: &'a Config) -> impl FnMut(f64) -> Result<f64> + 'a {
    move |t| {
        let e = pressure(c, t, cfg)?;
        Ok(if e.divergent { f64::INFINITY } else { e.midpoint() })
    }
}

/// Legendre transform of a computed pressure curve; refinement between
/// samples recomputes the pressure at `curve.c`.
pub fn legendre(curve: &PressureCurve, beta: f64, delta: f64, cfg: &Config) -> Result<LegendreValue> {
    legendre_samples(&curve_samples(curve), beta, delta, cfg.golden_tol, pressure_eval(&curve.c, cfg))
}

fn t_grid(lo: f64, hi: f64) -> Vec<f64> {
    let a = (lo / T_STEP).floor() as i64;
    let b = (hi / T_STEP).ceil() as i64;
    (a..=b).map(|k| k as f64 * T_STEP).collect()
}

fn endpoint_flag(beta: f64, est: &EndpointEstimate) -> Option<SampleFlag> {
    let near = |(lo, hi): (f64, f64)| beta >= lo - (hi - lo) && beta <= hi + (hi - lo);
    if near(est.beta_bracket) {
        Some(SampleFlag::NearBeta)
    } else if near(est.alpha_bracket) {
        Some(SampleFlag::NearAlpha)
    } else {
        None
    }
}

/// `p^*` on `beta_grid`, or `f = p^*/log 2` when `normalize`.
fn legendre_spectrum_impl(c: &TorusPoint, beta_grid: &[f64], cfg: &Config, normalize: bool) -> Result<SpectrumCurve> {
    cfg.validate()?;
    if c.is_exact_half() {
        return Err(Error::DomainError("the spectrum formula excludes c = 1/2".into()));
    }
    if beta_grid.iter().any(|b| !b.is_finite()) || beta_grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidArgument("beta grid must be finite and sorted".into()));
    }
    let est = endpoints(c, cfg.endpoint_depth, cfg)?;
    let (alpha, beta_hat) = (est.alpha_bracket.0, est.beta_bracket.1);
    let bracket_width = (est.beta_bracket.1 - est.beta_bracket.0).max(est.alpha_bracket.1 - est.alpha_bracket.0);

    // Plan: which side each interior beta is minimized on, and over how much t.
    let plan: Vec<Option<(bool, f64)>> = beta_grid
        .iter()
        .map(|&b| {
            if b < alpha || b >= beta_hat {
                None
            } else if b >= BETA_0 {
                Some((true, (beta_hat - b).max(cfg.delta_floor)))
            } else {
                Some((false, (b - alpha).max(cfg.delta_floor)))
            }
        })
        .collect();
    let t_hi = plan.iter().flatten().filter(|p| p.0).map(|p| LN_2 / p.1).fold(0.0, f64::max);
    let t_lo = plan.iter().flatten().filter(|p| !p.0).map(|p| -LN_2 / p.1).fold(0.0, f64::min);
    let samples = if plan.iter().any(Option::is_some) {
        curve_samples(&pressure_curve(c, &t_grid(t_lo, t_hi), cfg)?)
    } else {
        Vec::new()
    };

    let scale = if normalize { 1.0 / LN_2 } else { 1.0 };
    let rows: Result<Vec<SpectrumSample>> = beta_grid
        .par_iter()
        .zip(plan.par_iter())
        .map(|(&b, step)| {
            let mut flag = endpoint_flag(b, &est);
            let value = match *step {
                None => 0.0,
                Some((true, delta)) => {
                    legendre_samples(&samples, b, delta, cfg.golden_tol, pressure_eval(c, cfg))?.value
                }
                Some((false, delta)) => {
                    flag = flag.or(Some(SampleFlag::LowerSide));
                    legendre_lower_samples(&samples, b, delta, cfg.golden_tol, pressure_eval(c, cfg))?.value
                }
            };
            Ok(SpectrumSample { argument: b, value: Some(value * scale), bracket_width: bracket_width * scale, flag })
        })
        .collect();
    Ok(SpectrumCurve {
        c: *c,
        kind: if normalize { SpectrumKind::Birkhoff } else { SpectrumKind::Legendre },
        samples: rows?,
        endpoints_used: Some(est),
    })
}

/// Birkhoff spectrum `f(beta) = p^*(beta) / log 2` between the endpoint
/// estimates and 0 outside them.
pub fn birkhoff_spectrum(c: &TorusPoint, beta_grid: &[f64], cfg: &Config) -> Result<SpectrumCurve> {
    legendre_spectrum_impl(c, beta_grid, cfg, true)
}

/// `p^*(beta)` on the same footing as [`birkhoff_spectrum`].
pub fn legendre_spectrum(c: &TorusPoint, beta_grid: &[f64], cfg: &Config) -> Result<SpectrumCurve> {
    legendre_spectrum_impl(c, beta_grid, cfg, false)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LqValue {
    pub c: TorusPoint,
    pub q: f64,
    pub value: Option<f64>,
    pub bracket_width: f64,
    pub converged: bool,
    pub divergent: bool,
}

/// `beta_mu(q) = p_c(q) / log 2`, and identically 0 at exactly `c = 1/2`.
pub fn lq_via_pressure(c: &TorusPoint, q: f64, cfg: &Config) -> Result<LqValue> {
    if c.is_exact_half() {
        return Ok(LqValue { c: *c, q, value: Some(0.0), bracket_width: 0.0, converged: true, divergent: false });
    }
    let e = pressure(c, q, cfg)?;
    Ok(LqValue {
        c: *c,
        q,
        value: (!e.divergent).then(|| e.midpoint() / LN_2),
        bracket_width: e.width() / LN_2,
        converged: e.converged,
        divergent: e.divergent,
    })
}

/// [`lq_via_pressure`] over a sorted grid of `q`.
pub fn lq_spectrum(c: &TorusPoint, q_grid: &[f64], cfg: &Config) -> Result<SpectrumCurve> {
    let samples = if c.is_exact_half() {
        q_grid
            .iter()
            .map(|&q| SpectrumSample { argument: q, value: Some(0.0), bracket_width: 0.0, flag: None })
            .collect()
    } else {
        pressure_curve(c, q_grid, cfg)?
            .samples
            .into_iter()
            .map(|(q, e)| SpectrumSample {
                argument: q,
                value: (!e.divergent).then(|| e.midpoint() / LN_2),
                bracket_width: e.width() / LN_2,
                flag: if e.divergent {
                    Some(SampleFlag::Divergent)
                } else if !e.converged {
                    Some(SampleFlag::Unconverged)
                } else {
                    None
                },
            })
            .collect()
    };
    Ok(SpectrumCurve { c: *c, kind: SpectrumKind::Lq, samples, endpoints_used: None })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn closed_form_half(t: f64) -> f64 {
        (1.0 - 2.0 * t).max(0.0) * LN_2
    }

    fn grid(lo: f64, hi: f64, h: f64) -> Vec<(f64, f64)> {
        let n = ((hi - lo) / h).round() as usize;
        (0..=n).map(|k| lo + k as f64 * h).map(|t| (t, closed_form_half(t))).collect()
    }

    fn cfg() -> Config {
        Config { depth_max: 14, ..Config::default() }
    }

    #[test]
    fn closed_form_at_half() {
        let s = grid(0.0, 2.0, 0.3);
        let r = legendre_samples(&s, -LN_2, 0.5, 1e-10, |t| Ok(closed_form_half(t))).unwrap();
        assert_abs_diff_eq!(r.value, 0.5 * LN_2, epsilon = 1e-9);
        assert_abs_diff_eq!(r.t, 0.5, epsilon = 1e-6);
    }

    #[test]
    fn anchor_at_t_zero() {
        let s = grid(0.0, 2.0, 0.25);
        let r = legendre_samples(&s, BETA_0, 1.0, 1e-10, |t| Ok(closed_form_half(t))).unwrap();
        assert_abs_diff_eq!(r.value, LN_2, epsilon = 1e-12);
    }

    #[test]
    fn constant_curve() {
        let s: Vec<(f64, f64)> = (0..=20).map(|k| (k as f64 * 0.1, 0.4)).collect();
        let r = legendre_samples(&s, -0.3, 1.0, 1e-10, |_| Ok(0.4)).unwrap();
        assert_abs_diff_eq!(r.value, 0.4, epsilon = 1e-12);
    }

    #[test]
    fn domain_and_coverage_errors() {
        let s = grid(0.0, 1.0, 0.25);
        let f = |t: f64| Ok(closed_form_half(t));
        assert!(matches!(legendre_samples(&s, -2.0, 1.0, 1e-8, f), Err(Error::DomainError(_))));
        assert!(matches!(legendre_samples(&s, -1.0, 0.0, 1e-8, f), Err(Error::DomainError(_))));
        assert!(matches!(
            legendre_samples(&s, -1.0, 0.1, 1e-8, f),
            Err(Error::InsufficientCurve { .. })
        ));
    }

    #[test]
    fn refuses_exact_half() {
        let r = birkhoff_spectrum(&TorusPoint::half(), &[-1.0], &cfg());
        assert!(matches!(r, Err(Error::DomainError(_))));
    }

    #[test]
    fn lq_examples() {
        let cfg = cfg();
        let v = lq_via_pressure(&TorusPoint::half(), -3.0, &cfg).unwrap();
        assert_eq!(v.value, Some(0.0));
        let c = TorusPoint::new(0.3).unwrap();
        assert_abs_diff_eq!(lq_via_pressure(&c, 1.0, &cfg).unwrap().value.unwrap(), 0.0, epsilon = 1e-3);
        assert_abs_diff_eq!(lq_via_pressure(&c, 0.0, &cfg).unwrap().value.unwrap(), 1.0, epsilon = 1e-4);
    }

    #[test]
    fn birkhoff_is_one_at_lebesgue_average_and_zero_past_beta() {
        let cfg = cfg();
        let c = TorusPoint::new(0.3).unwrap();
        let curve = birkhoff_spectrum(&c, &[BETA_0, 0.5], &cfg).unwrap();
        assert_abs_diff_eq!(curve.samples[0].value.unwrap(), 1.0, epsilon = 1e-3);
        assert_eq!(curve.samples[1].value, Some(0.0));
    }
}
