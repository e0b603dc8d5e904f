//! Pressure of `t * psi_c` from transfer operators on the cut-out subshifts,
//! with rigorous per-depth brackets, depth extrapolation and blow-up detection.

mod power;

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::error::{Error, Result};
use crate::potential::CylinderExtremes;
use crate::symbolic::{build_sft, full_shift, SftGraph, TorusPoint};

pub(crate) use power::log_spectral_radius;

/// Eigenvalue brackets finer than this fraction of `bracket_tol` are not pursued
/// once the power iteration stalls.
const COARSE_FRACTION: f64 = 1e-2;

/// Why a pressure sweep was declared presumed infinite.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Divergence {
    /// The lower bound exceeded the blow-up threshold.
    Threshold,
    /// The lower bound kept growing linearly in the depth.
    Growth,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PressureEstimate {
    pub c: TorusPoint,
    pub t: f64,
    pub depth: u32,
    /// Bracket for the pressure. After a depth sweep these are the extrapolated ends
    /// widened by their last change between depths, an estimate rather than a bound.
    pub lower: f64,
    pub upper: f64,
    /// Rigorous bracket for the depth-`depth` subshift pressure.
    pub sft_lower: f64,
    pub sft_upper: f64,
    pub iterations: usize,
    pub power_converged: bool,
    pub converged: bool,
    pub divergent: bool,
    pub divergence: Option<Divergence>,
    pub strongly_connected: bool,
}

impl PressureEstimate {
    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lower + self.upper)
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    /// Turns a non-converged estimate into [`Error::NonConvergence`].
    pub fn require_converged(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::NonConvergence(format!(
                "c = {}, t = {}: bracket [{}, {}] at depth {} (divergent: {})",
                self.c, self.t, self.lower, self.upper, self.depth, self.divergent
            )))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PressureCurve {
    pub c: TorusPoint,
    pub samples: Vec<(f64, PressureEstimate)>,
}

impl PressureCurve {
    pub fn ts(&self) -> Vec<f64> {
        self.samples.iter().map(|(t, _)| *t).collect()
    }

    pub fn midpoints(&self) -> Vec<f64> {
        self.samples.iter().map(|(_, e)| e.midpoint()).collect()
    }
}

/// Graph plus potential extrema on its edge cylinders for one depth.
pub(crate) struct DepthContext {
    pub graph: SftGraph,
    /// Extrema of `psi_c` on the depth-(n+1) cylinders `(s << 1) | b`.
    pub edges: CylinderExtremes,
}

impl DepthContext {
    pub fn cut_out(c: &TorusPoint, n: u32) -> Result<Self> {
        let graph = build_sft(c, n)?;
        let edges = CylinderExtremes::new(c, n + 1);
        Ok(DepthContext { graph, edges })
    }

    pub fn truncated(c: &TorusPoint, n: u32, cap: f64) -> Result<Self> {
        if !(cap > 0.0) {
            return Err(Error::InvalidArgument(format!("truncation level must be positive, got {cap}")));
        }
        let graph = full_shift(c, n)?;
        let mut edges = CylinderExtremes::new(c, n + 1);
        edges.truncate(cap);
        Ok(DepthContext { graph, edges })
    }

    pub fn edge_allowed(&self, e: usize) -> bool {
        let mask = self.graph.n_states() - 1;
        self.graph.is_allowed((e >> 1) as u64) && self.graph.is_allowed((e & mask) as u64)
    }

    /// Per-edge log weights: the lower (`upper == false`) or upper end of the
    /// bracket of `t * psi_c` on each edge cylinder.
    pub fn log_weights(&self, t: f64, upper: bool) -> Vec<f64> {
        (0..2 * self.graph.n_states())
            .map(|e| {
                if !self.edge_allowed(e) {
                    return f64::NEG_INFINITY;
                }
                let b = self.edges.bracket(e, t);
                if upper {
                    b.hi
                } else {
                    b.lo
                }
            })
            .collect()
    }

    /// Rigorous bracket for the pressure of this depth.
    pub fn bracket(&self, t: f64, cfg: &Config, vector: &mut Vec<f64>) -> RawBracket {
        let solve = |w: &[f64], v: &mut Vec<f64>| {
            log_spectral_radius(&self.graph, w, v, cfg.power_iter_tol, COARSE_FRACTION * cfg.bracket_tol, cfg.power_iter_cap)
        };
        if t == 0.0 {
            let out = solve(&self.log_weights(0.0, false), vector);
            return RawBracket {
                lower: out.log_lower,
                upper: out.log_upper,
                iterations: out.iterations,
                converged: out.converged,
            };
        }
        let lo = solve(&self.log_weights(t, false), vector);
        let mut v_hi = vector.clone();
        let hi = solve(&self.log_weights(t, true), &mut v_hi);
        RawBracket {
            lower: lo.log_lower,
            upper: hi.log_upper.max(lo.log_lower),
            iterations: lo.iterations + hi.iterations,
            converged: lo.converged && hi.converged,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct RawBracket {
    pub lower: f64,
    pub upper: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn single_depth(ctx: &DepthContext, c: &TorusPoint, t: f64, n: u32, cfg: &Config) -> PressureEstimate {
    let mut v = Vec::new();
    let raw = ctx.bracket(t, cfg, &mut v);
    let converged = raw.converged && raw.upper - raw.lower <= cfg.bracket_tol;
    let divergent = t < 0.0 && raw.lower > cfg.blowup_threshold;
    PressureEstimate {
        c: *c,
        t,
        depth: n,
        lower: raw.lower,
        upper: raw.upper,
        sft_lower: raw.lower,
        sft_upper: raw.upper,
        iterations: raw.iterations,
        power_converged: raw.converged,
        converged,
        divergent,
        divergence: divergent.then_some(Divergence::Threshold),
        strongly_connected: ctx.graph.is_strongly_connected(),
    }
}

/// Bracket for the pressure of `t * psi_c` on the depth-`n` cut-out subshift.
pub fn pressure_sft(c: &TorusPoint, t: f64, n: u32, cfg: &Config) -> Result<PressureEstimate> {
    check_t(t)?;
    let ctx = DepthContext::cut_out(c, n)?;
    Ok(single_depth(&ctx, c, t, n, cfg))
}

/// Bracket for the pressure of `t * max(psi_c, -cap)` on the full shift,
/// using depth-`n` cylinders.
pub fn pressure_truncated(
    c: &TorusPoint,
    t: f64,
    cap: f64,
    n: u32,
    cfg: &Config,
) -> Result<PressureEstimate> {
    check_t(t)?;
    let ctx = DepthContext::truncated(c, n, cap)?;
    Ok(single_depth(&ctx, c, t, n, cfg))
}

fn check_t(t: f64) -> Result<()> {
    if t.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("t must be finite, got {t}")))
    }
}

/// Aitken's delta-squared on the last three terms, used only when the
/// differences look geometric with ratio in (0, 0.95).
pub(crate) fn aitken(xs: &[f64]) -> f64 {
    let k = xs.len();
    if k < 3 {
        return xs[k - 1];
    }
    let (x0, x1, x2) = (xs[k - 3], xs[k - 2], xs[k - 1]);
    let (d1, d2) = (x1 - x0, x2 - x1);
    if !(d1.is_finite() && d2.is_finite()) || d1 == 0.0 || d2 == 0.0 {
        return x2;
    }
    let r = d2 / d1;
    if r > 0.0 && r < 0.95 {
        x2 + d2 * r / (1.0 - r)
    } else {
        x2
    }
}

/// Depth sweep for one value of `t`.
struct Sweep {
    t: f64,
    lows: Vec<f64>,
    highs: Vec<f64>,
    ext: Option<(f64, f64)>,
    vector: Vec<f64>,
    result: Option<PressureEstimate>,
    done: bool,
}

impl Sweep {
    fn new(t: f64) -> Self {
        Sweep { t, lows: Vec::new(), highs: Vec::new(), ext: None, vector: Vec::new(), result: None, done: false }
    }

    fn step(&mut self, ctx: &DepthContext, c: &TorusPoint, n: u32, cfg: &Config) {
        if self.vector.len() * 2 == ctx.graph.n_states() {
            self.vector = lift(&self.vector);
        }
        let raw = ctx.bracket(self.t, cfg, &mut self.vector);
        self.lows.push(raw.lower);
        self.highs.push(raw.upper);
        let (a, b) = (aitken(&self.lows), aitken(&self.highs));
        let (lower, upper) = (a.min(b), a.max(b));
        // Last move of the extrapolants; widens the reported bracket.
        let drift = match self.ext {
            Some((pl, pu)) => (lower - pl).abs().max((upper - pu).abs()),
            None => f64::INFINITY,
        };
        self.ext = Some((lower, upper));
        let converged = drift <= cfg.bracket_tol && upper - lower <= cfg.bracket_tol && raw.converged;
        let divergence = self.divergence(raw.lower, cfg);
        let divergent = divergence.is_some();
        let (lower, upper) = if divergent {
            (raw.lower, raw.upper)
        } else if drift.is_finite() {
            (lower - drift, upper + drift)
        } else {
            (raw.lower, raw.upper)
        };
        self.result = Some(PressureEstimate {
            c: *c,
            t: self.t,
            depth: n,
            lower,
            upper,
            sft_lower: raw.lower,
            sft_upper: raw.upper,
            iterations: raw.iterations,
            power_converged: raw.converged,
            converged: converged && !divergent,
            divergent,
            divergence,
            strongly_connected: ctx.graph.is_strongly_connected(),
        });
        self.done = converged || divergent || n >= cfg.depth_max;
    }

    fn divergence(&self, lower: f64, cfg: &Config) -> Option<Divergence> {
        if self.t >= 0.0 {
            return None;
        }
        if lower > cfg.blowup_threshold {
            return Some(Divergence::Threshold);
        }
        let w = cfg.growth_window;
        if self.lows.len() > w {
            let step = cfg.growth_rate * self.t.abs() * LN_2;
            let tail = &self.lows[self.lows.len() - w - 1..];
            if tail.windows(2).all(|p| p[1] - p[0] >= step) {
                return Some(Divergence::Growth);
            }
        }
        None
    }
}

fn lift(v: &[f64]) -> Vec<f64> {
    (0..2 * v.len()).map(|s| v[s >> 1]).collect()
}

/// Pressure at each `t`, sweeping depths from `depth_min` until the extrapolated
/// bracket stabilizes within `bracket_tol`, blow-up is witnessed for `t < 0`,
/// or `depth_max` is reached. One graph per depth serves every `t`.
pub fn pressure_curve(c: &TorusPoint, t_grid: &[f64], cfg: &Config) -> Result<PressureCurve> {
    cfg.validate()?;
    for &t in t_grid {
        check_t(t)?;
    }
    if t_grid.windows(2).any(|p| p[1] <= p[0]) {
        return Err(Error::InvalidArgument("t grid must be strictly increasing".into()));
    }
    let mut sweeps: Vec<Sweep> = t_grid.iter().map(|&t| Sweep::new(t)).collect();
    let mut n = cfg.depth_min;
    // Tiny depths can leave no cycle at all; those are skipped, not fatal.
    let mut first_error = None;
    while sweeps.iter().any(|s| !s.done) && n <= cfg.depth_max {
        match DepthContext::cut_out(c, n) {
            Ok(ctx) => {
                for s in sweeps.iter_mut().filter(|s| !s.done) {
                    s.step(&ctx, c, n, cfg);
                }
            }
            Err(e @ Error::DegenerateGraph { .. }) => {
                first_error.get_or_insert(e);
            }
            Err(e) => return Err(e),
        }
        n += 1;
    }
    let mut samples = Vec::with_capacity(sweeps.len());
    for s in sweeps {
        match s.result {
            Some(r) => samples.push((s.t, r)),
            None => return Err(first_error.unwrap_or(Error::DegenerateGraph { depth: cfg.depth_max })),
        }
    }
    Ok(PressureCurve { c: *c, samples })
}

/// Depth-swept pressure at a single `t`.
pub fn pressure(c: &TorusPoint, t: f64, cfg: &Config) -> Result<PressureEstimate> {
    let mut curve = pressure_curve(c, &[t], cfg)?;
    Ok(curve.samples.pop().expect("one sample").1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn tp(x: f64) -> TorusPoint {
        TorusPoint::new(x).unwrap()
    }

    fn cfg() -> Config {
        Config { depth_min: 6, depth_max: 14, bracket_tol: 1e-3, workers: 1, ..Config::default() }
    }

    #[test]
    fn golden_mean_entropy() {
        let e = pressure_sft(&TorusPoint::dyadic(7, 3).unwrap(), 0.0, 2, &cfg()).unwrap();
        let phi = ((1.0 + 5f64.sqrt()) / 2.0).ln();
        assert_abs_diff_eq!(e.lower, phi, epsilon = 1e-9);
        assert_abs_diff_eq!(e.upper, phi, epsilon = 1e-9);
    }

    #[test]
    fn single_loop_has_zero_pressure() {
        let e = pressure_sft(&TorusPoint::dyadic(3, 2).unwrap(), 0.0, 1, &cfg()).unwrap();
        assert_abs_diff_eq!(e.lower, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(e.upper, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn cut_out_entropy_is_below_log2() {
        for c in [0.0, 0.3, 0.5, 0.77] {
            let e = pressure_sft(&tp(c), 0.0, 8, &cfg()).unwrap();
            assert!(e.lower > 0.0 && e.upper < LN_2, "c = {c}: {e:?}");
        }
    }

    #[test]
    fn truncated_full_shift_entropy() {
        let e = pressure_truncated(&tp(0.3), 0.0, 1.0, 8, &cfg()).unwrap();
        assert_abs_diff_eq!(e.lower, LN_2, epsilon = 1e-12);
        assert_abs_diff_eq!(e.upper, LN_2, epsilon = 1e-12);
    }

    #[test]
    fn truncated_equilibrium_bracket() {
        let e = pressure_truncated(&TorusPoint::zero(), 1.0, 50.0, 14, &cfg()).unwrap();
        assert!(e.lower <= 0.0 && 0.0 <= e.upper, "{e:?}");
        assert!(e.width() < 0.05);
    }

    #[test]
    fn truncated_negative_t_is_above_entropy() {
        let e = pressure_truncated(&TorusPoint::zero(), -1.0, 5.0, 12, &cfg()).unwrap();
        assert!(e.lower.is_finite() && e.lower >= LN_2);
    }

    #[test]
    fn depth_bracket_contains_closed_form_at_half() {
        let c = TorusPoint::half();
        for t in [0.0, 0.25, 1.0, 2.0] {
            let e = pressure_sft(&c, t, 12, &cfg()).unwrap();
            let exact = (1.0 - 2.0 * t).max(0.0) * LN_2;
            assert!(e.lower <= exact + 1e-9, "t = {t}: {e:?}");
        }
    }

    #[test]
    fn aitken_accelerates_geometric_sequences() {
        let xs: Vec<f64> = (0..6).map(|k| 1.0 - 0.5f64.powi(k)).collect();
        assert_abs_diff_eq!(aitken(&xs), 1.0, epsilon = 1e-15);
        assert_eq!(aitken(&[1.0, 2.0]), 2.0);
        assert_eq!(aitken(&[0.0, 1.0, 0.0]), 0.0);
    }

    #[test]
    fn rejects_unsorted_grid() {
        assert!(pressure_curve(&tp(0.3), &[1.0, 0.5], &cfg()).is_err());
        assert!(pressure(&tp(0.3), f64::NAN, &cfg()).is_err());
    }

    #[test]
    fn require_converged_reports_flags() {
        let mut e = pressure_sft(&tp(0.3), 0.0, 8, &cfg()).unwrap();
        e.converged = false;
        assert!(matches!(e.require_converged(), Err(Error::NonConvergence(_))));
    }
}
