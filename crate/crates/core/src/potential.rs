//! The singular potential `psi_c(x) = 2 log|sin(pi (x - c))|`, its truncations,
//! the associated g-function, Birkhoff sums and per-cylinder extrema.
//!
//! `f64::NEG_INFINITY` is the pole sentinel; it is never produced for `x != c`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::symbolic::{CylinderWord, TorusPoint};

/// Value of the potential, in `[-inf, 0]`.
pub type PotentialValue = f64;

/// `psi_0` at a signed offset `d` in `[-1/2, 1/2]`.
///
/// Near the antipode the value is computed as `log(1 - sin^2(pi e))` with
/// `e = 1/2 - |d|` so that it stays accurate as it approaches 0.
pub fn psi_offset(d: f64) -> PotentialValue {
    let a = d.abs();
    if a == 0.0 {
        return f64::NEG_INFINITY;
    }
    if a <= 0.25 {
        2.0 * (PI * a).sin().ln()
    } else {
        let s = (PI * (0.5 - a)).sin();
        (-s * s).ln_1p()
    }
}

/// `psi_0` at a position `u` in `[0, 1)` measured from the pole.
pub fn psi_at_unit(u: f64) -> PotentialValue {
    psi_offset(if u <= 0.5 { u } else { u - 1.0 })
}

pub fn psi(c: &TorusPoint, x: &TorusPoint) -> PotentialValue {
    psi_offset(x.signed_offset(c))
}

/// `max(psi_c(x), -cap)`.
pub fn psi_truncated(c: &TorusPoint, cap: f64, x: &TorusPoint) -> Result<f64> {
    if !(cap > 0.0) {
        return Err(Error::InvalidArgument(format!("truncation level must be positive, got {cap}")));
    }
    Ok(psi(c, x).max(-cap))
}

/// `sin^2(pi (x - c))`, equal to `exp(psi_c(x))`.
pub fn g(c: &TorusPoint, x: &TorusPoint) -> f64 {
    let s = (PI * x.signed_offset(c)).sin();
    s * s
}

/// `sum_{i < n} psi_c(2^i x mod 1)`.
pub fn birkhoff_sum(c: &TorusPoint, x: &TorusPoint, n: u32) -> Result<PotentialValue> {
    if n == 0 {
        return Err(Error::InvalidArgument("birkhoff_sum needs n >= 1".into()));
    }
    let mut y = *x;
    let mut total = 0.0;
    for _ in 0..n {
        let v = psi(c, &y);
        if v == f64::NEG_INFINITY {
            return Ok(f64::NEG_INFINITY);
        }
        total += v;
        y = y.double();
    }
    Ok(total)
}

/// Infimum and supremum of a (scaled) potential over a cylinder.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightBracket {
    pub lo: f64,
    pub hi: f64,
}

impl WeightBracket {
    /// The bracket of `t * v` for `v` in `[min, max]`.
    pub fn scaled(min: f64, max: f64, t: f64) -> WeightBracket {
        if t == 0.0 {
            WeightBracket { lo: 0.0, hi: 0.0 }
        } else if t > 0.0 {
            WeightBracket { lo: t * min, hi: t * max }
        } else {
            WeightBracket { lo: t * max, hi: t * min }
        }
    }
}

/// Extrema of `psi_0` over the arc `[ua, ub]` of positions measured from the
/// pole, where `ua, ub` are in `[0, 1)`. `None` if the closed arc contains the pole.
pub fn psi_extremes_on_arc(ua: f64, ub: f64) -> Option<(f64, f64)> {
    if ua == 0.0 || ub <= ua {
        return None;
    }
    let (pa, pb) = (psi_at_unit(ua), psi_at_unit(ub));
    let max = if ua <= 0.5 && 0.5 <= ub { 0.0 } else { pa.max(pb) };
    Some((pa.min(pb), max))
}

fn unit_position(c: &TorusPoint, x: &TorusPoint) -> f64 {
    let d = x.signed_offset(c);
    if d < 0.0 {
        d + 1.0
    } else {
        d
    }
}

fn cylinder_endpoints(w: &CylinderWord) -> (TorusPoint, TorusPoint) {
    let left = TorusPoint::dyadic(w.index, w.depth).expect("valid cylinder");
    let right = TorusPoint::dyadic((w.index + 1) % (1u64 << w.depth), w.depth).expect("valid cylinder");
    (left, right)
}

/// Extrema of `psi_c` over the closed interval of `w`, with `-inf` as the
/// minimum when the interval contains `c`.
pub fn psi_extremes_on_cylinder(c: &TorusPoint, w: &CylinderWord) -> (f64, f64) {
    let (left, right) = cylinder_endpoints(w);
    let (ua, ub) = (unit_position(c, &left), unit_position(c, &right));
    psi_extremes_on_arc(ua, ub).unwrap_or_else(|| {
        // Pole inside: the supremum is still attained on the arc.
        let antipode_inside = {
            let half = TorusPoint::half();
            let anti = c.sub(&half);
            let (l, r) = w.interval();
            let a = anti.value();
            l <= a && a <= r
        };
        let max = if antipode_inside { 0.0 } else { psi_at_unit(ua).max(psi_at_unit(ub)) };
        (f64::NEG_INFINITY, max)
    })
}

/// Exact inf/sup of `t * psi_c` over the closed interval of `w`.
pub fn cylinder_weight_bracket(c: &TorusPoint, w: &CylinderWord, t: f64) -> Result<WeightBracket> {
    let (min, max) = psi_extremes_on_cylinder(c, w);
    if min == f64::NEG_INFINITY {
        let (left, right) = w.interval();
        return Err(Error::SingularCylinder { left, right });
    }
    Ok(WeightBracket::scaled(min, max, t))
}

/// Inf/sup of `t * max(psi_c, -cap)` over the closed interval of `w`; finite for every cylinder.
pub fn truncated_weight_bracket(
    c: &TorusPoint,
    w: &CylinderWord,
    cap: f64,
    t: f64,
) -> Result<WeightBracket> {
    if !(cap > 0.0) {
        return Err(Error::InvalidArgument(format!("truncation level must be positive, got {cap}")));
    }
    let (min, max) = psi_extremes_on_cylinder(c, w);
    Ok(WeightBracket::scaled(min.max(-cap), max.max(-cap), t))
}

/// Positions of the grid points `k / 2^depth`, `k = 0..=2^depth`, measured from the pole.
pub(crate) fn unit_grid(c: &TorusPoint, depth: u32) -> Vec<f64> {
    let size = 1u64 << depth;
    (0..=size)
        .map(|k| {
            let x = TorusPoint::dyadic(k % size, depth).expect("grid point");
            unit_position(c, &x)
        })
        .collect()
}

/// Extrema of `psi_c` over every depth-`depth` cylinder, indexed by word.
///
/// Cylinders whose closed interval contains `c` get `-inf` as their minimum.
#[derive(Clone, Debug)]
pub struct CylinderExtremes {
    pub depth: u32,
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl CylinderExtremes {
    pub fn new(c: &TorusPoint, depth: u32) -> CylinderExtremes {
        let u = unit_grid(c, depth);
        let p: Vec<f64> = u.iter().map(|&x| psi_at_unit(x)).collect();
        let size = 1usize << depth;
        let mut min = Vec::with_capacity(size);
        let mut max = Vec::with_capacity(size);
        for k in 0..size {
            let (ua, ub) = (u[k], u[k + 1]);
            let (pa, pb) = (p[k], p[k + 1]);
            if ua == 0.0 || ub <= ua {
                let w = CylinderWord { depth, index: k as u64 };
                let (lo, hi) = psi_extremes_on_cylinder(c, &w);
                min.push(lo);
                max.push(hi);
            } else {
                min.push(pa.min(pb));
                max.push(if ua <= 0.5 && 0.5 <= ub { 0.0 } else { pa.max(pb) });
            }
        }
        CylinderExtremes { depth, min, max }
    }

    /// Applies `max(., -cap)` to both ends.
    pub fn truncate(&mut self, cap: f64) {
        for v in self.min.iter_mut().chain(self.max.iter_mut()) {
            *v = v.max(-cap);
        }
    }

    pub fn bracket(&self, index: usize, t: f64) -> WeightBracket {
        WeightBracket::scaled(self.min[index], self.max[index], t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::LN_2;

    fn tp(x: f64) -> TorusPoint {
        TorusPoint::new(x).unwrap()
    }

    #[test]
    fn psi_examples() {
        let zero = TorusPoint::zero();
        assert_eq!(psi(&zero, &TorusPoint::half()), 0.0);
        assert_abs_diff_eq!(psi(&zero, &tp(0.25)), -LN_2, epsilon = 1e-15);
        assert_eq!(psi(&tp(0.3), &tp(0.3)), f64::NEG_INFINITY);
    }

    #[test]
    fn truncated_examples() {
        let zero = TorusPoint::zero();
        assert_abs_diff_eq!(psi_truncated(&zero, 1.0, &tp(0.25)).unwrap(), -LN_2, epsilon = 1e-15);
        assert_eq!(psi_truncated(&zero, 0.5, &tp(0.25)).unwrap(), -0.5);
        assert_eq!(psi_truncated(&tp(0.3), 10.0, &tp(0.3)).unwrap(), -10.0);
        assert!(psi_truncated(&zero, 0.0, &tp(0.25)).is_err());
    }

    #[test]
    fn g_examples() {
        let zero = TorusPoint::zero();
        assert_eq!(g(&zero, &TorusPoint::half()), 1.0);
        assert_eq!(g(&zero, &zero), 0.0);
        assert_abs_diff_eq!(g(&zero, &tp(0.25)), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn birkhoff_examples() {
        let zero = TorusPoint::zero();
        let third = tp(1.0 / 3.0);
        assert_abs_diff_eq!(
            birkhoff_sum(&zero, &third, 2).unwrap(),
            2.0 * (0.75f64).ln(),
            epsilon = 1e-12
        );
        assert_eq!(birkhoff_sum(&zero, &zero, 5).unwrap(), f64::NEG_INFINITY);
        assert_eq!(birkhoff_sum(&TorusPoint::half(), &zero, 3).unwrap(), 0.0);
        assert!(birkhoff_sum(&zero, &zero, 0).is_err());
    }

    #[test]
    fn bracket_examples() {
        let zero = TorusPoint::zero();
        let w = CylinderWord::new(2, 1).unwrap();
        let b = cylinder_weight_bracket(&zero, &w, 1.0).unwrap();
        assert_abs_diff_eq!(b.lo, 2.0 * (PI * 0.25).sin().ln(), epsilon = 1e-15);
        assert_eq!(b.hi, 0.0);
        assert_eq!(cylinder_weight_bracket(&zero, &w, 0.0).unwrap(), WeightBracket { lo: 0.0, hi: 0.0 });
        let w0 = CylinderWord::new(2, 0).unwrap();
        assert_eq!(
            cylinder_weight_bracket(&zero, &w0, 1.0).unwrap_err(),
            Error::SingularCylinder { left: 0.0, right: 0.25 }
        );
        // Right endpoint equal to c is also singular.
        let w3 = CylinderWord::new(2, 3).unwrap();
        assert!(cylinder_weight_bracket(&zero, &w3, 1.0).is_err());
        let b = truncated_weight_bracket(&zero, &w0, 5.0, 1.0).unwrap();
        assert_eq!(b.lo, -5.0);
        assert_abs_diff_eq!(b.hi, -LN_2, epsilon = 1e-15);
    }

    #[test]
    fn negative_t_swaps_bracket() {
        let c = tp(0.3);
        let w = CylinderWord::new(4, 9).unwrap();
        let p = cylinder_weight_bracket(&c, &w, 2.0).unwrap();
        let m = cylinder_weight_bracket(&c, &w, -2.0).unwrap();
        assert_eq!(m.lo, -p.hi);
        assert_eq!(m.hi, -p.lo);
    }

    #[test]
    fn table_matches_single_cylinder_brackets() {
        for c in [TorusPoint::zero(), TorusPoint::half(), tp(0.3), tp(0.123456), TorusPoint::dyadic(7, 3).unwrap()] {
            for depth in 1..8 {
                let table = CylinderExtremes::new(&c, depth);
                for k in 0..1u64 << depth {
                    let w = CylinderWord::new(depth, k).unwrap();
                    let (min, max) = psi_extremes_on_cylinder(&c, &w);
                    assert_eq!(table.min[k as usize], min, "c={c} w={w}");
                    assert_eq!(table.max[k as usize], max, "c={c} w={w}");
                }
            }
        }
    }

    proptest! {
        #[test]
        fn kernel_identity(x in 0.0f64..1.0, c in 0.0f64..1.0) {
            let c = tp(c);
            let a = g(&c, &tp(x / 2.0));
            let b = g(&c, &tp(x / 2.0 + 0.5));
            prop_assert!((a + b - 1.0).abs() < 1e-12);
        }

        #[test]
        fn rotation_identity_on_lattice(x in 0u64..(1 << 40), c in 0u64..(1 << 40)) {
            let x = TorusPoint::new(x as f64 * (-40f64).exp2()).unwrap();
            let c = TorusPoint::new(c as f64 * (-40f64).exp2()).unwrap();
            let shifted = TorusPoint::new(x.value() - c.value()).unwrap();
            prop_assert_eq!(psi(&c, &x).to_bits(), psi(&TorusPoint::zero(), &shifted).to_bits());
        }

        #[test]
        fn exp_psi_is_g(x in 0.0f64..1.0, c in 0.0f64..1.0) {
            let (c, x) = (tp(c), tp(x));
            let p = psi(&c, &x);
            prop_assume!(p.is_finite());
            prop_assert!((p.exp() - g(&c, &x)).abs() < 1e-12);
            prop_assert!(p <= 0.0);
        }

        #[test]
        fn truncation_range(x in 0.0f64..1.0, c in 0.0f64..1.0, cap in 0.01f64..100.0) {
            let v = psi_truncated(&tp(c), cap, &tp(x)).unwrap();
            prop_assert!((-cap..=0.0).contains(&v));
            let coarser = psi_truncated(&tp(c), cap * 2.0, &tp(x)).unwrap();
            prop_assert!(coarser <= v);
        }

        #[test]
        fn birkhoff_cocycle(x in 0u64..(1 << 30), c in 0.0f64..1.0, m in 1u32..8, n in 1u32..8) {
            let c = tp(c);
            let x = TorusPoint::dyadic(x, 30).unwrap();
            let mut y = x;
            for _ in 0..m { y = y.double(); }
            let whole = birkhoff_sum(&c, &x, m + n).unwrap();
            let split = birkhoff_sum(&c, &x, m).unwrap() + birkhoff_sum(&c, &y, n).unwrap();
            prop_assume!(whole.is_finite());
            prop_assert!((whole - split).abs() <= 1e-9 * (1.0 + whole.abs()));
        }

        #[test]
        fn bracket_encloses_samples(c in 0.0f64..1.0, n in 2u32..10, k in 0u64..512, s in 0.0f64..1.0) {
            let c = tp(c);
            let w = CylinderWord::new(n, k % (1 << n)).unwrap();
            if let Ok(b) = cylinder_weight_bracket(&c, &w, 1.0) {
                let (l, r) = w.interval();
                let x = tp(l + s * (r - l));
                let v = psi(&c, &x);
                prop_assert!(b.lo <= b.hi && b.hi <= 0.0);
                prop_assert!(b.lo - 1e-12 <= v && v <= b.hi + 1e-12);
            }
        }
    }
}
