use std::f64::consts::LN_2;

use proptest::prelude::*;
use thermoscope::transfer::{pressure, pressure_curve, pressure_sft, pressure_truncated};
use thermoscope::{Config, Error, TorusPoint};

fn cfg() -> Config {
    Config { depth_max: 12, workers: 1, ..Config::default() }
}

/// A stalled power iteration may stop once its bracket is narrower than
/// `bracket_tol / 100`, so per-depth bounds are only that sharp.
fn depth_tol() -> f64 {
    cfg().bracket_tol * 1e-2
}

fn tp(x: f64) -> TorusPoint {
    TorusPoint::new(x).unwrap()
}

/// `pressure_sft`, treating depths without cycles as absent.
fn sft(c: &TorusPoint, t: f64, n: u32) -> Option<(f64, f64)> {
    match pressure_sft(c, t, n, &cfg()) {
        Ok(e) => Some((e.sft_lower, e.sft_upper)),
        Err(Error::DegenerateGraph { .. }) => None,
        Err(e) => panic!("{e}"),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn brackets_are_ordered_and_shrink(c in 0.0f64..1.0, t in -1.0f64..3.0, n in 5u32..10) {
        let c = tp(c);
        if let (Some(a), Some(b)) = (sft(&c, t, n), sft(&c, t, n + 2)) {
            prop_assert!(a.0 <= a.1 && b.0 <= b.1);
            prop_assert!(b.1 - b.0 <= a.1 - a.0 + 2.0 * depth_tol(), "{a:?} then {b:?}");
        }
    }

    #[test]
    fn lower_bound_grows_with_depth(c in 0.0f64..1.0, t in -1.0f64..3.0, n in 4u32..10) {
        let c = tp(c);
        if let (Some(a), Some(b)) = (sft(&c, t, n), sft(&c, t, n + 1)) {
            prop_assert!(b.0 >= a.0 - depth_tol(), "{a:?} then {b:?}");
        }
    }

    #[test]
    fn cut_out_pressure_is_dominated_at_half(t in 0.0f64..3.0, n in 4u32..12) {
        let (lo, _) = sft(&TorusPoint::half(), t, n).unwrap();
        let exact = (1.0 - 2.0 * t).max(0.0) * LN_2;
        prop_assert!(lo <= exact + 1e-8, "{lo} > {exact}");
    }

    #[test]
    fn curves_are_monotone_convex_and_lipschitz(c in 0.0f64..1.0) {
        let ts: Vec<f64> = (0..9).map(|k| k as f64 * 0.5).collect();
        let curve = pressure_curve(&tp(c), &ts, &cfg()).unwrap();
        let tol = 5e-3;
        let p = curve.midpoints();
        for w in p.windows(2) {
            prop_assert!(w[1] <= w[0] + tol);
            prop_assert!((w[1] - w[0]).abs() <= 2.0 * LN_2 * 0.5 + tol);
        }
        for w in p.windows(3) {
            prop_assert!(w[0] - 2.0 * w[1] + w[2] >= -tol);
        }
        for (t, e) in &curve.samples {
            prop_assert!(e.upper >= LN_2 * (1.0 - 2.0 * t) - tol);
        }
    }
}

#[test]
fn truncation_route_agrees_with_cut_out_route() {
    let cfg = Config::default();
    for (c, t) in [(0.3, -0.25), (0.6, -0.25)] {
        let c = tp(c);
        let cut = pressure(&c, t, &cfg).unwrap();
        if !cut.converged {
            continue;
        }
        let mut prev = f64::NEG_INFINITY;
        for cap in [5.0, 10.0, 20.0, 40.0] {
            let m = pressure_truncated(&c, t, cap, 16, &cfg).unwrap().midpoint();
            assert!(m >= prev - 1e-9);
            prev = m;
        }
        assert!((prev - cut.midpoint()).abs() <= cut.width() + 0.05, "{prev} vs {cut:?}");
    }
}
