//! The equilibrium measure `mu_c` as the Riesz product
//! `prod_m (1 - cos(2 pi (2^m x - c)))`: cell masses, L^q partition sums and the
//! generalized Thue-Morse sequence whose diffraction it is.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;

use crate::config::Config;
use crate::error::{Error, Result};
use crate::symbolic::{TorusPoint, MAX_DEPTH};

/// Largest truncation accepted anywhere.
pub const MAX_FACTORS: u32 = 40;

/// `1 - cos(2 pi (x - c))`, written as `2 sin^2` to keep precision near zeros.
#[inline]
fn factor(x: f64, c: f64) -> f64 {
    let s = (PI * (x - c)).sin();
    2.0 * s * s
}

/// The partial Riesz product with `m` factors at `x`.
pub fn partial_density(c: &TorusPoint, m: u32, x: &TorusPoint) -> f64 {
    let mut y = *x;
    let mut out = 1.0;
    for _ in 0..m {
        out *= factor(y.value(), c.value());
        y = y.double();
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MeasureTable {
    pub c: TorusPoint,
    pub depth: u32,
    pub truncation: u32,
    pub masses: Vec<f64>,
}

impl MeasureTable {
    pub fn total(&self) -> f64 {
        self.masses.iter().sum()
    }

    /// Left endpoint of cell `k`.
    pub fn left_endpoint(&self, k: usize) -> f64 {
        k as f64 / (1u64 << self.depth) as f64
    }

    /// Masses of the parent cells, one level up.
    pub fn coarsen(&self) -> Option<MeasureTable> {
        if self.depth == 0 {
            return None;
        }
        Some(MeasureTable {
            c: self.c,
            depth: self.depth - 1,
            truncation: self.truncation,
            masses: self.masses.chunks(2).map(|p| p[0] + p[1]).collect(),
        })
    }
}

/// Smallest admissible quadrature resolution per cell: a grid step of at
/// most `2^-(m+2)`, and at least one node per cell.
pub fn default_quad_points(n: u32, m: u32) -> u64 {
    1u64 << (m + 2).saturating_sub(n)
}

/// The partial density with `m` factors on the midpoints of `2^levels`
/// uniform cells, `levels >= m`. Built from the inside out using
/// `d_m(x) = f(x) d_{m-1}(2x)`: doubling a midpoint of the fine grid lands on
/// a midpoint of the grid with half as many cells.
fn density_grid(c: f64, m: u32, levels: u32) -> Vec<f64> {
    let size = 1usize << levels;
    let mut grid = vec![1.0; size];
    let mut len = size >> m;
    while len < size {
        let (known, rest) = grid.split_at_mut(len);
        rest[..len].copy_from_slice(known);
        len *= 2;
        let inv = 1.0 / len as f64;
        grid[..len]
            .par_chunks_mut(1 << 12)
            .enumerate()
            .for_each(|(chunk, vals)| {
                let base = chunk << 12;
                for (i, v) in vals.iter_mut().enumerate() {
                    *v *= factor((base + i) as f64 * inv + 0.5 * inv, c);
                }
            });
    }
    grid
}

fn check_budget(nodes: u64, cfg: &Config) -> Result<()> {
    if nodes > cfg.quadrature_budget {
        return Err(Error::BudgetExceeded(format!(
            "{nodes} quadrature nodes exceed the budget of {}",
            cfg.quadrature_budget
        )));
    }
    Ok(())
}

/// Cell masses of the `m`-factor density at depth `n` by composite midpoint
/// quadrature with `quad_points` nodes per cell (a power of two).
pub fn cylinder_masses(c: &TorusPoint, n: u32, m: u32, quad_points: u64, cfg: &Config) -> Result<MeasureTable> {
    if n > MAX_DEPTH || m > MAX_FACTORS {
        return Err(Error::InvalidArgument(format!(
            "depth {n} or truncation {m} too large (limits {MAX_DEPTH}, {MAX_FACTORS})"
        )));
    }
    if !quad_points.is_power_of_two() {
        return Err(Error::InvalidArgument(format!("quad_points must be a power of two, got {quad_points}")));
    }
    let per_cell = quad_points.trailing_zeros();
    if n + per_cell < m + 2 {
        return Err(Error::InvalidArgument(format!(
            "{quad_points} points per cell is too coarse for {m} factors at depth {n}"
        )));
    }
    if n + per_cell > 62 {
        return Err(Error::BudgetExceeded(format!("2^{} quadrature nodes", n + per_cell)));
    }
    check_budget(1u64 << (n + per_cell), cfg)?;
    let levels = n + per_cell;
    let grid = density_grid(c.value(), m, levels);
    let h = 1.0 / (1u64 << levels) as f64;
    let masses = grid
        .par_chunks(quad_points as usize)
        .map(|cell| cell.iter().sum::<f64>() * h)
        .collect();
    Ok(MeasureTable { c: *c, depth: n, truncation: m, masses })
}

/// Masses at depth `n` with the configured truncation `M = n + offset` and the
/// coarsest admissible quadrature.
pub fn masses_at_depth(c: &TorusPoint, n: u32, cfg: &Config) -> Result<MeasureTable> {
    let m = n + cfg.riesz_truncation_offset;
    cylinder_masses(c, n, m, default_quad_points(n, m), cfg)
}

/// `sum_k mass_k^q` over cells of positive mass.
pub fn partition_sum(table: &MeasureTable, q: f64, cfg: &Config) -> Result<f64> {
    if !q.is_finite() {
        return Err(Error::InvalidArgument(format!("q must be finite, got {q}")));
    }
    if q < 0.0 {
        if let Some((index, &mass)) = table.masses.iter().enumerate().find(|(_, &m)| m < cfg.mass_floor) {
            return Err(Error::MassFloorViolation { index, mass, floor: cfg.mass_floor });
        }
    }
    Ok(table.masses.iter().filter(|&&m| m > 0.0).map(|&m| if q == 0.0 { 1.0 } else { m.powf(q) }).sum())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LqFit {
    pub q: f64,
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual of the fit.
    pub residual: f64,
    /// `(n, log S_n(q))` for every depth in the range.
    pub points: Vec<(u32, f64)>,
}

/// Least-squares fit of `log y` against `n log 2`.
pub fn fit_slope(q: f64, points: Vec<(u32, f64)>) -> LqFit {
    let xs: Vec<f64> = points.iter().map(|&(n, _)| n as f64 * std::f64::consts::LN_2).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = points.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = xs.iter().zip(&points).map(|(x, p)| (x - mx) * (p.1 - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (xs.iter().zip(&points).map(|(x, p)| (p.1 - intercept - slope * x).powi(2)).sum::<f64>() / k).sqrt();
    LqFit { q, slope, intercept, residual, points }
}

/// Slope of `log S_n(q)` in `n log 2` over `n_min..=n_max`, with `M = n + offset`.
pub fn lq_direct(c: &TorusPoint, q: f64, n_min: u32, n_max: u32, cfg: &Config) -> Result<LqFit> {
    if n_max < n_min + 3 {
        return Err(Error::InvalidArgument(format!(
            "depth range {n_min}..={n_max} must contain at least 4 depths"
        )));
    }
    let mut points = Vec::new();
    for n in n_min..=n_max {
        let table = masses_at_depth(c, n, cfg)?;
        points.push((n, partition_sum(&table, q, cfg)?.ln()));
    }
    Ok(fit_slope(q, points))
}

/// The first `count` terms of `exp(2 pi i (c + 1/2) s_2(k))`, `s_2` the binary digit sum.
pub fn tm_sequence(c: &TorusPoint, count: usize) -> Vec<Complex64> {
    let a = c.value() + 0.5;
    (0..count as u64).map(|k| turn(a * k.count_ones() as f64)).collect()
}

/// `exp(2 pi i x)`, reduced mod 1 first.
fn turn(x: f64) -> Complex64 {
    let f = x - x.floor();
    Complex64::from_polar(1.0, 2.0 * PI * f)
}

/// Empirical autocorrelation `(1/N) sum_{k<N} t_{k+lag} conj(t_k)` for `lag < lags`.
///
/// Each product only depends on the digit-sum difference, so the sum is a
/// histogram of those differences; `gamma(0)` is exactly 1.
pub fn autocorrelation(c: &TorusPoint, lags: usize, len: usize) -> Vec<Complex64> {
    let a = c.value() + 0.5;
    const SPAN: usize = 130;
    (0..lags)
        .into_par_iter()
        .map(|lag| {
            let mut hist = vec![0u64; SPAN];
            for k in 0..len as u64 {
                let d = (k + lag as u64).count_ones() as i64 - k.count_ones() as i64;
                hist[(d + 64) as usize] += 1;
            }
            let mut acc = Complex64::new(0.0, 0.0);
            for (i, &h) in hist.iter().enumerate() {
                if h > 0 {
                    acc += turn(a * (i as f64 - 64.0)) * h as f64;
                }
            }
            acc / len as f64
        })
        .collect()
}

/// Fourier coefficients `int exp(2 pi i k x) d_M(x) dx` of the partial
/// density for `k < lags`, by midpoint quadrature.
pub fn density_coefficients(c: &TorusPoint, m: u32, lags: usize, cfg: &Config) -> Result<Vec<Complex64>> {
    if m > MAX_FACTORS {
        return Err(Error::InvalidArgument(format!("truncation {m} exceeds {MAX_FACTORS}")));
    }
    // The integrand has degree below 2^M + lags, so this grid integrates it exactly.
    let need = (1u64 << m) + lags as u64;
    let levels = (64 - need.leading_zeros()).max(m + 1);
    check_budget(1u64 << levels, cfg)?;
    let grid = density_grid(c.value(), m, levels);
    let size = grid.len();
    let h = 1.0 / size as f64;
    Ok((0..lags)
        .into_par_iter()
        .map(|k| {
            let mut acc = Complex64::new(0.0, 0.0);
            for (j, &d) in grid.iter().enumerate() {
                // Exact phase index (k * j) mod size keeps the angle small.
                let idx = ((k as u128 * (2 * j as u128 + 1)) % (2 * size as u128)) as f64;
                acc += turn(idx / (2 * size) as f64) * d;
            }
            acc * h
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AutocorrelationReport {
    pub c: TorusPoint,
    pub length: usize,
    pub truncation: u32,
    pub empirical: Vec<Complex64>,
    pub coefficients: Vec<Complex64>,
    pub max_discrepancy: f64,
}

/// Compares the empirical autocorrelation of the sequence with the Fourier
/// coefficients of the `M`-factor density.
pub fn autocorrelation_check(c: &TorusPoint, lags: usize, len: usize, m: u32, cfg: &Config) -> Result<AutocorrelationReport> {
    if !len.is_power_of_two() || len < 1 << 16 {
        return Err(Error::InvalidArgument(format!("sample length must be a power of two >= 2^16, got {len}")));
    }
    if lags == 0 {
        return Err(Error::InvalidArgument("need at least one lag".into()));
    }
    let empirical = autocorrelation(c, lags, len);
    let coefficients = density_coefficients(c, m, lags, cfg)?;
    let max_discrepancy = empirical.iter().zip(&coefficients).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    Ok(AutocorrelationReport { c: *c, length: len, truncation: m, empirical, coefficients, max_discrepancy })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn tp(x: f64) -> TorusPoint {
        TorusPoint::new(x).unwrap()
    }

    fn cfg() -> Config {
        Config::default()
    }

    #[test]
    fn density_examples() {
        assert_abs_diff_eq!(partial_density(&tp(0.0), 1, &tp(0.5)), 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(partial_density(&tp(0.0), 2, &tp(0.25)), 2.0, epsilon = 1e-15);
        assert_eq!(partial_density(&tp(0.3), 0, &tp(0.7)), 1.0);
    }

    #[test]
    fn grid_matches_pointwise_density() {
        let c = tp(0.3);
        let grid = density_grid(c.value(), 5, 9);
        for j in [0usize, 1, 77, 300, 511] {
            let x = tp((j as f64 + 0.5) / 512.0);
            assert_abs_diff_eq!(grid[j], partial_density(&c, 5, &x), epsilon = 1e-12 * grid[j].max(1.0));
        }
    }

    #[test]
    fn mass_examples() {
        let t = cylinder_masses(&tp(0.0), 1, 12, default_quad_points(1, 12), &cfg()).unwrap();
        assert_abs_diff_eq!(t.masses[0], 0.5, epsilon = 1e-10);
        assert_abs_diff_eq!(t.masses[1], 0.5, epsilon = 1e-10);

        // The density at 1/2 is even, so the mass near 0 splits over the two
        // cells that meet there.
        let t = cylinder_masses(&TorusPoint::half(), 4, 16, default_quad_points(4, 16), &cfg()).unwrap();
        assert_abs_diff_eq!(t.masses[0], t.masses[15], epsilon = 1e-12);
        assert!(t.masses[0] + t.masses[15] >= 0.99, "{}", t.masses[0]);

        let t = cylinder_masses(&tp(0.3), 6, 12, default_quad_points(6, 12), &cfg()).unwrap();
        assert!(t.masses.iter().all(|&m| m > 0.0));
        assert_abs_diff_eq!(t.total(), 1.0, epsilon = 1e-8);
    }

    #[test]
    fn rejects_coarse_quadrature_and_budget() {
        assert!(matches!(cylinder_masses(&tp(0.3), 4, 12, 8, &cfg()), Err(Error::InvalidArgument(_))));
        assert!(matches!(cylinder_masses(&tp(0.3), 4, 12, 100, &cfg()), Err(Error::InvalidArgument(_))));
        let small = Config { quadrature_budget: 1 << 10, ..cfg() };
        assert!(matches!(masses_at_depth(&tp(0.3), 8, &small), Err(Error::BudgetExceeded(_))));
    }

    #[test]
    fn partition_sum_examples() {
        let t = masses_at_depth(&tp(0.3), 6, &cfg()).unwrap();
        assert_abs_diff_eq!(partition_sum(&t, 1.0, &cfg()).unwrap(), 1.0, epsilon = 1e-8);
        assert_eq!(partition_sum(&t, 0.0, &cfg()).unwrap(), 64.0);
        let uniform = MeasureTable { c: tp(0.3), depth: 5, truncation: 0, masses: vec![1.0 / 32.0; 32] };
        assert_abs_diff_eq!(partition_sum(&uniform, 2.0, &cfg()).unwrap(), 1.0 / 32.0, epsilon = 1e-15);
        let sparse = MeasureTable { c: tp(0.3), depth: 1, truncation: 0, masses: vec![1.0, 0.0] };
        assert!(matches!(partition_sum(&sparse, -1.0, &cfg()), Err(Error::MassFloorViolation { index: 1, .. })));
    }

    #[test]
    fn uniform_slope() {
        let pts = (4..10).map(|n| (n, -(n as f64) * std::f64::consts::LN_2)).collect();
        let fit = fit_slope(2.0, pts);
        assert_abs_diff_eq!(fit.slope, -1.0, epsilon = 1e-12);
        assert!(fit.residual < 1e-12);
    }

    #[test]
    fn lq_at_half_is_flat() {
        let fit = lq_direct(&TorusPoint::half(), 2.0, 8, 14, &cfg()).unwrap();
        assert!(fit.slope.abs() < 0.02, "{}", fit.slope);
    }

    #[test]
    fn tm_examples() {
        let s = tm_sequence(&tp(0.0), 4);
        for (z, want) in s.iter().zip([1.0, -1.0, -1.0, 1.0]) {
            assert_abs_diff_eq!(z.re, want, epsilon = 1e-15);
            assert_abs_diff_eq!(z.im, 0.0, epsilon = 1e-15);
        }
        let s = tm_sequence(&TorusPoint::half(), 2);
        assert_abs_diff_eq!((s[1] - Complex64::new(1.0, 0.0)).norm(), 0.0, epsilon = 1e-15);
        let s = tm_sequence(&tp(0.25), 2);
        assert_abs_diff_eq!((s[1] - Complex64::new(0.0, -1.0)).norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn autocorrelation_at_half_is_one() {
        let g = autocorrelation(&TorusPoint::half(), 5, 1 << 12);
        for z in g {
            assert_abs_diff_eq!((z - Complex64::new(1.0, 0.0)).norm(), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn autocorrelation_matches_density_coefficients() {
        for c in [0.0, 0.3, 0.8125] {
            let r = autocorrelation_check(&tp(c), 6, 1 << 16, 16, &cfg()).unwrap();
            assert_eq!(r.empirical[0], Complex64::new(1.0, 0.0));
            assert!(r.max_discrepancy < 5e-3, "c={c}: {}", r.max_discrepancy);
        }
    }

    proptest! {
        #[test]
        fn tables_are_probability_vectors(c in 0.0f64..1.0, n in 1u32..8, extra in 2u32..6) {
            let t = cylinder_masses(&tp(c), n, n + extra, default_quad_points(n, n + extra), &cfg()).unwrap();
            prop_assert!((t.total() - 1.0).abs() < 1e-8);
            prop_assert!(t.masses.iter().all(|&m| m >= 0.0));
        }

        #[test]
        fn refinement_is_consistent(c in 0.0f64..1.0, n in 2u32..8) {
            let m = n + 6;
            let fine = cylinder_masses(&tp(c), n + 1, m, default_quad_points(n, m) / 2, &cfg()).unwrap();
            let coarse = cylinder_masses(&tp(c), n, m, default_quad_points(n, m), &cfg()).unwrap();
            for (a, b) in fine.coarsen().unwrap().masses.iter().zip(&coarse.masses) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }

        #[test]
        fn log_partition_sum_is_convex_in_q(c in 0.0f64..1.0, n in 2u32..8, q in -2.0f64..3.0) {
            let t = masses_at_depth(&tp(c), n, &cfg()).unwrap();
            let h = 0.25;
            let f = |q: f64| partition_sum(&t, q, &cfg()).map(f64::ln);
            if let (Ok(a), Ok(b), Ok(d)) = (f(q - h), f(q), f(q + h)) {
                prop_assert!(a - 2.0 * b + d >= -1e-9);
            }
        }

        #[test]
        // Measured worst case over c is about 0.019 at n = 2, shrinking slowly with n.
        fn truncation_is_stable(c in 0.0f64..1.0, n in 2u32..6) {
            let m = n + 4;
            let a = cylinder_masses(&tp(c), n, m, default_quad_points(n, m + 2), &cfg()).unwrap();
            let b = cylinder_masses(&tp(c), n, m + 2, default_quad_points(n, m + 2), &cfg()).unwrap();
            let diff = a.masses.iter().zip(&b.masses).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            prop_assert!(diff < 0.025, "{}", diff);
        }
    }
}
