//! Scans over grids of `c` at fixed `t`, and of the endpoints, with simple
//! continuity diagnostics.

use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;

use crate::config::Config;
use crate::ergodic_opt::{endpoints, EndpointEstimate};
use crate::error::{Error, Result};
use crate::symbolic::{Dyadic, TorusPoint};
use crate::transfer::{pressure, PressureEstimate};

/// Default number of refinement levels around each focus point.
pub const FOCUS_LEVELS: u32 = 8;

/// `n` equally spaced points `k/n`; exact dyadics when `n` is a power of two.
pub fn uniform_grid(n: usize) -> Result<Vec<TorusPoint>> {
    if n == 0 {
        return Err(Error::InvalidArgument("grid needs at least one point".into()));
    }
    if n.is_power_of_two() && n.trailing_zeros() <= 53 {
        let l = n.trailing_zeros();
        return Ok((0..n as u64)
            .map(|k| match Dyadic::new(k, l) {
                Ok(d) => TorusPoint::from_dyadic(d),
                Err(_) => TorusPoint::zero(),
            })
            .collect());
    }
    (0..n).map(|k| TorusPoint::new(k as f64 / n as f64)).collect()
}

/// A uniform grid of `n` points plus, around each focus, the points
/// `focus +- 2^-j / n` for `j = 1..=levels`. Sorted by value, duplicates removed.
pub fn focused_grid(n: usize, focus: &[TorusPoint], levels: u32) -> Result<Vec<TorusPoint>> {
    let mut grid = uniform_grid(n)?;
    for f in focus {
        grid.push(*f);
        for j in 1..=levels {
            let l = j + n.trailing_zeros();
            let step = if n.is_power_of_two() && l <= 53 {
                TorusPoint::dyadic(1, l)?
            } else {
                TorusPoint::new((0.5f64).powi(j as i32) / n as f64)?
            };
            grid.push(f.sub(&step));
            grid.push(f.sub(&TorusPoint::zero().sub(&step)));
        }
    }
    normalize_grid(grid)
}

fn normalize_grid(mut grid: Vec<TorusPoint>) -> Result<Vec<TorusPoint>> {
    // Exact points sort first among equal values so deduplication keeps them.
    grid.sort_by(|a, b| a.value().total_cmp(&b.value()).then(a.exact().is_none().cmp(&b.exact().is_none())));
    grid.dedup_by(|a, b| a.value() == b.value());
    Ok(grid)
}

fn check_grid(grid: &[TorusPoint]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty c grid".into()));
    }
    if grid.windows(2).any(|w| w[1].value() <= w[0].value()) {
        return Err(Error::InvalidArgument("c grid must be sorted without duplicates".into()));
    }
    Ok(())
}

/// One grid point: the estimate, or the error that prevented it.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Row<E> {
    pub c: TorusPoint,
    pub estimate: Option<E>,
    pub error: Option<String>,
}

impl<E> Row<E> {
    fn new(c: TorusPoint, r: Result<E>) -> Self {
        match r {
            Ok(e) => Row { c, estimate: Some(e), error: None },
            Err(e) => Row { c, estimate: None, error: Some(e.to_string()) },
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Diagnostics {
    /// Largest difference between finite neighbouring values.
    pub max_oscillation: f64,
    /// Presumed-infinite rows (pressure) or rows with divergent alpha (endpoints).
    pub divergent_count: usize,
    pub error_count: usize,
    /// Largest `|difference| / spacing` between finite neighbours.
    pub modulus_proxy: f64,
    /// Neighbour differences binned by decade: bin `i` counts `|d|` in
    /// `[10^-(i+1), 10^-i)`, the last bin everything smaller.
    pub difference_histogram: Vec<usize>,
}

const HISTOGRAM_BINS: usize = 12;

/// Diagnostics of a column of optional values on a sorted grid.
pub fn column_diagnostics(cs: &[f64], values: &[Option<f64>], divergent: usize, errors: usize) -> Diagnostics {
    let mut d = Diagnostics {
        divergent_count: divergent,
        error_count: errors,
        difference_histogram: vec![0; HISTOGRAM_BINS],
        ..Diagnostics::default()
    };
    for i in 1..values.len() {
        if let (Some(a), Some(b)) = (values[i - 1], values[i]) {
            let diff = (b - a).abs();
            d.max_oscillation = d.max_oscillation.max(diff);
            let h = cs[i] - cs[i - 1];
            if h > 0.0 {
                d.modulus_proxy = d.modulus_proxy.max(diff / h);
            }
            let bin = if diff >= 1.0 {
                0
            } else if diff > 0.0 {
                ((-diff.log10()).floor() as usize).min(HISTOGRAM_BINS - 1)
            } else {
                HISTOGRAM_BINS - 1
            };
            d.difference_histogram[bin] += 1;
        }
    }
    d
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScanTable<E> {
    /// `None` for endpoint scans.
    pub t: Option<f64>,
    pub c_grid: Vec<TorusPoint>,
    pub rows: Vec<Row<E>>,
    pub diagnostics: Diagnostics,
    /// Accuracy each row was computed to (the sweep's `bracket_tol`).
    pub tolerance: f64,
}

pub type PressureScan = ScanTable<PressureEstimate>;
pub type EndpointScan = ScanTable<EndpointEstimate>;

impl PressureScan {
    /// Midpoints, `None` for presumed-infinite and failed rows.
    pub fn values(&self) -> Vec<Option<f64>> {
        self.rows
            .iter()
            .map(|r| r.estimate.as_ref().filter(|e| !e.divergent).map(PressureEstimate::midpoint))
            .collect()
    }

    pub fn recompute_diagnostics(&self) -> Diagnostics {
        let cs: Vec<f64> = self.c_grid.iter().map(TorusPoint::value).collect();
        let divergent = self.rows.iter().filter(|r| r.estimate.as_ref().is_some_and(|e| e.divergent)).count();
        let errors = self.rows.iter().filter(|r| r.error.is_some()).count();
        column_diagnostics(&cs, &self.values(), divergent, errors)
    }
}

impl EndpointScan {
    /// Upper ends of the beta brackets.
    pub fn beta_values(&self) -> Vec<Option<f64>> {
        self.rows.iter().map(|r| r.estimate.as_ref().map(|e| e.beta_bracket.1)).collect()
    }

    pub fn recompute_diagnostics(&self) -> Diagnostics {
        let cs: Vec<f64> = self.c_grid.iter().map(TorusPoint::value).collect();
        let divergent = self.rows.iter().filter(|r| r.estimate.as_ref().is_some_and(|e| e.alpha_divergent)).count();
        let errors = self.rows.iter().filter(|r| r.error.is_some()).count();
        column_diagnostics(&cs, &self.beta_values(), divergent, errors)
    }
}

/// Pressure at every grid point; rows are independent and run in parallel.
pub fn scan_pressure(t: f64, c_grid: &[TorusPoint], cfg: &Config) -> Result<PressureScan> {
    cfg.validate()?;
    check_grid(c_grid)?;
    if !t.is_finite() {
        return Err(Error::InvalidArgument(format!("t must be finite, got {t}")));
    }
    let rows = c_grid.par_iter().map(|c| Row::new(*c, pressure(c, t, cfg))).collect();
    let mut table = ScanTable { t: Some(t), c_grid: c_grid.to_vec(), rows, diagnostics: Diagnostics::default(), tolerance: cfg.bracket_tol };
    table.diagnostics = table.recompute_diagnostics();
    Ok(table)
}

/// Endpoint brackets at `cfg.endpoint_depth` for every grid point.
pub fn scan_endpoints(c_grid: &[TorusPoint], cfg: &Config) -> Result<EndpointScan> {
    cfg.validate()?;
    check_grid(c_grid)?;
    let rows = c_grid.par_iter().map(|c| Row::new(*c, endpoints(c, cfg.endpoint_depth, cfg))).collect();
    let mut table = ScanTable { t: None, c_grid: c_grid.to_vec(), rows, diagnostics: Diagnostics::default(), tolerance: cfg.bracket_tol };
    table.diagnostics = table.recompute_diagnostics();
    Ok(table)
}

/// Local Lipschitz bound in `c` of `psi_c(x)` for `x` at distance at least
/// `h` from `c`: `|d/dc psi_c| = 2 pi |cot(pi (x - c))|`.
pub fn local_lipschitz(h: f64) -> f64 {
    let h = h.clamp(1e-300, 0.5);
    2.0 * PI / (PI * h).tan()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Violation {
    pub index: usize,
    pub c: TorusPoint,
    /// `p(c) - min(p(c - h), p(c + h)) - slack`, positive.
    pub excess: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SemicontinuityReport {
    pub checked: usize,
    /// Interior points skipped because they are presumed infinite or failed.
    pub skipped: usize,
    pub violations: Vec<Violation>,
}

/// Discrete lower-semicontinuity proxy at every interior grid point:
/// `p(c) <= min(p(c-h), p(c+h)) + |t| L(h) h + slack`, the slack being both
/// bracket widths plus twice the table tolerance. Presumed
/// infinite neighbours make the check vacuous.
pub fn semicontinuity_report(table: &PressureScan) -> SemicontinuityReport {
    let t = table.t.unwrap_or(0.0);
    let mut report = SemicontinuityReport { checked: 0, skipped: 0, violations: Vec::new() };
    let est = |i: usize| table.rows[i].estimate.as_ref();
    let value = |i: usize| est(i).and_then(|e| (!e.divergent).then(|| e.midpoint()));
    for i in 1..table.rows.len().saturating_sub(1) {
        let Some(p) = value(i) else {
            report.skipped += 1;
            continue;
        };
        report.checked += 1;
        let mut bound = f64::INFINITY;
        for j in [i - 1, i + 1] {
            if let Some(q) = value(j) {
                let h = (table.c_grid[j].value() - table.c_grid[i].value()).abs();
                let width = est(i).map_or(0.0, |e| e.width()) + est(j).map_or(0.0, |e| e.width()) + 2.0 * table.tolerance;
                bound = bound.min(q + t.abs() * local_lipschitz(h) * h + width);
            }
        }
        if p > bound {
            report.violations.push(Violation { index: i, c: table.c_grid[i], excess: p - bound });
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> Config {
        Config { depth_max: 12, ..Config::default() }
    }

    #[test]
    fn grids() {
        let g = uniform_grid(8).unwrap();
        assert_eq!(g.len(), 8);
        assert!(g[4].is_exact_half());
        let f = focused_grid(8, &[TorusPoint::half()], 3).unwrap();
        assert_eq!(f.len(), 8 + 6);
        assert!(f.windows(2).all(|w| w[0].value() < w[1].value()));
        assert!(f.iter().all(|p| p.exact().is_some()));
        assert!(uniform_grid(0).is_err());
    }

    #[test]
    fn entropy_column_is_flat() {
        let grid = uniform_grid(16).unwrap();
        let table = scan_pressure(0.0, &grid, &cfg()).unwrap();
        assert_eq!(table.rows.len(), grid.len());
        for v in table.values() {
            assert!((v.unwrap() - std::f64::consts::LN_2).abs() < 1e-3);
        }
        assert!(table.diagnostics.max_oscillation < 1e-3);
        assert!(semicontinuity_report(&table).violations.is_empty());
        assert_eq!(table.diagnostics, table.recompute_diagnostics());
    }

    #[test]
    fn rows_are_independent() {
        let grid = uniform_grid(8).unwrap();
        let full = scan_pressure(0.5, &grid, &cfg()).unwrap();
        let fewer: Vec<TorusPoint> = grid.iter().copied().filter(|c| c.value() != 0.375).collect();
        let part = scan_pressure(0.5, &fewer, &cfg()).unwrap();
        for row in &part.rows {
            let same = full.rows.iter().find(|r| r.c == row.c).unwrap();
            assert_eq!(same, row);
        }
    }

    #[test]
    fn endpoint_scan_has_zero_beta_at_half() {
        let grid = uniform_grid(4).unwrap();
        let table = scan_endpoints(&grid, &Config { endpoint_depth: 10, ..cfg() }).unwrap();
        let b = table.beta_values()[2].unwrap();
        assert!(b.abs() < 1e-4);
    }

    #[test]
    fn divergent_neighbours_make_the_check_vacuous() {
        let mut table = scan_pressure(0.5, &uniform_grid(4).unwrap(), &cfg()).unwrap();
        // Pretend both neighbours of row 2 blew up and lower them far below it.
        for j in [1, 3] {
            let e = table.rows[j].estimate.as_mut().unwrap();
            e.divergent = true;
            e.lower = -100.0;
            e.upper = -100.0;
        }
        let r = semicontinuity_report(&table);
        assert!(r.violations.is_empty());
        assert_eq!(r.skipped, 1);
    }
}
