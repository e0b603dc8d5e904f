use std::f64::consts::LN_2;

use thermoscope::scan::{focused_grid, scan_pressure, uniform_grid};
use thermoscope::{Config, TorusPoint};

#[test]
fn scans_are_deterministic_and_rows_independent() {
    let cfg = Config { depth_max: 14, ..Config::default() };
    let grid = focused_grid(12, &[TorusPoint::half()], 3).unwrap();
    let a = scan_pressure(0.75, &grid, &cfg).unwrap();
    let b = scan_pressure(0.75, &grid, &cfg).unwrap();
    assert_eq!(a, b);
    let skip = grid.len() / 2;
    let fewer: Vec<TorusPoint> = grid.iter().enumerate().filter(|(i, _)| *i != skip).map(|(_, c)| *c).collect();
    let c = scan_pressure(0.75, &fewer, &cfg).unwrap();
    let kept: Vec<_> = a.rows.iter().enumerate().filter(|(i, _)| *i != skip).map(|(_, r)| r.clone()).collect();
    assert_eq!(c.rows, kept);
}

#[test]
fn entropy_column_is_log_two() {
    let cfg = Config { depth_max: 16, bracket_tol: 1e-7, ..Config::default() };
    let table = scan_pressure(0.0, &uniform_grid(16).unwrap(), &cfg).unwrap();
    for v in table.values() {
        assert!((v.unwrap() - LN_2).abs() <= 1e-6);
    }
}
