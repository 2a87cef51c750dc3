use std::f64::consts::PI;

use toda_web::{condition_margin, green_pair_field, subcritical_solve};

#[test]
fn green_pair_field_reports_constants() {
    let m = green_pair_field(32, 0.25, 0.25, 0.75, 0.75).unwrap();
    assert_eq!(m.n(), 32);
    assert_eq!(m.values().len(), 32 * 32);
    assert!(m.values().iter().all(|v| v.is_finite()));
    assert!(m.values().iter().sum::<f64>().abs() < 1e-9);
    assert!(m.summary().starts_with("A1 = "));
    assert!(green_pair_field(32, 0.25, 0.25, 0.25, 0.25).is_err());
    assert!(green_pair_field(256, 0.1, 0.1, 0.5, 0.5).is_err());
}

#[test]
fn flat_solve_is_zero() {
    let m = subcritical_solve(32, 1.0, 0.0, 0.0).unwrap();
    assert!(m.values().iter().all(|v| v.abs() < 1e-12));
    assert!(m.summary().contains("converged = true"));
}

#[test]
fn condition_map_marks_negative_set() {
    let m = condition_margin(32, 1.0, 0.3, 1, 0).unwrap();
    assert!(m.values().iter().all(|v| v.is_finite()));
    assert!(m.summary().starts_with("holds = true"));
    let m = condition_margin(32, 0.2, 1.0, 1, 0).unwrap();
    assert!(m.values().iter().any(|v| v.is_nan()));
    assert!(m.summary().starts_with("holds = false"));
    // flat h: margin is exactly 4 pi
    let m = condition_margin(32, 2.0, 0.0, 1, 0).unwrap();
    assert!(m.values().iter().all(|&v| (v - 4.0 * PI).abs() < 1e-12));
}
