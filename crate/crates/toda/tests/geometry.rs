use std::f64::consts::PI;

use proptest::prelude::*;
use toda::geometry::*;

/// Robin constant of the unit square torus from eta(i): -(1/2pi) log(2 pi eta(i)^2).
fn robin_oracle_qproduct() -> f64 {
    let mut prod = 1.0;
    for n in 1..20 {
        prod *= 1.0 - (-2.0 * PI * n as f64).exp();
    }
    let eta = (-PI / 12.0).exp() * prod;
    -(2.0 * PI * eta * eta).ln() / (2.0 * PI)
}

fn robin_oracle_gamma() -> f64 {
    let gamma_quarter = 3.625_609_908_221_908_3;
    let eta = gamma_quarter / (2.0 * PI.powf(0.75));
    -(2.0 * PI * eta * eta).ln() / (2.0 * PI)
}

const ROBIN: f64 = -0.208_577_793_243_501_34;

#[test]
fn oracles_agree_with_frozen_value() {
    assert!((robin_oracle_qproduct() - ROBIN).abs() < 1e-15);
    assert!((robin_oracle_gamma() - ROBIN).abs() < 1e-14);
    assert!((robin_exact() - ROBIN).abs() < 1e-13);
}

#[test]
fn robin_at_origin_matches_lattice_oracle() {
    for n in [32usize, 64, 128] {
        let g = green_scalar(TorusGrid::new(n).unwrap(), [0.0, 0.0]);
        assert!((g.robin - robin_oracle_qproduct()).abs() < 1e-6, "n={n}: {}", g.robin);
    }
}

#[test]
fn robin_translation_invariant() {
    let grid = TorusGrid::new(64).unwrap();
    let mut vals = Vec::new();
    for k in 0..16 {
        let y = [(0.618_034 * k as f64 + 0.1).fract(), (0.414_213 * k as f64 + 0.37).fract()];
        vals.push(green_scalar(grid, y).robin);
    }
    let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    assert!(hi - lo < 1e-8, "spread {}", hi - lo);
}

#[test]
fn green_symmetry_under_swap() {
    let grid = TorusGrid::new(64).unwrap();
    let (x, y) = ([0.123, 0.456], [0.789, 0.0321]);
    let a = green_scalar(grid, y).eval(x);
    let b = green_scalar(grid, x).eval(y);
    assert!((a - b).abs() < 1e-10);
}

#[test]
fn band_limited_green_tracks_ewald() {
    let grid = TorusGrid::new(128).unwrap();
    let g = green_scalar(grid, [0.0, 0.0]);
    // antipode and half-period points
    assert!((g.eval([0.5, 0.5]) - (-0.055_158_900_038_162_91)).abs() < 1e-4);
    assert!((green_exact([0.5, 0.5]) - (-0.055_158_900_038_162_91)).abs() < 1e-13);
    assert!((green_exact([0.5, 0.0]) - (-0.027_579_450_019_081_492)).abs() < 1e-13);
}

#[test]
fn pair_log_slopes() {
    let n = 128;
    let grid = TorusGrid::new(n).unwrap();
    let (x1, x2) = ([0.25, 0.25], [0.75, 0.625]);
    let p = green_pair(grid, x1, x2).unwrap();
    assert!(integrate(&p.g1).abs() < 1e-10 && integrate(&p.g2).abs() < 1e-10);
    let h = 1.0 / n as f64;
    let (mut sx, mut sy, mut sxx, mut sxy, mut cnt) = (0.0, 0.0, 0.0, 0.0, 0.0);
    let mut g2_resid: Vec<f64> = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let r = torus_dist(grid.node(i, j), x1);
            if r >= 4.0 * h && r <= 16.0 * h {
                let (lx, y) = (r.ln(), p.g1.at(i, j));
                sx += lx;
                sy += y;
                sxx += lx * lx;
                sxy += lx * y;
                cnt += 1.0;
                g2_resid.push(p.g2.at(i, j) - 2.0 * r.ln());
            }
        }
    }
    let slope = (cnt * sxy - sx * sy) / (cnt * sxx - sx * sx);
    assert!((slope + 4.0).abs() < 0.1, "slope {slope}");
    let spread = g2_resid.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - g2_resid.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(spread < 0.5, "G2 - 2 log r spread {spread}");
}

fn field_from(grid: TorusGrid, c: &[f64]) -> ScalarField {
    ScalarField::from_fn(grid, |p| {
        let mut v = 0.0;
        for (k, w) in c.chunks(2).enumerate() {
            let (a, b) = ((k % 3) as f64, (k / 3) as f64 - 1.0);
            let t = 2.0 * PI * (a * p[0] + b * p[1]);
            v += w[0] * t.cos() + w[1] * t.sin();
        }
        v
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn energy_pair_dominates_quarter_sum(c1 in prop::collection::vec(-2.0f64..2.0, 18),
                                          c2 in prop::collection::vec(-2.0f64..2.0, 18)) {
        let grid = TorusGrid::new(32).unwrap();
        let (a, b) = (field_from(grid, &c1), field_from(grid, &c2));
        let e = dirichlet_energy_pair(&a, &b).unwrap();
        prop_assert!(e >= 0.0);
        prop_assert!(e + 1e-9 >= 0.25 * (dirichlet_energy(&a) + dirichlet_energy(&b)));
    }

    #[test]
    fn poisson_then_laplacian_is_identity(c in prop::collection::vec(-2.0f64..2.0, 18)) {
        let grid = TorusGrid::new(32).unwrap();
        let f = field_from(grid, &c);
        let f = f.shift(-f.mean());
        let back = laplacian(&solve_poisson(&f)).unwrap().scale(-1.0);
        prop_assert!(back.max_abs_diff(&f) < 1e-10);
    }
}
