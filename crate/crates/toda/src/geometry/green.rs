use std::f64::consts::PI;

use num_complex::Complex64;

use super::{eval_coefficients, freq, torus_dist, Point, ScalarField, TorusGrid, EULER_GAMMA};
use crate::error::{Result, TodaError};

/// Heat time used to regularise G before reading off the Robin constant.
pub const HEAT_T: f64 = 0.005;

#[derive(Clone, Debug)]
pub struct GreenData {
    pub source: Point,
    pub field: ScalarField,
    pub robin: f64,
}

#[derive(Clone, Debug)]
pub struct TodaGreenPair {
    pub x1: Point,
    pub x2: Point,
    pub g1: ScalarField,
    pub g2: ScalarField,
    pub a1: f64,
    pub a2: f64,
    /// G(x1; x2) of the standard Green function.
    pub cross: f64,
    pub robin: f64,
}

fn retained(i: usize, j: usize, n: usize) -> bool {
    (i != 0 || j != 0) && i != n / 2 && j != n / 2
}

/// Coefficients of G(.; y): e^{-2 pi i k.y} / (4 pi^2 |k|^2) on retained modes.
/// Nyquist modes are dropped so the band-limited delta is real with unit-modulus modes.
pub fn green_coefficients(grid: TorusGrid, y: Point) -> Vec<Complex64> {
    let n = grid.n();
    let mut c = vec![Complex64::new(0.0, 0.0); n * n];
    for i in 0..n {
        for j in 0..n {
            if !retained(i, j, n) {
                continue;
            }
            let (k1, k2) = (freq(j, n) as f64, freq(i, n) as f64);
            let ph = -2.0 * PI * (k1 * y[0] + k2 * y[1]);
            c[i * n + j] = Complex64::new(ph.cos(), ph.sin()) / (4.0 * PI * PI * (k1 * k1 + k2 * k2));
        }
    }
    c
}

/// Robin constant of a computed Green field: value of e^{t Lap} G at the source,
/// plus the heat-kernel correction (1/4pi)(log 4t - gamma) - t.
pub fn robin_from_field(field: &ScalarField, y: Point) -> f64 {
    let n = field.n();
    let mut c = field.coefficients();
    for i in 0..n {
        for j in 0..n {
            let (k1, k2) = (freq(j, n) as f64, freq(i, n) as f64);
            c[i * n + j] *= (-4.0 * PI * PI * (k1 * k1 + k2 * k2) * HEAT_T).exp();
        }
    }
    eval_coefficients(&c, n, y) + ((4.0 * HEAT_T).ln() - EULER_GAMMA) / (4.0 * PI) - HEAT_T
}

pub fn green_scalar(grid: TorusGrid, y: Point) -> GreenData {
    let c = green_coefficients(grid, y);
    let field = ScalarField::from_coefficients(grid, &c);
    let robin = robin_from_field(&field, y);
    GreenData { source: y, field, robin }
}

impl GreenData {
    /// Max over retained modes of |(-Lap G)_k - (delta_y - 1)_k|.
    pub fn spectral_residual(&self) -> f64 {
        let n = self.field.n();
        let c = self.field.coefficients();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let (k1, k2) = (freq(j, n) as f64, freq(i, n) as f64);
                let lap = c[i * n + j] * (4.0 * PI * PI * (k1 * k1 + k2 * k2));
                let target = if retained(i, j, n) {
                    let ph = -2.0 * PI * (k1 * self.source[0] + k2 * self.source[1]);
                    Complex64::new(ph.cos(), ph.sin())
                } else {
                    Complex64::new(0.0, 0.0)
                };
                worst = worst.max((lap - target).norm());
            }
        }
        worst
    }

    /// Band-limited G(x; source).
    pub fn eval(&self, x: Point) -> f64 {
        self.field.eval(x)
    }
}

pub fn green_pair(grid: TorusGrid, x1: Point, x2: Point) -> Result<TodaGreenPair> {
    let sep = torus_dist(x1, x2);
    if sep < 2.0 * grid.spacing() {
        return Err(TodaError::NearCoincident(sep));
    }
    let g1 = green_scalar(grid, x1);
    let g2 = green_scalar(grid, x2);
    let e = 8.0 * PI;
    let f = 4.0 * PI;
    let big1 = g1.field.scale(e).axpy(-f, &g2.field);
    let big2 = g2.field.scale(e).axpy(-f, &g1.field);
    let robin = 0.5 * (g1.robin + g2.robin);
    let a1 = e * g1.robin - f * g2.eval(x1);
    let a2 = e * g2.robin - f * g1.eval(x2);
    Ok(TodaGreenPair { x1, x2, g1: big1, g2: big2, a1, a2, cross: g2.eval(x1), robin })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::integrate;

    #[test]
    fn mean_zero_and_residual() {
        let grid = TorusGrid::new(64).unwrap();
        let g = green_scalar(grid, [0.3, 0.71]);
        assert!(integrate(&g.field).abs() < 1e-12);
        assert!(g.spectral_residual() < 1e-10);
    }

    #[test]
    fn pair_constants_two_ways() {
        let grid = TorusGrid::new(64).unwrap();
        let (x1, x2) = ([0.2, 0.3], [0.65, 0.8]);
        let p = green_pair(grid, x1, x2).unwrap();
        let g1 = green_scalar(grid, x1);
        let g2 = green_scalar(grid, x2);
        let other = 8.0 * PI * (g1.robin + g2.robin) - 4.0 * PI * (g1.eval(x2) + g2.eval(x1));
        assert!((p.a1 + p.a2 - other).abs() < 1e-8);
        assert!(integrate(&p.g1).abs() < 1e-10);
        assert!(green_pair(grid, x1, [0.2 + 1.0 / 128.0, 0.3]).is_err());
    }
}
