//! Unit flat torus [0,1)^2: grids, sampled fields, spectral calculus and Green functions.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Result, TodaError};

mod ewald;
mod green;

pub use ewald::{
    ein, exp_integral_e1, green_exact, green_exact_grad, green_regular, green_regular_grad,
    robin_exact, EULER_GAMMA,
};
pub use green::{
    green_coefficients, green_pair, green_scalar, robin_from_field, GreenData, TodaGreenPair,
    HEAT_T,
};

/// A point (x^1, x^2) of the torus.
pub type Point = [f64; 2];

/// Minimal-image displacement a - b, each coordinate in [-1/2, 1/2).
pub fn torus_delta(a: Point, b: Point) -> Point {
    [wrap_half(a[0] - b[0]), wrap_half(a[1] - b[1])]
}

pub fn torus_dist(a: Point, b: Point) -> f64 {
    let d = torus_delta(a, b);
    d[0].hypot(d[1])
}

pub(crate) fn wrap_half(t: f64) -> f64 {
    t - (t + 0.5).floor()
}

pub fn wrap_unit(t: f64) -> f64 {
    t - t.floor()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TorusGrid {
    n: usize,
}

impl TorusGrid {
    pub fn new(n: usize) -> Result<Self> {
        if n < 32 || !n.is_power_of_two() {
            return Err(TodaError::InvalidGrid(n));
        }
        Ok(Self { n })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn spacing(&self) -> f64 {
        1.0 / self.n as f64
    }

    pub fn area(&self) -> f64 {
        1.0
    }

    /// Node (row i, column j) sits at (x^1, x^2) = (j/N, i/N).
    pub fn node(&self, i: usize, j: usize) -> Point {
        let h = self.spacing();
        [j as f64 * h, i as f64 * h]
    }

    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Signed frequency of FFT index j on an n-point axis; j = n/2 maps to -n/2.
pub fn freq(j: usize, n: usize) -> i64 {
    if j < n / 2 {
        j as i64
    } else {
        j as i64 - n as i64
    }
}

fn fft_index(k: i64, n: usize) -> usize {
    k.rem_euclid(n as i64) as usize
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(n)
        } else {
            p.plan_fft_forward(n)
        }
    })
}

fn fft2_inplace(data: &mut [Complex64], n: usize, inverse: bool) {
    let f = plan(n, inverse);
    let mut scratch = vec![Complex64::new(0.0, 0.0); f.get_inplace_scratch_len()];
    for row in data.chunks_exact_mut(n) {
        f.process_with_scratch(row, &mut scratch);
    }
    let mut col = vec![Complex64::new(0.0, 0.0); n];
    for j in 0..n {
        for i in 0..n {
            col[i] = data[i * n + j];
        }
        f.process_with_scratch(&mut col, &mut scratch);
        for i in 0..n {
            data[i * n + j] = col[i];
        }
    }
}

/// Mean-normalised Fourier coefficients: c_k = mean(f e^{-2 pi i k.x}).
pub fn forward(values: &[f64], n: usize) -> Vec<Complex64> {
    let mut data: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft2_inplace(&mut data, n, false);
    let s = 1.0 / (n * n) as f64;
    for c in data.iter_mut() {
        *c *= s;
    }
    data
}

/// Nodal values sum_k c_k e^{2 pi i k.x}, real part.
pub fn inverse_real(coefs: &[Complex64], n: usize) -> Vec<f64> {
    let mut data = coefs.to_vec();
    fft2_inplace(&mut data, n, true);
    data.into_iter().map(|c| c.re).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    grid: TorusGrid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: TorusGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(TodaError::InvalidInput(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: TorusGrid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: TorusGrid, c: f64) -> Self {
        Self { grid, values: vec![c; grid.len()] }
    }

    pub fn from_fn(grid: TorusGrid, f: impl Fn(Point) -> f64) -> Self {
        let n = grid.n();
        let mut values = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                values.push(f(grid.node(i, j)));
            }
        }
        Self { grid, values }
    }

    pub fn from_coefficients(grid: TorusGrid, coefs: &[Complex64]) -> Self {
        Self { grid, values: inverse_real(coefs, grid.n()) }
    }

    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    pub fn n(&self) -> usize {
        self.grid.n()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n() + j]
    }

    pub fn coefficients(&self) -> Vec<Complex64> {
        forward(&self.values, self.n())
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Largest value and its row-major index (first one on ties).
    pub fn argmax(&self) -> (f64, usize) {
        let mut best = (f64::NEG_INFINITY, 0);
        for (k, &v) in self.values.iter().enumerate() {
            if v > best.0 {
                best = (v, k);
            }
        }
        best
    }

    pub fn max(&self) -> f64 {
        self.argmax().0
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { grid: self.grid, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        check_same(self, other)?;
        Ok(Self {
            grid: self.grid,
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub fn shift(&self, c: f64) -> Self {
        self.map(|v| v + c)
    }

    pub fn scale(&self, a: f64) -> Self {
        self.map(|v| a * v)
    }

    /// self + a * other
    pub fn axpy(&self, a: f64, other: &Self) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().zip(&other.values).map(|(&x, &y)| x + a * y).collect(),
        }
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Trigonometric interpolant at an arbitrary point (Nyquist modes as cosines).
    pub fn eval(&self, p: Point) -> f64 {
        eval_coefficients(&self.coefficients(), self.n(), p)
    }
}

/// Evaluates sum_k c_k E(k1, x) E(k2, y), with E(-n/2, t) = cos(pi n t).
pub fn eval_coefficients(coefs: &[Complex64], n: usize, p: Point) -> f64 {
    let axis = |t: f64| -> Vec<Complex64> {
        (0..n)
            .map(|j| {
                if j == n / 2 {
                    Complex64::new((PI * n as f64 * t).cos(), 0.0)
                } else {
                    let a = 2.0 * PI * freq(j, n) as f64 * t;
                    Complex64::new(a.cos(), a.sin())
                }
            })
            .collect()
    };
    let ex = axis(p[0]);
    let ey = axis(p[1]);
    let mut acc = 0.0;
    for i in 0..n {
        let mut row = Complex64::new(0.0, 0.0);
        for j in 0..n {
            row += coefs[i * n + j] * ex[j];
        }
        acc += (row * ey[i]).re;
    }
    acc
}

fn check_same(a: &ScalarField, b: &ScalarField) -> Result<()> {
    if a.n() != b.n() {
        return Err(TodaError::GridMismatch(a.n(), b.n()));
    }
    Ok(())
}

fn k2(i: usize, j: usize, n: usize) -> f64 {
    let a = freq(j, n) as f64;
    let b = freq(i, n) as f64;
    a * a + b * b
}

fn spectral_multiply(f: &ScalarField, m: impl Fn(usize, usize) -> Complex64) -> ScalarField {
    let n = f.n();
    let mut c = f.coefficients();
    for i in 0..n {
        for j in 0..n {
            c[i * n + j] *= m(i, j);
        }
    }
    ScalarField::from_coefficients(f.grid(), &c)
}

/// Spectral Laplacian: mode k is multiplied by -4 pi^2 |k|^2.
pub fn laplacian(f: &ScalarField) -> Result<ScalarField> {
    if !f.is_finite() {
        return Err(TodaError::NonFinite);
    }
    let n = f.n();
    let s = -4.0 * PI * PI;
    Ok(spectral_multiply(f, |i, j| Complex64::new(s * k2(i, j, n), 0.0)))
}

/// Spectral gradient (d/dx^1, d/dx^2); the Nyquist mode of the differentiated axis is dropped.
pub fn gradient(f: &ScalarField) -> Result<(ScalarField, ScalarField)> {
    if !f.is_finite() {
        return Err(TodaError::NonFinite);
    }
    let n = f.n();
    let dx = spectral_multiply(f, |_, j| {
        if j == n / 2 {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::new(0.0, 2.0 * PI * freq(j, n) as f64)
        }
    });
    let dy = spectral_multiply(f, |i, _| {
        if i == n / 2 {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::new(0.0, 2.0 * PI * freq(i, n) as f64)
        }
    });
    Ok((dx, dy))
}

/// Zero-mean solution of -Lap u = f - mean(f).
pub fn solve_poisson(f: &ScalarField) -> ScalarField {
    let n = f.n();
    spectral_multiply(f, |i, j| {
        let q = k2(i, j, n);
        if q == 0.0 {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::new(1.0 / (4.0 * PI * PI * q), 0.0)
        }
    })
}

/// Heat semigroup e^{t Lap} f.
pub fn heat(f: &ScalarField, t: f64) -> ScalarField {
    let n = f.n();
    spectral_multiply(f, |i, j| Complex64::new((-4.0 * PI * PI * k2(i, j, n) * t).exp(), 0.0))
}

/// (-Lap + 1)^{-1} f.
pub fn helmholtz_inverse(f: &ScalarField) -> ScalarField {
    let n = f.n();
    spectral_multiply(f, |i, j| Complex64::new(1.0 / (1.0 + 4.0 * PI * PI * k2(i, j, n)), 0.0))
}

/// Integral over the unit torus (mean of nodal values).
pub fn integrate(f: &ScalarField) -> f64 {
    f.mean()
}

/// Mean inner product <f, g> = integral of f g.
pub fn inner(f: &ScalarField, g: &ScalarField) -> f64 {
    f.values().iter().zip(g.values()).map(|(a, b)| a * b).sum::<f64>() / f.values().len() as f64
}

pub fn dirichlet_energy(u: &ScalarField) -> f64 {
    let n = u.n();
    let c = u.coefficients();
    let mut e = 0.0;
    for i in 0..n {
        for j in 0..n {
            e += 4.0 * PI * PI * k2(i, j, n) * c[i * n + j].norm_sqr();
        }
    }
    e
}

/// Mixed energy of |grad u1|^2 + grad u1 . grad u2 + |grad u2|^2, by Parseval.
pub fn dirichlet_energy_pair(u1: &ScalarField, u2: &ScalarField) -> Result<f64> {
    check_same(u1, u2)?;
    let n = u1.n();
    let a = u1.coefficients();
    let b = u2.coefficients();
    let mut e = 0.0;
    for i in 0..n {
        for j in 0..n {
            let k = i * n + j;
            let q = a[k].norm_sqr() + (a[k] * b[k].conj()).re + b[k].norm_sqr();
            e += 4.0 * PI * PI * k2(i, j, n) * q;
        }
    }
    Ok(e)
}

/// The 3N/2 zero-padded grid used for e^u quadratures, with prolongation P and its adjoint.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Padded {
    n: usize,
    m: usize,
}

impl Padded {
    pub fn new(n: usize) -> Self {
        Self { n, m: 3 * n / 2 }
    }

    pub fn coarse(&self) -> usize {
        self.n
    }

    pub fn fine(&self) -> usize {
        self.m
    }

    pub fn fine_node(&self, idx: usize) -> Point {
        let h = 1.0 / self.m as f64;
        [(idx % self.m) as f64 * h, (idx / self.m) as f64 * h]
    }

    fn targets(&self, j: usize) -> [(usize, f64); 2] {
        let n = self.n;
        if j == n / 2 {
            let h = (n / 2) as i64;
            [(fft_index(-h, self.m), 0.5), (fft_index(h, self.m), 0.5)]
        } else {
            [(fft_index(freq(j, n), self.m), 1.0), (usize::MAX, 0.0)]
        }
    }

    pub fn prolong_coefficients(&self, coefs: &[Complex64]) -> Vec<f64> {
        let (n, m) = (self.n, self.m);
        let mut fine = vec![Complex64::new(0.0, 0.0); m * m];
        for i in 0..n {
            let ti = self.targets(i);
            for j in 0..n {
                let tj = self.targets(j);
                let c = coefs[i * n + j];
                for &(fi, wi) in ti.iter().filter(|t| t.1 > 0.0) {
                    for &(fj, wj) in tj.iter().filter(|t| t.1 > 0.0) {
                        fine[fi * m + fj] += c * (wi * wj);
                    }
                }
            }
        }
        inverse_real(&fine, m)
    }

    /// Values of the trigonometric interpolant of `f` at the fine nodes.
    pub fn prolong(&self, f: &ScalarField) -> Vec<f64> {
        self.prolong_coefficients(&f.coefficients())
    }

    /// Exact adjoint of `prolong` under mean inner products on both grids.
    pub fn adjoint(&self, fine: &[f64], grid: TorusGrid) -> ScalarField {
        let (n, m) = (self.n, self.m);
        let w = forward(fine, m);
        let mut c = vec![Complex64::new(0.0, 0.0); n * n];
        for i in 0..n {
            let ti = self.targets(i);
            for j in 0..n {
                let tj = self.targets(j);
                let mut acc = Complex64::new(0.0, 0.0);
                for &(fi, wi) in ti.iter().filter(|t| t.1 > 0.0) {
                    for &(fj, wj) in tj.iter().filter(|t| t.1 > 0.0) {
                        acc += w[fi * m + fj] * (wi * wj);
                    }
                }
                c[i * n + j] = acc;
            }
        }
        ScalarField::from_coefficients(grid, &c)
    }
}
