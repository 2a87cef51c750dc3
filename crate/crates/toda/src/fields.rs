//! Prescribed functions h_i as trigonometric polynomials, positivity sets and pointwise conditions.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TodaError};
use crate::geometry::{Point, ScalarField, TorusGrid};

/// Relative floor below which nodes of M+ are left out of the condition check.
pub const H_FLOOR_REL: f64 = 1e-3;

/// One record c cos(2 pi k.x) + s sin(2 pi k.x).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrigTerm {
    pub k1: i32,
    pub k2: i32,
    #[serde(rename = "cos")]
    pub c: f64,
    #[serde(rename = "sin", default)]
    pub s: f64,
}

/// Real trigonometric polynomial, stored as Hermitian exponential coefficients.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<TrigTerm>", into = "Vec<TrigTerm>")]
pub struct TrigPoly {
    coef: BTreeMap<(i32, i32), Complex64>,
}

impl From<Vec<TrigTerm>> for TrigPoly {
    fn from(terms: Vec<TrigTerm>) -> Self {
        Self::from_terms(&terms)
    }
}

impl From<TrigPoly> for Vec<TrigTerm> {
    fn from(p: TrigPoly) -> Self {
        p.terms()
    }
}

fn canonical(k: (i32, i32)) -> bool {
    k.0 > 0 || (k.0 == 0 && k.1 > 0)
}

impl TrigPoly {
    pub fn zero() -> Self {
        Self { coef: BTreeMap::new() }
    }

    pub fn constant(c: f64) -> Self {
        let mut p = Self::zero();
        p.add_exp((0, 0), Complex64::new(c, 0.0));
        p
    }

    pub fn from_terms(terms: &[TrigTerm]) -> Self {
        let mut p = Self::zero();
        for t in terms {
            p.add_term(t.k1, t.k2, t.c, t.s);
        }
        p
    }

    /// Adds c cos(2 pi k.x) + s sin(2 pi k.x).
    pub fn add_term(&mut self, k1: i32, k2: i32, c: f64, s: f64) {
        if k1 == 0 && k2 == 0 {
            self.add_exp((0, 0), Complex64::new(c, 0.0));
            return;
        }
        let z = Complex64::new(c, -s) * 0.5;
        self.add_exp((k1, k2), z);
        self.add_exp((-k1, -k2), z.conj());
    }

    pub fn with_term(mut self, k1: i32, k2: i32, c: f64, s: f64) -> Self {
        self.add_term(k1, k2, c, s);
        self
    }

    fn add_exp(&mut self, k: (i32, i32), z: Complex64) {
        let e = self.coef.entry(k).or_insert(Complex64::new(0.0, 0.0));
        *e += z;
        if *e == Complex64::new(0.0, 0.0) {
            self.coef.remove(&k);
        }
    }

    /// Records in canonical half-plane order; the constant has k = (0, 0).
    pub fn terms(&self) -> Vec<TrigTerm> {
        let mut out = Vec::new();
        for (&k, &z) in &self.coef {
            if k == (0, 0) {
                if z.re != 0.0 {
                    out.push(TrigTerm { k1: 0, k2: 0, c: z.re, s: 0.0 });
                }
            } else if canonical(k) && z.norm() > 0.0 {
                out.push(TrigTerm { k1: k.0, k2: k.1, c: 2.0 * z.re, s: -2.0 * z.im });
            }
        }
        out
    }

    pub fn kmax(&self) -> i32 {
        self.coef
            .iter()
            .filter(|(_, z)| z.norm() > 0.0)
            .map(|(k, _)| k.0.abs().max(k.1.abs()))
            .max()
            .unwrap_or(0)
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut p = self.clone();
        for (&k, &z) in &other.coef {
            p.add_exp(k, z);
        }
        p
    }

    pub fn scale(&self, a: f64) -> Self {
        Self { coef: self.coef.iter().map(|(&k, &z)| (k, z * a)).collect() }
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut p = Self::zero();
        for (&a, &x) in &self.coef {
            for (&b, &y) in &other.coef {
                p.add_exp((a.0 + b.0, a.1 + b.1), x * y);
            }
        }
        p
    }

    pub fn powi(&self, e: u32) -> Self {
        let mut p = Self::constant(1.0);
        for _ in 0..e {
            p = p.mul(self);
        }
        p
    }

    /// Translate: returns x -> h(x - a).
    pub fn translate(&self, a: Point) -> Self {
        Self {
            coef: self
                .coef
                .iter()
                .map(|(&k, &z)| {
                    let ph = -2.0 * PI * (k.0 as f64 * a[0] + k.1 as f64 * a[1]);
                    (k, z * Complex64::new(ph.cos(), ph.sin()))
                })
                .collect(),
        }
    }

    /// exp(-a cos(2 pi x^1)) truncated at |k| <= kmax via modified Bessel coefficients.
    pub fn exp_cos_x(a: f64, kmax: i32) -> Self {
        let mut p = Self::constant(bessel_i(0, a));
        for m in 1..=kmax {
            let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
            p.add_term(m, 0, 2.0 * sign * bessel_i(m as u32, a), 0.0);
        }
        p
    }

    fn axis_tables(&self, p: Point) -> (i32, Vec<Complex64>, Vec<Complex64>) {
        let km = self.kmax();
        let table = |t: f64| -> Vec<Complex64> {
            (-km..=km)
                .map(|k| {
                    let a = 2.0 * PI * k as f64 * t;
                    Complex64::new(a.cos(), a.sin())
                })
                .collect()
        };
        (km, table(p[0]), table(p[1]))
    }

    pub fn eval(&self, p: Point) -> f64 {
        self.eval_derivs(p).0
    }

    /// (h, grad h, Lap h) at p, exactly.
    pub fn eval_derivs(&self, p: Point) -> (f64, [f64; 2], f64) {
        let (km, ex, ey) = self.axis_tables(p);
        let mut h = 0.0;
        let mut g = [0.0; 2];
        let mut lap = 0.0;
        for (&k, &z) in &self.coef {
            if k.0.abs() > km || k.1.abs() > km {
                continue;
            }
            let w = z * ex[(k.0 + km) as usize] * ey[(k.1 + km) as usize];
            h += w.re;
            g[0] -= 2.0 * PI * k.0 as f64 * w.im;
            g[1] -= 2.0 * PI * k.1 as f64 * w.im;
            lap -= 4.0 * PI * PI * ((k.0 * k.0 + k.1 * k.1) as f64) * w.re;
        }
        (h, g, lap)
    }

    /// Delta log h at p (h(p) must be > 0).
    pub fn laplacian_log(&self, p: Point) -> f64 {
        let (h, g, lap) = self.eval_derivs(p);
        lap / h - (g[0] * g[0] + g[1] * g[1]) / (h * h)
    }

    /// Samples on an m x m grid, row-major with node (i, j) at (j/m, i/m).
    pub fn sample(&self, m: usize) -> Vec<f64> {
        let km = self.kmax();
        let table = |j: usize| -> Vec<Complex64> {
            (-km..=km)
                .map(|k| {
                    let a = 2.0 * PI * k as f64 * j as f64 / m as f64;
                    Complex64::new(a.cos(), a.sin())
                })
                .collect()
        };
        let tabs: Vec<Vec<Complex64>> = (0..m).map(table).collect();
        let coef: Vec<((i32, i32), Complex64)> = self.coef.iter().map(|(&k, &z)| (k, z)).collect();
        let mut out = Vec::with_capacity(m * m);
        for i in 0..m {
            let ey = &tabs[i];
            for j in 0..m {
                let ex = &tabs[j];
                let mut h = 0.0;
                for &(k, z) in &coef {
                    h += (z * ex[(k.0 + km) as usize] * ey[(k.1 + km) as usize]).re;
                }
                out.push(h);
            }
        }
        out
    }
}

/// Modified Bessel function I_n(x) by its power series.
pub fn bessel_i(n: u32, x: f64) -> f64 {
    let half = 0.5 * x;
    let mut term = 1.0;
    for k in 1..=n {
        term *= half / k as f64;
    }
    let mut s = term;
    for k in 1..200 {
        term *= half * half / (k as f64 * (k + n) as f64);
        s += term;
        if term < 1e-18 * s {
            break;
        }
    }
    s
}

pub fn eval_h(h: &TrigPoly, grid: TorusGrid) -> ScalarField {
    ScalarField::new(grid, h.sample(grid.n())).expect("sample size matches grid")
}

#[derive(Clone, Debug, PartialEq)]
pub struct PositivityMask {
    pub mask: Vec<bool>,
    pub fraction_positive: f64,
}

pub fn positive_set(h: &ScalarField) -> Result<PositivityMask> {
    let mask: Vec<bool> = h.values().iter().map(|&v| v > 0.0).collect();
    let count = mask.iter().filter(|&&m| m).count();
    if count == 0 {
        return Err(TodaError::EmptyPositiveSet);
    }
    Ok(PositivityMask { fraction_positive: count as f64 / mask.len() as f64, mask })
}

#[derive(Clone, Debug)]
pub struct ConditionReport {
    pub holds: bool,
    /// Margin per node; NaN off M+.
    pub margin: Vec<f64>,
    pub mask: PositivityMask,
    /// Min margin over checked nodes and its location.
    pub min_margin: f64,
    pub argmin: Point,
    pub h_floor: f64,
    /// Nodes of M+ with h < h_floor, left out of the check.
    pub excluded: usize,
    pub checked: usize,
}

fn condition(h: &TrigPoly, constant: f64, grid: TorusGrid) -> Result<ConditionReport> {
    let field = eval_h(h, grid);
    let mask = positive_set(&field)?;
    let floor = H_FLOOR_REL * field.max();
    let n = grid.n();
    let mut margin = vec![f64::NAN; n * n];
    let mut min_margin = f64::INFINITY;
    let mut argmin = [0.0, 0.0];
    let (mut excluded, mut checked) = (0, 0);
    for i in 0..n {
        for j in 0..n {
            let k = i * n + j;
            if !mask.mask[k] {
                continue;
            }
            let p = grid.node(i, j);
            let m = h.laplacian_log(p) + constant;
            margin[k] = m;
            if field.values()[k] < floor {
                excluded += 1;
                continue;
            }
            checked += 1;
            if m < min_margin {
                min_margin = m;
                argmin = p;
            }
        }
    }
    Ok(ConditionReport {
        holds: min_margin > 0.0,
        margin,
        mask,
        min_margin,
        argmin,
        h_floor: floor,
        excluded,
        checked,
    })
}

/// Delta log h + 4 pi - 2K (K = 0) on the h_floor-truncated positive set.
pub fn toda_condition(h: &TrigPoly, grid: TorusGrid) -> Result<ConditionReport> {
    condition(h, 4.0 * PI, grid)
}

/// Delta log h + 8 pi - rho2 - 2K; rho2_equiv = 0 gives the scalar Kazdan-Warner condition.
pub fn scalar_condition(h: &TrigPoly, rho2_equiv: f64, grid: TorusGrid) -> Result<ConditionReport> {
    condition(h, 8.0 * PI - rho2_equiv, grid)
}
