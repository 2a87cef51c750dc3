//! Blow-up lower bound, glued bubble/Green test functions, their energy expansion,
//! and the existence verdict.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TodaError};
use crate::fields::{toda_condition, TrigPoly, H_FLOOR_REL};
use crate::functional::{normalize, FieldPair, RhoPair, Weight};
use crate::geometry::{
    green_exact, green_regular, green_regular_grad, green_scalar, robin_exact, torus_delta, torus_dist, wrap_unit,
    Point, ScalarField, TorusGrid,
};

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct LowerBound {
    pub value: f64,
    pub p1: Point,
    pub p2: Point,
    /// max of [2 log h1(p1) + A1] + [2 log h2(p2) + A2]
    pub bracket: f64,
    pub a1: f64,
    pub a2: f64,
}

/// -8 pi - 8 pi log pi - 2 pi bracket.
pub fn bound_from_bracket(bracket: f64) -> f64 {
    -8.0 * PI - 8.0 * PI * PI.ln() - 2.0 * PI * bracket
}

/// (A1, A2) at the pair from the pointwise Green function.
pub fn pair_constants(p1: Point, p2: Point) -> (f64, f64) {
    let r = robin_exact();
    let g = green_exact(torus_delta(p1, p2));
    (8.0 * PI * r - 4.0 * PI * g, 8.0 * PI * r - 4.0 * PI * g)
}

fn exact_bracket(h1: &TrigPoly, h2: &TrigPoly, p1: Point, p2: Point) -> f64 {
    let (a, b) = (h1.eval(p1), h2.eval(p2));
    if !(a > 0.0 && b > 0.0) || torus_dist(p1, p2) < 1e-9 {
        return f64::NEG_INFINITY;
    }
    let (a1, a2) = pair_constants(p1, p2);
    2.0 * a.ln() + a1 + 2.0 * b.ln() + a2
}

fn admissible(h: &ScalarField, stride: usize) -> Result<Vec<(usize, usize, f64)>> {
    let n = h.n();
    let top = h.max();
    if !(top > 0.0) {
        return Err(TodaError::EmptyPositiveSet);
    }
    let floor = H_FLOOR_REL * top;
    let mut out = Vec::new();
    for i in (0..n).step_by(stride) {
        for j in (0..n).step_by(stride) {
            let v = h.at(i, j);
            if v > 0.0 && v >= floor {
                out.push((i, j, 2.0 * v.ln()));
            }
        }
    }
    Ok(out)
}

/// Joint maximisation over node pairs of M1+ x M2+ with a band-limited G table, then
/// compass-search refinement with exact h and the pointwise Green function.
/// Ties go to the lexicographically smallest node pair.
pub fn lower_bound(h1: &TrigPoly, h2: &TrigPoly, grid: TorusGrid) -> Result<LowerBound> {
    let n = grid.n();
    let stride = (n / 128).max(1);
    let f1 = ScalarField::new(grid, h1.sample(n))?;
    let f2 = ScalarField::new(grid, h2.sample(n))?;
    let s1 = admissible(&f1, stride)?;
    let s2 = admissible(&f2, stride)?;
    let table = green_scalar(grid, [0.0, 0.0]);
    let (g, robin) = (table.field, table.robin);
    let best: Vec<(f64, usize)> = s1
        .par_iter()
        .map(|&(i1, j1, l1)| {
            let mut b = (f64::NEG_INFINITY, usize::MAX);
            for (k, &(i2, j2, l2)) in s2.iter().enumerate() {
                if i1 == i2 && j1 == j2 {
                    continue;
                }
                let v = l1 + l2 + 16.0 * PI * robin - 8.0 * PI * g.at((i1 + n - i2) % n, (j1 + n - j2) % n);
                if v > b.0 {
                    b = (v, k);
                }
            }
            b
        })
        .collect();
    let mut top = (f64::NEG_INFINITY, usize::MAX, usize::MAX);
    for (k1, &(v, k2)) in best.iter().enumerate() {
        if v > top.0 {
            top = (v, k1, k2);
        }
    }
    if top.1 == usize::MAX {
        return Err(TodaError::EmptyPositiveSet);
    }
    let (i1, j1, _) = s1[top.1];
    let (i2, j2, _) = s2[top.2];
    let mut x = [grid.node(i1, j1), grid.node(i2, j2)];
    let mut fx = exact_bracket(h1, h2, x[0], x[1]);
    let mut step = grid.spacing() * stride as f64;
    while step > 1e-10 {
        let mut moved = false;
        for c in 0..4 {
            for sgn in [1.0, -1.0] {
                let mut y = x;
                y[c / 2][c % 2] = wrap_unit(y[c / 2][c % 2] + sgn * step);
                let fy = exact_bracket(h1, h2, y[0], y[1]);
                if fy > fx {
                    x = y;
                    fx = fy;
                    moved = true;
                }
            }
        }
        if !moved {
            step *= 0.5;
        }
    }
    let (a1, a2) = pair_constants(x[0], x[1]);
    Ok(LowerBound { value: bound_from_bracket(fx), p1: x[0], p2: x[1], bracket: fx, a1, a2 })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TestFamilyParams {
    pub p1: Point,
    pub p2: Point,
    pub l: f64,
    pub eps_list: Vec<f64>,
}

/// eps = 0.1 * 2^-k, k = 0..9, kept where eps L <= 0.25.
pub fn default_eps_list(l: f64) -> Vec<f64> {
    (0..10).map(|k| 0.1 * 0.5f64.powi(k)).filter(|e| e * l <= 0.25).collect()
}

impl TestFamilyParams {
    pub fn new(p1: Point, p2: Point, l: f64) -> Self {
        Self { p1, p2, l, eps_list: default_eps_list(l) }
    }

    pub fn validate(&self) -> Result<()> {
        let d = torus_dist(self.p1, self.p2);
        if d < 1e-9 {
            return Err(TodaError::NearCoincident(d));
        }
        if !(self.l > 0.0) {
            return Err(TodaError::InvalidInput("L must be positive".into()));
        }
        for &e in &self.eps_list {
            if !(e > 0.0) || e * self.l > 0.25 {
                return Err(TodaError::InvalidInput(format!("eps = {e}: need 0 < eps L <= 0.25")));
            }
            if 2.0 * e * self.l >= d {
                return Err(TodaError::BallOverlap(d));
            }
        }
        Ok(())
    }
}

fn bump(t: f64) -> (f64, f64) {
    if t <= 0.0 {
        return (0.0, 0.0);
    }
    if t >= 1.0 {
        return (1.0, 0.0);
    }
    let a = (-1.0 / t).exp();
    let b = (-1.0 / (1.0 - t)).exp();
    let s = a + b;
    (a / s, a * b * (1.0 / (t * t) + 1.0 / ((1.0 - t) * (1.0 - t))) / (s * s))
}

/// 1 on [0, 1/2], 0 from 1 on, C-infinity in between; returns (value, d/dt).
fn blend(t: f64) -> (f64, f64) {
    let (b, db) = bump(2.0 * t - 1.0);
    (1.0 - b, -2.0 * db)
}

/// The glued family at one eps: bubble of scale eps at p_i blended into
/// G_i = 8 pi G(. - p_i) - 4 pi G(. - p_j) over r in [L eps / 2, L eps].
pub struct TestFunctions<'a> {
    pub h1: &'a TrigPoly,
    pub h2: &'a TrigPoly,
    pub p: [Point; 2],
    /// pi h_i(p_i)
    pub a: [f64; 2],
    pub eps: f64,
    pub l: f64,
}

impl<'a> TestFunctions<'a> {
    pub fn new(h1: &'a TrigPoly, h2: &'a TrigPoly, params: &TestFamilyParams, eps: f64) -> Result<Self> {
        let (v1, v2) = (h1.eval(params.p1), h2.eval(params.p2));
        if !(v1 > 0.0) {
            return Err(TodaError::NegativeHeightDensity(v1));
        }
        if !(v2 > 0.0) {
            return Err(TodaError::NegativeHeightDensity(v2));
        }
        Ok(Self { h1, h2, p: [params.p1, params.p2], a: [PI * v1, PI * v2], eps, l: params.l })
    }

    fn own(&self, r: f64, a: f64) -> (f64, f64) {
        let (s, e2) = (self.l * self.eps, self.eps * self.eps);
        let t = r / s;
        if t <= 0.5 {
            return (-2.0 * (e2 + a * r * r).ln() + 2.0 * a.ln(), -4.0 * a * r / (e2 + a * r * r));
        }
        let (c, dc) = blend(t);
        let w = -2.0 * (e2 / (a * r * r)).ln_1p();
        let dw = 4.0 * e2 / (r * (e2 + a * r * r));
        (-4.0 * r.ln() + c * w, -4.0 / r + c * dw + dc / s * w)
    }

    fn other(&self, r: f64, a: f64) -> (f64, f64) {
        let (s, e2) = (self.l * self.eps, self.eps * self.eps);
        let t = r / s;
        if t <= 0.5 {
            return ((e2 + a * r * r).ln() - a.ln(), 2.0 * a * r / (e2 + a * r * r));
        }
        let (c, dc) = blend(t);
        let w = (e2 / (a * r * r)).ln_1p();
        let dw = -2.0 * e2 / (r * (e2 + a * r * r));
        (2.0 * r.ln() + c * w, 2.0 / r + c * dw + dc / s * w)
    }

    /// (phi_i, grad phi_i) at x for component i in {0, 1}.
    pub fn eval(&self, x: Point, i: usize) -> (f64, [f64; 2]) {
        let j = 1 - i;
        let di = torus_delta(x, self.p[i]);
        let dj = torus_delta(x, self.p[j]);
        let (gi, gj) = (green_regular(di), green_regular(dj));
        let (ggi, ggj) = (green_regular_grad(di), green_regular_grad(dj));
        let mut v = 8.0 * PI * gi - 4.0 * PI * gj;
        let mut g = [8.0 * PI * ggi[0] - 4.0 * PI * ggj[0], 8.0 * PI * ggi[1] - 4.0 * PI * ggj[1]];
        for (d, (f, df)) in [(di, self.own(di[0].hypot(di[1]), self.a[i])), (dj, self.other(dj[0].hypot(dj[1]), self.a[j]))] {
            let r = d[0].hypot(d[1]);
            v += f;
            if r > 0.0 {
                g[0] += df * d[0] / r;
                g[1] += df * d[1] / r;
            }
        }
        (v, g)
    }

    /// Both components and their gradients, sharing the Green evaluations.
    fn eval_pair(&self, x: Point) -> [(f64, [f64; 2]); 2] {
        let d = [torus_delta(x, self.p[0]), torus_delta(x, self.p[1])];
        let g = [green_regular(d[0]), green_regular(d[1])];
        let gg = [green_regular_grad(d[0]), green_regular_grad(d[1])];
        let r = [d[0][0].hypot(d[0][1]), d[1][0].hypot(d[1][1])];
        let mut out = [(0.0, [0.0; 2]); 2];
        for i in 0..2 {
            let j = 1 - i;
            let mut v = 8.0 * PI * g[i] - 4.0 * PI * g[j];
            let mut gr = [8.0 * PI * gg[i][0] - 4.0 * PI * gg[j][0], 8.0 * PI * gg[i][1] - 4.0 * PI * gg[j][1]];
            for (k, (f, df)) in [(i, self.own(r[i], self.a[i])), (j, self.other(r[j], self.a[j]))] {
                v += f;
                if r[k] > 0.0 {
                    gr[0] += df * d[k][0] / r[k];
                    gr[1] += df * d[k][1] / r[k];
                }
            }
            out[i] = (v, gr);
        }
        out
    }
}

/// Sample the family on the grid and normalise it into H.
pub fn build_test_functions(h1: &TrigPoly, h2: &TrigPoly, params: &TestFamilyParams, eps: f64, grid: TorusGrid) -> Result<FieldPair> {
    params.validate()?;
    let tf = TestFunctions::new(h1, h2, params, eps)?;
    let n = grid.n();
    let vals: Vec<[f64; 2]> = (0..n * n)
        .into_par_iter()
        .map(|k| {
            let e = tf.eval_pair(grid.node(k / n, k % n));
            [e[0].0, e[1].0]
        })
        .collect();
    let u1 = ScalarField::new(grid, vals.iter().map(|v| v[0]).collect())?;
    let u2 = ScalarField::new(grid, vals.iter().map(|v| v[1]).collect())?;
    let state = FieldPair { u1, u2 };
    let (w1, w2) = (Weight::from_trig(h1, grid), Weight::from_trig(h2, grid));
    let c = crate::functional::constraint_values(&state, &w1, &w2);
    if !(c.log_i1.is_finite()) {
        return Err(TodaError::InfeasibleTestFunction(1, c.i1));
    }
    if !(c.log_i2.is_finite()) {
        return Err(TodaError::InfeasibleTestFunction(2, c.i2));
    }
    normalize(&state, &w1, &w2)
}

/// Gauss-Legendre nodes and weights on [-1, 1].
fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for k in 0..n {
        let mut z = (PI * (k as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for m in 2..=n {
                let p2 = ((2 * m - 1) as f64 * z * p1 - (m - 1) as f64 * p0) / m as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        x[k] = z;
        w[k] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
    (x, w)
}

const PATCH_RADIUS: f64 = 0.3;
const GL_NODES: usize = 12;
const ANGLES: usize = 64;
const CART: usize = 256;

/// Composite rule on the torus: graded polar patches around p1, p2 weighted by a
/// partition of unity, midpoint rule elsewhere.
struct Quadrature {
    pts: Vec<Point>,
    w: Vec<f64>,
}

fn quadrature(p: [Point; 2], s: f64) -> Quadrature {
    let rp = PATCH_RADIUS.min(0.49 * torus_dist(p[0], p[1]));
    let chi = |r: f64| blend(r / rp).0;
    let (xg, wg) = gauss_legendre(GL_NODES);
    let mut br = vec![0.0];
    for k in (1..=12).rev() {
        br.push(s * 0.5f64.powi(k));
    }
    br.push(0.75 * s);
    br.push(s);
    br.retain(|&b| b < rp);
    let mut r = *br.last().unwrap();
    while r < rp {
        r = (r * 1.6).min(rp);
        br.push(r);
    }
    let mut q = Quadrature { pts: Vec::new(), w: Vec::new() };
    for c in p {
        for seg in br.windows(2) {
            let (a, b) = (seg[0], seg[1]);
            for (xk, wk) in xg.iter().zip(&wg) {
                let rk = 0.5 * (b - a) * xk + 0.5 * (a + b);
                let wr = 0.5 * (b - a) * wk * rk * 2.0 * PI / ANGLES as f64 * chi(rk);
                if wr == 0.0 {
                    continue;
                }
                for t in 0..ANGLES {
                    let th = 2.0 * PI * t as f64 / ANGLES as f64;
                    q.pts.push([c[0] + rk * th.cos(), c[1] + rk * th.sin()]);
                    q.w.push(wr);
                }
            }
        }
    }
    let h = 1.0 / CART as f64;
    for i in 0..CART {
        for j in 0..CART {
            let x = [(j as f64 + 0.5) * h, (i as f64 + 0.5) * h];
            let mut wt = h * h;
            for c in p {
                let d = torus_dist(x, c);
                if d < rp {
                    wt *= 1.0 - chi(d);
                }
            }
            if wt > 0.0 {
                q.pts.push(x);
                q.w.push(wt);
            }
        }
    }
    q
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct FamilyEnergy {
    pub eps: f64,
    /// free form (1/3) Q + sum rho_i (mean phi_i - log int h_i e^{phi_i})
    pub j: f64,
    pub energy: f64,
    pub mean1: f64,
    pub mean2: f64,
    pub log_i1: f64,
    pub log_i2: f64,
}

/// The functional at (rho1, rho2) on the continuum family, by composite quadrature.
pub fn family_energy(h1: &TrigPoly, h2: &TrigPoly, params: &TestFamilyParams, eps: f64, rho: RhoPair) -> Result<FamilyEnergy> {
    let tf = TestFunctions::new(h1, h2, params, eps)?;
    let q = quadrature(tf.p, params.l * eps);
    let terms: Vec<[f64; 5]> = q
        .pts
        .par_iter()
        .zip(q.w.par_iter())
        .map(|(&x, &w)| {
            let [(f1, g1), (f2, g2)] = tf.eval_pair(x);
            let e = g1[0] * g1[0] + g1[1] * g1[1] + g1[0] * g2[0] + g1[1] * g2[1] + g2[0] * g2[0] + g2[1] * g2[1];
            [w * e, w * f1, w * f2, w * h1.eval(x) * f1.exp(), w * h2.eval(x) * f2.exp()]
        })
        .collect();
    let mut s = [0.0; 5];
    for t in &terms {
        for k in 0..5 {
            s[k] += t[k];
        }
    }
    if !(s[3] > 0.0) {
        return Err(TodaError::InfeasibleTestFunction(1, s[3]));
    }
    if !(s[4] > 0.0) {
        return Err(TodaError::InfeasibleTestFunction(2, s[4]));
    }
    let (l1, l2) = (s[3].ln(), s[4].ln());
    let j = s[0] / 3.0 + rho.rho1 * (s[1] - l1) + rho.rho2 * (s[2] - l2);
    if !j.is_finite() {
        return Err(TodaError::NonFinite);
    }
    Ok(FamilyEnergy { eps, j, energy: s[0], mean1: s[1], mean2: s[2], log_i1: l1, log_i2: l2 })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExpansionFit {
    pub c0: f64,
    /// coefficient of eps^2 (-log eps^2)
    pub c1: f64,
    /// coefficient of the eps^2 nuisance term
    pub c2: f64,
    pub fit_residual: f64,
    pub condition: f64,
    pub samples: Vec<FamilyEnergy>,
}

/// Least squares of J on [1, eps^2 (-log eps^2), eps^2].
pub fn fit_samples(samples: &[FamilyEnergy]) -> Result<ExpansionFit> {
    let eps: Vec<f64> = samples.iter().map(|s| s.eps).collect();
    if eps.len() < 5 {
        return Err(TodaError::InvalidInput("need at least 5 eps samples".into()));
    }
    let (lo, hi) = eps.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &e| (a.min(e), b.max(e)));
    if hi < 10.0 * lo {
        return Err(TodaError::InvalidInput("eps samples must span a decade".into()));
    }
    let m = eps.len();
    let mut a = DMatrix::zeros(m, 3);
    for (k, &e) in eps.iter().enumerate() {
        let e2 = e * e;
        a[(k, 0)] = 1.0;
        a[(k, 1)] = -e2 * e2.ln();
        a[(k, 2)] = e2;
    }
    let b = DVector::from_iterator(m, samples.iter().map(|s| s.j));
    // condition number of the column-equilibrated design
    let mut scaled = a.clone();
    for c in 0..3 {
        let nrm = scaled.column(c).norm();
        scaled.column_mut(c).scale_mut(1.0 / nrm);
    }
    let sv = scaled.singular_values();
    let condition = sv.max() / sv.min();
    if !(condition <= 1e8) {
        return Err(TodaError::IllConditionedFit(condition));
    }
    let svd = a.clone().svd(true, true);
    let x = svd.solve(&b, 1e-300).map_err(|e| TodaError::InvalidInput(e.to_string()))?;
    let fit_residual = (&a * &x - &b).norm() / (m as f64).sqrt();
    Ok(ExpansionFit { c0: x[0], c1: x[1], c2: x[2], fit_residual, condition, samples: samples.to_vec() })
}

pub fn family_samples(h1: &TrigPoly, h2: &TrigPoly, params: &TestFamilyParams, rho: RhoPair) -> Result<Vec<FamilyEnergy>> {
    params.validate()?;
    params.eps_list.iter().map(|&e| family_energy(h1, h2, params, e, rho)).collect()
}

pub fn fit_expansion(h1: &TrigPoly, h2: &TrigPoly, params: &TestFamilyParams) -> Result<ExpansionFit> {
    fit_samples(&family_samples(h1, h2, params, RhoPair::unchecked(4.0 * PI, 4.0 * PI))?)
}

/// c0 predicted at the pair: -8 pi - 8 pi log pi - sum_i (4 pi log h_i(p_i) + 2 pi A_i).
pub fn predicted_c0(h1: &TrigPoly, h2: &TrigPoly, p1: Point, p2: Point) -> f64 {
    let (a1, a2) = pair_constants(p1, p2);
    -8.0 * PI - 8.0 * PI * PI.ln() - (4.0 * PI * h1.eval(p1).ln() + 2.0 * PI * a1) - (4.0 * PI * h2.eval(p2).ln() + 2.0 * PI * a2)
}

/// -sum_i [Lap log h_i(p_i) + 4 pi] (flat metric, K = 0).
pub fn predicted_c1(h1: &TrigPoly, h2: &TrigPoly, p1: Point, p2: Point) -> f64 {
    -(h1.laplacian_log(p1) + 4.0 * PI) - (h2.laplacian_log(p2) + 4.0 * PI)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExistenceVerdict {
    pub condition_holds: [bool; 2],
    pub min_margin: [f64; 2],
    pub lower_bound: LowerBound,
    pub min_j: f64,
    pub strict_gap: f64,
    pub predicts_minimizer: bool,
    pub fit: Option<ExpansionFit>,
}

pub fn verdict(h1: &TrigPoly, h2: &TrigPoly, grid: TorusGrid) -> Result<ExistenceVerdict> {
    let c1 = toda_condition(h1, grid)?;
    let c2 = toda_condition(h2, grid)?;
    let lb = lower_bound(h1, h2, grid)?;
    let params = TestFamilyParams::new(lb.p1, lb.p2, 10.0);
    let samples = family_samples(h1, h2, &params, RhoPair::unchecked(4.0 * PI, 4.0 * PI))?;
    let min_j = samples.iter().map(|s| s.j).fold(f64::INFINITY, f64::min);
    let strict_gap = lb.value - min_j;
    let fit = fit_samples(&samples).ok();
    Ok(ExistenceVerdict {
        condition_holds: [c1.holds, c2.holds],
        min_margin: [c1.min_margin, c2.min_margin],
        lower_bound: lb,
        min_j,
        strict_gap,
        predicts_minimizer: c1.holds && c2.holds && strict_gap > 0.0,
        fit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_degree_23() {
        let (x, w) = gauss_legendre(12);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(22)).sum();
        assert!((s - 2.0 / 23.0).abs() < 1e-14);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn blend_derivative_matches_difference() {
        for t in [0.55, 0.7, 0.9, 0.97] {
            let h = 1e-6;
            let fd = (blend(t + h).0 - blend(t - h).0) / (2.0 * h);
            assert!((fd - blend(t).1).abs() < 1e-6, "t {t}");
        }
        assert_eq!(blend(0.3), (1.0, 0.0));
        assert_eq!(blend(1.2), (0.0, 0.0));
    }

    #[test]
    fn quadrature_weights_sum_to_area() {
        let q = quadrature([[0.1, 0.2], [0.6, 0.7]], 0.05);
        assert!((q.w.iter().sum::<f64>() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn test_function_gradient_matches_difference() {
        let h = TrigPoly::constant(1.0).with_term(1, 0, 0.2, 0.0);
        let params = TestFamilyParams::new([0.2, 0.3], [0.7, 0.6], 10.0);
        let tf = TestFunctions::new(&h, &h, &params, 0.01).unwrap();
        for x in [[0.26, 0.31], [0.2 + 0.08, 0.3], [0.5, 0.5], [0.7, 0.66]] {
            for i in 0..2 {
                let (_, g) = tf.eval(x, i);
                let d = 1e-7;
                let fx = (tf.eval([x[0] + d, x[1]], i).0 - tf.eval([x[0] - d, x[1]], i).0) / (2.0 * d);
                let fy = (tf.eval([x[0], x[1] + d], i).0 - tf.eval([x[0], x[1] - d], i).0) / (2.0 * d);
                assert!((fx - g[0]).abs() < 1e-5 * (1.0 + g[0].abs()) && (fy - g[1]).abs() < 1e-5 * (1.0 + g[1].abs()));
                assert_eq!(tf.eval_pair(x)[i].0, tf.eval(x, i).0);
            }
        }
    }
}
