//! Subcritical minimisation at rho = 4 pi - eps, continuation in eps, blow-up classification.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TodaError};
use crate::fields::TrigPoly;
use crate::functional::{
    self, constraint_values, el_residual, exp_quadrature, log_i_increment, normalize, FieldPair, RhoPair,
    Weight,
};
use crate::geometry::{
    dirichlet_energy, dirichlet_energy_pair, helmholtz_inverse, laplacian, Point, ScalarField, TorusGrid,
};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct SolveOptions {
    pub max_iters: usize,
    pub grad_tol: f64,
    pub history: usize,
    pub armijo_c1: f64,
    pub backtrack: f64,
    pub max_backtracks: usize,
    pub seed: u64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            max_iters: 3000,
            grad_tol: 1e-8,
            history: 10,
            armijo_c1: 1e-4,
            backtrack: 0.5,
            max_backtracks: 60,
            seed: 0,
        }
    }
}

impl SolveOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.grad_tol > 0.0) || self.max_iters < 1 || self.history < 1 {
            return Err(TodaError::InvalidInput("solver options: need grad_tol > 0, max_iters >= 1, history >= 1".into()));
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) || !(self.armijo_c1 > 0.0 && self.armijo_c1 < 1.0) {
            return Err(TodaError::InvalidInput("solver options: line-search factors must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct SolveResult {
    pub state: FieldPair,
    pub f_value: f64,
    pub el_residual: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    /// F_free at every accepted iterate, starting with the initial state.
    pub f_trace: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct ScalarSolveResult {
    pub state: ScalarField,
    pub f_value: f64,
    pub residual: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub f_trace: Vec<f64>,
}

struct Outcome {
    x: Vec<f64>,
    grad_norm: f64,
    iterations: usize,
    converged: bool,
    trace: Vec<f64>,
}

/// What the optimiser needs from a functional. `increment` returns F(x + s) - F(x)
/// computed from the cache at x, which stays accurate long after F(x + s) and F(x)
/// agree to every printed digit.
trait Objective {
    type Cache;
    fn eval(&self, x: &[f64]) -> Option<(f64, Vec<f64>, Self::Cache)>;
    fn increment(&self, cache: &Self::Cache, s: &[f64]) -> Option<f64>;
    fn precond(&self, v: &[f64]) -> Vec<f64>;
    fn dot(&self, a: &[f64], b: &[f64]) -> f64;
}

/// Limited-memory BFGS with a fixed preconditioner and Armijo backtracking.
/// Trial points that are infeasible, or that fail to lower F strictly, are rejected.
fn lbfgs<O: Objective>(obj: &O, x0: Vec<f64>, opts: &SolveOptions) -> Option<Outcome> {
    let (mut f, mut g, mut cache) = obj.eval(&x0)?;
    let mut x = x0;
    let mut gn = obj.dot(&g, &g).sqrt();
    let mut trace = vec![f];
    let mut hist: Vec<(Vec<f64>, Vec<f64>, f64)> = Vec::new();
    let mut it = 0;
    while it < opts.max_iters && gn > opts.grad_tol {
        it += 1;
        // two-loop recursion
        let mut q = g.clone();
        let mut alphas = Vec::with_capacity(hist.len());
        for (s, y, r) in hist.iter().rev() {
            let a = r * obj.dot(s, &q);
            for (qi, yi) in q.iter_mut().zip(y) {
                *qi -= a * yi;
            }
            alphas.push(a);
        }
        let mut z = obj.precond(&q);
        if let Some((s, y, _)) = hist.last() {
            let gamma = obj.dot(s, y) / obj.dot(y, &obj.precond(y));
            for zi in z.iter_mut() {
                *zi *= gamma;
            }
        }
        for ((s, y, r), a) in hist.iter().zip(alphas.iter().rev()) {
            let b = r * obj.dot(y, &z);
            for (zi, si) in z.iter_mut().zip(s) {
                *zi += (a - b) * si;
            }
        }
        let mut d: Vec<f64> = z.iter().map(|v| -v).collect();
        let mut slope = obj.dot(&g, &d);
        if !(slope < 0.0) {
            hist.clear();
            d = obj.precond(&g).iter().map(|v| -v).collect();
            slope = obj.dot(&g, &d);
        }
        let mut step = if hist.is_empty() { (1.0f64).min(1.0 / obj.dot(&d, &d).sqrt().max(1e-300)) } else { 1.0 };
        let mut accepted = None;
        for _ in 0..opts.max_backtracks {
            let s: Vec<f64> = d.iter().map(|v| step * v).collect();
            if let Some(df) = obj.increment(&cache, &s) {
                if df < 0.0 && df <= opts.armijo_c1 * step * slope {
                    let xt: Vec<f64> = x.iter().zip(&s).map(|(a, b)| a + b).collect();
                    if let Some(e) = obj.eval(&xt) {
                        accepted = Some((xt, s, df, e));
                        break;
                    }
                }
            }
            step *= opts.backtrack;
        }
        let Some((xt, s, df, (_, gt, ct))) = accepted else {
            if hist.is_empty() {
                break;
            }
            hist.clear();
            continue;
        };
        let y: Vec<f64> = gt.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = obj.dot(&s, &y);
        if sy > 0.0 {
            if hist.len() == opts.history {
                hist.remove(0);
            }
            hist.push((s, y, 1.0 / sy));
        }
        x = xt;
        f += df;
        g = gt;
        cache = ct;
        gn = obj.dot(&g, &g).sqrt();
        trace.push(f);
    }
    Some(Outcome { x, grad_norm: gn, iterations: it, converged: gn <= opts.grad_tol, trace })
}

struct PairProblem<'a> {
    h1: &'a Weight,
    h2: &'a Weight,
    rho: RhoPair,
    grid: TorusGrid,
}

struct PairCache {
    q1: functional::ExpQuad,
    q2: functional::ExpQuad,
    /// energy part of the gradient, packed
    ge: Vec<f64>,
}

impl Objective for PairProblem<'_> {
    type Cache = PairCache;

    fn eval(&self, x: &[f64]) -> Option<(f64, Vec<f64>, PairCache)> {
        let s = unpack(self.grid, x);
        let q1 = exp_quadrature(&s.u1, self.h1);
        let q2 = exp_quadrature(&s.u2, self.h2);
        if !q1.feasible() || !q2.feasible() || !s.is_finite() {
            return None;
        }
        let energy = dirichlet_energy_pair(&s.u1, &s.u2).ok()?;
        let f = energy / 3.0
            + self.rho.rho1 * (s.u1.mean() - q1.log_i)
            + self.rho.rho2 * (s.u2.mean() - q2.log_i);
        let l1 = laplacian(&s.u1).ok()?;
        let l2 = laplacian(&s.u2).ok()?;
        let e1 = l1.scale(-2.0 / 3.0).axpy(-1.0 / 3.0, &l2);
        let e2 = l2.scale(-2.0 / 3.0).axpy(-1.0 / 3.0, &l1);
        let g1 = e1.axpy(-self.rho.rho1, &q1.density(self.h1)).shift(self.rho.rho1);
        let g2 = e2.axpy(-self.rho.rho2, &q2.density(self.h2)).shift(self.rho.rho2);
        let ge = pack(&FieldPair { u1: e1, u2: e2 });
        Some((f, pack(&FieldPair { u1: g1, u2: g2 }), PairCache { q1, q2, ge }))
    }

    fn increment(&self, c: &PairCache, s: &[f64]) -> Option<f64> {
        let d = unpack(self.grid, s);
        let de = self.dot(&c.ge, s) + dirichlet_energy_pair(&d.u1, &d.u2).ok()? / 3.0;
        let l1 = log_i_increment(&c.q1, self.h1, &d.u1)?;
        let l2 = log_i_increment(&c.q2, self.h2, &d.u2)?;
        let df = de + self.rho.rho1 * (d.u1.mean() - l1) + self.rho.rho2 * (d.u2.mean() - l2);
        df.is_finite().then_some(df)
    }

    fn precond(&self, v: &[f64]) -> Vec<f64> {
        pack(&unpack(self.grid, v).map(helmholtz_inverse))
    }

    fn dot(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / self.grid.len() as f64
    }
}

struct ScalarProblem<'a> {
    h: &'a Weight,
    rho: f64,
    grid: TorusGrid,
}

impl Objective for ScalarProblem<'_> {
    type Cache = (functional::ExpQuad, Vec<f64>);

    fn eval(&self, x: &[f64]) -> Option<(f64, Vec<f64>, Self::Cache)> {
        let u = ScalarField::new(self.grid, x.to_vec()).ok()?;
        let q = exp_quadrature(&u, self.h);
        if !q.feasible() || !u.is_finite() {
            return None;
        }
        let f = 0.5 * dirichlet_energy(&u) + self.rho * (u.mean() - q.log_i);
        let e = laplacian(&u).ok()?.scale(-1.0);
        let g = e.axpy(-self.rho, &q.density(self.h)).shift(self.rho);
        Some((f, g.into_values(), (q, e.into_values())))
    }

    fn increment(&self, c: &Self::Cache, s: &[f64]) -> Option<f64> {
        let d = ScalarField::new(self.grid, s.to_vec()).ok()?;
        let l = log_i_increment(&c.0, self.h, &d)?;
        let df = self.dot(&c.1, s) + 0.5 * dirichlet_energy(&d) + self.rho * (d.mean() - l);
        df.is_finite().then_some(df)
    }

    fn precond(&self, v: &[f64]) -> Vec<f64> {
        helmholtz_inverse(&ScalarField::new(self.grid, v.to_vec()).expect("sized")).into_values()
    }

    fn dot(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / self.grid.len() as f64
    }
}

fn pack(p: &FieldPair) -> Vec<f64> {
    let mut v = p.u1.values().to_vec();
    v.extend_from_slice(p.u2.values());
    v
}

fn unpack(grid: TorusGrid, v: &[f64]) -> FieldPair {
    let m = grid.len();
    FieldPair {
        u1: ScalarField::new(grid, v[..m].to_vec()).expect("sized"),
        u2: ScalarField::new(grid, v[m..].to_vec()).expect("sized"),
    }
}

/// Minimise F_free at arbitrary rho (used by the subcritical driver).
pub fn minimize_rho(
    h1: &Weight,
    h2: &Weight,
    rho: RhoPair,
    init: &FieldPair,
    opts: &SolveOptions,
) -> Result<SolveResult> {
    opts.validate()?;
    let grid = init.grid();
    if h1.n() != grid.n() || h2.n() != grid.n() {
        return Err(TodaError::GridMismatch(h1.n(), grid.n()));
    }
    if !constraint_values(init, h1, h2).feasible {
        return Err(TodaError::InitInfeasible);
    }
    let start = normalize(init, h1, h2)?;
    let problem = PairProblem { h1, h2, rho, grid };
    let out = lbfgs(&problem, pack(&start), opts).ok_or(TodaError::InitInfeasible)?;
    let state = normalize(&unpack(grid, &out.x), h1, h2)?;
    let resid = functional::el_residual_rho(&state, h1, h2, rho)?;
    Ok(SolveResult {
        f_value: functional::free_energy(&state, h1, h2, rho)?,
        state,
        el_residual: resid,
        grad_norm: out.grad_norm,
        iterations: out.iterations,
        converged: out.converged,
        f_trace: out.trace,
    })
}

pub fn minimize_subcritical(
    h1: &Weight,
    h2: &Weight,
    eps: f64,
    init: &FieldPair,
    opts: &SolveOptions,
) -> Result<SolveResult> {
    if !(eps > 0.0 && eps < 4.0 * PI) {
        return Err(TodaError::InvalidInput(format!("eps = {eps} outside (0, 4pi)")));
    }
    let mut r = minimize_rho(h1, h2, RhoPair::subcritical(eps)?, init, opts)?;
    r.el_residual = el_residual(&r.state, h1, h2, eps)?;
    Ok(r)
}

/// Single-field analogue for -Lap u = rho (h e^u - 1), rho in (0, 8 pi).
pub fn solve_scalar_kw(h: &Weight, rho: f64, init: &ScalarField, opts: &SolveOptions) -> Result<ScalarSolveResult> {
    opts.validate()?;
    if !(rho > 0.0 && rho < 8.0 * PI) {
        return Err(TodaError::InvalidInput(format!("rho = {rho} outside (0, 8pi)")));
    }
    if !h.coarse.values().iter().any(|&v| v > 0.0) {
        return Err(TodaError::EmptyPositiveSet);
    }
    let grid = init.grid();
    if !exp_quadrature(init, h).feasible() {
        return Err(TodaError::InitInfeasible);
    }
    let start = functional::scalar::normalize(init, h)?;
    let problem = ScalarProblem { h, rho, grid };
    let out = lbfgs(&problem, start.values().to_vec(), opts).ok_or(TodaError::InitInfeasible)?;
    let state = functional::scalar::normalize(&ScalarField::new(grid, out.x)?, h)?;
    let residual = functional::scalar::residual(&state, h, rho)?;
    Ok(ScalarSolveResult {
        f_value: functional::scalar::free_energy(&state, h, rho)?,
        state,
        residual,
        grad_norm: out.grad_norm,
        iterations: out.iterations,
        converged: out.converged,
        f_trace: out.trace,
    })
}

/// e^u is a bump centred at the maximum of h: u = a (cos 2pi(x-x0) + cos 2pi(y-y0)).
/// The amplitude grows until int h e^u > 0; zero field if nothing works.
pub fn default_init(h: &Weight) -> ScalarField {
    let grid = h.coarse.grid();
    let (_, k) = h.coarse.argmax();
    let n = grid.n();
    let c = grid.node(k / n, k % n);
    let bump = ScalarField::from_fn(grid, |p| {
        (2.0 * PI * (p[0] - c[0])).cos() + (2.0 * PI * (p[1] - c[1])).cos()
    });
    if exp_quadrature(&ScalarField::zeros(grid), h).feasible() {
        return ScalarField::zeros(grid);
    }
    for a in [1.0, 2.0, 4.0, 8.0, 16.0] {
        let u = bump.scale(a);
        if exp_quadrature(&u, h).feasible() {
            return u;
        }
    }
    ScalarField::zeros(grid)
}

pub fn default_init_pair(h1: &Weight, h2: &Weight) -> FieldPair {
    FieldPair { u1: default_init(h1), u2: default_init(h2) }
}

/// Seeded smooth random perturbation, for multi-start runs.
pub fn random_init(grid: TorusGrid, seed: u64, amplitude: f64) -> FieldPair {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = || {
        let mut p = TrigPoly::zero();
        for k1 in 0..=3 {
            for k2 in -3..=3 {
                if k1 == 0 && k2 <= 0 {
                    continue;
                }
                let s = amplitude / (k1 * k1 + k2 * k2) as f64;
                p.add_term(k1, k2, rng.gen_range(-s..s), rng.gen_range(-s..s));
            }
        }
        ScalarField::new(grid, p.sample(grid.n())).expect("sized")
    };
    let u1 = draw();
    let u2 = draw();
    FieldPair { u1, u2 }
}

/// Default schedule eps_k = 4 pi 2^{-k}, k = 1..14.
pub fn default_schedule() -> Vec<f64> {
    (1..=14).map(|k| 4.0 * PI * 0.5f64.powi(k)).collect()
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct Thresholds {
    pub max_sum: f64,
    pub energy: f64,
    pub mean_sum: f64,
    pub tail_window: usize,
    pub bounded_tv: f64,
    pub diverge_drop: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self { max_sum: 20.0, energy: 1e3, mean_sum: -20.0, tail_window: 4, bounded_tv: 1.0, diverge_drop: 3.0 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ContinuationRecord {
    pub eps: f64,
    pub f_value: f64,
    pub mean1: f64,
    pub mean2: f64,
    pub max1: f64,
    pub max2: f64,
    pub argmax1: Point,
    pub argmax2: Point,
    pub energy: f64,
    pub mass1: f64,
    pub mass2: f64,
    pub el_residual: f64,
    pub blowup_flag: bool,
    pub converged: bool,
}

impl ContinuationRecord {
    pub fn from_state(eps: f64, f_value: f64, el_residual: f64, converged: bool, state: &FieldPair, th: &Thresholds) -> Self {
        let grid = state.grid();
        let one = Weight::from_trig(&TrigPoly::constant(1.0), grid);
        let n = grid.n();
        let (max1, k1) = state.u1.argmax();
        let (max2, k2) = state.u2.argmax();
        let mut r = Self {
            eps,
            f_value,
            mean1: state.u1.mean(),
            mean2: state.u2.mean(),
            max1,
            max2,
            argmax1: grid.node(k1 / n, k1 % n),
            argmax2: grid.node(k2 / n, k2 % n),
            energy: dirichlet_energy_pair(&state.u1, &state.u2).unwrap_or(f64::NAN),
            mass1: exp_quadrature(&state.u1, &one).i,
            mass2: exp_quadrature(&state.u2, &one).i,
            el_residual,
            blowup_flag: false,
            converged,
        };
        r.blowup_flag = flagged(&r, th);
        r
    }
}

#[derive(Clone, Debug)]
pub struct ContinuationRun {
    pub records: Vec<ContinuationRecord>,
    pub states: Vec<FieldPair>,
    /// Empirical mass bounds: min and max over records and components of int e^{u_i}.
    pub mass_c1: f64,
    pub mass_c2: f64,
    pub partial: bool,
    pub error: Option<String>,
    /// eps values where the warm start was discarded for a cold restart.
    pub cold_restarts: Vec<f64>,
}

pub fn continuation(
    h1: &Weight,
    h2: &Weight,
    schedule: &[f64],
    opts: &SolveOptions,
    th: &Thresholds,
) -> Result<ContinuationRun> {
    if schedule.is_empty() || schedule.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(TodaError::InvalidInput("eps schedule must be non-empty and strictly decreasing".into()));
    }
    if schedule.iter().any(|&e| !(e > 0.0 && e < 4.0 * PI)) {
        return Err(TodaError::InvalidInput("eps schedule must lie in (0, 4pi)".into()));
    }
    let cold = default_init_pair(h1, h2);
    let mut run = ContinuationRun {
        records: Vec::new(),
        states: Vec::new(),
        mass_c1: f64::INFINITY,
        mass_c2: 0.0,
        partial: false,
        error: None,
        cold_restarts: Vec::new(),
    };
    let mut prev: Option<(f64, FieldPair, bool)> = None;
    for &eps in schedule {
        let init = prev.as_ref().map(|p| p.1.clone()).unwrap_or_else(|| cold.clone());
        let mut res = match minimize_subcritical(h1, h2, eps, &init, opts) {
            Ok(r) => r,
            Err(e) => {
                run.partial = true;
                run.error = Some(e.to_string());
                break;
            }
        };
        if let Some((pe, ps, pflag)) = &prev {
            if (pe - eps).abs() <= 0.1 && !pflag && res.state.max_abs_diff(ps) > 1.0 {
                run.cold_restarts.push(eps);
                if let Ok(c) = minimize_subcritical(h1, h2, eps, &cold, opts) {
                    if c.f_value < res.f_value {
                        res = c;
                    }
                }
            }
        }
        let rec = ContinuationRecord::from_state(eps, res.f_value, res.el_residual, res.converged, &res.state, th);
        run.mass_c1 = run.mass_c1.min(rec.mass1).min(rec.mass2);
        run.mass_c2 = run.mass_c2.max(rec.mass1).max(rec.mass2);
        prev = Some((eps, res.state.clone(), rec.blowup_flag));
        run.records.push(rec);
        run.states.push(res.state);
    }
    Ok(run)
}

/// (m1 + m2, energy, mean1 + mean2).
pub fn blowup_indicators(r: &ContinuationRecord) -> (f64, f64, f64) {
    (r.max1 + r.max2, r.energy, r.mean1 + r.mean2)
}

pub fn flagged(r: &ContinuationRecord, th: &Thresholds) -> bool {
    let (m, e, s) = blowup_indicators(r);
    m >= th.max_sum || e >= th.energy || s <= th.mean_sum
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BlowupCase {
    Case1,
    Case2,
    Case3,
    None,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BlowupVerdict {
    pub blew_up: bool,
    pub case: BlowupCase,
    pub indicators: Vec<(f64, f64, f64)>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Tail {
    Bounded,
    Diverging,
    Neither,
}

fn tail(values: &[f64], th: &Thresholds) -> Tail {
    let w = &values[values.len().saturating_sub(th.tail_window)..];
    let tv: f64 = w.windows(2).map(|p| (p[1] - p[0]).abs()).sum();
    if w[0] - w[w.len() - 1] >= th.diverge_drop {
        Tail::Diverging
    } else if tv <= th.bounded_tv {
        Tail::Bounded
    } else {
        Tail::Neither
    }
}

pub fn classify_case(records: &[ContinuationRecord], th: &Thresholds) -> Result<BlowupVerdict> {
    if records.len() < 3 {
        return Err(TodaError::InvalidInput("classify_case needs at least 3 records".into()));
    }
    let indicators: Vec<_> = records.iter().map(blowup_indicators).collect();
    let blew_up = records.iter().any(|r| flagged(r, th));
    if !blew_up {
        return Ok(BlowupVerdict { blew_up, case: BlowupCase::None, indicators });
    }
    let m1: Vec<f64> = records.iter().map(|r| r.mean1).collect();
    let m2: Vec<f64> = records.iter().map(|r| r.mean2).collect();
    let case = match (tail(&m1, th), tail(&m2, th)) {
        (Tail::Diverging, Tail::Bounded) => BlowupCase::Case1,
        (Tail::Bounded, Tail::Diverging) => BlowupCase::Case2,
        (Tail::Diverging, Tail::Diverging) => BlowupCase::Case3,
        (a, b) => return Err(TodaError::Inconclusive(format!("mean tails {a:?}, {b:?}"))),
    };
    Ok(BlowupVerdict { blew_up, case, indicators })
}
