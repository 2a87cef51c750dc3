//! Energy J on the constraint manifold, the shift-invariant free energy, its gradient and
//! Euler-Lagrange residuals; plus the single-field Kazdan-Warner analogue.

use std::f64::consts::PI;

use crate::error::{Result, TodaError};
use crate::fields::TrigPoly;
use crate::geometry::{
    dirichlet_energy, dirichlet_energy_pair, inner, laplacian, Padded, ScalarField, TorusGrid,
};

/// Tolerance for "on the constraint" preconditions.
pub const CONSTRAINT_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct FieldPair {
    pub u1: ScalarField,
    pub u2: ScalarField,
}

impl FieldPair {
    pub fn new(u1: ScalarField, u2: ScalarField) -> Result<Self> {
        if u1.n() != u2.n() {
            return Err(TodaError::GridMismatch(u1.n(), u2.n()));
        }
        if !u1.is_finite() || !u2.is_finite() {
            return Err(TodaError::NonFinite);
        }
        Ok(Self { u1, u2 })
    }

    pub fn zeros(grid: TorusGrid) -> Self {
        Self { u1: ScalarField::zeros(grid), u2: ScalarField::zeros(grid) }
    }

    pub fn grid(&self) -> TorusGrid {
        self.u1.grid()
    }

    pub fn shift(&self, c1: f64, c2: f64) -> Self {
        Self { u1: self.u1.shift(c1), u2: self.u2.shift(c2) }
    }

    pub fn scale(&self, a: f64) -> Self {
        Self { u1: self.u1.scale(a), u2: self.u2.scale(a) }
    }

    pub fn axpy(&self, a: f64, d: &Self) -> Self {
        Self { u1: self.u1.axpy(a, &d.u1), u2: self.u2.axpy(a, &d.u2) }
    }

    pub fn dot(&self, other: &Self) -> f64 {
        inner(&self.u1, &other.u1) + inner(&self.u2, &other.u2)
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.u1.max_abs_diff(&other.u1).max(self.u2.max_abs_diff(&other.u2))
    }

    pub fn is_finite(&self) -> bool {
        self.u1.is_finite() && self.u2.is_finite()
    }

    pub fn map(&self, f: impl Fn(&ScalarField) -> ScalarField) -> Self {
        Self { u1: f(&self.u1), u2: f(&self.u2) }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RhoPair {
    pub rho1: f64,
    pub rho2: f64,
}

impl RhoPair {
    pub fn new(rho1: f64, rho2: f64) -> Result<Self> {
        let ok = |r: f64| r > 0.0 && r <= 4.0 * PI;
        if !ok(rho1) || !ok(rho2) {
            return Err(TodaError::InvalidInput(format!("rho = ({rho1}, {rho2}) outside (0, 4pi]")));
        }
        Ok(Self { rho1, rho2 })
    }

    /// rho_1 = rho_2 = 4 pi - eps.
    pub fn subcritical(eps: f64) -> Result<Self> {
        Self::new(4.0 * PI - eps, 4.0 * PI - eps)
    }

    /// No range check; for probing supercritical parameters.
    pub fn unchecked(rho1: f64, rho2: f64) -> Self {
        Self { rho1, rho2 }
    }
}

/// h sampled on the coarse grid and, exactly, on the 3N/2 quadrature grid.
#[derive(Clone, Debug)]
pub struct Weight {
    pub coarse: ScalarField,
    pub fine: Vec<f64>,
    pad: Padded,
}

impl Weight {
    pub fn from_trig(h: &TrigPoly, grid: TorusGrid) -> Self {
        let pad = Padded::new(grid.n());
        Self {
            coarse: ScalarField::new(grid, h.sample(grid.n())).expect("grid-sized sample"),
            fine: h.sample(pad.fine()),
            pad,
        }
    }

    /// For a sampled h, the fine values are its trigonometric interpolant.
    pub fn from_field(h: &ScalarField) -> Self {
        let pad = Padded::new(h.n());
        Self { coarse: h.clone(), fine: pad.prolong(h), pad }
    }

    /// |h| on both grids.
    pub fn abs(&self) -> Self {
        Self {
            coarse: self.coarse.map(f64::abs),
            fine: self.fine.iter().map(|v| v.abs()).collect(),
            pad: self.pad,
        }
    }

    pub fn padded(&self) -> Padded {
        self.pad
    }

    pub fn n(&self) -> usize {
        self.coarse.n()
    }
}

/// Anti-aliased quadrature of h e^u.
#[derive(Clone, Debug)]
pub struct ExpQuad {
    /// log I when I > 0, else NaN.
    pub log_i: f64,
    /// I itself (may overflow to inf for huge u).
    pub i: f64,
    /// Fine-grid values h e^{Pu - s} / mean(.), i.e. the normalised density, when I > 0.
    pub density_fine: Vec<f64>,
}

pub fn exp_quadrature(u: &ScalarField, h: &Weight) -> ExpQuad {
    let fine = h.pad.prolong(u);
    let s = fine.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let vals: Vec<f64> = fine.iter().zip(&h.fine).map(|(&v, &w)| w * (v - s).exp()).collect();
    let m = vals.iter().sum::<f64>() / vals.len() as f64;
    if m > 0.0 && m.is_finite() {
        let density_fine = vals.iter().map(|v| v / m).collect();
        ExpQuad { log_i: s + m.ln(), i: (s + m.ln()).exp(), density_fine }
    } else {
        ExpQuad { log_i: f64::NAN, i: m * s.exp(), density_fine: Vec::new() }
    }
}

impl ExpQuad {
    pub fn feasible(&self) -> bool {
        self.log_i.is_finite()
    }

    /// P*(h e^{Pu}) / I on the coarse grid; its mean is 1.
    pub fn density(&self, h: &Weight) -> ScalarField {
        h.pad.adjoint(&self.density_fine, h.coarse.grid())
    }
}

/// log I(u + du) - log I(u) from the cached density at u, accurate for small du.
/// None when the shifted state is infeasible or overflows.
pub fn log_i_increment(q: &ExpQuad, h: &Weight, du: &ScalarField) -> Option<f64> {
    let fine = h.pad.prolong(du);
    let m = q.density_fine.iter().zip(&fine).map(|(w, d)| w * d.exp_m1()).sum::<f64>() / fine.len() as f64;
    if m > -1.0 && m.is_finite() {
        Some(m.ln_1p())
    } else {
        None
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConstraintStatus {
    pub i1: f64,
    pub i2: f64,
    pub log_i1: f64,
    pub log_i2: f64,
    pub feasible: bool,
}

pub fn constraint_values(state: &FieldPair, h1: &Weight, h2: &Weight) -> ConstraintStatus {
    let q1 = exp_quadrature(&state.u1, h1);
    let q2 = exp_quadrature(&state.u2, h2);
    ConstraintStatus {
        i1: q1.i,
        i2: q2.i,
        log_i1: q1.log_i,
        log_i2: q2.log_i,
        feasible: q1.feasible() && q2.feasible(),
    }
}

pub fn normalize(state: &FieldPair, h1: &Weight, h2: &Weight) -> Result<FieldPair> {
    let c = constraint_values(state, h1, h2);
    if !c.feasible {
        return Err(TodaError::InfeasibleState(c.i1, c.i2));
    }
    Ok(state.shift(-c.log_i1, -c.log_i2))
}

fn check_on_constraint(state: &FieldPair, h1: &Weight, h2: &Weight) -> Result<()> {
    let c = constraint_values(state, h1, h2);
    if !c.feasible || (c.i1 - 1.0).abs() > CONSTRAINT_TOL || (c.i2 - 1.0).abs() > CONSTRAINT_TOL {
        return Err(TodaError::NotOnConstraint(c.i1, c.i2));
    }
    Ok(())
}

/// J(u) = (1/3) energy_pair + rho1 mean(u1) + rho2 mean(u2) on H.
pub fn energy_j(state: &FieldPair, h1: &Weight, h2: &Weight, rho: RhoPair) -> Result<f64> {
    check_on_constraint(state, h1, h2)?;
    let e = dirichlet_energy_pair(&state.u1, &state.u2)?;
    Ok(e / 3.0 + rho.rho1 * state.u1.mean() + rho.rho2 * state.u2.mean())
}

#[derive(Clone, Debug)]
pub struct Evaluation {
    pub f: f64,
    pub grad: FieldPair,
    pub grad_norm: f64,
    pub energy: f64,
}

/// F_free and its L2 gradient in one pass.
pub fn evaluate(state: &FieldPair, h1: &Weight, h2: &Weight, rho: RhoPair) -> Result<Evaluation> {
    let q1 = exp_quadrature(&state.u1, h1);
    let q2 = exp_quadrature(&state.u2, h2);
    if !q1.feasible() || !q2.feasible() {
        return Err(TodaError::InfeasibleState(q1.i, q2.i));
    }
    let energy = dirichlet_energy_pair(&state.u1, &state.u2)?;
    let f = energy / 3.0
        + rho.rho1 * (state.u1.mean() - q1.log_i)
        + rho.rho2 * (state.u2.mean() - q2.log_i);
    let l1 = laplacian(&state.u1)?;
    let l2 = laplacian(&state.u2)?;
    let d1 = q1.density(h1);
    let d2 = q2.density(h2);
    let g1 = l1.scale(-2.0 / 3.0).axpy(-1.0 / 3.0, &l2).axpy(-rho.rho1, &d1).shift(rho.rho1);
    let g2 = l2.scale(-2.0 / 3.0).axpy(-1.0 / 3.0, &l1).axpy(-rho.rho2, &d2).shift(rho.rho2);
    let grad = FieldPair { u1: g1, u2: g2 };
    let grad_norm = grad.norm();
    Ok(Evaluation { f, grad, grad_norm, energy })
}

pub fn free_energy(state: &FieldPair, h1: &Weight, h2: &Weight, rho: RhoPair) -> Result<f64> {
    let q1 = exp_quadrature(&state.u1, h1);
    let q2 = exp_quadrature(&state.u2, h2);
    if !q1.feasible() || !q2.feasible() {
        return Err(TodaError::InfeasibleState(q1.i, q2.i));
    }
    let energy = dirichlet_energy_pair(&state.u1, &state.u2)?;
    Ok(energy / 3.0
        + rho.rho1 * (state.u1.mean() - q1.log_i)
        + rho.rho2 * (state.u2.mean() - q2.log_i))
}

pub fn gradient_free(state: &FieldPair, h1: &Weight, h2: &Weight, rho: RhoPair) -> Result<FieldPair> {
    Ok(evaluate(state, h1, h2, rho)?.grad)
}

/// Residual fields of -Lap u_i = 2 rho_i (h_i e^{u_i} - 1) - rho_j (h_j e^{u_j} - 1).
pub fn el_residual_fields(
    state: &FieldPair,
    h1: &Weight,
    h2: &Weight,
    rho: RhoPair,
) -> Result<FieldPair> {
    check_on_constraint(state, h1, h2)?;
    let d1 = exp_quadrature(&state.u1, h1).density(h1).shift(-1.0);
    let d2 = exp_quadrature(&state.u2, h2).density(h2).shift(-1.0);
    let r1 = laplacian(&state.u1)?.scale(-1.0).axpy(-2.0 * rho.rho1, &d1).axpy(rho.rho2, &d2);
    let r2 = laplacian(&state.u2)?.scale(-1.0).axpy(-2.0 * rho.rho2, &d2).axpy(rho.rho1, &d1);
    Ok(FieldPair { u1: r1, u2: r2 })
}

pub fn el_residual_rho(state: &FieldPair, h1: &Weight, h2: &Weight, rho: RhoPair) -> Result<f64> {
    Ok(el_residual_fields(state, h1, h2, rho)?.norm())
}

/// L2 norm of the residual pair with coefficients (8 pi - 2 eps) and (4 pi - eps).
pub fn el_residual(state: &FieldPair, h1: &Weight, h2: &Weight, eps: f64) -> Result<f64> {
    el_residual_rho(state, h1, h2, RhoPair::unchecked(4.0 * PI - eps, 4.0 * PI - eps))
}

/// Scalar mode: the free form of I(u) = (1/2) int |grad u|^2 + rho int u on {int h e^u = 1}.
pub mod scalar {
    use super::*;

    #[derive(Clone, Debug)]
    pub struct ScalarEvaluation {
        pub f: f64,
        pub grad: ScalarField,
        pub grad_norm: f64,
    }

    pub fn normalize(u: &ScalarField, h: &Weight) -> Result<ScalarField> {
        let q = exp_quadrature(u, h);
        if !q.feasible() {
            return Err(TodaError::InfeasibleState(q.i, f64::NAN));
        }
        Ok(u.shift(-q.log_i))
    }

    fn check(u: &ScalarField, h: &Weight) -> Result<()> {
        let q = exp_quadrature(u, h);
        if !q.feasible() || (q.i - 1.0).abs() > CONSTRAINT_TOL {
            return Err(TodaError::NotOnConstraint(q.i, f64::NAN));
        }
        Ok(())
    }

    /// I(u) on the constraint set.
    pub fn energy_i(u: &ScalarField, h: &Weight, rho: f64) -> Result<f64> {
        check(u, h)?;
        Ok(0.5 * dirichlet_energy(u) + rho * u.mean())
    }

    pub fn evaluate(u: &ScalarField, h: &Weight, rho: f64) -> Result<ScalarEvaluation> {
        let q = exp_quadrature(u, h);
        if !q.feasible() {
            return Err(TodaError::InfeasibleState(q.i, f64::NAN));
        }
        let f = 0.5 * dirichlet_energy(u) + rho * (u.mean() - q.log_i);
        let grad = laplacian(u)?.scale(-1.0).axpy(-rho, &q.density(h)).shift(rho);
        let grad_norm = inner(&grad, &grad).sqrt();
        Ok(ScalarEvaluation { f, grad, grad_norm })
    }

    pub fn free_energy(u: &ScalarField, h: &Weight, rho: f64) -> Result<f64> {
        Ok(evaluate(u, h, rho)?.f)
    }

    /// L2 norm of -Lap u - rho (h e^u - 1) on a normalised u.
    pub fn residual(u: &ScalarField, h: &Weight, rho: f64) -> Result<f64> {
        check(u, h)?;
        let d = exp_quadrature(u, h).density(h).shift(-1.0);
        let r = laplacian(u)?.scale(-1.0).axpy(-rho, &d);
        Ok(inner(&r, &r).sqrt())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat(n: usize) -> (TorusGrid, Weight) {
        let g = TorusGrid::new(n).unwrap();
        (g, Weight::from_trig(&TrigPoly::constant(1.0), g))
    }

    #[test]
    fn flat_constraint_and_shift() {
        let (g, h) = flat(32);
        let c = constraint_values(&FieldPair::zeros(g), &h, &h);
        assert!((c.i1 - 1.0).abs() < 1e-14 && c.feasible);
        let s = FieldPair::zeros(g).shift(2.0, 2.0);
        let c = constraint_values(&s, &h, &h);
        assert!((c.i1 - 2f64.exp()).abs() < 1e-12);
        let nrm = normalize(&FieldPair::zeros(g).shift(5.0, 5.0), &h, &h).unwrap();
        assert!(nrm.u1.max().abs() < 1e-13);
    }

    #[test]
    fn infeasible_is_reported() {
        let g = TorusGrid::new(32).unwrap();
        let h = Weight::from_trig(&TrigPoly::constant(-0.2), g);
        let err = normalize(&FieldPair::zeros(g), &h, &h).unwrap_err();
        assert!(matches!(err, TodaError::InfeasibleState(_, _)));
    }

    #[test]
    fn overflow_guard() {
        let (g, h) = flat(32);
        let c = constraint_values(&FieldPair::zeros(g).shift(800.0, 0.0), &h, &h);
        assert!((c.log_i1 - 800.0).abs() < 1e-10);
    }

    #[test]
    fn zero_state_is_critical() {
        let (g, h) = flat(32);
        let rho = RhoPair::new(3.0, 4.0).unwrap();
        let e = evaluate(&FieldPair::zeros(g), &h, &h, rho).unwrap();
        assert!(e.f.abs() < 1e-14 && e.grad_norm < 1e-12);
        assert!(el_residual(&FieldPair::zeros(g), &h, &h, 0.7).unwrap() < 1e-12);
        assert_eq!(energy_j(&FieldPair::zeros(g), &h, &h, rho).unwrap(), 0.0);
    }

    #[test]
    fn j_rejects_off_constraint() {
        let (g, h) = flat(32);
        let rho = RhoPair::new(3.0, 4.0).unwrap();
        let r = energy_j(&FieldPair::zeros(g).shift(0.1, 0.0), &h, &h, rho);
        assert!(matches!(r, Err(TodaError::NotOnConstraint(_, _))));
    }

    #[test]
    fn rho_range() {
        assert!(RhoPair::new(4.0 * PI, 1.0).is_ok());
        assert!(RhoPair::new(4.0 * PI + 1e-9, 1.0).is_err());
        assert!(RhoPair::new(0.0, 1.0).is_err());
    }
}
