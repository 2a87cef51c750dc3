//! Concentration analysis: peaks, ball masses, Pohozaev residuals, bubble fits,
//! and a probe for the improved Moser-Trudinger inequality.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TodaError};
use crate::fields::TrigPoly;
use crate::functional::{exp_quadrature, normalize, FieldPair, Weight};
use crate::geometry::{dirichlet_energy_pair, torus_delta, torus_dist, wrap_unit, Point, ScalarField, TorusGrid};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub component: u8,
    pub location: Point,
    pub height: f64,
    /// e^{-height/2}
    pub scale: f64,
}

impl Peak {
    pub fn new(component: u8, location: Point, height: f64) -> Self {
        Self { component, location, height, scale: (-height / 2.0).exp() }
    }
}

/// Least-squares quadratic on the 3x3 stencil around node k; returns (offset in cells, height).
fn refine(u: &ScalarField, i: usize, j: usize) -> ([f64; 2], f64) {
    let n = u.n();
    let z = |di: i64, dj: i64| {
        let ii = (i as i64 + di).rem_euclid(n as i64) as usize;
        let jj = (j as i64 + dj).rem_euclid(n as i64) as usize;
        u.at(ii, jj)
    };
    // x along j (columns), y along i (rows)
    let (mut sum, mut sx, mut sy, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    for di in -1..=1i64 {
        for dj in -1..=1i64 {
            let v = z(di, dj);
            let (x, y) = (dj as f64, di as f64);
            sum += v;
            sx += x * v;
            sy += y * v;
            sxx += (x * x - 2.0 / 3.0) * v;
            syy += (y * y - 2.0 / 3.0) * v;
            sxy += x * y * v;
        }
    }
    let (b, c) = (sx / 6.0, sy / 6.0);
    let (d, e, f) = (sxx / 2.0, syy / 2.0, sxy / 4.0);
    let a = sum / 9.0 - 2.0 / 3.0 * (d + e);
    let det = 4.0 * d * e - f * f;
    if !(d < 0.0 && det > 0.0) {
        return ([0.0, 0.0], u.at(i, j));
    }
    let dx = (-2.0 * e * b + f * c) / det;
    let dy = (f * b - 2.0 * d * c) / det;
    if dx.abs() > 1.0 || dy.abs() > 1.0 {
        return ([0.0, 0.0], u.at(i, j));
    }
    ([dx, dy], a + b * dx + c * dy + d * dx * dx + e * dy * dy + f * dx * dy)
}

/// Local maxima within 2 of the global maximum, merged within 8/N, refined sub-grid.
pub fn detect_peaks_field(u: &ScalarField, component: u8) -> Vec<Peak> {
    let grid = u.grid();
    let n = grid.n();
    let top = u.max();
    let mut cand = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let k = i * n + j;
            let v = u.at(i, j);
            if v < top - 2.0 {
                continue;
            }
            let mut is_max = true;
            'nb: for di in -1..=1i64 {
                for dj in -1..=1i64 {
                    if di == 0 && dj == 0 {
                        continue;
                    }
                    let ii = (i as i64 + di).rem_euclid(n as i64) as usize;
                    let jj = (j as i64 + dj).rem_euclid(n as i64) as usize;
                    let w = u.at(ii, jj);
                    // equal neighbours: the first in row-major order wins
                    if w > v || (w == v && ii * n + jj < k) {
                        is_max = false;
                        break 'nb;
                    }
                }
            }
            if is_max {
                cand.push((v, i, j));
            }
        }
    }
    // stable sort keeps row-major order among equal heights
    cand.sort_by(|a, b| b.0.total_cmp(&a.0));
    let merge = 8.0 / n as f64;
    let mut out: Vec<Peak> = Vec::new();
    for (_, i, j) in cand {
        let node = grid.node(i, j);
        if out.iter().any(|p| torus_dist(p.location, node) < merge) {
            continue;
        }
        let (off, height) = refine(u, i, j);
        let h = grid.spacing();
        let loc = [wrap_unit(node[0] + off[0] * h), wrap_unit(node[1] + off[1] * h)];
        out.push(Peak::new(component, loc, height));
    }
    out
}

pub fn detect_peaks(state: &FieldPair) -> Vec<Peak> {
    let mut p = detect_peaks_field(&state.u1, 1);
    p.extend(detect_peaks_field(&state.u2, 2));
    p
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BallMasses {
    pub centers: Vec<Point>,
    /// (sigma1, sigma2) per center
    pub sigma: Vec<(f64, f64)>,
    pub remainder: (f64, f64),
}

/// Distinct blow-up sites: peaks of either component closer than 8/N are one site.
pub fn sites(peaks: &[Peak], grid: TorusGrid) -> Vec<Point> {
    let merge = 8.0 / grid.n() as f64;
    let mut out: Vec<Point> = Vec::new();
    for p in peaks {
        if !out.iter().any(|c| torus_dist(*c, p.location) < merge) {
            out.push(p.location);
        }
    }
    out
}

/// sigma_i = int over B_r(center) of h_i e^{u_i} on the normalised state, plus the off-ball rest.
pub fn ball_masses(state: &FieldPair, h1: &Weight, h2: &Weight, centers: &[Point], r: f64) -> Result<BallMasses> {
    let grid = state.grid();
    if r < 4.0 / grid.n() as f64 {
        return Err(TodaError::InvalidInput(format!("ball radius {r} below 4/N")));
    }
    for (a, p) in centers.iter().enumerate() {
        for q in &centers[a + 1..] {
            let d = torus_dist(*p, *q);
            if r >= d / 2.0 {
                return Err(TodaError::BallOverlap(d));
            }
        }
    }
    let q1 = exp_quadrature(&state.u1, h1);
    let q2 = exp_quadrature(&state.u2, h2);
    if !q1.feasible() || !q2.feasible() {
        return Err(TodaError::InfeasibleState(q1.i, q2.i));
    }
    let pad = h1.padded();
    let m = pad.fine() * pad.fine();
    let mut sigma = vec![(0.0, 0.0); centers.len()];
    let mut rest = (0.0, 0.0);
    for k in 0..m {
        let x = pad.fine_node(k);
        let (a, b) = (q1.density_fine[k], q2.density_fine[k]);
        match centers.iter().position(|c| torus_dist(*c, x) < r) {
            Some(c) => {
                sigma[c].0 += a;
                sigma[c].1 += b;
            }
            None => {
                rest.0 += a;
                rest.1 += b;
            }
        }
    }
    let w = 1.0 / m as f64;
    Ok(BallMasses {
        centers: centers.to_vec(),
        sigma: sigma.into_iter().map(|(a, b)| (a * w, b * w)).collect(),
        remainder: (rest.0 * w, rest.1 * w),
    })
}

pub fn pohozaev_residual(sigma1: f64, sigma2: f64) -> f64 {
    sigma1 * sigma1 + sigma2 * sigma2 - sigma1 * sigma2 - sigma1 - sigma2
}

pub fn gammas(sigma1: f64, sigma2: f64) -> (f64, f64) {
    (8.0 * PI * sigma1 - 4.0 * PI * sigma2, 8.0 * PI * sigma2 - 4.0 * PI * sigma1)
}

/// Periodic bilinear interpolation of nodal values.
pub fn bilinear(u: &ScalarField, p: Point) -> f64 {
    let n = u.n();
    let (x, y) = (wrap_unit(p[0]) * n as f64, wrap_unit(p[1]) * n as f64);
    let (j0, i0) = (x.floor(), y.floor());
    let (tx, ty) = (x - j0, y - i0);
    let (j0, i0) = (j0 as usize % n, i0 as usize % n);
    let (j1, i1) = ((j0 + 1) % n, (i0 + 1) % n);
    (1.0 - ty) * ((1.0 - tx) * u.at(i0, j0) + tx * u.at(i0, j1)) + ty * ((1.0 - tx) * u.at(i1, j0) + tx * u.at(i1, j1))
}

pub const L_FIT: f64 = 10.0;

/// Max deviation of u(x + r y) - m from -2 log(1 + coeff |y|^2) over |y| <= l_fit.
pub fn bubble_fit_coeff(u: &ScalarField, peak: &Peak, coeff: f64, l_fit: f64) -> Result<f64> {
    if peak.scale * l_fit > 0.25 {
        return Err(TodaError::InvalidInput(format!("fit window {} exceeds 0.25", peak.scale * l_fit)));
    }
    let k = 40;
    let mut worst: f64 = 0.0;
    for a in -k..=k {
        for b in -k..=k {
            let y = [a as f64 * l_fit / k as f64, b as f64 * l_fit / k as f64];
            let r2 = y[0] * y[0] + y[1] * y[1];
            if r2 > l_fit * l_fit {
                continue;
            }
            let x = [peak.location[0] + peak.scale * y[0], peak.location[1] + peak.scale * y[1]];
            let got = bilinear(u, x) - peak.height;
            worst = worst.max((got + 2.0 * (coeff * r2).ln_1p()).abs());
        }
    }
    Ok(worst)
}

/// Deviation from the standard profile -2 log(1 + pi h(x0) |y|^2).
pub fn bubble_fit(u: &ScalarField, peak: &Peak, h: &TrigPoly) -> Result<f64> {
    let h0 = h.eval(peak.location);
    if h0 <= 0.0 {
        return Err(TodaError::NegativeHeightDensity(h0));
    }
    bubble_fit_coeff(u, peak, PI * h0, L_FIT)
}

/// Squared minimal-image distance; exact |x - c|^2 inside the chart, kinked only on the cut locus.
pub fn chart_r2(x: Point, c: Point) -> f64 {
    let d = torus_delta(x, c);
    d[0] * d[0] + d[1] * d[1]
}

/// -2 log(eps^2 + pi h0 rho^2) + 2 log eps: height -2 log eps at the center, scale eps.
pub fn planted_bubble(grid: TorusGrid, center: Point, eps: f64, h0: f64) -> ScalarField {
    ScalarField::from_fn(grid, |x| -2.0 * (eps * eps + PI * h0 * chart_r2(x, center)).ln() + 2.0 * eps.ln())
}

/// log sum_k w_k e^{b_k} for bubbles b_k of common scale eps.
pub fn planted_sites(grid: TorusGrid, sites: &[(Point, f64)], eps: f64, h0: f64) -> ScalarField {
    ScalarField::from_fn(grid, |x| {
        let v: Vec<f64> = sites
            .iter()
            .map(|(c, w)| w.ln() - 2.0 * (eps * eps + PI * h0 * chart_r2(x, *c)).ln() + 2.0 * eps.ln())
            .collect();
        let top = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        top + v.iter().map(|t| (t - top).exp()).sum::<f64>().ln()
    })
}

/// Smallest planted-bubble scale the grid resolves for ball masses and quadrature.
pub fn resolved_eps(grid: TorusGrid) -> f64 {
    2.5 / grid.n() as f64
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SiteReport {
    pub location: Point,
    pub sigma1: f64,
    pub sigma2: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub pohozaev_residual: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConcentrationReport {
    pub peaks: Vec<Peak>,
    pub ball_radius: f64,
    pub sites: Vec<SiteReport>,
    pub remainder1: f64,
    pub remainder2: f64,
    /// per peak; None when the window does not fit or h(peak) <= 0
    pub bubble_fit_errors: Vec<Option<f64>>,
    /// (r, per-site (sigma1, sigma2)) for r in {0.05, 0.1, 0.15} where the balls stay disjoint
    pub radius_sweep: Vec<(f64, Vec<(f64, f64)>)>,
}

pub fn analyze(state: &FieldPair, h1: &TrigPoly, h2: &TrigPoly, r: f64) -> Result<ConcentrationReport> {
    let grid = state.grid();
    let (w1, w2) = (Weight::from_trig(h1, grid), Weight::from_trig(h2, grid));
    let state = normalize(state, &w1, &w2)?;
    let peaks = detect_peaks(&state);
    let centers = sites(&peaks, grid);
    // shrink the balls until they are disjoint
    let mut r = r;
    for (a, p) in centers.iter().enumerate() {
        for q in &centers[a + 1..] {
            r = r.min(0.49 * torus_dist(*p, *q));
        }
    }
    let bm = ball_masses(&state, &w1, &w2, &centers, r)?;
    let sites = bm
        .centers
        .iter()
        .zip(&bm.sigma)
        .map(|(c, &(s1, s2))| {
            let (gamma1, gamma2) = gammas(s1, s2);
            SiteReport { location: *c, sigma1: s1, sigma2: s2, gamma1, gamma2, pohozaev_residual: pohozaev_residual(s1, s2) }
        })
        .collect();
    let bubble_fit_errors = peaks
        .iter()
        .map(|p| {
            let (u, h) = if p.component == 1 { (&state.u1, h1) } else { (&state.u2, h2) };
            bubble_fit(u, p, h).ok()
        })
        .collect();
    let radius_sweep = [0.05, 0.1, 0.15]
        .iter()
        .filter_map(|&rr| ball_masses(&state, &w1, &w2, &centers, rr).ok().map(|b| (rr, b.sigma)))
        .collect();
    Ok(ConcentrationReport {
        peaks,
        ball_radius: r,
        sites,
        remainder1: bm.remainder.0,
        remainder2: bm.remainder.1,
        bubble_fit_errors,
        radius_sweep,
    })
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct MtProbe {
    pub lhs: f64,
    pub rhs: f64,
    pub hypothesis_violated: bool,
    /// None when the hypothesis fails
    pub satisfied: Option<bool>,
}

fn split_mass(u: &ScalarField, component: u8) -> bool {
    let p = detect_peaks_field(u, component);
    p.iter().enumerate().any(|(a, x)| p[a + 1..].iter().any(|y| torus_dist(x.location, y.location) >= 0.1))
}

/// lhs - rhs without the constant.
fn mt_gap(state: &FieldPair, eps_prime: f64) -> f64 {
    let grid = state.grid();
    let one = Weight::from_trig(&TrigPoly::constant(1.0), grid);
    let lhs = exp_quadrature(&state.u1, &one).log_i + exp_quadrature(&state.u2, &one).log_i;
    let e = dirichlet_energy_pair(&state.u1, &state.u2).unwrap_or(f64::NAN);
    lhs - ((1.0 + eps_prime) / (24.0 * PI) * e + state.u1.mean() + state.u2.mean())
}

pub fn improved_mt_probe(state: &FieldPair, eps_prime: f64, c_probe: f64) -> MtProbe {
    let grid = state.grid();
    let one = Weight::from_trig(&TrigPoly::constant(1.0), grid);
    let lhs = exp_quadrature(&state.u1, &one).log_i + exp_quadrature(&state.u2, &one).log_i;
    let rhs = lhs - mt_gap(state, eps_prime) + c_probe;
    let hypothesis_violated = !(split_mass(&state.u1, 1) && split_mass(&state.u2, 2));
    MtProbe { lhs, rhs, hypothesis_violated, satisfied: (!hypothesis_violated).then_some(lhs <= rhs) }
}

/// Seeded state with each component split between two sites.
pub fn two_site_state(grid: TorusGrid, seed: u64) -> FieldPair {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pts: Vec<Point> = Vec::new();
    while pts.len() < 4 {
        let p = [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)];
        if pts.iter().all(|q| torus_dist(*q, p) >= 0.2) {
            pts.push(p);
        }
    }
    let eps = rng.gen_range(resolved_eps(grid)..0.15);
    let w1 = rng.gen_range(0.3..0.7);
    let w2 = rng.gen_range(0.3..0.7);
    FieldPair {
        u1: planted_sites(grid, &[(pts[0], w1), (pts[1], 1.0 - w1)], eps, 1.0),
        u2: planted_sites(grid, &[(pts[2], w2), (pts[3], 1.0 - w2)], eps, 1.0),
    }
}

pub const PROBE_CORPUS: u64 = 64;

/// Largest lhs - rhs over the zero state and 64 seeded two-site states at N = 64.
pub fn calibrate_c_probe(eps_prime: f64) -> f64 {
    let grid = TorusGrid::new(64).expect("valid");
    (0..PROBE_CORPUS).map(|s| mt_gap(&two_site_state(grid, s), eps_prime)).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pohozaev_roots() {
        for (a, b) in [(1.0, 0.0), (0.0, 1.0), (1.0, 2.0), (2.0, 1.0), (0.0, 0.0)] {
            assert_eq!(pohozaev_residual(a, b), 0.0);
        }
        assert_eq!(pohozaev_residual(1.0, 1.0), -1.0);
    }

    #[test]
    fn zero_field_has_one_nominal_peak() {
        let g = TorusGrid::new(32).unwrap();
        let p = detect_peaks_field(&ScalarField::zeros(g), 1);
        assert_eq!(p.len(), 1);
        assert_eq!((p[0].location, p[0].height, p[0].scale), ([0.0, 0.0], 0.0, 1.0));
    }

    #[test]
    fn refine_recovers_offset_of_a_paraboloid() {
        let g = TorusGrid::new(64).unwrap();
        let c = [0.503, 0.2491];
        let u = ScalarField::from_fn(g, |x| {
            let d = torus_delta(x, c);
            3.0 - 50.0 * (d[0] * d[0] + 2.0 * d[1] * d[1])
        });
        let p = detect_peaks_field(&u, 1);
        assert_eq!(p.len(), 1);
        assert!(torus_dist(p[0].location, c) < 1e-12 && (p[0].height - 3.0).abs() < 1e-12);
    }

    #[test]
    fn bilinear_is_exact_on_nodes() {
        let g = TorusGrid::new(32).unwrap();
        let u = ScalarField::from_fn(g, |x| (2.0 * PI * x[0]).sin() + x[1]);
        assert_eq!(bilinear(&u, g.node(3, 5)), u.at(3, 5));
    }

    #[test]
    fn overlapping_balls_rejected() {
        let g = TorusGrid::new(64).unwrap();
        let h = Weight::from_trig(&TrigPoly::constant(1.0), g);
        let r = ball_masses(&FieldPair::zeros(g), &h, &h, &[[0.0, 0.0], [0.15, 0.0]], 0.1);
        assert!(matches!(r, Err(TodaError::BallOverlap(_))));
    }
}
