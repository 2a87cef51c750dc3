//! Browser demo: three small operations on the torus, each returning a heatmap.

use std::f64::consts::PI;

use toda::fields::{toda_condition, TrigPoly};
use toda::functional::Weight;
use toda::geometry::{green_pair, ScalarField, TorusGrid};
use toda::solver::{default_init_pair, minimize_subcritical, SolveOptions};
use wasm_bindgen::prelude::*;

#[wasm_bindgen]
pub struct Heatmap {
    n: usize,
    values: Vec<f64>,
    summary: String,
}

#[wasm_bindgen]
impl Heatmap {
    #[wasm_bindgen(getter)]
    pub fn n(&self) -> usize {
        self.n
    }

    /// Row-major, row i at y = i/N. NaN marks points outside the plotted set.
    #[wasm_bindgen(getter)]
    pub fn values(&self) -> Vec<f64> {
        self.values.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn summary(&self) -> String {
        self.summary.clone()
    }
}

impl Heatmap {
    fn from_field(f: &ScalarField, summary: String) -> Self {
        Self { n: f.n(), values: f.values().to_vec(), summary }
    }
}

fn grid(n: usize) -> Result<TorusGrid, String> {
    if n > 128 {
        return Err(format!("grid {n} too large for the demo (max 128)"));
    }
    TorusGrid::new(n).map_err(|e| e.to_string())
}

/// G_1 = 8 pi G(., p1) - 4 pi G(., p2) on the grid.
#[wasm_bindgen]
pub fn green_pair_field(n: usize, x1: f64, y1: f64, x2: f64, y2: f64) -> Result<Heatmap, String> {
    let g = green_pair(grid(n)?, [x1, y1], [x2, y2]).map_err(|e| e.to_string())?;
    Ok(Heatmap::from_field(&g.g1, format!("A1 = {:.6}, A2 = {:.6}, R = {:.8}", g.a1, g.a2, g.robin)))
}

/// Minimiser u1 at rho = 4 pi - eps for h1 = 1 + a1 cos 2 pi x, h2 = 1 + a2 cos 2 pi y.
#[wasm_bindgen]
pub fn subcritical_solve(n: usize, eps: f64, a1: f64, a2: f64) -> Result<Heatmap, String> {
    let g = grid(n)?;
    let h1 = Weight::from_trig(&TrigPoly::constant(1.0).with_term(1, 0, a1, 0.0), g);
    let h2 = Weight::from_trig(&TrigPoly::constant(1.0).with_term(0, 1, a2, 0.0), g);
    let opts = SolveOptions { max_iters: 500, ..SolveOptions::default() };
    let r = minimize_subcritical(&h1, &h2, eps, &default_init_pair(&h1, &h2), &opts).map_err(|e| e.to_string())?;
    Ok(Heatmap::from_field(
        &r.state.u1,
        format!(
            "F = {:.8}, EL residual = {:.2e}, iterations = {}, converged = {}",
            r.f_value, r.el_residual, r.iterations, r.converged
        ),
    ))
}

/// Lap log h + 4 pi on the positive set of h = c + a cos 2 pi (k1 x + k2 y).
#[wasm_bindgen]
pub fn condition_margin(n: usize, c: f64, a: f64, k1: i32, k2: i32) -> Result<Heatmap, String> {
    let g = grid(n)?;
    let h = TrigPoly::constant(c).with_term(k1, k2, a, 0.0);
    let r = toda_condition(&h, g).map_err(|e| e.to_string())?;
    let f = ScalarField::new(g, r.margin.clone()).map_err(|e| e.to_string())?;
    Ok(Heatmap::from_field(
        &f,
        format!(
            "holds = {}, min margin = {:.4} at ({:.3}, {:.3}), positive fraction = {:.3}, 4 pi = {:.4}",
            r.holds,
            r.min_margin,
            r.argmin[0],
            r.argmin[1],
            r.mask.fraction_positive,
            4.0 * PI
        ),
    ))
}
