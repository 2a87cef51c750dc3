use std::f64::consts::PI;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use toda::fields::TrigPoly;
use toda::functional::*;
use toda::geometry::{dirichlet_energy, ScalarField, TorusGrid};

fn random_poly(rng: &mut ChaCha8Rng, kmax: i32, amp: f64) -> TrigPoly {
    let mut p = TrigPoly::zero();
    for k1 in 0..=kmax {
        for k2 in -kmax..=kmax {
            if k1 == 0 && k2 <= 0 {
                continue;
            }
            let s = amp / (1.0 + (k1 * k1 + k2 * k2) as f64);
            p.add_term(k1, k2, rng.gen_range(-s..s), rng.gen_range(-s..s));
        }
    }
    p
}

fn field(p: &TrigPoly, grid: TorusGrid) -> ScalarField {
    ScalarField::new(grid, p.sample(grid.n())).unwrap()
}

fn sign_changing() -> TrigPoly {
    TrigPoly::constant(0.3).with_term(1, 0, 1.0, 0.0).with_term(0, 1, 0.4, 0.2)
}

/// Random feasible states on a 64 grid, both for positive and sign-changing h.
/// States with heavy cancellation in int h e^u (I small against int |h| e^u) are skipped:
/// there log I is nearly singular and difference quotients lose their meaning.
fn corpus(count: usize) -> Vec<(FieldPair, Weight, Weight)> {
    let grid = TorusGrid::new(64).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut out = Vec::new();
    while out.len() < count {
        let hp = if out.len() % 2 == 0 {
            TrigPoly::constant(1.0).with_term(1, 1, 0.3, 0.1)
        } else {
            sign_changing()
        };
        let h1 = Weight::from_trig(&hp, grid);
        let h2 = Weight::from_trig(&hp.translate([0.3, 0.1]), grid);
        let s = FieldPair::new(
            field(&random_poly(&mut rng, 4, 1.5), grid),
            field(&random_poly(&mut rng, 4, 1.5), grid),
        )
        .unwrap();
        let c = constraint_values(&s, &h1, &h2);
        let a = constraint_values(&s, &h1.abs(), &h2.abs());
        if c.feasible && c.i1 >= 0.25 * a.i1 && c.i2 >= 0.25 * a.i2 {
            out.push((s, h1, h2));
        }
    }
    out
}

#[test]
fn directional_derivatives_match_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let rho = RhoPair::new(4.0 * PI - 0.5, 3.0).unwrap();
    let grid = TorusGrid::new(64).unwrap();
    for (s, h1, h2) in corpus(32) {
        let v = FieldPair::new(
            field(&random_poly(&mut rng, 5, 1.0), grid),
            field(&random_poly(&mut rng, 5, 1.0), grid),
        )
        .unwrap();
        let g = gradient_free(&s, &h1, &h2, rho).unwrap();
        let t = 1e-5;
        let fp = free_energy(&s.axpy(t, &v), &h1, &h2, rho).unwrap();
        let fm = free_energy(&s.axpy(-t, &v), &h1, &h2, rho).unwrap();
        let fd = (fp - fm) / (2.0 * t);
        let an = g.dot(&v);
        // relative to the Cauchy-Schwarz scale |g||v| of the directional derivative
        let scale = g.norm() * v.norm();
        assert!((fd - an).abs() <= 1e-7 * scale, "fd {fd} an {an} scale {scale}");
    }
}

#[test]
fn scalar_directional_derivatives_match() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let grid = TorusGrid::new(64).unwrap();
    let h = Weight::from_trig(&sign_changing(), grid);
    let mut done = 0;
    while done < 32 {
        let u = field(&random_poly(&mut rng, 4, 1.5), grid);
        let Ok(e) = scalar::evaluate(&u, &h, 8.0 * PI - 1.0) else { continue };
        let v = field(&random_poly(&mut rng, 5, 1.0), grid);
        let t = 1e-5;
        let fp = scalar::free_energy(&u.axpy(t, &v), &h, 8.0 * PI - 1.0).unwrap();
        let fm = scalar::free_energy(&u.axpy(-t, &v), &h, 8.0 * PI - 1.0).unwrap();
        let fd = (fp - fm) / (2.0 * t);
        let an = toda::geometry::inner(&e.grad, &v);
        let scale = e.grad_norm * toda::geometry::inner(&v, &v).sqrt();
        assert!((fd - an).abs() <= 1e-7 * scale, "fd {fd} an {an} scale {scale}");
        done += 1;
    }
}

#[test]
fn free_energy_equals_j_of_normalized() {
    let rho = RhoPair::new(4.0 * PI, 2.5).unwrap();
    for (s, h1, h2) in corpus(8) {
        let f = free_energy(&s, &h1, &h2, rho).unwrap();
        let j = energy_j(&normalize(&s, &h1, &h2).unwrap(), &h1, &h2, rho).unwrap();
        assert!((f - j).abs() < 1e-10 * f.abs().max(1.0));
    }
}

#[test]
fn normalization_hits_the_constraint() {
    for (s, h1, h2) in corpus(8) {
        let c = constraint_values(&normalize(&s, &h1, &h2).unwrap(), &h1, &h2);
        assert!((c.i1 - 1.0).abs() < 1e-10 && (c.i2 - 1.0).abs() < 1e-10);
    }
}

#[test]
fn quadrature_matches_oversampled_oracle() {
    let grid = TorusGrid::new(64).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..4 {
        let up = random_poly(&mut rng, 4, 1.0);
        let hp = TrigPoly::constant(1.0).add(&random_poly(&mut rng, 3, 0.5));
        let h = Weight::from_trig(&hp, grid);
        let s = FieldPair::new(field(&up, grid), field(&up, grid)).unwrap();
        let got = constraint_values(&s, &h, &h).i1;
        // 2N nodal oracle with exact evaluations
        let m = 128;
        let (us, hs) = (up.sample(m), hp.sample(m));
        let want = us.iter().zip(&hs).map(|(u, h)| h * u.exp()).sum::<f64>() / (m * m) as f64;
        assert!((got - want).abs() < 1e-8 * want.abs(), "{got} {want}");
    }
}

#[test]
fn j_on_antisymmetric_pair_term_by_term() {
    let grid = TorusGrid::new(64).unwrap();
    let h = Weight::from_trig(&TrigPoly::constant(1.0), grid);
    let f = field(&TrigPoly::zero().with_term(1, 0, 0.7, 0.0).with_term(1, 2, 0.2, -0.1), grid);
    let s = normalize(&FieldPair::new(f.clone(), f.scale(-1.0)).unwrap(), &h, &h).unwrap();
    let rho = RhoPair::new(4.0 * PI, 4.0 * PI).unwrap();
    let j = energy_j(&s, &h, &h, rho).unwrap();
    let want = dirichlet_energy(&f) / 3.0 + 4.0 * PI * (s.u1.mean() + s.u2.mean());
    assert!((j - want).abs() < 1e-10);
}

#[test]
fn el_residual_of_random_state_is_large() {
    let (s, h1, h2) = corpus(1).remove(0);
    let s = normalize(&s, &h1, &h2).unwrap();
    assert!(el_residual(&s, &h1, &h2, 1.0).unwrap() > 0.1);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn free_energy_and_gradient_are_shift_invariant(c1 in -20.0f64..20.0, c2 in -20.0f64..20.0, pick in 0usize..4) {
        let (s, h1, h2) = corpus(4).remove(pick);
        let rho = RhoPair::new(4.0, 9.0).unwrap();
        let a = evaluate(&s, &h1, &h2, rho).unwrap();
        let b = evaluate(&s.shift(c1, c2), &h1, &h2, rho).unwrap();
        prop_assert!((a.f - b.f).abs() < 1e-10 * a.f.abs().max(1.0));
        prop_assert!(a.grad.max_abs_diff(&b.grad) < 1e-9);
    }

    #[test]
    fn j_is_shift_invariant_after_renormalization(c1 in -5.0f64..5.0, c2 in -5.0f64..5.0) {
        let (s, h1, h2) = corpus(1).remove(0);
        let rho = RhoPair::new(4.0 * PI, 4.0 * PI).unwrap();
        let a = energy_j(&normalize(&s, &h1, &h2).unwrap(), &h1, &h2, rho).unwrap();
        let b = energy_j(&normalize(&s.shift(c1, c2), &h1, &h2).unwrap(), &h1, &h2, rho).unwrap();
        prop_assert!((a - b).abs() < 1e-10);
    }

    #[test]
    fn scalar_free_form_shift_invariant(c in -20.0f64..20.0) {
        let grid = TorusGrid::new(32).unwrap();
        let h = Weight::from_trig(&TrigPoly::constant(1.0).with_term(1, 0, 0.3, 0.0), grid);
        let u = field(&TrigPoly::zero().with_term(1, 1, 0.5, 0.2), grid);
        let a = scalar::free_energy(&u, &h, 10.0).unwrap();
        let b = scalar::free_energy(&u.shift(c), &h, 10.0).unwrap();
        prop_assert!((a - b).abs() < 1e-10);
    }
}
