//! Pointwise Green function of the unit torus by Ewald splitting.
//!
//! With splitting parameter a = 1/(4 pi):
//! G(x) = sum_n E1(|x-n|^2/4a)/(4 pi) - a + sum_{k != 0} e^{-4 pi^2 |k|^2 a} cos(2 pi k.x) / (4 pi^2 |k|^2).

use std::f64::consts::PI;

use super::{wrap_half, Point};

pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

const KMAX: i32 = 7;
const IMAGES: i32 = 3;

/// Exponential integral E1(z), z > 0.
pub fn exp_integral_e1(z: f64) -> f64 {
    if z < 1.0 {
        ein(z) - z.ln() - EULER_GAMMA
    } else {
        // modified Lentz on the continued fraction
        let tiny = 1e-300;
        let mut b = z + 1.0;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..500 {
            let an = -((i * i) as f64);
            b += 2.0;
            d = 1.0 / (an * d + b);
            c = b + an / c;
            let del = c * d;
            h *= del;
            if (del - 1.0).abs() < 1e-16 {
                break;
            }
        }
        h * (-z).exp()
    }
}

/// Entire function Ein(z) = E1(z) + ln z + gamma = sum_{k>=1} (-1)^{k+1} z^k / (k k!).
pub fn ein(z: f64) -> f64 {
    if z < 1.0 {
        let mut term = 1.0;
        let mut s = 0.0;
        for k in 1..60 {
            term *= -z / k as f64;
            s -= term / k as f64;
            if term.abs() < 1e-18 {
                break;
            }
        }
        s
    } else {
        exp_integral_e1(z) + z.ln() + EULER_GAMMA
    }
}

struct Parts {
    value: f64,
    grad: [f64; 2],
}

/// Reciprocal sum plus the n != 0 images plus the constant, at a wrapped displacement.
fn smooth_part(x: Point) -> Parts {
    let kn = KMAX as usize;
    let mut c1 = [0.0; 8];
    let mut s1 = [0.0; 8];
    let mut c2 = [0.0; 8];
    let mut s2 = [0.0; 8];
    for k in 0..=kn {
        let a = 2.0 * PI * k as f64 * x[0];
        let b = 2.0 * PI * k as f64 * x[1];
        c1[k] = a.cos();
        s1[k] = a.sin();
        c2[k] = b.cos();
        s2[k] = b.sin();
    }
    let mut value = 0.0;
    let mut grad = [0.0; 2];
    for k1 in -KMAX..=KMAX {
        let (ca, sa) = (c1[k1.unsigned_abs() as usize], s1[k1.unsigned_abs() as usize] * k1.signum() as f64);
        for k2 in -KMAX..=KMAX {
            if k1 == 0 && k2 == 0 {
                continue;
            }
            let (cb, sb) = (c2[k2.unsigned_abs() as usize], s2[k2.unsigned_abs() as usize] * k2.signum() as f64);
            let q = (k1 * k1 + k2 * k2) as f64;
            let w = (-PI * q).exp() / (4.0 * PI * PI * q);
            let cos = ca * cb - sa * sb;
            let sin = sa * cb + ca * sb;
            value += w * cos;
            grad[0] -= w * 2.0 * PI * k1 as f64 * sin;
            grad[1] -= w * 2.0 * PI * k2 as f64 * sin;
        }
    }
    for n1 in -IMAGES..=IMAGES {
        for n2 in -IMAGES..=IMAGES {
            if n1 == 0 && n2 == 0 {
                continue;
            }
            let d = [x[0] - n1 as f64, x[1] - n2 as f64];
            let r2 = d[0] * d[0] + d[1] * d[1];
            let z = PI * r2;
            if z > 45.0 {
                continue;
            }
            value += exp_integral_e1(z) / (4.0 * PI);
            let f = -(-z).exp() / (2.0 * PI * r2);
            grad[0] += f * d[0];
            grad[1] += f * d[1];
        }
    }
    value -= 1.0 / (4.0 * PI);
    Parts { value, grad }
}

fn wrap(x: Point) -> Point {
    [wrap_half(x[0]), wrap_half(x[1])]
}

/// G(x) + (1/2 pi) log|x|, with x taken as the minimal image; smooth near 0.
pub fn green_regular(x: Point) -> f64 {
    let x = wrap(x);
    let z = PI * (x[0] * x[0] + x[1] * x[1]);
    smooth_part(x).value + (ein(z) - EULER_GAMMA - PI.ln()) / (4.0 * PI)
}

pub fn green_regular_grad(x: Point) -> [f64; 2] {
    let x = wrap(x);
    let r2 = x[0] * x[0] + x[1] * x[1];
    let s = smooth_part(x).grad;
    // (1/4pi) grad E1(pi r^2) + x/(2 pi r^2) = (1 - e^{-z}) x / (2 pi r^2)
    let f = if r2 < 1e-300 { 0.5 } else { -(-PI * r2).exp_m1() / (2.0 * PI * r2) };
    [s[0] + f * x[0], s[1] + f * x[1]]
}

/// G(x) for the displacement x (x != 0 mod Z^2).
pub fn green_exact(x: Point) -> f64 {
    let x = wrap(x);
    let r = x[0].hypot(x[1]);
    green_regular(x) - r.ln() / (2.0 * PI)
}

pub fn green_exact_grad(x: Point) -> [f64; 2] {
    let x = wrap(x);
    let r2 = x[0] * x[0] + x[1] * x[1];
    let g = green_regular_grad(x);
    [g[0] - x[0] / (2.0 * PI * r2), g[1] - x[1] / (2.0 * PI * r2)]
}

/// Regular part of G on the diagonal.
pub fn robin_exact() -> f64 {
    green_regular([0.0, 0.0])
}
