//! Helpers shared by the integration tests.
#![allow(dead_code)]

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use eai::greens::Dyadic3;
use eai::model::{self, Vec3};

/// Scalar Green's function e^{ikR}/(4πR).
fn scalar_g(r: &Vec3, src: &Vec3, k: f64) -> Complex64 {
    let d = ((r[0] - src[0]).powi(2) + (r[1] - src[1]).powi(2) + (r[2] - src[2]).powi(2)).sqrt();
    Complex64::from_polar(1.0 / (4.0 * std::f64::consts::PI * d), k * d)
}

/// i·P·[I + ∇∇/k²] g by central differences of the scalar Green's function
/// with step `h` (mm). Independent of the closed-form split into terms.
pub fn fd_green(r_obs: &Vec3, r_src: &Vec3, omega: f64, prefactor: f64, h: f64) -> Dyadic3 {
    let k = model::wavenumber(omega);
    let g = |dx: [f64; 3]| scalar_g(&[r_obs[0] + dx[0], r_obs[1] + dx[1], r_obs[2] + dx[2]], r_src, k);
    let unit = |a: usize, s: f64| {
        let mut v = [0.0; 3];
        v[a] = s;
        v
    };
    let g0 = g([0.0; 3]);
    let mut out = Dyadic3::zeros();
    for a in 0..3 {
        for b in 0..3 {
            let d2 = if a == b {
                (g(unit(a, h)) - 2.0 * g0 + g(unit(a, -h))) / (h * h)
            } else {
                let shift = |sa: f64, sb: f64| {
                    let mut v = unit(a, sa);
                    v[b] = sb;
                    g(v)
                };
                (shift(h, h) - shift(h, -h) - shift(-h, h) + shift(-h, -h)) / (4.0 * h * h)
            };
            let delta = if a == b { g0 } else { Complex64::new(0.0, 0.0) };
            out[(a, b)] = Complex64::i() * prefactor * (delta + d2 / (k * k));
        }
    }
    out
}

pub fn frobenius3(a: &Dyadic3) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `count` random source/observation pairs with separation in
/// (min_lambda, max_lambda)·λ, in a fixed sequence.
pub fn random_pairs(seed: u64, count: usize, lambda: f64, min_lambda: f64, max_lambda: f64) -> Vec<(Vec3, Vec3)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let src = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            // Uniform direction, log-uniform distance.
            let z: f64 = rng.random_range(-1.0..1.0);
            let phi: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            let s = (1.0 - z * z).sqrt();
            let r = lambda * (min_lambda.ln() + rng.random::<f64>() * (max_lambda / min_lambda).ln()).exp();
            (
                [src[0] + r * s * phi.cos(), src[1] + r * s * phi.sin(), src[2] + r * z],
                src,
            )
        })
        .collect()
}

/// Every built-in scenario with its system, in order.
pub fn builtin_names() -> Vec<&'static str> {
    eai::config::BUILTIN.iter().map(|(n, _)| *n).collect()
}
