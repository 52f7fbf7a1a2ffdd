#![allow(dead_code)]

use num_complex::Complex;
use proptest::prelude::*;
use proptest::test_runner::{Config, RngSeed};

use nlsylv::{PolyVec, Polynomial};

pub type P = Polynomial<f64>;

/// Fixed seed so every run explores the same cases.
pub fn config(cases: u32, seed: u64) -> Config {
    Config {
        cases,
        rng_seed: RngSeed::Fixed(seed),
        failure_persistence: None,
        ..Config::default()
    }
}

/// Coefficients on a dyadic grid: sums and products stay exact in binary
/// floating point, and decimal printing round-trips.
pub fn grid_coeff() -> impl Strategy<Value = Complex<f64>> {
    ((-8i32..=8), (-8i32..=8), any::<bool>())
        .prop_map(|(re, im, real)| Complex::new(re as f64 / 4.0, if real { 0.0 } else { im as f64 / 4.0 }))
}

pub fn real_grid_coeff() -> impl Strategy<Value = Complex<f64>> {
    (-8i32..=8).prop_map(|re| Complex::new(re as f64 / 4.0, 0.0))
}

fn poly_with<S: Strategy<Value = Complex<f64>>>(n: usize, max_exp: u32, max_terms: usize, coeff: S) -> impl Strategy<Value = P> {
    proptest::collection::vec((proptest::collection::vec(0..=max_exp, n), coeff), 0..=max_terms)
        .prop_map(move |terms| P::from_terms(n, terms).unwrap())
}

pub fn poly(n: usize, max_exp: u32, max_terms: usize) -> impl Strategy<Value = P> {
    poly_with(n, max_exp, max_terms, grid_coeff())
}

pub fn real_poly(n: usize, max_exp: u32, max_terms: usize) -> impl Strategy<Value = P> {
    poly_with(n, max_exp, max_terms, real_grid_coeff())
}

pub fn field(n: usize, max_exp: u32, max_terms: usize) -> impl Strategy<Value = PolyVec<f64>> {
    proptest::collection::vec(poly(n, max_exp, max_terms), n).prop_map(|v| PolyVec::new(v).unwrap())
}

pub fn point(n: usize) -> impl Strategy<Value = Vec<Complex<f64>>> {
    proptest::collection::vec(((-1.0f64..1.0), (-1.0f64..1.0)).prop_map(|(a, b)| Complex::new(a, b)), n)
}

pub fn close(a: Complex<f64>, b: Complex<f64>, scale: f64) -> bool {
    (a - b).norm() <= 1e-9 * (1.0 + scale)
}
