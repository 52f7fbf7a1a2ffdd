#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use nlsylv::eigen::EigenPair;
use nlsylv::{PolyMatrix, PolyVec, Polynomial};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(r: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| r.gen_range(-1.0..1.0))
}

/// Distinct values in `[lo, hi]` at least `gap` apart.
pub fn distinct(r: &mut ChaCha8Rng, k: usize, lo: f64, hi: f64, gap: f64) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::new();
    while out.len() < k {
        let x = r.gen_range(lo..hi);
        if out.iter().all(|y| (x - y).abs() >= gap) {
            out.push(x);
        }
    }
    out
}

/// Well-conditioned random matrix `P D P^{-1}` with the given real spectrum.
pub fn with_spectrum(r: &mut ChaCha8Rng, d: &[f64]) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = d.len();
    loop {
        let p = DMatrix::<f64>::identity(n, n) + random_matrix(r, n, n) * 0.5;
        if let Some(pinv) = p.clone().try_inverse() {
            if pinv.norm() < 20.0 {
                let a = &p * DMatrix::from_diagonal(&DVector::from_column_slice(d)) * &pinv;
                return (a, p);
            }
        }
    }
}

pub fn cx(m: &DMatrix<f64>) -> DMatrix<Complex<f64>> {
    m.map(|x| Complex::new(x, 0.0))
}

pub fn linear_field(m: &DMatrix<f64>) -> PolyVec<f64> {
    PolyVec::linear(&cx(m))
}

pub fn constant_matrix(m: &DMatrix<f64>, num_vars: usize) -> PolyMatrix<f64> {
    PolyMatrix::constant(&cx(m), num_vars)
}

pub fn constant_pair_right(value: f64, v: &[f64], n: usize) -> EigenPair<f64> {
    let v: Vec<Complex<f64>> = v.iter().map(|&x| Complex::new(x, 0.0)).collect();
    EigenPair::right(Polynomial::real_constant(n, value), PolyVec::constant(&v, n)).unwrap()
}

pub fn constant_pair_left(value: f64, v: &[f64], n: usize) -> EigenPair<f64> {
    let v: Vec<Complex<f64>> = v.iter().map(|&x| Complex::new(x, 0.0)).collect();
    EigenPair::left(Polynomial::real_constant(n, value), PolyVec::constant(&v, n)).unwrap()
}

pub fn unit(n: usize, i: usize) -> Vec<f64> {
    (0..n).map(|j| if j == i { 1.0 } else { 0.0 }).collect()
}
