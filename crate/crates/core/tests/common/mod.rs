#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn white_noise(seed: u64, n: usize) -> Vec<f64> {
    let mut r = rng(seed);
    (0..n).map(|_| StandardNormal.sample(&mut r)).collect()
}

pub fn uniform(seed: u64, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    let mut r = rng(seed);
    (0..n).map(|_| r.random_range(lo..hi)).collect()
}

/// AR(1) with unit-variance Gaussian innovations and a burn-in of 200.
pub fn ar1(seed: u64, n: usize, phi: f64) -> Vec<f64> {
    let e = white_noise(seed, n + 200);
    let mut x = vec![0.0; n + 200];
    for t in 1..x.len() {
        x[t] = phi * x[t - 1] + e[t];
    }
    x.split_off(200)
}

/// MA(1) `x_t = e_t + theta e_{t-1}`.
pub fn ma1(seed: u64, n: usize, theta: f64) -> Vec<f64> {
    let e = white_noise(seed, n + 1);
    (1..=n).map(|t| e[t] + theta * e[t - 1]).collect()
}

pub fn random_walk(seed: u64, n: usize) -> Vec<f64> {
    let mut acc = 0.0;
    white_noise(seed, n)
        .into_iter()
        .map(|e| {
            acc += e;
            acc
        })
        .collect()
}
