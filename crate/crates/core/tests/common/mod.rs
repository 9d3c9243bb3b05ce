#![allow(dead_code)]

use std::collections::BTreeMap;

use gbdp::param::edge_classes;
use gbdp::{GridShape, Parametrization};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// α in [0.5, 2], Γ in [lo, hi].
pub fn random_params(shape: &GridShape, rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> Parametrization {
    let alpha = (0..shape.num_states()).map(|_| rng.random_range(0.5..2.0)).collect();
    let gamma: BTreeMap<_, _> = edge_classes(shape)
        .unwrap()
        .into_iter()
        .map(|c| (c, rng.random_range(lo..hi)))
        .collect();
    Parametrization::new(shape.clone(), alpha, gamma).unwrap()
}

/// A balanced shape with q ≤ 3, n_i ≤ 4, l ≤ 2 and at most `max_states` states.
pub fn random_shape(rng: &mut ChaCha8Rng, max_states: usize) -> GridShape {
    loop {
        let q = rng.random_range(1..=3);
        let dims: Vec<usize> = (0..q).map(|_| rng.random_range(1..=4)).collect();
        let l = rng.random_range(1..=2).min(*dims.iter().min().unwrap());
        let s = GridShape::balanced(dims, l).unwrap();
        if s.num_states() <= max_states {
            return s;
        }
    }
}

pub fn max_abs_diff(a: &nalgebra::DMatrix<f64>, b: &nalgebra::DMatrix<f64>) -> f64 {
    (a - b).amax()
}
