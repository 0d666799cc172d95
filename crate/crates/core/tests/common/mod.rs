#![allow(dead_code)]

use std::sync::Arc;

use ncwwlab_core::linalg::{c, C64};
use ncwwlab_core::superop::{
    make_conjugation, make_convolution, make_expectation_product, make_nc_torus_heat, shift_matrix, Expectation, Keep,
    SuperOperator,
};
use ncwwlab_core::{AlgElement, TracialAlgebra};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn block_specs(max_dim: usize, max_blocks: usize) -> impl Strategy<Value = Vec<(usize, f64)>> {
    prop::collection::vec((1..=max_dim, 0.1f64..3.0), 1..=max_blocks)
}

pub fn random_algebra(r: &mut ChaCha8Rng, max_dim: usize, max_blocks: usize) -> Arc<TracialAlgebra> {
    let n = r.random_range(1..=max_blocks);
    let blocks: Vec<(usize, f64)> = (0..n).map(|_| (r.random_range(1..=max_dim), r.random_range(0.1..3.0))).collect();
    TracialAlgebra::new(&blocks).unwrap()
}

pub fn contraction(alg: &Arc<TracialAlgebra>, r: &mut ChaCha8Rng) -> AlgElement {
    let u = AlgElement::random(alg, r);
    u.scale_real(1.0 / u.norm_inf())
}

pub fn unit(phase: f64) -> C64 {
    c(phase.cos(), phase.sin())
}

/// Random symmetric probability on `{-3..=3}`.
pub fn symmetric_measure(r: &mut ChaCha8Rng) -> Vec<(i64, f64)> {
    let w: Vec<f64> = (0..4).map(|_| r.random::<f64>() + 0.05).collect();
    let total = w[0] + 2.0 * (w[1] + w[2] + w[3]);
    let mut mu = vec![(0, w[0] / total)];
    for n in 1..=3 {
        mu.push((n, w[n as usize] / total));
        mu.push((-n, w[n as usize] / total));
    }
    mu
}

pub fn symmetric_convolution(r: &mut ChaCha8Rng) -> SuperOperator {
    let q = r.random_range(2..=4);
    let alg = TracialAlgebra::matrix(q, 1.0 / q as f64).unwrap();
    let phi = if r.random::<bool>() {
        make_conjugation(&shift_matrix(&alg, q).unwrap()).unwrap()
    } else {
        let d: Vec<C64> = (0..q).map(|_| unit(std::f64::consts::TAU * r.random::<f64>())).collect();
        make_conjugation(&AlgElement::diagonal(&alg, &[d]).unwrap()).unwrap()
    };
    make_convolution(&phi, &symmetric_measure(r)).unwrap()
}

/// One operator of each structured constructor.
pub fn ds_catalog(seed: u64) -> Vec<(&'static str, SuperOperator)> {
    let mut r = rng(seed);
    let alg = TracialAlgebra::new(&[(2, 0.5), (4, 1.25), (1, 2.0)]).unwrap();
    let conj = make_conjugation(&contraction(&alg, &mut r)).unwrap();
    let conv = symmetric_convolution(&mut r);
    let exp = make_expectation_product(
        &alg,
        &[
            Expectation::PartialTrace { block: 1, left: 2, right: 2, keep: Keep::Left },
            Expectation::Pinching { block: 0, groups: vec![vec![0], vec![1]] },
            Expectation::Diagonal,
        ],
    )
    .unwrap();
    let heat = make_nc_torus_heat(5, 2, 0.07).unwrap();
    vec![("conjugation", conj), ("symmetric_convolution", conv), ("expectation_product", exp), ("nc_torus_heat", heat)]
}

/// Diagonal conjugation: `u = diag(radius_k · e^{iφ_k})` gives a normal
/// operator with eigenvalues `conj(u_j) u_k`.
pub fn diagonal_conjugation(entries: &[C64]) -> SuperOperator {
    let alg = TracialAlgebra::matrix(entries.len(), 1.0).unwrap();
    make_conjugation(&AlgElement::diagonal(&alg, &[entries.to_vec()]).unwrap()).unwrap()
}
