mod common;

use common::{diagonal_conjugation, ds_catalog, rng, symmetric_convolution, unit};
use ncwwlab_core::harness::weighted_average_stream;
use ncwwlab_core::linalg::{self, c, CMat, C64};
use ncwwlab_core::spectral::{flight_decay_bound, jdlg_split, spectral_weighted_limit, JdlgSplit, DEFAULT_UNIMODULAR_TOL};
use ncwwlab_core::superop::{make_conjugation, make_nc_torus_heat};
use ncwwlab_core::{AlgElement, SuperOperator, TracialAlgebra, WeightSequence};
use proptest::prelude::*;
use rand::Rng;

/// `u = diag(1, i) ⊕ (upper-triangular strict contraction)`: a non-normal
/// conjugation with a nontrivial reversible part.
fn oblique_fixture() -> SuperOperator {
    let a = TracialAlgebra::new(&[(4, 0.5), (1, 2.0)]).unwrap();
    let mut m = CMat::zeros(4, 4);
    m[(0, 0)] = c(1.0, 0.0);
    m[(1, 1)] = c(0.0, 1.0);
    m[(2, 2)] = c(0.5, 0.0);
    m[(2, 3)] = c(0.4, 0.1);
    m[(3, 3)] = c(-0.3, 0.2);
    let u = AlgElement::from_blocks(&a, vec![m, CMat::from_element(1, 1, unit(0.7))]).unwrap();
    make_conjugation(&u).unwrap()
}

fn fixtures() -> Vec<(String, SuperOperator)> {
    let mut out: Vec<(String, SuperOperator)> = Vec::new();
    for seed in 0..2u64 {
        for (name, op) in ds_catalog(seed) {
            out.push((format!("{name}#{seed}"), op));
        }
    }
    out.push(("oblique".into(), oblique_fixture()));
    out.push(("mixed_diagonal".into(), diagonal_conjugation(&[unit(0.0), unit(2.0), unit(-1.0) * 0.6])));
    out
}

fn split_of(name: &str, op: &SuperOperator) -> JdlgSplit {
    jdlg_split(op, DEFAULT_UNIMODULAR_TOL).unwrap_or_else(|e| panic!("{name}: {e}"))
}

#[test]
fn reconstruction_and_projection_sum() {
    let mut r = rng(21);
    for (name, op) in fixtures() {
        let s = split_of(&name, &op);
        let n = op.algebra().hs_dim();
        let sum = &s.proj_reversible + &s.proj_flight;
        assert!(linalg::op_norm(&(sum - CMat::identity(n, n))) <= 1e-10, "{name}");
        for _ in 0..100 {
            let x = AlgElement::random(op.algebra(), &mut r);
            let back = &s.reversible_part(&x) + &s.flight_part(&x);
            assert!((&back - &x).norm2() <= 1e-10 * (1.0 + x.norm2()), "{name}");
        }
    }
}

#[test]
fn flight_subspace_is_invariant() {
    let mut r = rng(22);
    for (name, op) in fixtures() {
        let s = split_of(&name, &op);
        for _ in 0..20 {
            let x = AlgElement::random(op.algebra(), &mut r);
            let tf = op.apply(&s.flight_part(&x)).unwrap();
            let leak = (&tf - &s.flight_part(&tf)).norm2();
            assert!(leak <= 1e-9 * (1.0 + x.norm2()), "{name}: {leak}");
        }
    }
}

#[test]
fn flight_vectors_decay_within_bound() {
    let mut r = rng(23);
    for (name, op) in fixtures() {
        let s = split_of(&name, &op);
        assert!(s.flight_spectral_radius < 1.0 - 1e-10, "{name}");
        for _ in 0..20 {
            let f = s.flight_part(&AlgElement::random(op.algebra(), &mut r));
            let nf = f.norm2();
            let mut y = f.clone();
            for n in 1..=200u32 {
                y = op.apply(&y).unwrap();
                assert!(y.norm2() <= flight_decay_bound(&s, n) * nf + 1e-10, "{name} n={n}");
            }
        }
    }
}

#[test]
fn unimodular_eigenpairs_are_exact() {
    for (name, op) in fixtures() {
        let s = split_of(&name, &op);
        for pair in &s.unimodular_eigenpairs {
            assert!(((pair.lambda.norm()) - 1.0).abs() <= DEFAULT_UNIMODULAR_TOL, "{name}");
            for b in &pair.basis {
                let d = (&op.apply(b).unwrap() - &b.scale(pair.lambda)).norm2();
                assert!(d <= 1e-8, "{name}: {d}");
            }
        }
    }
}

#[test]
fn oblique_fixture_reports_reversible_part() {
    let s = split_of("oblique", &oblique_fixture());
    let mut ev = s.unimodular_eigenvalues();
    ev.sort_by(|a, b| a.arg().total_cmp(&b.arg()));
    // conj(a)b for a, b in {1, i} on the big block and |e^{0.7i}|² on the small one
    let want = [c(0.0, -1.0), c(1.0, 0.0), c(0.0, 1.0)];
    assert_eq!(ev.len(), want.len());
    for (a, b) in ev.iter().zip(want) {
        assert!((a - b).norm() < 1e-8);
    }
    let dims: usize = s.unimodular_eigenpairs.iter().map(|p| p.basis.len()).sum();
    assert_eq!(dims, 5);
    assert_eq!(s.reversible_basis.len(), 5);
}

/// Largest `4/|1 − λμ|` over weight frequencies `λ` and HS eigenvalues `μ`
/// whose product is not 1.
fn geometric_constant(freqs: &[C64], spectrum: &[C64]) -> f64 {
    let mut worst: f64 = 0.0;
    for l in freqs {
        for m in spectrum {
            let d = (C64::new(1.0, 0.0) - l * m).norm();
            if d > 1e-9 {
                worst = worst.max(4.0 / d);
            }
        }
    }
    worst
}

fn normal_contractions(r: &mut impl Rng) -> Vec<SuperOperator> {
    vec![
        diagonal_conjugation(&[unit(0.0), unit(1.3), unit(-2.2) * 0.8]),
        diagonal_conjugation(&[unit(0.4), unit(std::f64::consts::FRAC_PI_2)]),
        symmetric_convolution(&mut common::rng(r.random())),
        make_nc_torus_heat(3, 1, 0.1).unwrap(),
    ]
}

#[test]
fn weighted_averages_approach_spectral_limit() {
    let n = 10_000u64;
    let mut r = rng(24);
    for (i, op) in normal_contractions(&mut r).into_iter().enumerate() {
        let s = split_of("normal", &op);
        let spectrum = linalg::eigenvalues(op.hs_matrix());
        let ev = s.unimodular_eigenvalues();
        // frequencies matched to eigenvalues, a free one, and the constant
        let mut weights: Vec<(Vec<(C64, C64)>, WeightSequence)> = Vec::new();
        for nu in ev.iter().take(2) {
            let terms = vec![(c(0.7, 0.2), nu.conj()), (c(-0.4, 0.1), unit(2.9))];
            weights.push((terms.clone(), WeightSequence::trig_poly(&terms).unwrap()));
        }
        let rot = unit(0.3 + i as f64);
        weights.push((vec![(c(1.0, 0.0), rot)], WeightSequence::rotation(rot).unwrap()));
        weights.push((vec![(c(1.0, 0.0), c(1.0, 0.0))], WeightSequence::constant(c(1.0, 0.0))));
        for (terms, alpha) in weights {
            let x = AlgElement::random(op.algebra(), &mut r);
            let run = weighted_average_stream(&op, &x, &alpha, &[n]).unwrap();
            let limit = spectral_weighted_limit(&op, &alpha, &x, &ev, 1_000_000).unwrap();
            let freqs: Vec<C64> = terms.iter().map(|t| t.1).collect();
            let mass: f64 = terms.iter().map(|t| t.0.norm()).sum();
            let k = mass * x.norm2() * geometric_constant(&freqs, &spectrum);
            let err = (&run.values[0] - &limit).norm2();
            assert!(err <= k / n as f64 + 1e-8, "fixture {i}: {err} > {}", k / n as f64);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn diagonal_conjugation_split_matches_oracle(phases in prop::collection::vec(0.0f64..1.0, 2..=3), damp in 0.2f64..0.9) {
        // last entry damped: eigenvalues conj(u_j)u_k are unimodular iff neither index is the last
        let mut d: Vec<C64> = phases.iter().map(|p| unit(std::f64::consts::TAU * p)).collect();
        let last = d.len() - 1;
        d[last] *= damp;
        let op = diagonal_conjugation(&d);
        let s = jdlg_split(&op, DEFAULT_UNIMODULAR_TOL).unwrap();
        prop_assert_eq!(s.reversible_basis.len(), last * last);
        prop_assert_eq!(s.flight_basis.len(), d.len() * d.len() - last * last);
        prop_assert!(!s.oblique);
        prop_assert!((s.flight_spectral_radius - damp).abs() < 1e-10);
    }
}
