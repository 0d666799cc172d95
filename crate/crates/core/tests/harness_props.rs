mod common;

use common::{diagonal_conjugation, ds_catalog, rng, unit};
use ncwwlab_core::harness::{
    diagnose, dyadic_checkpoints, mangoldt_average_stream, moving_average_stream, prime_average_stream,
    subsequence_average_stream, truncation_search, weighted_average_stream, weighted_average_streams, TruncationMode,
    TruncationSpec,
};
use ncwwlab_core::linalg::{c, C64};
use ncwwlab_core::spectral::{jdlg_split, DEFAULT_UNIMODULAR_TOL};
use ncwwlab_core::weights::{w_r_seminorm, MovingWindow, SubsequenceRule};
use ncwwlab_core::{AlgElement, SuperOperator, WeightSequence};
use proptest::prelude::*;

fn is_prime(n: u64) -> bool {
    n >= 2 && (2..).take_while(|d| d * d <= n).all(|d| n % d != 0)
}

fn primes(count: usize) -> Vec<u64> {
    (2u64..).filter(|&n| is_prime(n)).take(count).collect()
}

/// Λ(n) by trial division.
fn mangoldt(n: u64) -> f64 {
    if n < 2 {
        return 0.0;
    }
    let p = (2..=n).find(|d| n % d == 0).unwrap();
    let mut m = n;
    while m % p == 0 {
        m /= p;
    }
    if m == 1 {
        (p as f64).ln()
    } else {
        0.0
    }
}

fn power(z: C64, k: u64) -> C64 {
    let (r, arg) = z.to_polar();
    C64::from_polar(r.powf(k as f64), arg * k as f64)
}

fn direct_orbit(op: &SuperOperator, x: &AlgElement, k: u64) -> AlgElement {
    let mut y = x.clone();
    for _ in 0..k {
        y = op.apply(&y).unwrap();
    }
    y
}

fn weights_for(seed: u64) -> Vec<WeightSequence> {
    vec![
        WeightSequence::constant(c(1.0, 0.0)),
        WeightSequence::random_phase(seed),
        WeightSequence::trig_poly(&[(c(0.5, 0.5), unit(0.9)), (c(-1.0, 0.0), unit(-2.0))]).unwrap(),
        WeightSequence::von_mangoldt(),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn streams_match_double_loop(seed in any::<u64>(), n in 1u64..=64) {
        let mut r = rng(seed);
        for (_, op) in ds_catalog(seed % 3) {
            let x = AlgElement::random(op.algebra(), &mut r);
            for alpha in weights_for(seed) {
                let run = weighted_average_stream(&op, &x, &alpha, &[n]).unwrap();
                let mut want = AlgElement::zero(op.algebra());
                for k in 0..n {
                    want.axpy(alpha.value(k), &direct_orbit(&op, &x, k));
                }
                let want = want.scale_real(1.0 / n as f64);
                prop_assert!((&run.values[0] - &want).norm2() <= 1e-9);
            }
            let idx: Vec<u64> = (0..n).map(|j| j * j + j / 2).collect();
            let run = subsequence_average_stream(&op, &x, SubsequenceRule::explicit(idx.clone()).unwrap(), &[n]).unwrap();
            let mut want = AlgElement::zero(op.algebra());
            for &k in &idx {
                want.axpy(c(1.0, 0.0), &direct_orbit(&op, &x, k));
            }
            prop_assert!((&run.values[0] - &want.scale_real(1.0 / n as f64)).norm2() <= 1e-9);
        }
    }

    #[test]
    fn diagnostics_are_well_formed(seed in any::<u64>()) {
        let mut r = rng(seed);
        for (_, op) in ds_catalog(seed % 3) {
            let x = AlgElement::random(op.algebra(), &mut r);
            let cps = dyadic_checkpoints(256);
            let run = weighted_average_stream(&op, &x, &WeightSequence::random_phase(seed), &cps).unwrap();
            let budget = 0.05 * op.algebra().total_trace();
            let d = diagnose(&run, None, Some(TruncationSpec { budget, mode: TruncationMode::Bilateral })).unwrap();
            prop_assert!(d.checkpoints.windows(2).all(|w| w[0] < w[1]));
            let t = d.truncation.as_ref().unwrap();
            let all = d.residual_cauchy_2.iter().chain(&d.residual_cauchy_inf).chain(&d.residual_to_limit_2)
                .chain(&d.residual_to_limit_inf).chain(&t.residual_inf).chain(&t.cauchy_inf);
            for v in all {
                prop_assert!(*v >= 0.0 && v.is_finite());
            }
            prop_assert!(t.tau_perp <= budget);
        }
    }

    #[test]
    fn truncation_bound_is_attained_by_direct_evaluation(seed in any::<u64>(), frac in 0.01f64..0.9) {
        let mut r = rng(seed);
        for (_, op) in ds_catalog(seed % 3) {
            let x = AlgElement::random(op.algebra(), &mut r).scale_real(3.0);
            let orbit: Vec<AlgElement> = (0..16).map(|k| direct_orbit(&op, &x, k)).collect();
            let budget = frac * op.algebra().total_trace();
            for mode in [TruncationMode::Bilateral, TruncationMode::Right] {
                let t = truncation_search(&orbit, budget, mode).unwrap();
                prop_assert!(t.e.is_projection(1e-10));
                let perp = (&AlgElement::identity(op.algebra()) - &t.e).trace().re;
                prop_assert!((perp - t.tau_perp).abs() < 1e-10 && t.tau_perp <= budget + 1e-12);
                for v in &orbit {
                    let direct = match mode {
                        TruncationMode::Bilateral => (&(&t.e * v) * &t.e).norm_inf(),
                        TruncationMode::Right => (v * &t.e).norm_inf(),
                    };
                    prop_assert!(direct <= t.achieved_sup + 1e-12);
                }
            }
        }
    }

    #[test]
    fn limits_stay_in_the_weighted_ball(seed in any::<u64>()) {
        let mut r = rng(seed);
        let cps = dyadic_checkpoints(512);
        for (_, op) in ds_catalog(seed % 3) {
            let x = AlgElement::random(op.algebra(), &mut r);
            for alpha in weights_for(seed) {
                let run = weighted_average_stream(&op, &x, &alpha, &cps).unwrap();
                let d = diagnose(&run, None, None).unwrap();
                let w1 = w_r_seminorm(&alpha, 1.0, 512, 0.1).unwrap().sup_estimate;
                for p in [1.0, 2.0, 4.0, f64::INFINITY] {
                    prop_assert!(d.estimated_limit.lp_norm(p).unwrap() <= w1 * x.lp_norm(p).unwrap() + 1e-8);
                }
            }
        }
    }
}

#[test]
fn shared_orbit_streams_are_bit_identical() {
    let mut r = rng(30);
    let (_, op) = ds_catalog(1).remove(2);
    let x = AlgElement::random(op.algebra(), &mut r);
    let alphas = weights_for(3);
    let cps = dyadic_checkpoints(128);
    let many = weighted_average_streams(&op, &x, &alphas, &cps).unwrap();
    for (alpha, run) in alphas.iter().zip(&many) {
        let single = weighted_average_stream(&op, &x, alpha, &cps).unwrap();
        for (a, b) in single.values.iter().zip(&run.values) {
            assert_eq!((a - b).norm_inf(), 0.0);
        }
    }
}

#[test]
fn cesaro_averages_of_flight_vectors_vanish() {
    let mut r = rng(31);
    let fixtures = [
        diagonal_conjugation(&[unit(0.3) * 0.9, unit(-1.0) * 0.5]),
        ds_catalog(0).remove(0).1,
        ds_catalog(0).remove(3).1,
    ];
    let cps = dyadic_checkpoints(4096);
    for op in fixtures {
        let s = jdlg_split(&op, DEFAULT_UNIMODULAR_TOL).unwrap();
        let f = s.flight_part(&AlgElement::random(op.algebra(), &mut r));
        let run = weighted_average_stream(&op, &f, &WeightSequence::constant(c(1.0, 0.0)), &cps).unwrap();
        // Σ_k C·rateᵏ ≤ C/(1 − rate)
        let envelope = s.flight_constant / (1.0 - s.flight_decay_rate) * f.norm2();
        for (n, v) in cps.iter().zip(&run.values) {
            assert!(v.norm2() <= envelope / *n as f64 + 1e-10, "n={n}");
        }
        assert!(run.values.last().unwrap().norm2() < 1e-2 * (1.0 + f.norm2()));
    }
}

#[test]
fn eigenvectors_reduce_every_engine_to_scalar_sums() {
    let u = [unit(0.0), unit(1.0), unit(2.5) * 0.97];
    let op = diagonal_conjugation(&u);
    let cps = dyadic_checkpoints(1024);
    let n_max = *cps.last().unwrap();
    let ps = primes(n_max as usize);
    let window = MovingWindow::power_law(1.0, 0.5, 1, 1.0, 1.0, 0);
    for (j, k) in [(0, 1), (1, 0), (1, 2), (2, 2)] {
        let x = AlgElement::matrix_unit(op.algebra(), 0, j, k);
        let lambda = u[j].conj() * u[k];
        assert!((&op.apply(&x).unwrap() - &x.scale(lambda)).norm2() < 1e-14);
        let check = |run: ncwwlab_core::harness::StreamRun, scalar: &dyn Fn(u64) -> C64| {
            for (&n, v) in run.checkpoints.iter().zip(&run.values) {
                let d = (v - &x.scale(scalar(n))).norm2();
                assert!(d <= 1e-10, "({j},{k}) n={n}: {d}");
            }
        };
        let alpha = WeightSequence::random_phase(7);
        let a = alpha.prefix(n_max as usize);
        check(weighted_average_stream(&op, &x, &alpha, &cps).unwrap(), &|n| {
            (0..n).map(|i| a[i as usize] * power(lambda, i)).sum::<C64>() / n as f64
        });
        check(prime_average_stream(&op, &x, &cps).unwrap(), &|n| {
            ps[..n as usize].iter().map(|&p| power(lambda, p)).sum::<C64>() / n as f64
        });
        check(mangoldt_average_stream(&op, &x, &cps).unwrap(), &|n| {
            (0..n).map(|i| power(lambda, i) * mangoldt(i)).sum::<C64>() / n as f64
        });
        check(moving_average_stream(&op, &x, &window, &cps).unwrap(), &|n| {
            let kn = (n as f64).sqrt().floor() as u64 + 1;
            (0..kn).map(|i| power(lambda, n + i)).sum::<C64>() / kn as f64
        });
        check(moving_average_stream(&op, &x, &MovingWindow::cesaro(), &cps).unwrap(), &|n| {
            (0..n).map(|i| power(lambda, i)).sum::<C64>() / n as f64
        });
    }
}

#[test]
fn weighted_eigen_examples() {
    let op = diagonal_conjugation(&[unit(0.0), unit(std::f64::consts::PI / 2.0)]);
    let x = AlgElement::matrix_unit(op.algebra(), 0, 0, 1);
    let lambda = op.apply(&x).unwrap().block(0)[(0, 1)];
    let rot = WeightSequence::rotation(lambda.conj()).unwrap();
    let run = weighted_average_stream(&op, &x, &rot, &dyadic_checkpoints(64)).unwrap();
    for v in &run.values {
        assert!((v - &x).norm2() < 1e-12);
    }
}
