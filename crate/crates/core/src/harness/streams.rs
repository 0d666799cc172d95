use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::superop::SuperOperator;
use crate::tracealg::AlgElement;
use crate::weights::{MovingWindow, SubsequenceRule, WeightIter, WeightSequence, DEFAULT_WINDOW_THRESHOLD};

use super::check_checkpoints;

/// Orbit powers kept by the moving-average engine are spaced this far apart.
const SNAPSHOT_STRIDE: u64 = 256;

/// Averages `M_n` recorded at the requested checkpoints.
#[derive(Debug, Clone)]
pub struct StreamRun {
    pub checkpoints: Vec<u64>,
    pub values: Vec<AlgElement>,
    /// `M_1`, the reference for the first Cauchy residual.
    pub first: AlgElement,
    /// Number of applications of `T` performed.
    pub applications: u64,
}

enum Mode {
    Weighted(WeightIter),
    Subsequence(SubsequenceRule),
}

/// Incremental `(1/n) Σ_{k<n} α_k Tᵏ(x)` or `(1/n) Σ_{j<n} T^{k_j}(x)` with
/// one orbit element and one accumulator.
pub struct AverageStream<'a> {
    op: &'a SuperOperator,
    mode: Mode,
    orbit: AlgElement,
    orbit_pos: u64,
    sum: AlgElement,
    index: u64,
    applications: u64,
}

fn check_same(op: &SuperOperator, x: &AlgElement) -> Result<()> {
    if x.algebra().as_ref() != op.algebra().as_ref() {
        return Err(Error::AlgebraMismatch);
    }
    Ok(())
}

impl<'a> AverageStream<'a> {
    fn new(op: &'a SuperOperator, x: &AlgElement, mode: Mode) -> Result<Self> {
        check_same(op, x)?;
        Ok(Self {
            op,
            mode,
            orbit: x.clone(),
            orbit_pos: 0,
            sum: AlgElement::zero(op.algebra()),
            index: 0,
            applications: 0,
        })
    }

    pub fn weighted(op: &'a SuperOperator, x: &AlgElement, alpha: &WeightSequence) -> Result<Self> {
        Self::new(op, x, Mode::Weighted(alpha.iter()))
    }

    pub fn subsequence(op: &'a SuperOperator, x: &AlgElement, rule: SubsequenceRule) -> Result<Self> {
        Self::new(op, x, Mode::Subsequence(rule))
    }

    /// Number of terms accumulated so far.
    pub fn index(&self) -> u64 {
        self.index
    }

    pub fn applications(&self) -> u64 {
        self.applications
    }

    fn advance_orbit(&mut self, target: u64) {
        while self.orbit_pos < target {
            self.orbit = self.op.apply(&self.orbit).expect("orbit stays in the operator's algebra");
            self.orbit_pos += 1;
            self.applications += 1;
        }
    }

    /// Adds the next term.
    pub fn step(&mut self) -> Result<()> {
        match &mut self.mode {
            Mode::Weighted(it) => {
                let a = it.next().expect("weight sequences are infinite");
                self.advance_orbit(self.index);
                self.sum.axpy(a, &self.orbit);
            }
            Mode::Subsequence(rule) => {
                let k = rule.index(self.index as usize).ok_or_else(|| {
                    Error::Precondition(format!("subsequence has fewer than {} indices", self.index + 1))
                })?;
                if k < self.orbit_pos {
                    return Err(Error::Precondition("subsequence indices must increase".into()));
                }
                self.advance_orbit(k);
                self.sum.axpy(crate::linalg::ONE, &self.orbit);
            }
        }
        self.index += 1;
        Ok(())
    }

    /// `M_n` for the current `n` (zero before the first step).
    pub fn average(&self) -> AlgElement {
        if self.index == 0 {
            return self.sum.clone();
        }
        self.sum.scale_real(1.0 / self.index as f64)
    }

    /// Steps until `n` terms are accumulated and returns `M_n`.
    pub fn advance_to(&mut self, n: u64) -> Result<AlgElement> {
        while self.index < n {
            self.step()?;
        }
        Ok(self.average())
    }

    fn run(mut self, checkpoints: &[u64]) -> Result<StreamRun> {
        check_checkpoints(checkpoints)?;
        let first = self.advance_to(1)?;
        let values = checkpoints.iter().map(|&n| self.advance_to(n)).collect::<Result<Vec<_>>>()?;
        Ok(StreamRun { checkpoints: checkpoints.to_vec(), values, first, applications: self.applications })
    }
}

/// `M_n^α(T)(x) = (1/n) Σ_{k<n} α_k Tᵏ(x)` at each checkpoint.
pub fn weighted_average_stream(
    op: &SuperOperator,
    x: &AlgElement,
    alpha: &WeightSequence,
    checkpoints: &[u64],
) -> Result<StreamRun> {
    AverageStream::weighted(op, x, alpha)?.run(checkpoints)
}

/// Several weighted averages of the same orbit, computed in one pass.
pub fn weighted_average_streams(
    op: &SuperOperator,
    x: &AlgElement,
    alphas: &[WeightSequence],
    checkpoints: &[u64],
) -> Result<Vec<StreamRun>> {
    check_same(op, x)?;
    check_checkpoints(checkpoints)?;
    let algebra = op.algebra();
    let mut iters: Vec<WeightIter> = alphas.iter().map(|a| a.iter()).collect();
    let mut sums = vec![AlgElement::zero(algebra); alphas.len()];
    let mut firsts = Vec::with_capacity(alphas.len());
    let mut values: Vec<Vec<AlgElement>> = vec![Vec::with_capacity(checkpoints.len()); alphas.len()];
    let mut orbit = x.clone();
    let mut applications = 0u64;
    let last = *checkpoints.last().expect("checked nonempty");
    let mut next_cp = 0;
    for k in 0..last {
        if k > 0 {
            orbit = op.apply(&orbit)?;
            applications += 1;
        }
        for (it, sum) in iters.iter_mut().zip(sums.iter_mut()) {
            sum.axpy(it.next().expect("weight sequences are infinite"), &orbit);
        }
        let n = k + 1;
        if n == 1 {
            firsts = sums.clone();
        }
        if checkpoints[next_cp] == n {
            for (vals, sum) in values.iter_mut().zip(&sums) {
                vals.push(sum.scale_real(1.0 / n as f64));
            }
            next_cp += 1;
        }
    }
    Ok(values
        .into_iter()
        .zip(firsts)
        .map(|(values, first)| StreamRun { checkpoints: checkpoints.to_vec(), values, first, applications })
        .collect())
}

/// `(1/n) Σ_{j<n} T^{k_j}(x)` along a subsequence rule.
pub fn subsequence_average_stream(
    op: &SuperOperator,
    x: &AlgElement,
    rule: SubsequenceRule,
    checkpoints: &[u64],
) -> Result<StreamRun> {
    AverageStream::subsequence(op, x, rule)?.run(checkpoints)
}

/// `(1/n) Σ_{k<n} T^{p_k}(x)` over the primes `p_0 = 2, p_1 = 3, …`.
pub fn prime_average_stream(op: &SuperOperator, x: &AlgElement, checkpoints: &[u64]) -> Result<StreamRun> {
    subsequence_average_stream(op, x, SubsequenceRule::Primes, checkpoints)
}

/// `(1/n) Σ_{k<n} Λ(k) Tᵏ(x)`.
pub fn mangoldt_average_stream(op: &SuperOperator, x: &AlgElement, checkpoints: &[u64]) -> Result<StreamRun> {
    weighted_average_stream(op, x, &WeightSequence::von_mangoldt(), checkpoints)
}

/// Orbit walker that keeps every `SNAPSHOT_STRIDE`-th power for reseeking.
struct OrbitCache<'a> {
    op: &'a SuperOperator,
    snapshots: BTreeMap<u64, AlgElement>,
    applications: u64,
}

impl<'a> OrbitCache<'a> {
    fn new(op: &'a SuperOperator, x: &AlgElement) -> Self {
        let mut snapshots = BTreeMap::new();
        snapshots.insert(0, x.clone());
        Self { op, snapshots, applications: 0 }
    }

    fn step(&mut self, pos: u64, y: &AlgElement) -> Result<AlgElement> {
        let next = self.op.apply(y)?;
        self.applications += 1;
        if (pos + 1) % SNAPSHOT_STRIDE == 0 {
            self.snapshots.entry(pos + 1).or_insert_with(|| next.clone());
        }
        Ok(next)
    }

    /// `Σ_{j<k} T^{m+j}(x)`.
    fn window_sum(&mut self, m: u64, k: u64) -> Result<AlgElement> {
        let (&start, y) = self.snapshots.range(..=m).next_back().expect("power 0 is always cached");
        let mut y = y.clone();
        let mut pos = start;
        while pos < m {
            y = self.step(pos, &y)?;
            pos += 1;
        }
        let mut sum = y.clone();
        for _ in 1..k {
            y = self.step(pos, &y)?;
            pos += 1;
            sum.axpy(crate::linalg::ONE, &y);
        }
        Ok(sum)
    }
}

/// `M_{w,n}(T)(x) = (1/k_n) Σ_{j<k_n} T^{m_n+j}(x)` with the default growth
/// threshold on `k_n`.
pub fn moving_average_stream(
    op: &SuperOperator,
    x: &AlgElement,
    window: &MovingWindow,
    checkpoints: &[u64],
) -> Result<StreamRun> {
    moving_average_stream_with_threshold(op, x, window, checkpoints, DEFAULT_WINDOW_THRESHOLD)
}

pub fn moving_average_stream_with_threshold(
    op: &SuperOperator,
    x: &AlgElement,
    window: &MovingWindow,
    checkpoints: &[u64],
    threshold: fn(u64) -> u64,
) -> Result<StreamRun> {
    check_same(op, x)?;
    check_checkpoints(checkpoints)?;
    window.validate(*checkpoints.last().expect("checked nonempty"), threshold)?;
    let mut cache = OrbitCache::new(op, x);
    let mut average = |n: u64| -> Result<AlgElement> {
        let (k, m) = window.window(n)?;
        Ok(cache.window_sum(m, k)?.scale_real(1.0 / k as f64))
    };
    let first = average(1)?;
    let values = checkpoints.iter().map(|&n| average(n)).collect::<Result<Vec<_>>>()?;
    Ok(StreamRun { checkpoints: checkpoints.to_vec(), values, first, applications: cache.applications })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, C64, ONE};
    use crate::superop::{make_conjugation, make_identity, make_nc_torus_heat};
    use crate::tracealg::TracialAlgebra;
    use crate::weights::sieve;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// `T = conjugation by diag(1, λ)` has `T(e₁₂) = λ e₁₂`.
    fn eigen_fixture(lambda: C64) -> (SuperOperator, AlgElement) {
        let a = TracialAlgebra::matrix(2, 1.0).unwrap();
        let u = AlgElement::diagonal(&a, &[vec![ONE, lambda]]).unwrap();
        (make_conjugation(&u).unwrap(), AlgElement::matrix_unit(&a, 0, 0, 1))
    }

    fn direct(op: &SuperOperator, x: &AlgElement, coeffs: &[C64], powers: &[u64], n: usize) -> AlgElement {
        let mut out = AlgElement::zero(op.algebra());
        for (j, &p) in powers.iter().take(n).enumerate() {
            let mut y = x.clone();
            for _ in 0..p {
                y = op.apply(&y).unwrap();
            }
            out.axpy(coeffs[j], &y);
        }
        out.scale_real(1.0 / n as f64)
    }

    #[test]
    fn negation_examples() {
        let (op, x) = eigen_fixture(-ONE);
        let run = weighted_average_stream(&op, &x, &WeightSequence::constant(ONE), &[2]).unwrap();
        assert!(run.values[0].norm2() < 1e-15);
        let run = prime_average_stream(&op, &x, &[100, 10_000]).unwrap();
        for (n, v) in run.checkpoints.iter().zip(&run.values) {
            let s = (2.0 - *n as f64) / *n as f64;
            assert!((v - &x.scale_real(s)).norm2() <= 1e-12);
        }
    }

    #[test]
    fn identity_and_rotation_examples() {
        let a = TracialAlgebra::new(&[(2, 0.5), (1, 1.0)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = AlgElement::random(&a, &mut rng);
        let id = make_identity(&a);
        let alpha = WeightSequence::custom(|k| c((k as f64).sin(), 0.5));
        let run = weighted_average_stream(&id, &x, &alpha, &[1, 7, 50]).unwrap();
        for (n, v) in run.checkpoints.iter().zip(&run.values) {
            let s: C64 = alpha.prefix(*n as usize).iter().sum::<C64>() / *n as f64;
            assert!((v - &x.scale(s)).norm2() < 1e-12);
        }
        let run = prime_average_stream(&id, &x, &[5, 50]).unwrap();
        assert!((&run.values[1] - &x).norm2() < 1e-12);

        let lambda = c(0.6, 0.8);
        let (op, e12) = eigen_fixture(lambda);
        let matched = WeightSequence::rotation(lambda.conj()).unwrap();
        let run = weighted_average_stream(&op, &e12, &matched, &[1, 10, 1000]).unwrap();
        for v in &run.values {
            assert!((v - &e12).norm2() < 1e-10);
        }
    }

    #[test]
    fn streams_match_direct_formula() {
        let a = TracialAlgebra::new(&[(2, 1.0), (2, 0.25)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let u = AlgElement::random(&a, &mut rng);
        let op = make_conjugation(&u.scale_real(1.0 / u.norm_inf())).unwrap();
        let x = AlgElement::random(&a, &mut rng);
        let alpha = WeightSequence::random_phase(3);
        let cps = [1, 5, 17, 64];
        let run = weighted_average_stream(&op, &x, &alpha, &cps).unwrap();
        let powers: Vec<u64> = (0..64).collect();
        for (n, v) in cps.iter().zip(&run.values) {
            assert!((v - &direct(&op, &x, &alpha.prefix(64), &powers, *n as usize)).norm2() <= 1e-9);
        }
        let run = prime_average_stream(&op, &x, &cps).unwrap();
        let primes = sieve::first_primes(64);
        for (n, v) in cps.iter().zip(&run.values) {
            assert!((v - &direct(&op, &x, &[ONE; 64], &primes, *n as usize)).norm2() <= 1e-9);
        }
        let w = MovingWindow::power_law(1.0, 1.0, 0, 2.0, 1.0, 3);
        let run = moving_average_stream(&op, &x, &w, &cps).unwrap();
        for (n, v) in cps.iter().zip(&run.values) {
            let (k, m) = w.window(*n).unwrap();
            let powers: Vec<u64> = (m..m + k).collect();
            assert!((v - &direct(&op, &x, &vec![ONE; k as usize], &powers, k as usize)).norm2() <= 1e-9);
        }
    }

    #[test]
    fn shared_orbit_matches_single_streams() {
        let op = make_nc_torus_heat(3, 1, 0.05).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = AlgElement::random(op.algebra(), &mut rng);
        let alphas = [WeightSequence::von_mangoldt(), WeightSequence::random_phase(9), WeightSequence::constant(ONE)];
        let cps = [1, 4, 300];
        let multi = weighted_average_streams(&op, &x, &alphas, &cps).unwrap();
        for (alpha, m) in alphas.iter().zip(&multi) {
            let single = weighted_average_stream(&op, &x, alpha, &cps).unwrap();
            for (a, b) in single.values.iter().zip(&m.values) {
                assert_eq!(a, b);
            }
            assert_eq!(single.first, m.first);
        }
    }

    #[test]
    fn cesaro_window_matches_plain_average() {
        let op = make_nc_torus_heat(4, 1, 0.02).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let x = AlgElement::random(op.algebra(), &mut rng);
        let cps = crate::harness::dyadic_checkpoints(2048);
        let plain = weighted_average_stream(&op, &x, &WeightSequence::constant(ONE), &cps).unwrap();
        let moving = moving_average_stream(&op, &x, &MovingWindow::cesaro(), &cps).unwrap();
        for (a, b) in plain.values.iter().zip(&moving.values) {
            assert!((a - b).norm2() <= 1e-10);
        }
        let id = make_identity(op.algebra());
        let shifted = MovingWindow::power_law(1.0, 1.0, 0, 1.0, 1.0, 0);
        for v in moving_average_stream(&id, &x, &shifted, &cps).unwrap().values {
            assert!((&v - &x).norm2() < 1e-12);
        }
    }

    #[test]
    fn mangoldt_eigen_scalar() {
        let (op, x) = eigen_fixture(-ONE);
        let n = 100_000u64;
        let run = mangoldt_average_stream(&op, &x, &[n]).unwrap();
        let lam = sieve::von_mangoldt_range(0, n as usize);
        let s: f64 = lam.iter().enumerate().map(|(k, l)| if k % 2 == 0 { *l } else { -l }).sum::<f64>() / n as f64;
        assert!((&run.values[0] - &x.scale_real(s)).norm2() < 1e-10);
        let zero = AlgElement::zero(op.algebra());
        assert_eq!(mangoldt_average_stream(&op, &zero, &[1, 10]).unwrap().values[1], zero);
    }

    #[test]
    fn errors() {
        let (op, x) = eigen_fixture(ONE);
        let other = AlgElement::identity(&TracialAlgebra::matrix(3, 1.0).unwrap());
        assert_eq!(weighted_average_stream(&op, &other, &WeightSequence::constant(ONE), &[1]).unwrap_err(), Error::AlgebraMismatch);
        assert!(weighted_average_stream(&op, &x, &WeightSequence::constant(ONE), &[4, 2]).is_err());
        let bad = MovingWindow::new("neg", |n| (n as i64, -1));
        assert!(matches!(moving_average_stream(&op, &x, &bad, &[1, 2]), Err(Error::InvalidMovingWindow(_))));
        let short = SubsequenceRule::explicit(vec![0, 3]).unwrap();
        assert!(subsequence_average_stream(&op, &x, short, &[3]).is_err());
    }
}
