//! Jacobs-de Leeuw-Glicksberg splitting of the `L_2` representation into
//! its reversible part (unimodular eigenvectors) and its flight part, and the
//! spectral prediction of weighted averages.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, CVec, C64, ZERO};
use crate::superop::SuperOperator;
use crate::tracealg::{AlgElement, TracialAlgebra};
use crate::weights::{hartman_coefficient, WeightSequence, UNIMODULAR_TOL};

pub const DEFAULT_UNIMODULAR_TOL: f64 = 1e-8;
/// Slack for the power-bounded and `L_2`-contraction checks.
pub const POWER_BOUND_SLACK: f64 = 1e-8;
/// Eigenvalues closer than this are treated as one cluster.
const CLUSTER_TOL: f64 = 1e-6;
const NORMAL_TOL: f64 = 1e-10;
/// Flight radii below this are roundoff from a nilpotent or zero block.
const ZERO_RADIUS: f64 = 1e-12;
/// Eigenvector condition numbers above this are treated as defective.
const DEFECTIVE_COND: f64 = 1e8;

#[derive(Debug, Clone)]
pub struct EigenPair {
    pub lambda: C64,
    /// Orthonormal basis of the eigenspace.
    pub basis: Vec<AlgElement>,
}

#[derive(Debug, Clone)]
pub struct JdlgSplit {
    algebra: Arc<TracialAlgebra>,
    pub reversible_basis: Vec<AlgElement>,
    pub flight_basis: Vec<AlgElement>,
    pub proj_reversible: CMat,
    pub proj_flight: CMat,
    pub unimodular_eigenpairs: Vec<EigenPair>,
    pub flight_spectral_radius: f64,
    /// Rate used by [`flight_decay_bound`]; equals the spectral radius unless
    /// the flight block is defective.
    pub flight_decay_rate: f64,
    /// Similarity constant `C` with `‖Tⁿ x‖ ≤ C rateⁿ ‖x‖` on the flight part.
    pub flight_constant: f64,
    /// True when the spectral projections are not orthogonal.
    pub oblique: bool,
    /// Operator norm of `proj_reversible` (1 for orthogonal projections).
    pub projection_norm: f64,
    pub unimodular_tol: f64,
}

impl JdlgSplit {
    pub fn algebra(&self) -> &Arc<TracialAlgebra> {
        &self.algebra
    }

    pub fn unimodular_eigenvalues(&self) -> Vec<C64> {
        self.unimodular_eigenpairs.iter().map(|p| p.lambda).collect()
    }

    pub fn reversible_part(&self, x: &AlgElement) -> AlgElement {
        apply_hs(&self.algebra, &self.proj_reversible, x)
    }

    pub fn flight_part(&self, x: &AlgElement) -> AlgElement {
        apply_hs(&self.algebra, &self.proj_flight, x)
    }
}

fn apply_hs(algebra: &Arc<TracialAlgebra>, m: &CMat, x: &AlgElement) -> AlgElement {
    AlgElement::from_hs(algebra, &(m * x.to_hs())).expect("HS dimension is fixed by the algebra")
}

fn columns_to_elements(algebra: &Arc<TracialAlgebra>, m: &CMat) -> Vec<AlgElement> {
    m.column_iter()
        .map(|col| AlgElement::from_hs(algebra, &CVec::from(col)).expect("HS dimension is fixed by the algebra"))
        .collect()
}

/// Groups eigenvalues lying within `CLUSTER_TOL` of each other.
fn clusters(values: &[C64]) -> Vec<(C64, usize)> {
    let mut out: Vec<(C64, usize)> = Vec::new();
    for &z in values {
        match out.iter_mut().find(|(c, _)| (*c - z).norm() <= CLUSTER_TOL) {
            Some((c, k)) => {
                *c = (*c * *k as f64 + z) / (*k as f64 + 1.0);
                *k += 1;
            }
            None => out.push((z, 1)),
        }
    }
    out
}

/// Oblique projection onto `ker(A − λ)` along `range(A − λ)`, built from
/// `k`-dimensional right and left null spaces.
fn spectral_projection(a: &CMat, lambda: C64, k: usize) -> (CMat, CMat) {
    let n = a.nrows();
    let shift = CMat::identity(n, n) * lambda;
    let v = linalg::smallest_right_singular(&(a - &shift), k);
    let w = linalg::smallest_right_singular(&(a.adjoint() - shift.adjoint()), k);
    let gram = w.adjoint() * &v;
    let inv = gram.clone().try_inverse().unwrap_or_else(|| CMat::zeros(k, k));
    (&v * inv * w.adjoint(), v)
}

/// Splits the HS space of `T` into span of unimodular eigenvectors plus the
/// flight subspace (eigenvalues of modulus `< 1 − tol`).
pub fn jdlg_split(op: &SuperOperator, unimodular_tol: f64) -> Result<JdlgSplit> {
    let algebra = op.algebra().clone();
    let a = op.hs_matrix();
    let n = a.nrows();
    let values = linalg::eigenvalues(a);
    let ceiling = 1.0 + unimodular_tol.max(POWER_BOUND_SLACK);
    if let Some(z) = values.iter().find(|z| z.norm() > ceiling) {
        return Err(Error::NotPowerBounded(format!("eigenvalue {z} has modulus {}", z.norm())));
    }
    if let Some(z) = values.iter().find(|z| {
        let gap = 1.0 - z.norm();
        gap > unimodular_tol && gap <= 10.0 * unimodular_tol
    }) {
        return Err(Error::UnimodularGap { modulus: z.norm() });
    }

    let unimodular: Vec<C64> = values.iter().copied().filter(|z| (1.0 - z.norm()).abs() <= unimodular_tol).collect();
    let mut flight_spectral_radius =
        values.iter().filter(|z| 1.0 - z.norm() > unimodular_tol).map(|z| z.norm()).fold(0.0, f64::max);
    if flight_spectral_radius < ZERO_RADIUS {
        flight_spectral_radius = 0.0;
    }
    if flight_spectral_radius >= 1.0 - 1e-10 {
        return Err(Error::DecompositionDegenerate(flight_spectral_radius));
    }

    let mut proj_reversible = CMat::zeros(n, n);
    let mut unimodular_eigenpairs = Vec::new();
    let mut reversible_cols: Vec<CVec> = Vec::new();
    for (lambda, k) in clusters(&unimodular) {
        let lambda = lambda / lambda.norm();
        let (p, v) = spectral_projection(a, lambda, k);
        proj_reversible += p;
        reversible_cols.extend(v.column_iter().map(CVec::from));
        unimodular_eigenpairs.push(EigenPair { lambda, basis: columns_to_elements(&algebra, &v) });
    }
    unimodular_eigenpairs.sort_by(|p, q| p.lambda.arg().total_cmp(&q.lambda.arg()));
    let proj_flight = CMat::identity(n, n) - &proj_reversible;

    let r = reversible_cols.len();
    let reversible = if r == 0 {
        CMat::zeros(n, 0)
    } else {
        linalg::largest_left_singular(&CMat::from_columns(&reversible_cols), r)
    };
    let flight = if r == n { CMat::zeros(n, 0) } else { linalg::largest_left_singular(&proj_flight, n - r) };

    let oblique = linalg::op_norm(&(&proj_reversible - proj_reversible.adjoint())) > NORMAL_TOL;
    let projection_norm = if r == 0 { 0.0 } else { linalg::op_norm(&proj_reversible) };
    let (flight_constant, flight_decay_rate) = flight_similarity(a, &flight, flight_spectral_radius);

    Ok(JdlgSplit {
        reversible_basis: columns_to_elements(&algebra, &reversible),
        flight_basis: columns_to_elements(&algebra, &flight),
        algebra,
        proj_reversible,
        proj_flight,
        unimodular_eigenpairs,
        flight_spectral_radius,
        flight_decay_rate,
        flight_constant,
        oblique,
        projection_norm,
        unimodular_tol,
    })
}

/// `(C, rate)` with `‖Bⁿ‖ ≤ C rateⁿ` for the flight block `B = Q* A Q`.
fn flight_similarity(a: &CMat, q: &CMat, rho: f64) -> (f64, f64) {
    if q.ncols() == 0 {
        return (0.0, rho);
    }
    let b = q.adjoint() * a * q;
    if linalg::is_normal(&b, NORMAL_TOL) {
        return (1.0, rho);
    }
    let (_, s) = linalg::eigen_decomposition(&b);
    let cond = linalg::condition_number(&s);
    if cond.is_finite() && cond <= DEFECTIVE_COND {
        return (cond, rho);
    }
    // Defective block: trade rate for a finite constant.
    let rate = 0.5 * (1.0 + rho);
    let mut power = CMat::identity(b.nrows(), b.ncols());
    let mut best: f64 = 1.0;
    let mut scale = 1.0;
    for k in 1..100_000usize {
        power = &power * &b;
        scale *= rate;
        let ratio = linalg::op_norm(&power) / scale;
        best = best.max(ratio);
        if k >= b.nrows() && ratio < 1e-3 * best {
            break;
        }
    }
    (best, rate)
}

/// Projection onto the `λ`-eigenspace of the HS representation.
#[derive(Debug, Clone)]
pub struct EigenProjection {
    pub matrix: CMat,
    pub rank: usize,
    pub oblique: bool,
}

impl EigenProjection {
    pub fn apply(&self, x: &AlgElement) -> AlgElement {
        apply_hs(x.algebra(), &self.matrix, x)
    }
}

/// Projection onto `ker(A − λ)` along `range(A − λ)`; orthogonal when `A`
/// is normal, zero when `λ` is not an eigenvalue.
pub fn eigen_projection(op: &SuperOperator, lambda: C64) -> Result<EigenProjection> {
    if ((lambda.norm() - 1.0).abs()) > UNIMODULAR_TOL {
        return Err(Error::NotUnimodular { re: lambda.re, im: lambda.im });
    }
    let a = op.hs_matrix();
    let n = a.nrows();
    let tol = 1e-8 * linalg::op_norm(a).max(1.0);
    let shift = CMat::identity(n, n) * lambda;
    let k = linalg::null_space(&(a - &shift), tol).ncols();
    if k == 0 {
        return Ok(EigenProjection { matrix: CMat::zeros(n, n), rank: 0, oblique: false });
    }
    let (matrix, _) = spectral_projection(a, lambda, k);
    let oblique = linalg::op_norm(&(&matrix - matrix.adjoint())) > NORMAL_TOL;
    Ok(EigenProjection { matrix, rank: k, oblique })
}

/// Predicted limit of the weighted averages `(1/n)Σ α_k Tᵏ(x)`:
/// `Σ_ν c_α(ν̄) E(ν)(x)` over the unimodular eigenvalues `ν` in `lambdas`,
/// where `c_α(λ) = lim (1/n)Σ α_k λ̄ᵏ` is estimated at `horizon`.
pub fn spectral_weighted_limit(
    op: &SuperOperator,
    alpha: &WeightSequence,
    x: &AlgElement,
    lambdas: &[C64],
    horizon: usize,
) -> Result<AlgElement> {
    let norm = linalg::op_norm(op.hs_matrix());
    if norm > 1.0 + POWER_BOUND_SLACK {
        return Err(Error::NotL2Contraction(norm));
    }
    if !x.same_algebra(&AlgElement::zero(op.algebra())) {
        return Err(Error::AlgebraMismatch);
    }
    let mut seen: Vec<C64> = Vec::new();
    let mut out = AlgElement::zero(op.algebra());
    for &nu in lambdas {
        let nu = nu / nu.norm();
        if seen.iter().any(|s| (s - nu).norm() <= CLUSTER_TOL) {
            continue;
        }
        seen.push(nu);
        let coeff = hartman_coefficient(alpha, nu.conj(), horizon)?.estimate;
        if coeff == ZERO {
            continue;
        }
        out.axpy(coeff, &eigen_projection(op, nu)?.apply(x));
    }
    Ok(out)
}

/// `C · rateⁿ`, an upper bound for `‖Tⁿ‖` on the flight subspace.
pub fn flight_decay_bound(split: &JdlgSplit, n: u32) -> f64 {
    if split.flight_basis.is_empty() {
        return 0.0;
    }
    split.flight_constant * split.flight_decay_rate.powi(n as i32)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, ONE};
    use crate::superop::{
        make_conjugation, make_expectation_product, make_identity, make_matrix, make_nc_torus_heat, Expectation,
    };
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn m2() -> Arc<TracialAlgebra> {
        TracialAlgebra::matrix(2, 1.0).unwrap()
    }

    fn diag_conj() -> SuperOperator {
        let a = m2();
        make_conjugation(&AlgElement::diagonal(&a, &[vec![ONE, c(0.0, 1.0)]]).unwrap()).unwrap()
    }

    #[test]
    fn unitary_conjugation_is_fully_reversible() {
        let s = jdlg_split(&diag_conj(), DEFAULT_UNIMODULAR_TOL).unwrap();
        assert!(s.flight_basis.is_empty());
        assert_eq!(s.reversible_basis.len(), 4);
        let mut lams = s.unimodular_eigenvalues();
        lams.sort_by(|a, b| a.arg().total_cmp(&b.arg()));
        let expected = [c(0.0, -1.0), ONE, c(0.0, 1.0)];
        assert_eq!(lams.len(), 3);
        for (l, e) in lams.iter().zip(expected) {
            assert!((l - e).norm() < 1e-10);
        }
        assert!(!s.oblique);
    }

    #[test]
    fn scalar_expectation_split() {
        let a = TracialAlgebra::new(&[(2, 0.5), (1, 1.0)]).unwrap();
        let op = make_expectation_product(&a, &[Expectation::Scalars]).unwrap();
        let s = jdlg_split(&op, DEFAULT_UNIMODULAR_TOL).unwrap();
        assert_eq!(s.reversible_basis.len(), 1);
        assert_eq!(s.flight_basis.len(), a.hs_dim() - 1);
        assert!(s.flight_spectral_radius < 1e-12);
        let one = AlgElement::identity(&a);
        let r = s.reversible_part(&one);
        assert!((&r - &one).norm2() < 1e-10);
        assert_eq!(flight_decay_bound(&s, 1), 0.0);
    }

    #[test]
    fn heat_split_radius() {
        let op = make_nc_torus_heat(3, 1, 0.1).unwrap();
        let s = jdlg_split(&op, DEFAULT_UNIMODULAR_TOL).unwrap();
        assert_eq!(s.reversible_basis.len(), 1);
        assert!((s.flight_spectral_radius - (-0.3f64).exp()).abs() < 1e-10);
        assert_eq!(s.flight_constant, 1.0);
        assert!((flight_decay_bound(&s, 10) - (-3.0f64).exp()).abs() < 1e-10);
    }

    #[test]
    fn reconstruction_invariance_and_decay() {
        let a = TracialAlgebra::new(&[(2, 1.0), (3, 0.5)]).unwrap();
        let op = make_expectation_product(&a, &[Expectation::Diagonal, Expectation::BlockScalars]).unwrap();
        let s = jdlg_split(&op, DEFAULT_UNIMODULAR_TOL).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let x = AlgElement::random(&a, &mut rng);
            let sum = &s.reversible_part(&x) + &s.flight_part(&x);
            assert!((&sum - &x).norm2() < 1e-10);
            let f = s.flight_part(&x);
            let tf = op.apply(&f).unwrap();
            assert!((&s.flight_part(&tf) - &tf).norm2() < 1e-9);
            let mut y = f.clone();
            for n in 0..50 {
                assert!(y.norm2() <= flight_decay_bound(&s, n) * f.norm2() + 1e-10);
                y = op.apply(&y).unwrap();
            }
        }
    }

    #[test]
    fn non_normal_flight_constant() {
        // Oracle: B = [[0.5, 1], [0, 0.2]] is diagonalizable, so ‖Bⁿ‖ ≤ cond(S)·0.5ⁿ.
        let a = TracialAlgebra::new(&[(1, 1.0), (1, 1.0)]).unwrap();
        let b = CMat::from_row_slice(2, 2, &[c(0.5, 0.0), ONE, c(0.0, 0.0), c(0.2, 0.0)]);
        let op = make_matrix(&a, b.clone()).unwrap();
        let s = jdlg_split(&op, DEFAULT_UNIMODULAR_TOL).unwrap();
        assert!(s.flight_constant > 1.0);
        let mut p = CMat::identity(2, 2);
        for n in 0..200 {
            assert!(linalg::op_norm(&p) <= flight_decay_bound(&s, n) + 1e-10);
            p = &p * &b;
        }
        // nilpotent (defective) block
        let nil = CMat::from_row_slice(2, 2, &[c(0.0, 0.0), ONE, c(0.0, 0.0), c(0.0, 0.0)]);
        let s = jdlg_split(&make_matrix(&a, nil.clone()).unwrap(), DEFAULT_UNIMODULAR_TOL).unwrap();
        let mut p = CMat::identity(2, 2);
        for n in 0..50 {
            assert!(linalg::op_norm(&p) <= flight_decay_bound(&s, n) + 1e-10);
            p = &p * &nil;
        }
    }

    #[test]
    fn diagonalizable_bound_matches_power_oracle() {
        // Normal diagonal fixture: ‖Tⁿ‖ on the flight part is exactly max|λ_i|ⁿ.
        let a = TracialAlgebra::new(&[(1, 1.0), (1, 1.0), (1, 1.0)]).unwrap();
        let d = CMat::from_diagonal(&CVec::from_vec(vec![ONE, c(0.3, 0.4), c(-0.2, 0.0)]));
        let op = make_matrix(&a, d.clone()).unwrap();
        let s = jdlg_split(&op, DEFAULT_UNIMODULAR_TOL).unwrap();
        for n in 0..20u32 {
            let mut p = CMat::identity(3, 3);
            for _ in 0..n {
                p = &p * &d;
            }
            let restricted = linalg::op_norm(&(&p * &s.proj_flight));
            assert!((flight_decay_bound(&s, n) - restricted).abs() <= 1e-10);
        }
    }

    #[test]
    fn gap_and_power_bound_errors() {
        let a = TracialAlgebra::new(&[(1, 1.0), (1, 1.0)]).unwrap();
        let near = CMat::from_diagonal(&CVec::from_vec(vec![ONE, c(1.0 - 5e-8, 0.0)]));
        assert!(matches!(
            jdlg_split(&make_matrix(&a, near).unwrap(), DEFAULT_UNIMODULAR_TOL),
            Err(Error::UnimodularGap { .. })
        ));
        let big = CMat::from_diagonal(&CVec::from_vec(vec![c(1.1, 0.0), ONE]));
        assert!(matches!(
            jdlg_split(&make_matrix(&a, big).unwrap(), DEFAULT_UNIMODULAR_TOL),
            Err(Error::NotPowerBounded(_))
        ));
    }

    #[test]
    fn eigen_projection_examples() {
        let a = m2();
        let id = make_identity(&a);
        let p = eigen_projection(&id, ONE).unwrap();
        assert!((&p.matrix - CMat::identity(4, 4)).norm() < 1e-12);
        assert_eq!(eigen_projection(&id, -ONE).unwrap().rank, 0);

        let p = eigen_projection(&diag_conj(), c(0.0, 1.0)).unwrap();
        assert_eq!(p.rank, 1);
        let e12 = AlgElement::matrix_unit(&a, 0, 0, 1);
        assert!((&p.apply(&e12) - &e12).norm2() < 1e-10);
        assert!(p.apply(&AlgElement::matrix_unit(&a, 0, 1, 0)).norm2() < 1e-10);
        assert!(!p.oblique);
        assert!(eigen_projection(&id, c(2.0, 0.0)).is_err());
    }

    #[test]
    fn weighted_limit_examples() {
        let a = TracialAlgebra::new(&[(2, 0.5), (1, 1.0)]).unwrap();
        let op = make_expectation_product(&a, &[Expectation::Scalars]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x = AlgElement::random(&a, &mut rng);
        let s = jdlg_split(&op, DEFAULT_UNIMODULAR_TOL).unwrap();
        let lim = spectral_weighted_limit(&op, &WeightSequence::constant(ONE), &x, &s.unimodular_eigenvalues(), 1000)
            .unwrap();
        let expected = AlgElement::scalar(&a, x.trace() / a.total_trace());
        assert!((&lim - &expected).norm2() < 1e-10);

        // eigenvector with T(x) = i·x: the matched rotation has ratio conj(i)
        let t = diag_conj();
        let e12 = AlgElement::matrix_unit(t.algebra(), 0, 0, 1);
        let lams = jdlg_split(&t, DEFAULT_UNIMODULAR_TOL).unwrap().unimodular_eigenvalues();
        let matched = WeightSequence::rotation(c(0.0, -1.0)).unwrap();
        let lim = spectral_weighted_limit(&t, &matched, &e12, &lams, 10_000).unwrap();
        assert!((&lim - &e12).norm2() < 1e-10);
        let other = WeightSequence::rotation(ONE).unwrap();
        let n = 10_000;
        let lim = spectral_weighted_limit(&t, &other, &e12, &lams, n).unwrap();
        assert!(lim.norm2() <= 4.0 / n as f64 * e12.norm2());

        let a2 = TracialAlgebra::new(&[(1, 1.0), (1, 1.0)]).unwrap();
        let big = make_matrix(&a2, CMat::identity(2, 2) * c(1.5, 0.0)).unwrap();
        let y = AlgElement::identity(&a2);
        assert!(matches!(
            spectral_weighted_limit(&big, &other, &y, &[ONE], 100),
            Err(Error::NotL2Contraction(_))
        ));
    }
}
