//! Sampled and exact checks of the positive Dunford-Schwartz hypotheses and
//! of the Hilbert-space properties of the `L_2` restriction.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::linalg::{self, c, CMat, C64, ONE};
use crate::tracealg::AlgElement;

use super::SuperOperator;

pub const DEFAULT_ANGLES: usize = 720;

/// Sentinel vertex tolerance: points this close to the vertex are exempt.
const VERTEX_TOL: f64 = 1e-9;
const STOLTZ_SLACK: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Verdict {
    Pass,
    Fail(f64),
    Sampled(f64),
}

impl Verdict {
    pub fn is_failure(&self) -> bool {
        matches!(self, Verdict::Fail(_))
    }

    pub fn label(&self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Fail(_) => "fail",
            Verdict::Sampled(_) => "sampled",
        }
    }
}

/// A verdict plus the sampled quantity behind it (a norm ratio for the
/// contraction checks, a normalized minimum eigenvalue for positivity).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckResult {
    pub verdict: Verdict,
    pub estimate: f64,
    pub tol: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct L2Properties {
    /// `‖A − A*‖`.
    pub self_adjoint_residual: f64,
    /// Smallest eigenvalue of `(A + A*)/2`.
    pub min_eigenvalue: f64,
    /// `‖AA* − A*A‖`.
    pub normal_residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StoltzSummary {
    /// Smallest aperture `δ` for which the sampled boundary passes.
    pub delta: f64,
    pub verdict: bool,
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StoltzResult {
    pub verdict: bool,
    /// Point with the largest `|v − z| − δ(1 − |z|)`, if any non-vertex point exists.
    pub worst_point: Option<C64>,
    pub worst_margin: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub tol: f64,
    pub samples: usize,
    pub positivity: CheckResult,
    pub l1_contraction: CheckResult,
    pub linf_contraction: CheckResult,
    /// Sampled `sup ‖T(x)‖_p/‖x‖_p` at `p ∈ {1, 2, 4, ∞}`.
    pub lp_ratios: Vec<(f64, f64)>,
    pub l2_restriction: L2Properties,
    pub numerical_range: Vec<C64>,
    pub stoltz: StoltzSummary,
}

impl ValidationReport {
    /// True when no verdict failed and every sampled bound is within `tol`
    /// of a contraction.
    pub fn is_ds_positive(&self) -> bool {
        let ok = |r: &CheckResult| !r.verdict.is_failure();
        ok(&self.positivity) && ok(&self.l1_contraction) && ok(&self.linf_contraction)
    }
}

fn sample_inputs(op: &SuperOperator, samples: usize, seed: u64) -> Vec<AlgElement> {
    let alg = op.algebra();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut xs = vec![AlgElement::identity(alg)];
    for i in 0..samples {
        let x = AlgElement::random(alg, &mut rng);
        xs.push(if i % 2 == 0 { x } else { &x.adjoint() * &x });
    }
    xs
}

fn norm_ratio(op: &SuperOperator, xs: &[AlgElement], p: f64) -> f64 {
    xs.iter()
        .filter_map(|x| {
            let d = x.lp_norm(p).ok()?;
            (d > 0.0).then(|| op.apply(x).ok()?.lp_norm(p).ok().map(|n| n / d)).flatten()
        })
        .fold(0.0, f64::max)
}

/// Checks positivity and the `L_1`/`L_∞` contraction properties on `samples`
/// random inputs; proof-tagged properties pass outright.
pub fn validate_ds(op: &SuperOperator, samples: usize, seed: u64, tol: f64) -> ValidationReport {
    let samples = samples.max(1);
    let xs = sample_inputs(op, samples, seed);
    let proof = op.proof();

    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut min_eig = f64::INFINITY;
    for _ in 0..samples {
        let y = AlgElement::random(op.algebra(), &mut rng);
        let x = &y.adjoint() * &y;
        let scale = x.norm_inf().max(f64::MIN_POSITIVE);
        let img = op.apply(&x).expect("same algebra");
        min_eig = min_eig.min(img.min_hermitian_eigenvalue() / scale);
    }
    let positivity = CheckResult {
        verdict: if proof.positive {
            Verdict::Pass
        } else if min_eig < -tol {
            Verdict::Fail(min_eig)
        } else {
            Verdict::Sampled(min_eig)
        },
        estimate: min_eig,
        tol,
    };

    let lp_ratios: Vec<(f64, f64)> = [1.0, 2.0, 4.0, f64::INFINITY].iter().map(|&p| (p, norm_ratio(op, &xs, p))).collect();
    let contraction = |tagged: bool, bound: f64| CheckResult {
        verdict: if tagged {
            Verdict::Pass
        } else if bound > 1.0 + tol {
            Verdict::Fail(bound)
        } else {
            Verdict::Sampled(bound)
        },
        estimate: bound,
        tol,
    };
    let l1_contraction = contraction(proof.l1_contraction, lp_ratios[0].1);
    let linf_contraction = contraction(proof.linf_contraction, lp_ratios[3].1);

    let angles = 64;
    let numerical_range = numerical_range_boundary(op, angles);
    let delta = stoltz_aperture(&numerical_range, ONE);
    ValidationReport {
        tol,
        samples,
        positivity,
        l1_contraction,
        linf_contraction,
        lp_ratios,
        l2_restriction: l2_properties(op),
        numerical_range,
        stoltz: StoltzSummary { delta, verdict: delta.is_finite(), tol: STOLTZ_SLACK },
    }
}

/// Hilbert-space residuals of the HS representation `A`.
pub fn l2_properties(op: &SuperOperator) -> L2Properties {
    let a = op.hs_matrix();
    let a_star = a.adjoint();
    let herm = (a + &a_star) * c(0.5, 0.0);
    L2Properties {
        self_adjoint_residual: linalg::op_norm(&(a - &a_star)),
        min_eigenvalue: linalg::hermitian_eigenvalues(&herm).first().copied().unwrap_or(0.0),
        normal_residual: linalg::op_norm(&(a * &a_star - &a_star * a)),
    }
}

/// Support points of the field of values of `A`: for each `θ_j = 2πj/angles`
/// the top eigenvector `v` of `Re(e^{iθ_j} A)` gives the point `v* A v`.
pub fn numerical_range_boundary(op: &SuperOperator, angles: usize) -> Vec<C64> {
    field_of_values_boundary(op.hs_matrix(), angles)
}

pub(crate) fn field_of_values_boundary(a: &CMat, angles: usize) -> Vec<C64> {
    let angles = angles.max(3);
    let a_star = a.adjoint();
    (0..angles)
        .map(|j| {
            let theta = 2.0 * std::f64::consts::PI * j as f64 / angles as f64;
            let rot = c(theta.cos(), theta.sin());
            let h = (a * rot + &a_star * rot.conj()) * c(0.5, 0.0);
            let (_, vecs) = linalg::hermitian_eigen(&h);
            let v = vecs.column(vecs.ncols() - 1);
            (v.adjoint() * a * v)[(0, 0)]
        })
        .collect()
}

/// `|vertex − z| < δ(1 − |z|) + 10⁻¹⁰` for every non-vertex point.
pub fn stoltz_check(points: &[C64], delta: f64, vertex: C64) -> StoltzResult {
    let mut worst: Option<(C64, f64)> = None;
    for &z in points {
        if (z - vertex).norm() <= VERTEX_TOL {
            continue;
        }
        let margin = (vertex - z).norm() - delta * (1.0 - z.norm());
        if worst.is_none_or(|(_, m)| margin > m) {
            worst = Some((z, margin));
        }
    }
    match worst {
        Some((z, m)) => StoltzResult { verdict: m < STOLTZ_SLACK, worst_point: Some(z), worst_margin: m },
        None => StoltzResult { verdict: true, worst_point: None, worst_margin: f64::NEG_INFINITY },
    }
}

/// Smallest `δ` with every non-vertex point inside the Stoltz region
/// (`∞` if some point touches the unit circle away from the vertex).
pub fn stoltz_aperture(points: &[C64], vertex: C64) -> f64 {
    points
        .iter()
        .filter(|z| (*z - vertex).norm() > VERTEX_TOL)
        .map(|z| {
            let gap = 1.0 - z.norm();
            if gap <= 1e-12 {
                f64::INFINITY
            } else {
                (vertex - z).norm() / gap
            }
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::superop::{make_conjugation, make_convolution, make_matrix, make_nc_torus_heat, shift_matrix};
    use crate::tracealg::TracialAlgebra;

    #[test]
    fn conjugation_passes_everything() {
        let a = TracialAlgebra::new(&[(2, 1.0), (2, 0.5)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = AlgElement::random(&a, &mut rng);
        let u = u.scale_real(1.0 / u.norm_inf());
        let r = validate_ds(&make_conjugation(&u).unwrap(), 20, 1, 1e-10);
        assert_eq!(r.positivity.verdict, Verdict::Pass);
        assert_eq!(r.l1_contraction.verdict, Verdict::Pass);
        assert_eq!(r.linf_contraction.verdict, Verdict::Pass);
        for (_, ratio) in &r.lp_ratios {
            assert!(*ratio <= 1.0 + 1e-10);
        }
    }

    #[test]
    fn doubled_identity_fails_l1() {
        let a = TracialAlgebra::matrix(2, 1.0).unwrap();
        let n = a.hs_dim();
        let op = make_matrix(&a, CMat::identity(n, n) * c(2.0, 0.0)).unwrap();
        let r = validate_ds(&op, 10, 0, 1e-10);
        match r.l1_contraction.verdict {
            Verdict::Fail(b) => assert!((b - 2.0).abs() < 1e-12),
            v => panic!("{v:?}"),
        }
        assert!(matches!(r.positivity.verdict, Verdict::Sampled(_)));
    }

    #[test]
    fn negation_is_not_positive() {
        let a = TracialAlgebra::matrix(2, 1.0).unwrap();
        let n = a.hs_dim();
        let op = make_matrix(&a, -CMat::identity(n, n)).unwrap();
        let r = validate_ds(&op, 10, 0, 1e-10);
        assert!(matches!(r.positivity.verdict, Verdict::Fail(w) if w < -0.1));
    }

    #[test]
    fn l2_examples() {
        let heat = make_nc_torus_heat(4, 1, 0.3).unwrap();
        let p = l2_properties(&heat);
        assert!(p.self_adjoint_residual <= 1e-12);
        assert!(p.min_eigenvalue >= 0.0);

        let a = TracialAlgebra::matrix(2, 1.0).unwrap();
        let u = AlgElement::diagonal(&a, &[vec![ONE, c(0.0, 1.0)]]).unwrap();
        let p = l2_properties(&make_conjugation(&u).unwrap());
        assert!(p.normal_residual <= 1e-12);
        assert!(p.self_adjoint_residual > 0.1);

        let m = TracialAlgebra::matrix(3, 1.0).unwrap();
        let phi = make_conjugation(&shift_matrix(&m, 3).unwrap()).unwrap();
        let conv = make_convolution(&phi, &[(2, 0.25), (-2, 0.25), (0, 0.5)]).unwrap();
        assert!(l2_properties(&conv).self_adjoint_residual <= 1e-10);
        let r = validate_ds(&conv, 10, 2, 1e-10);
        assert_eq!(r.positivity.verdict, Verdict::Pass);
    }

    #[test]
    fn numerical_range_examples() {
        let id = crate::superop::make_identity(&TracialAlgebra::matrix(2, 1.0).unwrap());
        for z in numerical_range_boundary(&id, 16) {
            assert!((z - ONE).norm() < 1e-12);
        }
        let a2 = TracialAlgebra::new(&[(1, 1.0), (1, 1.0)]).unwrap();
        let diag = CMat::from_diagonal(&crate::linalg::CVec::from_vec(vec![c(0.0, 0.0), ONE]));
        let op = make_matrix(&a2, diag).unwrap();
        let pts = numerical_range_boundary(&op, 36);
        assert!(pts.iter().all(|z| z.im.abs() < 1e-12 && z.re > -1e-12 && z.re < 1.0 + 1e-12));
        assert!(pts.iter().any(|z| z.re < 1e-12) && pts.iter().any(|z| z.re > 1.0 - 1e-12));
    }

    #[test]
    fn stoltz_examples() {
        assert!(stoltz_check(&[c(0.5, 0.0)], 2.0, ONE).verdict);
        let out = stoltz_check(&[c(0.0, 0.9)], 2.0, ONE);
        assert!(!out.verdict);
        assert_eq!(out.worst_point, Some(c(0.0, 0.9)));
        assert!(stoltz_check(&[ONE], 2.0, ONE).verdict);
        assert!((stoltz_aperture(&[c(0.5, 0.0), ONE], ONE) - 1.0).abs() < 1e-12);
        assert!(stoltz_aperture(&[-ONE], ONE).is_infinite());
    }
}
