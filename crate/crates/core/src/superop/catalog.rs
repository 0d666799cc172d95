//! Constructors for the positive Dunford-Schwartz operator catalog.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMat, C64, ONE, ZERO};
use crate::tracealg::{AlgElement, TracialAlgebra, STRUCTURE_TOL};

use super::{ProofTag, Structure, SuperOperator, TorusMultiplier};

const CONTRACTION_SLACK: f64 = 1e-12;

pub fn make_identity(algebra: &Arc<TracialAlgebra>) -> SuperOperator {
    let proof = ProofTag {
        positive: true,
        l1_contraction: true,
        linf_contraction: true,
        l2_self_adjoint: true,
        l2_normal: true,
        l2_positive: true,
    };
    SuperOperator::from_parts(algebra, Structure::Identity, proof)
}

/// `T_u(x) = u* x u` for a contraction `u`.
pub fn make_conjugation(u: &AlgElement) -> Result<SuperOperator> {
    let norm = u.norm_inf();
    if norm > 1.0 + CONTRACTION_SLACK {
        return Err(Error::NotContraction(norm));
    }
    let normal = u.blocks().iter().all(|m| linalg::is_normal(m, STRUCTURE_TOL));
    let self_adjoint = u.is_self_adjoint(STRUCTURE_TOL);
    let proof = ProofTag {
        positive: true,
        l1_contraction: true,
        linf_contraction: true,
        l2_self_adjoint: self_adjoint,
        l2_normal: normal,
        l2_positive: self_adjoint && u.is_positive(STRUCTURE_TOL),
    };
    Ok(SuperOperator::from_parts(u.algebra(), Structure::Conjugation { u: u.clone() }, proof))
}

/// Operator given directly by its matrix in the orthonormal HS basis.
/// No hypotheses are assumed.
pub fn make_matrix(algebra: &Arc<TracialAlgebra>, hs: CMat) -> Result<SuperOperator> {
    let n = algebra.hs_dim();
    if hs.nrows() != n || hs.ncols() != n {
        return Err(Error::ShapeMismatch(format!("HS matrix must be {n}x{n}, got {}x{}", hs.nrows(), hs.ncols())));
    }
    Ok(SuperOperator::with_hs(algebra, Structure::Matrix, ProofTag::default(), hs))
}

pub(crate) fn convolve(a: &[(i64, f64)], b: &[(i64, f64)]) -> Vec<(i64, f64)> {
    let mut out: BTreeMap<i64, f64> = BTreeMap::new();
    for &(n, w) in a {
        for &(m, v) in b {
            *out.entry(n + m).or_insert(0.0) += w * v;
        }
    }
    out.into_iter().collect()
}

fn check_automorphism(phi: &SuperOperator) -> Result<()> {
    let alg = phi.algebra();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let one = AlgElement::identity(alg);
    let tol = 1e-10;
    let img_one = phi.apply(&one)?;
    if (&img_one - &one).norm_inf() > tol {
        return Err(Error::NotAutomorphism("not unital".into()));
    }
    for _ in 0..6 {
        let x = AlgElement::random(alg, &mut rng);
        let y = AlgElement::random(alg, &mut rng);
        let px = phi.apply(&x)?;
        let py = phi.apply(&y)?;
        let pxy = phi.apply(&(&x * &y))?;
        let scale = 1.0 + x.norm_inf() * y.norm_inf();
        if (&pxy - &(&px * &py)).norm_inf() > tol * scale {
            return Err(Error::NotAutomorphism("not multiplicative".into()));
        }
        if (&phi.apply(&x.adjoint())? - &px.adjoint()).norm_inf() > tol * scale {
            return Err(Error::NotAutomorphism("does not commute with the adjoint".into()));
        }
        if (px.trace() - x.trace()).norm() > tol * scale * alg.total_trace() {
            return Err(Error::NotAutomorphism("not trace preserving".into()));
        }
    }
    let smin = linalg::singular_values(phi.hs_matrix()).last().copied().unwrap_or(0.0);
    if smin < 1e-8 {
        return Err(Error::NotAutomorphism("not invertible".into()));
    }
    Ok(())
}

/// Powers `Φⁿ` (possibly negative) with structure kept for conjugations.
fn automorphism_power(phi: &SuperOperator, n: i64) -> Result<SuperOperator> {
    if n == 0 {
        return Ok(super::make_identity(phi.algebra()));
    }
    if let Structure::Conjugation { u } = phi.structure() {
        let base = if n > 0 { u.clone() } else { u.adjoint() };
        let mut un = base.clone();
        for _ in 1..n.unsigned_abs() {
            un = &un * &base;
        }
        return make_conjugation(&un);
    }
    let a = phi.hs_matrix();
    let base = if n > 0 {
        a.clone()
    } else {
        a.clone().try_inverse().ok_or_else(|| Error::NotAutomorphism("not invertible".into()))?
    };
    let an = linalg::mat_pow(&base, n.unsigned_abs() as u32);
    let proof = ProofTag { positive: true, l1_contraction: true, linf_contraction: true, l2_normal: true, ..Default::default() };
    Ok(SuperOperator::with_hs(phi.algebra(), Structure::Matrix, proof, an))
}

/// `μ̄(x) = Σ_n μ({n}) Φⁿ(x)` for a trace-preserving *-automorphism `Φ` and a
/// finitely supported probability `μ` on ℤ.
pub fn make_convolution(phi: &SuperOperator, mu: &[(i64, f64)]) -> Result<SuperOperator> {
    if mu.is_empty() {
        return Err(Error::NotProbability("empty support".into()));
    }
    let mut merged: BTreeMap<i64, f64> = BTreeMap::new();
    for &(n, w) in mu {
        if !(w >= 0.0) || !w.is_finite() {
            return Err(Error::NotProbability(format!("mass {w} at {n}")));
        }
        *merged.entry(n).or_insert(0.0) += w;
    }
    let total: f64 = merged.values().sum();
    if (total - 1.0).abs() > 1e-10 {
        return Err(Error::NotProbability(format!("total mass {total}")));
    }
    check_automorphism(phi)?;
    let mu: Vec<(i64, f64)> = merged.into_iter().filter(|&(_, w)| w > 0.0).collect();
    let symmetric = mu.iter().all(|&(n, w)| {
        let mirror = mu.iter().find(|&&(m, _)| m == -n).map(|&(_, v)| v).unwrap_or(0.0);
        (mirror - w).abs() <= 1e-15
    });
    let terms = mu.iter().map(|&(n, w)| Ok((w, automorphism_power(phi, n)?))).collect::<Result<Vec<_>>>()?;
    let proof = ProofTag {
        positive: true,
        l1_contraction: true,
        linf_contraction: true,
        l2_self_adjoint: symmetric,
        l2_normal: true,
        l2_positive: false,
    };
    let structure = Structure::Convolution { mu, phi: Arc::new(phi.clone()), terms };
    Ok(SuperOperator::from_parts(phi.algebra(), structure, proof))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Keep {
    Left,
    Right,
}

/// Trace-preserving conditional expectations onto subalgebras.
#[derive(Debug, Clone, PartialEq)]
pub enum Expectation {
    /// Onto the diagonal matrices of every block.
    Diagonal,
    /// Onto `ℂ·1`: `x ↦ τ(x)/τ(1) · 1`.
    Scalars,
    /// Onto the center: each block replaced by `Tr(x_b)/d_b · 1_b`.
    BlockScalars,
    /// Pinching of one block onto the block-diagonal subalgebra of a partition
    /// of its basis indices.
    Pinching { block: usize, groups: Vec<Vec<usize>> },
    /// On a block `M_a ⊗ M_b`: keep one tensor factor, average the other.
    PartialTrace { block: usize, left: usize, right: usize, keep: Keep },
}

impl Expectation {
    pub fn name(&self) -> &'static str {
        match self {
            Expectation::Diagonal => "diagonal",
            Expectation::Scalars => "scalars",
            Expectation::BlockScalars => "block_scalars",
            Expectation::Pinching { .. } => "pinching",
            Expectation::PartialTrace { .. } => "partial_trace",
        }
    }

    fn check(&self, algebra: &TracialAlgebra) -> Result<()> {
        let nblocks = algebra.blocks().len();
        match self {
            Expectation::Pinching { block, groups } => {
                let dim = algebra.blocks().get(*block).ok_or_else(|| {
                    Error::IncompatibleSubalgebra(format!("block {block} out of range ({nblocks} blocks)"))
                })?;
                let mut seen = vec![false; dim.dim];
                for &i in groups.iter().flatten() {
                    if i >= dim.dim || seen[i] {
                        return Err(Error::IncompatibleSubalgebra(format!("index {i} repeated or out of range")));
                    }
                    seen[i] = true;
                }
                if seen.iter().any(|s| !s) {
                    return Err(Error::IncompatibleSubalgebra("groups do not cover the block".into()));
                }
            }
            Expectation::PartialTrace { block, left, right, .. } => {
                let b = algebra.blocks().get(*block).ok_or_else(|| {
                    Error::IncompatibleSubalgebra(format!("block {block} out of range ({nblocks} blocks)"))
                })?;
                if left * right != b.dim || *left == 0 {
                    return Err(Error::IncompatibleSubalgebra(format!(
                        "block dimension {} is not {left}x{right}",
                        b.dim
                    )));
                }
            }
            _ => {}
        }
        Ok(())
    }

    pub fn apply(&self, x: &AlgElement) -> AlgElement {
        match self {
            Expectation::Diagonal => x.map_blocks(|_, m| CMat::from_diagonal(&m.diagonal())),
            Expectation::Scalars => {
                let s = x.trace() / x.algebra().total_trace();
                AlgElement::scalar(x.algebra(), s)
            }
            Expectation::BlockScalars => x.map_blocks(|_, m| {
                let d = m.nrows();
                CMat::identity(d, d) * (m.trace() / d as f64)
            }),
            Expectation::Pinching { block, groups } => x.map_blocks(|b, m| {
                if b != *block {
                    return m.clone();
                }
                let mut out = CMat::zeros(m.nrows(), m.ncols());
                for g in groups {
                    for &i in g {
                        for &j in g {
                            out[(i, j)] = m[(i, j)];
                        }
                    }
                }
                out
            }),
            Expectation::PartialTrace { block, left, right, keep } => x.map_blocks(|b, m| {
                if b != *block {
                    return m.clone();
                }
                let (a, r) = (*left, *right);
                let mut out = CMat::zeros(a * r, a * r);
                match keep {
                    Keep::Left => {
                        // (Tr_right(x) / r) ⊗ 1_r
                        for i in 0..a {
                            for j in 0..a {
                                let mut s = ZERO;
                                for k in 0..r {
                                    s += m[(i * r + k, j * r + k)];
                                }
                                s /= r as f64;
                                for k in 0..r {
                                    out[(i * r + k, j * r + k)] = s;
                                }
                            }
                        }
                    }
                    Keep::Right => {
                        // 1_a ⊗ (Tr_left(x) / a)
                        for k in 0..r {
                            for l in 0..r {
                                let mut s = ZERO;
                                for i in 0..a {
                                    s += m[(i * r + k, i * r + l)];
                                }
                                s /= a as f64;
                                for i in 0..a {
                                    out[(i * r + k, i * r + l)] = s;
                                }
                            }
                        }
                    }
                }
                out
            }),
        }
    }
}

/// `T = E_1 ∘ … ∘ E_d` for trace-preserving conditional expectations.
pub fn make_expectation_product(algebra: &Arc<TracialAlgebra>, factors: &[Expectation]) -> Result<SuperOperator> {
    for e in factors {
        e.check(algebra)?;
        // τ ∘ E = τ on every matrix unit
        for (b, blk) in algebra.blocks().iter().enumerate() {
            for i in 0..blk.dim {
                for j in 0..blk.dim {
                    let x = AlgElement::matrix_unit(algebra, b, i, j);
                    let diff = (e.apply(&x).trace() - x.trace()).norm();
                    if diff > 1e-10 {
                        return Err(Error::IncompatibleSubalgebra(format!(
                            "{} changes the trace of e_{i}{j} in block {b} by {diff:.3e}",
                            e.name()
                        )));
                    }
                }
            }
        }
    }
    let single = factors.len() <= 1;
    let proof = ProofTag {
        positive: true,
        l1_contraction: true,
        linf_contraction: true,
        l2_self_adjoint: single,
        l2_normal: single,
        l2_positive: single,
    };
    Ok(SuperOperator::from_parts(algebra, Structure::ExpectationProduct { factors: factors.to_vec() }, proof))
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Clock matrix `u = diag(ω^j)`, `ω = e^{2πi p/q}`, on a single `q×q` block.
pub fn clock_matrix(algebra: &Arc<TracialAlgebra>, q: usize, p: i64) -> Result<AlgElement> {
    let omega = 2.0 * std::f64::consts::PI * p as f64 / q as f64;
    let d: Vec<C64> = (0..q).map(|j| c((omega * j as f64).cos(), (omega * j as f64).sin())).collect();
    AlgElement::diagonal(algebra, &[d])
}

/// Shift matrix `v e_j = e_{j-1 mod q}` on a single `q×q` block; with the
/// clock matrix it satisfies `vu = e^{2πi p/q} uv`.
pub fn shift_matrix(algebra: &Arc<TracialAlgebra>, q: usize) -> Result<AlgElement> {
    let mut m = CMat::zeros(q, q);
    for j in 0..q {
        m[((j + q - 1) % q, j)] = ONE;
    }
    AlgElement::from_blocks(algebra, vec![m])
}

/// Heat semigroup at time `t` on the rational noncommutative torus `M_q`
/// (θ = p/q) with normalized trace.
pub fn make_nc_torus_heat(q: usize, p: i64, t: f64) -> Result<SuperOperator> {
    let algebra = TracialAlgebra::matrix(q.max(1), 1.0 / q.max(1) as f64)?;
    make_nc_torus_heat_on(&algebra, p, t)
}

/// As [`make_nc_torus_heat`] on a caller-supplied single-block algebra.
pub fn make_nc_torus_heat_on(algebra: &Arc<TracialAlgebra>, p: i64, t: f64) -> Result<SuperOperator> {
    if algebra.blocks().len() != 1 {
        return Err(Error::InvalidOperator("the torus model needs a single matrix block".into()));
    }
    let q = algebra.blocks()[0].dim;
    if q < 2 || gcd(p.unsigned_abs(), q as u64) != 1 {
        return Err(Error::NotCoprime { p, q });
    }
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::NonpositiveTime(t));
    }
    let coeffs = (0..q)
        .flat_map(|m| (0..q).map(move |n| (m, n)))
        .map(|(m, n)| (-t * TorusMultiplier::laplacian(q, m, n)).exp())
        .collect();
    let proof = ProofTag {
        positive: true,
        l1_contraction: true,
        linf_contraction: true,
        l2_self_adjoint: true,
        l2_normal: true,
        l2_positive: true,
    };
    let mult = TorusMultiplier { q, p: p.rem_euclid(q as i64), t, coeffs };
    Ok(SuperOperator::from_parts(algebra, Structure::Multiplier(mult), proof))
}
