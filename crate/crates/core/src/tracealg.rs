//! Finite-dimensional tracial algebras: direct sums of full matrix blocks
//! `M_{d_1} ⊕ … ⊕ M_{d_m}` with trace `τ(x) = Σ_b w_b Tr(x_b)`.
//!
//! Elements are block-diagonal complex matrices. The Hilbert-Schmidt
//! coordinatization used by super-operators is `vec(x) = ⊕_b √w_b · x_b`
//! (row-major inside each block), which is an isometry from `(L_2, τ)` onto
//! `ℂ^{Σ d_b²}`.

use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMat, CVec, C64, ONE, ZERO};

/// Tolerance used for "self-adjoint" and "projection" checks.
pub const STRUCTURE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Block {
    pub dim: usize,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TracialAlgebra {
    blocks: Vec<Block>,
    total_trace: f64,
}

impl TracialAlgebra {
    pub fn new(blocks: &[(usize, f64)]) -> Result<Arc<Self>> {
        if blocks.is_empty() {
            return Err(Error::EmptyBlockList);
        }
        let mut out = Vec::with_capacity(blocks.len());
        for (index, &(dim, weight)) in blocks.iter().enumerate() {
            if dim == 0 {
                return Err(Error::NonpositiveDim { index });
            }
            if !(weight > 0.0) || !weight.is_finite() {
                return Err(Error::NonpositiveWeight { index, weight });
            }
            out.push(Block { dim, weight });
        }
        let total_trace = out.iter().map(|b| b.weight * b.dim as f64).sum();
        Ok(Arc::new(Self { blocks: out, total_trace }))
    }

    /// Single full matrix block `M_d` with trace weight `w`.
    pub fn matrix(dim: usize, weight: f64) -> Result<Arc<Self>> {
        Self::new(&[(dim, weight)])
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn total_trace(&self) -> f64 {
        self.total_trace
    }

    /// Dimension of the Hilbert-Schmidt space, `Σ d_b²`.
    pub fn hs_dim(&self) -> usize {
        self.blocks.iter().map(|b| b.dim * b.dim).sum()
    }

    pub fn min_weight(&self) -> f64 {
        self.blocks.iter().map(|b| b.weight).fold(f64::INFINITY, f64::min)
    }

    /// Largest block dimension.
    pub fn max_dim(&self) -> usize {
        self.blocks.iter().map(|b| b.dim).max().unwrap_or(0)
    }

    /// Offset of each block inside the HS coordinate vector.
    pub fn hs_offsets(&self) -> Vec<usize> {
        let mut off = Vec::with_capacity(self.blocks.len());
        let mut acc = 0;
        for b in &self.blocks {
            off.push(acc);
            acc += b.dim * b.dim;
        }
        off
    }
}

/// A block-diagonal element of a [`TracialAlgebra`].
#[derive(Debug, Clone, PartialEq)]
pub struct AlgElement {
    algebra: Arc<TracialAlgebra>,
    blocks: Vec<CMat>,
}

fn same_algebra(a: &Arc<TracialAlgebra>, b: &Arc<TracialAlgebra>) -> bool {
    Arc::ptr_eq(a, b) || a == b
}

impl AlgElement {
    pub fn from_blocks(algebra: &Arc<TracialAlgebra>, blocks: Vec<CMat>) -> Result<Self> {
        if blocks.len() != algebra.blocks.len() {
            return Err(Error::ShapeMismatch(format!(
                "expected {} blocks, got {}",
                algebra.blocks.len(),
                blocks.len()
            )));
        }
        for (i, (m, b)) in blocks.iter().zip(&algebra.blocks).enumerate() {
            if m.nrows() != b.dim || m.ncols() != b.dim {
                return Err(Error::ShapeMismatch(format!(
                    "block {i} is {}x{}, expected {}x{}",
                    m.nrows(),
                    m.ncols(),
                    b.dim,
                    b.dim
                )));
            }
        }
        Ok(Self { algebra: algebra.clone(), blocks })
    }

    pub fn zero(algebra: &Arc<TracialAlgebra>) -> Self {
        let blocks = algebra.blocks.iter().map(|b| CMat::zeros(b.dim, b.dim)).collect();
        Self { algebra: algebra.clone(), blocks }
    }

    pub fn identity(algebra: &Arc<TracialAlgebra>) -> Self {
        let blocks = algebra.blocks.iter().map(|b| CMat::identity(b.dim, b.dim)).collect();
        Self { algebra: algebra.clone(), blocks }
    }

    pub fn scalar(algebra: &Arc<TracialAlgebra>, z: C64) -> Self {
        Self::identity(algebra).scale(z)
    }

    /// Diagonal element from per-block diagonal entries.
    pub fn diagonal(algebra: &Arc<TracialAlgebra>, diags: &[Vec<C64>]) -> Result<Self> {
        let blocks = diags
            .iter()
            .map(|d| CMat::from_diagonal(&CVec::from_vec(d.clone())))
            .collect();
        Self::from_blocks(algebra, blocks)
    }

    /// Real diagonal element, convenient for tests and fixtures.
    pub fn real_diagonal(algebra: &Arc<TracialAlgebra>, diags: &[Vec<f64>]) -> Result<Self> {
        let d: Vec<Vec<C64>> = diags.iter().map(|v| v.iter().map(|&x| c(x, 0.0)).collect()).collect();
        Self::diagonal(algebra, &d)
    }

    /// Matrix unit `e_{ij}` inside block `block`.
    pub fn matrix_unit(algebra: &Arc<TracialAlgebra>, block: usize, i: usize, j: usize) -> Self {
        let mut x = Self::zero(algebra);
        x.blocks[block][(i, j)] = ONE;
        x
    }

    /// Element with independent complex Gaussian entries of variance `1/d_b`
    /// in block `b`, so that typical operator norms are O(1).
    pub fn random<R: Rng + ?Sized>(algebra: &Arc<TracialAlgebra>, rng: &mut R) -> Self {
        let blocks = algebra
            .blocks
            .iter()
            .map(|b| {
                let s = (2.0 * b.dim as f64).sqrt().recip();
                CMat::from_fn(b.dim, b.dim, |_, _| {
                    let re: f64 = rng.sample(StandardNormal);
                    let im: f64 = rng.sample(StandardNormal);
                    c(re * s, im * s)
                })
            })
            .collect();
        Self { algebra: algebra.clone(), blocks }
    }

    pub fn algebra(&self) -> &Arc<TracialAlgebra> {
        &self.algebra
    }

    pub fn blocks(&self) -> &[CMat] {
        &self.blocks
    }

    pub fn block(&self, b: usize) -> &CMat {
        &self.blocks[b]
    }

    pub fn into_blocks(self) -> Vec<CMat> {
        self.blocks
    }

    pub fn same_algebra(&self, other: &Self) -> bool {
        same_algebra(&self.algebra, &other.algebra)
    }

    fn check(&self, other: &Self) -> Result<()> {
        if self.same_algebra(other) {
            Ok(())
        } else {
            Err(Error::AlgebraMismatch)
        }
    }

    /// Apply `f` to every block.
    pub fn map_blocks(&self, mut f: impl FnMut(usize, &CMat) -> CMat) -> Self {
        let blocks = self.blocks.iter().enumerate().map(|(i, m)| f(i, m)).collect();
        Self { algebra: self.algebra.clone(), blocks }
    }

    pub fn adjoint(&self) -> Self {
        self.map_blocks(|_, m| m.adjoint())
    }

    pub fn scale(&self, z: C64) -> Self {
        self.map_blocks(|_, m| m * z)
    }

    pub fn scale_real(&self, s: f64) -> Self {
        self.map_blocks(|_, m| m.scale(s))
    }

    pub fn checked_add(&self, other: &Self) -> Result<Self> {
        self.check(other)?;
        Ok(self.map_blocks(|i, m| m + &other.blocks[i]))
    }

    pub fn checked_sub(&self, other: &Self) -> Result<Self> {
        self.check(other)?;
        Ok(self.map_blocks(|i, m| m - &other.blocks[i]))
    }

    pub fn checked_mul(&self, other: &Self) -> Result<Self> {
        self.check(other)?;
        Ok(self.map_blocks(|i, m| m * &other.blocks[i]))
    }

    /// `self += a · x` in place.
    pub fn axpy(&mut self, a: C64, x: &Self) {
        debug_assert!(self.same_algebra(x));
        for (m, xm) in self.blocks.iter_mut().zip(&x.blocks) {
            if a == ONE {
                *m += xm;
            } else {
                m.zip_apply(xm, |s, v| *s += a * v);
            }
        }
    }

    pub fn fill_zero(&mut self) {
        for m in &mut self.blocks {
            m.fill(ZERO);
        }
    }

    /// `τ(x) = Σ_b w_b Tr(x_b)`.
    pub fn trace(&self) -> C64 {
        self.blocks
            .iter()
            .zip(&self.algebra.blocks)
            .map(|(m, b)| m.trace() * b.weight)
            .sum()
    }

    /// `⟨x, y⟩ = τ(y* x)`.
    pub fn hs_inner(&self, other: &Self) -> Result<C64> {
        self.check(other)?;
        Ok(self
            .blocks
            .iter()
            .zip(&other.blocks)
            .zip(&self.algebra.blocks)
            .map(|((x, y), b)| {
                let s: C64 = x.iter().zip(y.iter()).map(|(a, bb)| a * bb.conj()).sum();
                s * b.weight
            })
            .sum())
    }

    /// Singular values of each block.
    pub fn block_singular_values(&self) -> Vec<Vec<f64>> {
        self.blocks.iter().map(linalg::singular_values).collect()
    }

    /// `‖x‖_p = τ(|x|^p)^{1/p}`, operator norm for `p = ∞`.
    pub fn lp_norm(&self, p: f64) -> Result<f64> {
        if p.is_nan() || p < 1.0 {
            return Err(Error::InvalidExponent(p));
        }
        let sv = self.block_singular_values();
        if p.is_infinite() {
            return Ok(sv.iter().flat_map(|s| s.iter().copied()).fold(0.0, f64::max));
        }
        if p == 2.0 {
            return Ok(self.norm2());
        }
        let sum: f64 = sv
            .iter()
            .zip(&self.algebra.blocks)
            .map(|(s, b)| b.weight * s.iter().map(|v| v.powf(p)).sum::<f64>())
            .sum();
        Ok(sum.powf(p.recip()))
    }

    /// `‖x‖_2`, computed from the entries without an SVD.
    pub fn norm2(&self) -> f64 {
        self.blocks
            .iter()
            .zip(&self.algebra.blocks)
            .map(|(m, b)| b.weight * m.norm_squared())
            .sum::<f64>()
            .sqrt()
    }

    /// Operator norm `‖x‖_∞`.
    pub fn norm_inf(&self) -> f64 {
        self.blocks.iter().map(linalg::op_norm).fold(0.0, f64::max)
    }

    /// Modulus `|x| = (x* x)^{1/2}`.
    pub fn modulus(&self) -> Self {
        self.map_blocks(|_, m| {
            let (vals, vecs) = linalg::hermitian_eigen(&(m.adjoint() * m));
            let d = CVec::from_iterator(vals.len(), vals.iter().map(|&v| c(v.max(0.0).sqrt(), 0.0)));
            &vecs * CMat::from_diagonal(&d) * vecs.adjoint()
        })
    }

    pub fn self_adjoint_residual(&self) -> f64 {
        self.blocks.iter().map(|m| linalg::op_norm(&(m - m.adjoint()))).fold(0.0, f64::max)
    }

    pub fn is_self_adjoint(&self, tol: f64) -> bool {
        self.self_adjoint_residual() <= tol
    }

    pub fn is_projection(&self, tol: f64) -> bool {
        let sq_res = self.blocks.iter().map(|m| linalg::op_norm(&(m * m - m))).fold(0.0, f64::max);
        sq_res <= tol && self.is_self_adjoint(tol)
    }

    /// Smallest eigenvalue of the Hermitian part across all blocks.
    pub fn min_hermitian_eigenvalue(&self) -> f64 {
        self.blocks
            .iter()
            .filter_map(|m| linalg::hermitian_eigenvalues(m).first().copied())
            .fold(f64::INFINITY, f64::min)
    }

    /// True iff `x` is self-adjoint within `tol` and its Hermitian part has
    /// spectrum in `[-tol, ∞)`.
    pub fn is_positive(&self, tol: f64) -> bool {
        self.is_self_adjoint(tol) && self.min_hermitian_eigenvalue() >= -tol
    }

    /// Decreasing rearrangement `t ↦ μ_t(x)` as an exact step function.
    pub fn singular_profile(&self) -> SingularProfile {
        let mut steps: Vec<ProfileStep> = self
            .block_singular_values()
            .into_iter()
            .zip(&self.algebra.blocks)
            .flat_map(|(s, b)| s.into_iter().map(move |value| ProfileStep { value, length: b.weight }))
            .filter(|st| st.value > 0.0)
            .collect();
        steps.sort_by(|a, b| b.value.total_cmp(&a.value));
        let mut merged: Vec<ProfileStep> = Vec::with_capacity(steps.len());
        for st in steps {
            match merged.last_mut() {
                Some(last) if last.value == st.value => last.length += st.length,
                _ => merged.push(st),
            }
        }
        SingularProfile { steps: merged }
    }

    /// Orthogonal projection onto the eigenvectors of a self-adjoint element
    /// with eigenvalue in `[a, b]`.
    pub fn spectral_projection(&self, a: f64, b: f64) -> Result<Self> {
        let res = self.self_adjoint_residual();
        if res > STRUCTURE_TOL {
            return Err(Error::NotSelfAdjoint(res));
        }
        Ok(self.map_blocks(|_, m| {
            let (vals, vecs) = linalg::hermitian_eigen(m);
            let n = m.nrows();
            let mut p = CMat::zeros(n, n);
            for (k, &v) in vals.iter().enumerate() {
                if v >= a && v <= b {
                    let col = vecs.column(k);
                    p += &col * col.adjoint();
                }
            }
            p
        }))
    }

    /// HS coordinates `⊕_b √w_b x_b` (row-major within blocks).
    pub fn to_hs(&self) -> CVec {
        let n = self.algebra.hs_dim();
        let mut v = CVec::zeros(n);
        let mut k = 0;
        for (m, b) in self.blocks.iter().zip(&self.algebra.blocks) {
            let s = b.weight.sqrt();
            for i in 0..b.dim {
                for j in 0..b.dim {
                    v[k] = m[(i, j)] * s;
                    k += 1;
                }
            }
        }
        v
    }

    pub fn from_hs(algebra: &Arc<TracialAlgebra>, v: &CVec) -> Result<Self> {
        if v.len() != algebra.hs_dim() {
            return Err(Error::ShapeMismatch(format!(
                "HS vector has length {}, expected {}",
                v.len(),
                algebra.hs_dim()
            )));
        }
        let mut k = 0;
        let blocks = algebra
            .blocks
            .iter()
            .map(|b| {
                let s = b.weight.sqrt().recip();
                let m = CMat::from_fn(b.dim, b.dim, |i, j| v[k + i * b.dim + j] * s);
                k += b.dim * b.dim;
                m
            })
            .collect();
        Ok(Self { algebra: algebra.clone(), blocks })
    }
}

impl Add for &AlgElement {
    type Output = AlgElement;
    fn add(self, rhs: &AlgElement) -> AlgElement {
        self.checked_add(rhs).expect("algebra mismatch in addition")
    }
}

impl Sub for &AlgElement {
    type Output = AlgElement;
    fn sub(self, rhs: &AlgElement) -> AlgElement {
        self.checked_sub(rhs).expect("algebra mismatch in subtraction")
    }
}

impl Mul for &AlgElement {
    type Output = AlgElement;
    fn mul(self, rhs: &AlgElement) -> AlgElement {
        self.checked_mul(rhs).expect("algebra mismatch in product")
    }
}

impl Neg for &AlgElement {
    type Output = AlgElement;
    fn neg(self) -> AlgElement {
        self.scale_real(-1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileStep {
    pub value: f64,
    pub length: f64,
}

/// Generalized singular numbers `μ_t(x)` as a nonincreasing step function;
/// steps with value zero are omitted.
#[derive(Debug, Clone, PartialEq)]
pub struct SingularProfile {
    pub steps: Vec<ProfileStep>,
}

impl SingularProfile {
    /// `μ_t` at a given `t ≥ 0`.
    pub fn mu(&self, t: f64) -> f64 {
        let mut acc = 0.0;
        for st in &self.steps {
            acc += st.length;
            if t < acc {
                return st.value;
            }
        }
        0.0
    }

    /// `∫_0^∞ μ_t dt`.
    pub fn integral(&self) -> f64 {
        self.steps.iter().map(|s| s.value * s.length).sum()
    }

    /// Measure of the support of the profile.
    pub fn support_length(&self) -> f64 {
        self.steps.iter().map(|s| s.length).sum()
    }
}
