//! Linear maps on a tracial algebra ("super-operators"), kept both in
//! structured form (for fast application) and, lazily, as a dense matrix in
//! the orthonormal Hilbert-Schmidt basis of [`AlgElement::to_hs`].

mod catalog;
mod validate;

use std::sync::{Arc, OnceLock};

use crate::error::{Error, Result};
use crate::linalg::{self, CMat};
use crate::tracealg::{AlgElement, TracialAlgebra};

pub use catalog::{
    clock_matrix, make_conjugation, make_convolution, make_expectation_product, make_identity, make_matrix,
    make_nc_torus_heat, make_nc_torus_heat_on, shift_matrix, Expectation, Keep,
};
pub use validate::{
    l2_properties, numerical_range_boundary, stoltz_check, stoltz_aperture, validate_ds, CheckResult, L2Properties,
    StoltzResult, StoltzSummary, ValidationReport, Verdict, DEFAULT_ANGLES,
};

/// Which positive Dunford-Schwartz hypotheses hold by construction.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ProofTag {
    pub positive: bool,
    pub l1_contraction: bool,
    pub linf_contraction: bool,
    pub l2_self_adjoint: bool,
    pub l2_normal: bool,
    pub l2_positive: bool,
}

impl ProofTag {
    pub fn is_ds_positive(&self) -> bool {
        self.positive && self.l1_contraction && self.linf_contraction
    }

    pub fn labels(&self) -> Vec<&'static str> {
        let mut v = Vec::new();
        let flags = [
            (self.positive, "positive"),
            (self.l1_contraction, "l1_contraction"),
            (self.linf_contraction, "linf_contraction"),
            (self.l2_self_adjoint, "l2_self_adjoint"),
            (self.l2_normal, "l2_normal"),
            (self.l2_positive, "l2_positive"),
        ];
        for (on, name) in flags {
            if on {
                v.push(name);
            }
        }
        v
    }
}

/// Fourier multiplier on the rational noncommutative torus `M_q`, diagonal
/// in the basis `u^m v^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct TorusMultiplier {
    pub q: usize,
    pub p: i64,
    pub t: f64,
    /// Multiplier of `u^m v^n` stored at `m * q + n`.
    pub coeffs: Vec<f64>,
}

impl TorusMultiplier {
    /// Discrete-torus Laplacian eigenvalue `4sin²(πm/q) + 4sin²(πn/q)`.
    pub fn laplacian(q: usize, m: usize, n: usize) -> f64 {
        let s = |k: usize| (std::f64::consts::PI * k as f64 / q as f64).sin().powi(2);
        4.0 * s(m) + 4.0 * s(n)
    }

    fn omega(&self) -> crate::C64 {
        let phase = 2.0 * std::f64::consts::PI * self.p as f64 / self.q as f64;
        crate::c(phase.cos(), phase.sin())
    }

    fn apply_block(&self, x: &CMat) -> CMat {
        let q = self.q;
        let omega = self.omega();
        let pow: Vec<crate::C64> = (0..q).map(|k| omega.powu(k as u32)).collect();
        // c_{mn} = (1/q) Σ_j ω^{-m i} x_{i j}, i = j - n mod q
        let mut y = CMat::zeros(q, q);
        for n in 0..q {
            let mut coeff = vec![crate::linalg::ZERO; q];
            for (m, cm) in coeff.iter_mut().enumerate() {
                let mut s = crate::linalg::ZERO;
                for j in 0..q {
                    let i = (j + q - n) % q;
                    s += pow[(m * i) % q].conj() * x[(i, j)];
                }
                *cm = s / q as f64 * self.coeffs[m * q + n];
            }
            for j in 0..q {
                let i = (j + q - n) % q;
                let mut s = crate::linalg::ZERO;
                for (m, cm) in coeff.iter().enumerate() {
                    s += cm * pow[(m * i) % q];
                }
                y[(i, j)] = s;
            }
        }
        y
    }
}

#[derive(Debug, Clone)]
pub enum Structure {
    Identity,
    /// `x ↦ u* x u`.
    Conjugation { u: AlgElement },
    /// `x ↦ Σ_n μ({n}) Φⁿ(x)`.
    Convolution { mu: Vec<(i64, f64)>, phi: Arc<SuperOperator>, terms: Vec<(f64, SuperOperator)> },
    /// `E_1 ∘ … ∘ E_d`, applied right to left.
    ExpectationProduct { factors: Vec<Expectation> },
    Multiplier(TorusMultiplier),
    Power { base: Arc<SuperOperator>, k: u32 },
    /// Given only by its HS matrix.
    Matrix,
}

impl Structure {
    pub fn tag(&self) -> &'static str {
        match self {
            Structure::Identity => "identity",
            Structure::Conjugation { .. } => "conjugation",
            Structure::Convolution { .. } => "convolution",
            Structure::ExpectationProduct { .. } => "expectation_product",
            Structure::Multiplier(_) => "nc_torus_heat",
            Structure::Power { .. } => "power",
            Structure::Matrix => "matrix",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SuperOperator {
    algebra: Arc<TracialAlgebra>,
    structure: Structure,
    proof: ProofTag,
    hs: OnceLock<CMat>,
}

impl SuperOperator {
    pub(crate) fn from_parts(algebra: &Arc<TracialAlgebra>, structure: Structure, proof: ProofTag) -> Self {
        Self { algebra: algebra.clone(), structure, proof, hs: OnceLock::new() }
    }

    pub(crate) fn with_hs(algebra: &Arc<TracialAlgebra>, structure: Structure, proof: ProofTag, hs: CMat) -> Self {
        let cell = OnceLock::new();
        let _ = cell.set(hs);
        Self { algebra: algebra.clone(), structure, proof, hs: cell }
    }

    pub fn algebra(&self) -> &Arc<TracialAlgebra> {
        &self.algebra
    }

    pub fn structure(&self) -> &Structure {
        &self.structure
    }

    pub fn proof(&self) -> ProofTag {
        self.proof
    }

    /// `T(x)`, through the structural fast path when one exists.
    pub fn apply(&self, x: &AlgElement) -> Result<AlgElement> {
        if x.algebra().as_ref() != self.algebra.as_ref() {
            return Err(Error::AlgebraMismatch);
        }
        Ok(self.apply_structural(x))
    }

    fn apply_structural(&self, x: &AlgElement) -> AlgElement {
        match &self.structure {
            Structure::Identity => x.clone(),
            Structure::Conjugation { u } => x.map_blocks(|b, m| {
                let ub = u.block(b);
                ub.adjoint() * m * ub
            }),
            Structure::Convolution { terms, .. } => {
                let mut acc = AlgElement::zero(&self.algebra);
                for (w, op) in terms {
                    acc.axpy(crate::c(*w, 0.0), &op.apply_structural(x));
                }
                acc
            }
            Structure::ExpectationProduct { factors } => {
                let mut y = x.clone();
                for e in factors.iter().rev() {
                    y = e.apply(&y);
                }
                y
            }
            Structure::Multiplier(mult) => x.map_blocks(|_, m| mult.apply_block(m)),
            Structure::Power { base, k } => {
                let mut y = x.clone();
                for _ in 0..*k {
                    y = base.apply_structural(&y);
                }
                y
            }
            Structure::Matrix => self.apply_hs(x),
        }
    }

    /// `T(x)` computed through the dense HS matrix.
    pub fn apply_hs(&self, x: &AlgElement) -> AlgElement {
        let v = self.hs_matrix() * x.to_hs();
        AlgElement::from_hs(&self.algebra, &v).expect("HS dimension is fixed by the algebra")
    }

    /// Dense matrix of `T` in the orthonormal HS basis (computed once).
    pub fn hs_matrix(&self) -> &CMat {
        self.hs.get_or_init(|| {
            let n = self.algebra.hs_dim();
            let mut a = CMat::zeros(n, n);
            let mut e = crate::linalg::CVec::zeros(n);
            for j in 0..n {
                e.fill(crate::linalg::ZERO);
                e[j] = crate::linalg::ONE;
                let x = AlgElement::from_hs(&self.algebra, &e).expect("HS dimension is fixed by the algebra");
                let y = self.apply_structural(&x).to_hs();
                a.set_column(j, &y);
            }
            a
        })
    }

    /// `T^k`, keeping structure where possible.
    pub fn power(&self, k: u32) -> Result<SuperOperator> {
        if k == 0 {
            return Ok(make_identity(&self.algebra));
        }
        if k == 1 {
            return Ok(self.clone());
        }
        let mut proof = self.proof;
        proof.l2_positive = self.proof.l2_positive || (self.proof.l2_self_adjoint && k % 2 == 0);
        let op = match &self.structure {
            Structure::Identity => self.clone(),
            Structure::Conjugation { u } => {
                let mut uk = u.clone();
                for _ in 1..k {
                    uk = &uk * u;
                }
                let mut op = make_conjugation(&uk)?;
                op.proof = proof;
                op
            }
            Structure::Multiplier(mult) => {
                let coeffs = mult.coeffs.iter().map(|c| c.powi(k as i32)).collect();
                let m = TorusMultiplier { q: mult.q, p: mult.p, t: mult.t * k as f64, coeffs };
                SuperOperator::from_parts(&self.algebra, Structure::Multiplier(m), proof)
            }
            Structure::Convolution { mu, phi, .. } => {
                let mut conv: Vec<(i64, f64)> = vec![(0, 1.0)];
                for _ in 0..k {
                    conv = catalog::convolve(&conv, mu);
                }
                let mut op = make_convolution(phi, &conv)?;
                op.proof = proof;
                op
            }
            Structure::Matrix => {
                let a = linalg::mat_pow(self.hs_matrix(), k);
                SuperOperator::with_hs(&self.algebra, Structure::Matrix, proof, a)
            }
            Structure::ExpectationProduct { .. } | Structure::Power { .. } => SuperOperator::from_parts(
                &self.algebra,
                Structure::Power { base: Arc::new(self.clone()), k },
                proof,
            ),
        };
        if let Some(a) = self.hs.get() {
            let _ = op.hs.set(linalg::mat_pow(a, k));
        }
        Ok(op)
    }

    /// Composition `self ∘ other` as a dense operator.
    pub fn compose(&self, other: &SuperOperator) -> Result<SuperOperator> {
        if self.algebra.as_ref() != other.algebra.as_ref() {
            return Err(Error::AlgebraMismatch);
        }
        let a = self.hs_matrix() * other.hs_matrix();
        let proof = ProofTag {
            positive: self.proof.positive && other.proof.positive,
            l1_contraction: self.proof.l1_contraction && other.proof.l1_contraction,
            linf_contraction: self.proof.linf_contraction && other.proof.linf_contraction,
            ..ProofTag::default()
        };
        Ok(SuperOperator::with_hs(&self.algebra, Structure::Matrix, proof, a))
    }
}
