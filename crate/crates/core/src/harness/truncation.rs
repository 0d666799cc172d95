use crate::error::{Error, Result};
use crate::linalg::{self, CMat};
use crate::tracealg::AlgElement;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TruncationMode {
    /// `‖e y e‖_∞`
    Bilateral,
    /// `‖y e‖_∞`
    Right,
}

impl TruncationMode {
    pub fn label(&self) -> &'static str {
        match self {
            TruncationMode::Bilateral => "bilateral",
            TruncationMode::Right => "right",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Truncation {
    pub e: AlgElement,
    pub tau_perp: f64,
    pub achieved_sup: f64,
    pub mode: TruncationMode,
}

impl Truncation {
    pub fn truncated_norm(&self, y: &AlgElement) -> f64 {
        truncated(y, &self.e, self.mode)
    }
}

fn truncated(y: &AlgElement, e: &AlgElement, mode: TruncationMode) -> f64 {
    match mode {
        TruncationMode::Bilateral => (&(e * y) * e).norm_inf(),
        TruncationMode::Right => (y * e).norm_inf(),
    }
}

/// Finds a projection `e` with `τ(1 − e) ≤ budget` by cutting the top
/// spectral levels of the envelope `Σ_n 2^{−n−1}|v_n|`, and reports the
/// supremum of the truncated norms over `vals`.
pub fn truncation_search(vals: &[AlgElement], budget: f64, mode: TruncationMode) -> Result<Truncation> {
    let first = vals.first().ok_or_else(|| Error::Precondition("no values to truncate".into()))?;
    let algebra = first.algebra().clone();
    if vals.iter().any(|v| !v.same_algebra(first)) {
        return Err(Error::AlgebraMismatch);
    }
    let total = algebra.total_trace();
    if !(budget > 0.0) {
        return Err(Error::BudgetTooSmall { budget, total });
    }
    if budget >= total {
        return Err(Error::Precondition(format!("trace budget {budget} must be below tau(1) = {total}")));
    }

    let mut envelope = AlgElement::zero(&algebra);
    let mut w = 0.5;
    for v in vals {
        if w == 0.0 {
            break;
        }
        let m = match mode {
            TruncationMode::Right => v.modulus(),
            TruncationMode::Bilateral => (&v.modulus() + &v.adjoint().modulus()).scale_real(0.5),
        };
        envelope.axpy(crate::c(w, 0.0), &m);
        w *= 0.5;
    }

    let eig: Vec<(Vec<f64>, CMat)> = envelope.blocks().iter().map(linalg::hermitian_eigen).collect();
    // (value, block, index) sorted by decreasing value
    let mut levels: Vec<(f64, usize, usize)> =
        eig.iter().enumerate().flat_map(|(b, (vals, _))| vals.iter().enumerate().map(move |(i, &v)| (v, b, i))).collect();
    levels.sort_by(|a, b| b.0.total_cmp(&a.0));
    let top = levels.first().map(|l| l.0).unwrap_or(0.0);
    let tie = 1e-12 * top.max(1.0);

    let blocks = algebra.blocks();
    let mut cut: Vec<Vec<bool>> = blocks.iter().map(|b| vec![false; b.dim]).collect();
    let mut tau_perp = 0.0;
    let mut i = 0;
    while i < levels.len() {
        let level = levels[i].0;
        if level <= tie {
            break;
        }
        let mut j = i;
        let mut weight = 0.0;
        while j < levels.len() && level - levels[j].0 <= tie {
            weight += blocks[levels[j].1].weight;
            j += 1;
        }
        if tau_perp + weight > budget {
            break;
        }
        for &(_, b, k) in &levels[i..j] {
            cut[b][k] = true;
        }
        tau_perp += weight;
        i = j;
    }

    let e_blocks = eig
        .iter()
        .enumerate()
        .map(|(b, (_, vecs))| {
            let n = vecs.nrows();
            let mut p = CMat::zeros(n, n);
            for k in 0..n {
                if !cut[b][k] {
                    let col = vecs.column(k);
                    p += &col * col.adjoint();
                }
            }
            p
        })
        .collect();
    let e = AlgElement::from_blocks(&algebra, e_blocks)?;
    let achieved_sup = vals.iter().map(|v| truncated(v, &e, mode)).fold(0.0, f64::max);
    Ok(Truncation { e, tau_perp, achieved_sup, mode })
}
