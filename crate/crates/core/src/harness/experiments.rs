use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::c;
use crate::superop::SuperOperator;
use crate::tracealg::AlgElement;
use crate::weights::{w_r_seminorm, SampleFn, SubsequenceRule, WeightSequence};

use super::streams::{subsequence_average_stream, weighted_average_stream, weighted_average_streams, StreamRun};
use super::{check_checkpoints, diagnose, truncation_search, ConvergenceDiagnostics, TruncationMode, TruncationSpec};

/// Orbit prefix length used to choose the projection for scans.
const ORBIT_PREFIX: usize = 64;

/// Sup over a weight family of truncated `‖e M_n^α(T)(x) e‖_∞`.
#[derive(Debug, Clone)]
pub struct UniformScan {
    pub checkpoints: Vec<u64>,
    pub sup_truncated: Vec<f64>,
    /// The same supremum with `e = 1`.
    pub sup_untruncated: Vec<f64>,
    pub e: AlgElement,
    pub tau_perp: f64,
    /// Largest measured `|α|_{W_r}` in the family.
    pub family_bound: f64,
    pub family_size: usize,
}

/// Random weights rescaled to measured `|α|_{W_r} = b` over `horizon`:
/// trigonometric polynomials with 1 to 3 random frequencies alternate with
/// random unimodular phase sequences.
pub fn sample_ww_family(r: f64, b: f64, size: usize, seed: u64, horizon: usize) -> Result<Vec<WeightSequence>> {
    if r.is_nan() || r <= 1.0 {
        return Err(Error::InvalidExponent(r));
    }
    if !(b > 0.0) || !b.is_finite() {
        return Err(Error::Precondition(format!("seminorm bound must be positive, got {b}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let horizon = horizon.max(10);
    (0..size)
        .map(|i| {
            let raw = if i % 2 == 0 {
                let terms: Vec<_> = (0..rng.random_range(1..=3))
                    .map(|_| {
                        let coeff = c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
                        let phase = std::f64::consts::TAU * rng.random::<f64>();
                        (coeff, c(phase.cos(), phase.sin()))
                    })
                    .collect();
                WeightSequence::trig_poly(&terms)?
            } else {
                WeightSequence::random_phase(rng.random())
            };
            let measured = w_r_seminorm(&raw, r, horizon, 0.1)?.sup_estimate;
            Ok(if measured > 0.0 { raw.scaled(b / measured) } else { raw })
        })
        .collect()
}

fn orbit_projection(op: &SuperOperator, x: &AlgElement, budget: Option<f64>) -> Result<(AlgElement, f64)> {
    match budget {
        None => Ok((AlgElement::identity(op.algebra()), 0.0)),
        Some(eps) => {
            let mut orbit = Vec::with_capacity(ORBIT_PREFIX);
            let mut y = x.clone();
            for _ in 0..ORBIT_PREFIX {
                let next = op.apply(&y)?;
                orbit.push(y);
                y = next;
            }
            let t = truncation_search(&orbit, eps, TruncationMode::Bilateral)?;
            Ok((t.e, t.tau_perp))
        }
    }
}

/// Runs a given weight family over one shared orbit. The residual is taken
/// against zero, so `x` should be a flight vector.
pub fn uniform_ww_scan_family(
    op: &SuperOperator,
    x: &AlgElement,
    family: &[WeightSequence],
    r: f64,
    checkpoints: &[u64],
    trace_budget: Option<f64>,
) -> Result<UniformScan> {
    check_checkpoints(checkpoints)?;
    let (e, tau_perp) = orbit_projection(op, x, trace_budget)?;
    let runs = weighted_average_streams(op, x, family, checkpoints)?;
    let horizon = (*checkpoints.last().expect("checked nonempty") as usize).max(10);
    let family_bound = family
        .iter()
        .map(|a| w_r_seminorm(a, r, horizon, 0.1).map(|s| s.sup_estimate))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    let mut sup_truncated = vec![0.0f64; checkpoints.len()];
    let mut sup_untruncated = vec![0.0f64; checkpoints.len()];
    for run in &runs {
        for (i, v) in run.values.iter().enumerate() {
            sup_truncated[i] = sup_truncated[i].max((&(&e * v) * &e).norm_inf());
            sup_untruncated[i] = sup_untruncated[i].max(v.norm_inf());
        }
    }
    Ok(UniformScan {
        checkpoints: checkpoints.to_vec(),
        sup_truncated,
        sup_untruncated,
        e,
        tau_perp,
        family_bound,
        family_size: family.len(),
    })
}

/// Samples `family_size` weights with `|α|_{W_r} ≤ b` and scans them.
#[allow(clippy::too_many_arguments)]
pub fn uniform_ww_scan(
    op: &SuperOperator,
    x: &AlgElement,
    r: f64,
    b: f64,
    family_size: usize,
    seed: u64,
    checkpoints: &[u64],
    trace_budget: Option<f64>,
) -> Result<UniformScan> {
    check_checkpoints(checkpoints)?;
    let horizon = *checkpoints.last().expect("checked nonempty") as usize;
    let family = sample_ww_family(r, b, family_size, seed, horizon)?;
    uniform_ww_scan_family(op, x, &family, r, checkpoints, trace_budget)
}

#[derive(Debug, Clone)]
pub struct ReturnTimeSample {
    pub omega: f64,
    /// Fraction of `k < n_max` with `(ω + kθ) mod 1 ∈ E`.
    pub visit_frequency: f64,
    pub weighted: StreamRun,
    pub weighted_diagnostics: ConvergenceDiagnostics,
    /// Averages along the visit times `n_0 < n_1 < …`.
    pub subsequence: StreamRun,
    pub subsequence_diagnostics: ConvergenceDiagnostics,
}

/// Return-time weights `α_k = 1_E((ω + kθ) mod 1)` for `samples` random
/// starting points `ω`, together with the visit-time subsequence averages.
#[allow(clippy::too_many_arguments)]
pub fn return_time_experiment(
    theta: f64,
    samples: usize,
    interval: (f64, f64),
    op: &SuperOperator,
    x: &AlgElement,
    checkpoints: &[u64],
    seed: u64,
    truncation: Option<TruncationSpec>,
) -> Result<Vec<ReturnTimeSample>> {
    let (a, b) = interval;
    if !(0.0 <= a && a < b && b <= 1.0) {
        return Err(Error::Precondition(format!("return set [{a}, {b}) must be a nonempty subinterval of [0, 1)")));
    }
    if !theta.is_finite() {
        return Err(Error::Precondition("rotation angle must be finite".into()));
    }
    check_checkpoints(checkpoints)?;
    let n_max = *checkpoints.last().expect("checked nonempty");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..samples)
        .map(|_| {
            let omega: f64 = rng.random();
            let alpha = WeightSequence::ergodic_sample(theta, omega, SampleFn::Indicator { a, b }, f64::INFINITY);
            let weighted = weighted_average_stream(op, x, &alpha, checkpoints)?;
            let mut visits = Vec::with_capacity(n_max as usize);
            let mut hits_below = 0u64;
            let mut k = 0u64;
            while (visits.len() as u64) < n_max || k < n_max {
                if alpha.value(k).re != 0.0 {
                    if (visits.len() as u64) < n_max {
                        visits.push(k);
                    }
                    if k < n_max {
                        hits_below += 1;
                    }
                }
                k += 1;
            }
            let rule = SubsequenceRule::explicit(visits)?;
            let subsequence = subsequence_average_stream(op, x, rule, checkpoints)?;
            Ok(ReturnTimeSample {
                omega,
                visit_frequency: hits_below as f64 / n_max as f64,
                weighted_diagnostics: diagnose(&weighted, None, truncation)?,
                subsequence_diagnostics: diagnose(&subsequence, None, truncation)?,
                weighted,
                subsequence,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityPoint {
    /// `‖x_j − x‖_p`.
    pub distance: f64,
    /// `sup_{α, n} ‖e M_n^α(T)(x_j − x) e‖_∞`.
    pub gap: f64,
    /// `gap / (|α|_{W_1} · distance)`; zero when the distance is zero.
    pub constant: f64,
    pub tau_perp: f64,
}

#[derive(Debug, Clone)]
pub struct StabilityReport {
    pub p: f64,
    /// Largest measured `|α|_{W_1}` over the family.
    pub family_w1: f64,
    pub points: Vec<StabilityPoint>,
    /// Largest constant over points with nonzero distance.
    pub measured_constant: f64,
    /// `‖y‖_∞ ≤ w_min^{−1/p} ‖y‖_p`, the a-priori constant of the algebra.
    pub algebra_constant: f64,
}

/// Empirical maximal-inequality probe: how the worst truncated average over
/// a weight family responds to perturbing the initial element. By linearity
/// each gap is computed from the averages of `x_j − x`.
pub fn approximation_stability_probe(
    op: &SuperOperator,
    x: &AlgElement,
    xs: &[AlgElement],
    family: &[WeightSequence],
    checkpoints: &[u64],
    p: f64,
    trace_budget: Option<f64>,
) -> Result<StabilityReport> {
    if family.is_empty() {
        return Err(Error::Precondition("weight family is empty".into()));
    }
    check_checkpoints(checkpoints)?;
    let horizon = (*checkpoints.last().expect("checked nonempty") as usize).max(10);
    let family_w1 = family
        .iter()
        .map(|a| w_r_seminorm(a, 1.0, horizon, 0.1).map(|s| s.sup_estimate))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    let mut points = Vec::with_capacity(xs.len());
    for xj in xs {
        let d = xj.checked_sub(x)?;
        let distance = d.lp_norm(p)?;
        let runs = weighted_average_streams(op, &d, family, checkpoints)?;
        let vals: Vec<AlgElement> = runs.into_iter().flat_map(|r| r.values).collect();
        let (gap, tau_perp) = match trace_budget {
            Some(eps) => {
                let t = truncation_search(&vals, eps, TruncationMode::Bilateral)?;
                (t.achieved_sup, t.tau_perp)
            }
            None => (vals.iter().map(|v| v.norm_inf()).fold(0.0, f64::max), 0.0),
        };
        let constant = if distance > 0.0 && family_w1 > 0.0 { gap / (family_w1 * distance) } else { 0.0 };
        points.push(StabilityPoint { distance, gap, constant, tau_perp });
    }
    let measured_constant = points.iter().filter(|pt| pt.distance > 0.0).map(|pt| pt.constant).fold(0.0, f64::max);
    let algebra_constant = if p.is_infinite() { 1.0 } else { x.algebra().min_weight().powf(-1.0 / p) };
    Ok(StabilityReport { p, family_w1, points, measured_constant, algebra_constant })
}
