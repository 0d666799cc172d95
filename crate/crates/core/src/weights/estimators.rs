use crate::error::{Error, Result};
use crate::linalg::{C64, ZERO};

use super::{check_unimodular, RotationCursor, WeightClass, WeightSequence};

/// Finite-horizon proxies for `‖α‖_{W_r}` (limsup) and `|α|_{W_r}` (sup).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeminormEstimate {
    pub limsup_estimate: f64,
    pub sup_estimate: f64,
    /// Tail fraction used for the limsup proxy.
    pub window: f64,
    pub horizon: usize,
}

/// `W_r` seminorm estimates over `n ≤ horizon`.
///
/// `sup_estimate = max_{1≤n≤N} ((1/n) Σ_{k<n} |α_k|^r)^{1/r}` and the limsup
/// proxy restricts the same max to `n ∈ [⌈(1−window)N⌉, N]`. For `r = ∞`
/// both are `max_{k<N} |α_k|`.
pub fn w_r_seminorm(alpha: &WeightSequence, r: f64, horizon: usize, window: f64) -> Result<SeminormEstimate> {
    if r.is_nan() || r < 1.0 {
        return Err(Error::InvalidExponent(r));
    }
    if horizon < 10 {
        return Err(Error::InvalidHorizon(horizon));
    }
    if !(window > 0.0 && window <= 1.0) {
        return Err(Error::InvalidWindow(window));
    }
    if r.is_infinite() {
        let m = alpha.iter().take(horizon).map(|z| z.norm()).fold(0.0, f64::max);
        return Ok(SeminormEstimate { limsup_estimate: m, sup_estimate: m, window, horizon });
    }
    let tail_start = (((1.0 - window) * horizon as f64).ceil() as usize).max(1);
    let mut sum = 0.0;
    let mut sup_mean: f64 = 0.0;
    let mut tail_mean: f64 = 0.0;
    for (k, z) in alpha.iter().take(horizon).enumerate() {
        let a = z.norm();
        sum += if r == 1.0 { a } else { a.powf(r) };
        let n = k + 1;
        let mean = sum / n as f64;
        sup_mean = sup_mean.max(mean);
        if n >= tail_start {
            tail_mean = tail_mean.max(mean);
        }
    }
    let root = |m: f64| if r == 1.0 { m } else { m.powf(r.recip()) };
    Ok(SeminormEstimate { limsup_estimate: root(tail_mean), sup_estimate: root(sup_mean), window, horizon })
}

/// Finite-horizon Hartman coefficient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HartmanEstimate {
    /// `(1/N) Σ_{k<N} α_k · conj(λ)^k`.
    pub estimate: C64,
    /// Largest deviation of the running average from `estimate` over the
    /// last 10% of the horizon.
    pub tail_drift: f64,
}

/// Estimates `c_α(λ) = lim (1/n) Σ_{k<n} α_k conj(λ)^k` at horizon `N`.
pub fn hartman_coefficient(alpha: &WeightSequence, lambda: C64, horizon: usize) -> Result<HartmanEstimate> {
    check_unimodular(lambda)?;
    if horizon < 10 {
        return Err(Error::InvalidHorizon(horizon));
    }
    let tail_start = ((0.9 * horizon as f64).ceil() as usize).max(1);
    let mut rot = RotationCursor::at(lambda.conj(), 0);
    let mut sum = ZERO;
    let mut tail: Vec<C64> = Vec::with_capacity(horizon - tail_start + 1);
    for (k, a) in alpha.iter().take(horizon).enumerate() {
        sum += a * rot.current;
        rot.advance();
        let n = k + 1;
        if n >= tail_start {
            tail.push(sum / n as f64);
        }
    }
    let estimate = sum / horizon as f64;
    let tail_drift = tail.iter().map(|v| (v - estimate).norm()).fold(0.0, f64::max);
    Ok(HartmanEstimate { estimate, tail_drift })
}

/// `W_r` limsup proxy (10% tail window) of `α − poly`.
pub fn besicovich_distance(alpha: &WeightSequence, poly: &WeightSequence, r: f64, horizon: usize) -> Result<f64> {
    if poly.class() != WeightClass::TrigPoly || !poly.is_trig_poly() {
        return Err(Error::ClassMismatch { expected: WeightClass::TrigPoly.to_string(), found: poly.class().to_string() });
    }
    let diff = alpha.difference(poly);
    Ok(w_r_seminorm(&diff, r, horizon, 0.1)?.limsup_estimate)
}
