//! Average engines, convergence diagnostics and experiment procedures.

mod experiments;
mod streams;
mod truncation;

use crate::error::{Error, Result};
use crate::tracealg::AlgElement;

pub use experiments::{
    approximation_stability_probe, return_time_experiment, sample_ww_family, uniform_ww_scan, uniform_ww_scan_family,
    ReturnTimeSample, StabilityPoint, StabilityReport, UniformScan,
};
pub use streams::{
    mangoldt_average_stream, moving_average_stream, moving_average_stream_with_threshold, prime_average_stream,
    subsequence_average_stream, weighted_average_stream, weighted_average_streams, AverageStream, StreamRun,
};
pub use truncation::{truncation_search, Truncation, TruncationMode};

/// Default trace budget as a fraction of `τ(1)`.
pub const DEFAULT_BUDGET_FRACTION: f64 = 0.05;
pub const DEFAULT_N_MAX: u64 = 1 << 17;
/// Absolute slack when testing Cauchy residuals for monotonicity.
pub const MONOTONE_SLACK: f64 = 1e-13;

/// Powers of two `1, 2, 4, …` not exceeding `n_max`.
pub fn dyadic_checkpoints(n_max: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut n = 1u64;
    while n <= n_max.max(1) {
        out.push(n);
        match n.checked_mul(2) {
            Some(m) => n = m,
            None => break,
        }
    }
    out
}

pub(crate) fn check_checkpoints(checkpoints: &[u64]) -> Result<()> {
    if checkpoints.is_empty() {
        return Err(Error::Precondition("checkpoint list is empty".into()));
    }
    if checkpoints[0] == 0 || checkpoints.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Precondition("checkpoints must be positive and strictly increasing".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LimitSource {
    LastIterate,
    Predicted,
}

impl LimitSource {
    pub fn label(&self) -> &'static str {
        match self {
            LimitSource::LastIterate => "last_iterate",
            LimitSource::Predicted => "predicted",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationSpec {
    pub budget: f64,
    pub mode: TruncationMode,
}

/// Residual curves measured after cutting with a projection `e`.
#[derive(Debug, Clone)]
pub struct TruncatedCurve {
    pub e: AlgElement,
    pub tau_perp: f64,
    pub budget: f64,
    pub mode: TruncationMode,
    /// `‖e(M_n − L)e‖_∞` or `‖(M_n − L)e‖_∞`.
    pub residual_inf: Vec<f64>,
    /// Truncated Cauchy residuals against the previous checkpoint.
    pub cauchy_inf: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ConvergenceDiagnostics {
    pub checkpoints: Vec<u64>,
    /// `‖M_{n_i} − M_{n_{i−1}}‖₂`, the first entry against `M_1`.
    pub residual_cauchy_2: Vec<f64>,
    pub residual_cauchy_inf: Vec<f64>,
    pub estimated_limit: AlgElement,
    pub limit_source: LimitSource,
    pub residual_to_limit_2: Vec<f64>,
    /// The `e = 1` curve `‖M_n − L‖_∞`.
    pub residual_to_limit_inf: Vec<f64>,
    pub truncation: Option<TruncatedCurve>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Decayed,
    Plateaued,
    Diverged,
}

impl Verdict {
    pub fn label(&self) -> &'static str {
        match self {
            Verdict::Decayed => "decayed",
            Verdict::Plateaued => "plateaued",
            Verdict::Diverged => "diverged",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerdictThresholds {
    /// Final residual at or below which a run counts as decayed.
    pub decay: f64,
    /// Number of trailing Cauchy residuals tested for monotonicity.
    pub trailing: usize,
    pub monotone_slack: f64,
}

impl Default for VerdictThresholds {
    fn default() -> Self {
        Self { decay: 1e-2, trailing: 3, monotone_slack: MONOTONE_SLACK }
    }
}

impl ConvergenceDiagnostics {
    /// Residual the verdict is based on: the truncated residual to a predicted
    /// limit, or the truncated Cauchy residual when the limit is the last
    /// iterate (whose own residual is zero by construction).
    pub fn final_residual(&self) -> f64 {
        let last = |v: &[f64]| v.last().copied().unwrap_or(0.0);
        match (&self.truncation, self.limit_source) {
            (Some(t), LimitSource::Predicted) => last(&t.residual_inf),
            (Some(t), LimitSource::LastIterate) => last(&t.cauchy_inf),
            (None, LimitSource::Predicted) => last(&self.residual_to_limit_inf),
            (None, LimitSource::LastIterate) => last(&self.residual_cauchy_inf),
        }
    }

    pub fn verdict(&self, th: &VerdictThresholds) -> Verdict {
        let all = self
            .residual_cauchy_2
            .iter()
            .chain(&self.residual_cauchy_inf)
            .chain(&self.residual_to_limit_2)
            .chain(&self.residual_to_limit_inf);
        if all.into_iter().any(|v| !v.is_finite()) || !self.final_residual().is_finite() {
            return Verdict::Diverged;
        }
        let c = &self.residual_cauchy_2;
        let tail = &c[c.len().saturating_sub(th.trailing)..];
        let nonincreasing = tail.windows(2).all(|w| w[1] <= w[0] + th.monotone_slack);
        let increasing = tail.len() >= th.trailing && tail.windows(2).all(|w| w[1] > w[0] + th.monotone_slack);
        if self.final_residual() <= th.decay && nonincreasing {
            Verdict::Decayed
        } else if increasing {
            Verdict::Diverged
        } else {
            Verdict::Plateaued
        }
    }
}

/// Builds diagnostics for a finished run. Without a supplied limit the last
/// checkpoint value is used.
pub fn diagnose(run: &StreamRun, limit: Option<&AlgElement>, truncation: Option<TruncationSpec>) -> Result<ConvergenceDiagnostics> {
    let last = run.values.last().ok_or_else(|| Error::Precondition("run has no checkpoints".into()))?;
    let (estimated_limit, limit_source) = match limit {
        Some(l) => {
            if !l.same_algebra(last) {
                return Err(Error::AlgebraMismatch);
            }
            (l.clone(), LimitSource::Predicted)
        }
        None => (last.clone(), LimitSource::LastIterate),
    };
    let mut diffs = Vec::with_capacity(run.values.len());
    let mut prev = &run.first;
    for v in &run.values {
        diffs.push(v - prev);
        prev = v;
    }
    let residuals: Vec<AlgElement> = run.values.iter().map(|v| v - &estimated_limit).collect();
    let truncation = match truncation {
        Some(spec) => {
            let t = truncation_search(&residuals, spec.budget, spec.mode)?;
            Some(TruncatedCurve {
                residual_inf: residuals.iter().map(|r| t.truncated_norm(r)).collect(),
                cauchy_inf: diffs.iter().map(|d| t.truncated_norm(d)).collect(),
                tau_perp: t.tau_perp,
                budget: spec.budget,
                mode: spec.mode,
                e: t.e,
            })
        }
        None => None,
    };
    Ok(ConvergenceDiagnostics {
        checkpoints: run.checkpoints.clone(),
        residual_cauchy_2: diffs.iter().map(|d| d.norm2()).collect(),
        residual_cauchy_inf: diffs.iter().map(|d| d.norm_inf()).collect(),
        residual_to_limit_2: residuals.iter().map(|r| r.norm2()).collect(),
        residual_to_limit_inf: residuals.iter().map(|r| r.norm_inf()).collect(),
        estimated_limit,
        limit_source,
        truncation,
    })
}
