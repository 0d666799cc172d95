//! Executes the experiments of an assembled scenario.

use ncwwlab_core::harness::{
    approximation_stability_probe, diagnose, mangoldt_average_stream, moving_average_stream, prime_average_stream,
    return_time_experiment, uniform_ww_scan, weighted_average_streams, ConvergenceDiagnostics, StreamRun,
    TruncationMode, TruncationSpec, VerdictThresholds,
};
use ncwwlab_core::spectral::{flight_decay_bound, jdlg_split, spectral_weighted_limit, DEFAULT_UNIMODULAR_TOL};
use ncwwlab_core::superop::validate_ds;
use ncwwlab_core::weights::{sieve, MovingWindow};
use ncwwlab_core::{AlgElement, WeightSequence};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::assemble::{sub_seed, Setup, PURPOSE_EXPERIMENT};
use crate::error::CliError;
use crate::scenario::{ExperimentKind, ExperimentSpec, LimitSpec, TruncationSide, WindowSpec};

/// Horizon for Hartman coefficients behind predicted limits.
pub const HARTMAN_HORIZON: usize = 100_000;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Row {
    pub experiment_id: String,
    pub weight_id: String,
    pub n: u64,
    pub residual_cauchy_2: Option<f64>,
    pub residual_cauchy_inf: Option<f64>,
    pub residual_to_limit_2: Option<f64>,
    pub residual_to_limit_inf: Option<f64>,
    pub trunc_tau_perp: Option<f64>,
    pub trunc_residual_inf: Option<f64>,
    /// Coefficient of `M_n` along the initial element.
    pub value: Option<(f64, f64)>,
    pub reference_bound: Option<f64>,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct VerdictEntry {
    pub weight_id: String,
    pub verdict: String,
    pub final_residual: f64,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub id: String,
    pub kind: &'static str,
    pub rows: Vec<Row>,
    pub verdicts: Vec<VerdictEntry>,
    pub details: Value,
}

fn mode(side: TruncationSide) -> TruncationMode {
    match side {
        TruncationSide::Bilateral => TruncationMode::Bilateral,
        TruncationSide::Right => TruncationMode::Right,
    }
}

fn coefficient(v: &AlgElement, x: &AlgElement) -> Option<(f64, f64)> {
    let nx = x.norm2();
    if nx == 0.0 {
        return None;
    }
    let z = v.hs_inner(x).ok()? / (nx * nx);
    Some((z.re, z.im))
}

fn stream_rows(exp: &str, weight: &str, x: &AlgElement, run: &StreamRun, d: &ConvergenceDiagnostics) -> Vec<Row> {
    (0..run.checkpoints.len())
        .map(|i| Row {
            experiment_id: exp.to_string(),
            weight_id: weight.to_string(),
            n: run.checkpoints[i],
            residual_cauchy_2: Some(d.residual_cauchy_2[i]),
            residual_cauchy_inf: Some(d.residual_cauchy_inf[i]),
            residual_to_limit_2: Some(d.residual_to_limit_2[i]),
            residual_to_limit_inf: Some(d.residual_to_limit_inf[i]),
            trunc_tau_perp: d.truncation.as_ref().map(|t| t.tau_perp),
            trunc_residual_inf: d.truncation.as_ref().map(|t| t.residual_inf[i]),
            value: coefficient(&run.values[i], x),
            reference_bound: None,
        })
        .collect()
}

fn verdict_entry(weight: &str, d: &ConvergenceDiagnostics) -> VerdictEntry {
    VerdictEntry {
        weight_id: weight.to_string(),
        verdict: d.verdict(&VerdictThresholds::default()).label().to_string(),
        final_residual: d.final_residual(),
    }
}

/// Verdict for a bare residual curve, with the same thresholds as streams.
fn curve_verdict(weight: &str, curve: &[f64]) -> VerdictEntry {
    let th = VerdictThresholds::default();
    let last = curve.last().copied().unwrap_or(0.0);
    let tail = &curve[curve.len().saturating_sub(th.trailing)..];
    let verdict = if curve.iter().any(|v| !v.is_finite()) {
        "diverged"
    } else if last <= th.decay && tail.windows(2).all(|w| w[1] <= w[0] + th.monotone_slack) {
        "decayed"
    } else if tail.len() >= th.trailing && tail.windows(2).all(|w| w[1] > w[0] + th.monotone_slack) {
        "diverged"
    } else {
        "plateaued"
    };
    VerdictEntry { weight_id: weight.to_string(), verdict: verdict.into(), final_residual: last }
}

fn selected<'a>(setup: &'a Setup, ids: &[String]) -> Vec<&'a (String, WeightSequence)> {
    if ids.is_empty() {
        setup.weights.iter().collect()
    } else {
        ids.iter().filter_map(|id| setup.weights.iter().find(|(w, _)| w == id)).collect()
    }
}

fn window(spec: &WindowSpec) -> MovingWindow {
    match *spec {
        WindowSpec::Cesaro => MovingWindow::cesaro(),
        WindowSpec::PowerLaw { k_coef, k_exp, k_offset, m_coef, m_exp, m_offset } => {
            MovingWindow::power_law(k_coef, k_exp, k_offset, m_coef, m_exp, m_offset)
        }
    }
}

fn single_stream(
    exp: &ExperimentSpec,
    setup: &Setup,
    weight: &str,
    run: StreamRun,
    side: TruncationSide,
) -> ncwwlab_core::Result<ExperimentOutput> {
    let d = diagnose(&run, None, Some(TruncationSpec { budget: setup.budget, mode: mode(side) }))?;
    Ok(ExperimentOutput {
        id: exp.id.clone(),
        kind: exp.kind.label(),
        rows: stream_rows(&exp.id, weight, &setup.x, &run, &d),
        verdicts: vec![verdict_entry(weight, &d)],
        details: json!({ "applications": run.applications, "truncation_mode": mode(side).label() }),
    })
}

fn run_experiment(exp: &ExperimentSpec, index: usize, setup: &Setup) -> ncwwlab_core::Result<ExperimentOutput> {
    let op = &setup.operator;
    let x = &setup.x;
    let cps = &setup.checkpoints;
    let seed_of = |explicit: Option<u64>| explicit.unwrap_or_else(|| sub_seed(setup.seed, PURPOSE_EXPERIMENT, index as u64));
    let mut out = ExperimentOutput { id: exp.id.clone(), kind: exp.kind.label(), rows: vec![], verdicts: vec![], details: Value::Null };
    match &exp.kind {
        ExperimentKind::Weighted { weights, limit, truncation } => {
            let chosen = selected(setup, weights);
            let alphas: Vec<WeightSequence> = chosen.iter().map(|(_, a)| a.clone()).collect();
            let runs = weighted_average_streams(op, x, &alphas, cps)?;
            let lambdas = match limit {
                LimitSpec::Predicted => Some(jdlg_split(op, DEFAULT_UNIMODULAR_TOL)?.unimodular_eigenvalues()),
                LimitSpec::LastIterate => None,
            };
            let spec = TruncationSpec { budget: setup.budget, mode: mode(*truncation) };
            for ((id, alpha), run) in chosen.iter().zip(&runs) {
                let predicted = match &lambdas {
                    Some(l) => Some(spectral_weighted_limit(op, alpha, x, l, HARTMAN_HORIZON)?),
                    None => None,
                };
                let d = diagnose(run, predicted.as_ref(), Some(spec))?;
                out.rows.extend(stream_rows(&exp.id, id, x, run, &d));
                out.verdicts.push(verdict_entry(id, &d));
            }
            out.details = json!({
                "applications": runs.first().map(|r| r.applications).unwrap_or(0),
                "shared_orbit_streams": runs.len(),
                "limit": match limit { LimitSpec::Predicted => "predicted", LimitSpec::LastIterate => "last_iterate" },
                "hartman_horizon": lambdas.as_ref().map(|_| HARTMAN_HORIZON),
                "truncation_mode": mode(*truncation).label(),
            });
        }
        ExperimentKind::Primes { truncation } => {
            return single_stream(exp, setup, "primes", prime_average_stream(op, x, cps)?, *truncation);
        }
        ExperimentKind::Mangoldt { truncation } => {
            return single_stream(exp, setup, "von_mangoldt", mangoldt_average_stream(op, x, cps)?, *truncation);
        }
        ExperimentKind::Moving { window: w, truncation } => {
            let mw = window(w);
            let mut o = single_stream(exp, setup, mw.label(), moving_average_stream(op, x, &mw, cps)?, *truncation)?;
            o.details["window"] = json!(mw.label());
            return Ok(o);
        }
        ExperimentKind::UniformWw { r, b, family_size, seed } => {
            let scan = uniform_ww_scan(op, x, *r, *b, *family_size, seed_of(*seed), cps, Some(setup.budget))?;
            for (i, &n) in scan.checkpoints.iter().enumerate() {
                out.rows.push(Row {
                    experiment_id: exp.id.clone(),
                    weight_id: "sup".into(),
                    n,
                    residual_to_limit_inf: Some(scan.sup_untruncated[i]),
                    trunc_tau_perp: Some(scan.tau_perp),
                    trunc_residual_inf: Some(scan.sup_truncated[i]),
                    reference_bound: Some(scan.family_bound),
                    ..Row::default()
                });
            }
            out.verdicts.push(curve_verdict("sup", &scan.sup_truncated));
            out.details = json!({
                "r": r, "b": b, "family_size": scan.family_size, "family_bound": scan.family_bound,
                "tau_perp": scan.tau_perp, "residual_reference": "zero",
            });
        }
        ExperimentKind::ReturnTime { theta, samples, interval, seed } => {
            let spec = TruncationSpec { budget: setup.budget, mode: TruncationMode::Bilateral };
            let res = return_time_experiment(*theta, *samples, *interval, op, x, cps, seed_of(*seed), Some(spec))?;
            let mut info = Vec::new();
            for (i, s) in res.iter().enumerate() {
                let w = format!("sample{i:03}/weighted");
                let v = format!("sample{i:03}/visits");
                out.rows.extend(stream_rows(&exp.id, &w, x, &s.weighted, &s.weighted_diagnostics));
                out.rows.extend(stream_rows(&exp.id, &v, x, &s.subsequence, &s.subsequence_diagnostics));
                out.verdicts.push(verdict_entry(&w, &s.weighted_diagnostics));
                out.verdicts.push(verdict_entry(&v, &s.subsequence_diagnostics));
                info.push(json!({ "omega": s.omega, "visit_frequency": s.visit_frequency }));
            }
            out.details = json!({ "theta": theta, "interval": [interval.0, interval.1], "samples": info });
        }
        ExperimentKind::Jdlg { unimodular_tol } => {
            let split = jdlg_split(op, unimodular_tol.unwrap_or(DEFAULT_UNIMODULAR_TOL))?;
            let f = split.flight_part(x);
            let nf = f.norm2();
            let mut y = f.clone();
            let mut k = 0u64;
            let mut curve = Vec::with_capacity(cps.len());
            for &n in cps {
                while k < n {
                    y = op.apply(&y)?;
                    k += 1;
                }
                let bound = flight_decay_bound(&split, n.min(u32::MAX as u64) as u32) * nf;
                curve.push(y.norm2());
                out.rows.push(Row {
                    experiment_id: exp.id.clone(),
                    weight_id: "flight".into(),
                    n,
                    residual_to_limit_2: Some(y.norm2()),
                    residual_to_limit_inf: Some(y.norm_inf()),
                    reference_bound: Some(bound),
                    ..Row::default()
                });
            }
            out.verdicts.push(curve_verdict("flight", &curve));
            let eig: Vec<Value> = split
                .unimodular_eigenpairs
                .iter()
                .map(|p| json!({ "re": p.lambda.re, "im": p.lambda.im, "multiplicity": p.basis.len() }))
                .collect();
            out.details = json!({
                "unimodular_tol": split.unimodular_tol,
                "unimodular_eigenvalues": eig,
                "reversible_dim": split.reversible_basis.len(),
                "flight_dim": split.flight_basis.len(),
                "flight_spectral_radius": split.flight_spectral_radius,
                "flight_decay_rate": split.flight_decay_rate,
                "flight_constant": split.flight_constant,
                "oblique": split.oblique,
                "projection_norm": split.projection_norm,
                "reversible_part_norm2": split.reversible_part(x).norm2(),
                "flight_part_norm2": nf,
            });
        }
        ExperimentKind::Validate { samples, tol } => {
            let rep = validate_ds(op, *samples, seed_of(None), *tol);
            let check = |c: &ncwwlab_core::superop::CheckResult| {
                json!({ "verdict": c.verdict.label(), "estimate": c.estimate, "tol": c.tol })
            };
            let fov: Vec<[f64; 2]> = rep.numerical_range.iter().map(|z| [z.re, z.im]).collect();
            out.details = json!({
                "samples": rep.samples,
                "tol": rep.tol,
                "ds_positive": rep.is_ds_positive(),
                "positivity": check(&rep.positivity),
                "l1_contraction": check(&rep.l1_contraction),
                "linf_contraction": check(&rep.linf_contraction),
                "lp_ratios": rep.lp_ratios.iter().map(|(p, r)| json!({ "p": if p.is_finite() { json!(p) } else { json!("inf") }, "ratio": r })).collect::<Vec<_>>(),
                "l2_restriction": {
                    "self_adjoint_residual": rep.l2_restriction.self_adjoint_residual,
                    "min_eigenvalue": rep.l2_restriction.min_eigenvalue,
                    "normal_residual": rep.l2_restriction.normal_residual,
                },
                "stoltz": { "delta": rep.stoltz.delta, "verdict": rep.stoltz.verdict, "tol": rep.stoltz.tol },
                "numerical_range": fov,
            });
        }
        ExperimentKind::StabilityProbe { sizes, weights, p, seed } => {
            let family: Vec<WeightSequence> = selected(setup, weights).into_iter().map(|(_, a)| a.clone()).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(seed_of(*seed));
            let y = AlgElement::random(&setup.algebra, &mut rng);
            let y = y.scale_real(1.0 / y.lp_norm(*p)?);
            let xs: Vec<AlgElement> = sizes.iter().map(|&s| x + &y.scale_real(s)).collect();
            let rep = approximation_stability_probe(op, x, &xs, &family, cps, *p, Some(setup.budget))?;
            let last = *cps.last().expect("validated nonempty");
            for (j, pt) in rep.points.iter().enumerate() {
                out.rows.push(Row {
                    experiment_id: exp.id.clone(),
                    weight_id: format!("x{j:03}"),
                    n: last,
                    trunc_tau_perp: Some(pt.tau_perp),
                    trunc_residual_inf: Some(pt.gap),
                    reference_bound: Some(rep.family_w1 * rep.algebra_constant * pt.distance),
                    ..Row::default()
                });
            }
            out.details = json!({
                "p": rep.p,
                "family_w1": rep.family_w1,
                "measured_constant": rep.measured_constant,
                "algebra_constant": rep.algebra_constant,
                "points": rep.points.iter().map(|pt| json!({
                    "distance": pt.distance, "gap": pt.gap, "constant": pt.constant, "tau_perp": pt.tau_perp,
                })).collect::<Vec<_>>(),
            });
        }
    }
    Ok(out)
}

/// Runs every experiment on `threads` workers; outputs keep scenario order.
pub fn run_all(experiments: &[ExperimentSpec], setup: &Setup, threads: usize) -> Result<Vec<ExperimentOutput>, CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| CliError::Validation(format!("thread pool: {e}")))?;
    let results: Vec<ncwwlab_core::Result<ExperimentOutput>> = pool.install(|| {
        experiments.par_iter().enumerate().map(|(i, e)| run_experiment(e, i, setup)).collect()
    });
    results
        .into_iter()
        .zip(experiments)
        .map(|(r, e)| r.map_err(|source| CliError::Runtime { experiment: e.id.clone(), source }))
        .collect()
}

/// Rough count of operator applications, for `describe`.
pub fn estimated_applications(kind: &ExperimentKind, setup: &Setup, n_weights: usize) -> (u64, String) {
    let n_max = *setup.checkpoints.last().unwrap_or(&1);
    match kind {
        ExperimentKind::Weighted { weights, .. } => {
            let k = if weights.is_empty() { n_weights } else { weights.len() };
            (n_max, format!("one orbit shared by {k} weight stream(s)"))
        }
        ExperimentKind::Primes { .. } => {
            (sieve::nth_prime(n_max as usize - 1), "orbit advanced through prime gaps".into())
        }
        ExperimentKind::Mangoldt { .. } => (n_max, "single weighted stream".into()),
        ExperimentKind::Moving { window: w, .. } => {
            let mw = window(w);
            let (k, m) = mw.window(n_max).unwrap_or((0, 0));
            (k + m, "upper end of the last window, with cached orbit snapshots".into())
        }
        ExperimentKind::UniformWw { family_size, .. } => {
            (n_max + 64, format!("one orbit shared by {family_size} sampled weights plus a 64-step prefix"))
        }
        ExperimentKind::ReturnTime { samples, interval, .. } => {
            let freq = (interval.1 - interval.0).max(1e-9);
            let per = n_max + (n_max as f64 / freq) as u64;
            (per * *samples as u64, format!("{samples} samples, weighted stream plus visit-time subsequence"))
        }
        ExperimentKind::Jdlg { .. } => (n_max, "flight orbit after the spectral split".into()),
        ExperimentKind::Validate { samples, .. } => ((3 * samples + 1) as u64, "sampled checks".into()),
        ExperimentKind::StabilityProbe { sizes, .. } => {
            (n_max * sizes.len() as u64, format!("{} perturbations, shared orbit per perturbation", sizes.len()))
        }
    }
}
