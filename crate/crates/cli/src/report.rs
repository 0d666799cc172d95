//! CSV rows and JSON summary.

use std::io::Write;

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use ncwwlab_core::harness::{VerdictThresholds, DEFAULT_BUDGET_FRACTION};
use ncwwlab_core::spectral::{DEFAULT_UNIMODULAR_TOL, POWER_BOUND_SLACK};
use ncwwlab_core::superop::Structure;

use crate::assemble::{Setup, REQUIRE_DS_SAMPLES, REQUIRE_DS_TOL};
use crate::error::CliError;
use crate::run::{ExperimentOutput, Row, VerdictEntry, HARTMAN_HORIZON};

pub const CSV_SCHEMA: &str = "ncwwlab-rows/2";
pub const SUMMARY_SCHEMA: &str = "ncwwlab-summary/2";

pub const COLUMNS: [&str; 13] = [
    "experiment_id",
    "weight_id",
    "n",
    "residual_cauchy_2",
    "residual_cauchy_inf",
    "residual_to_limit_2",
    "residual_to_limit_inf",
    "trunc_tau_perp",
    "trunc_residual_inf",
    "value_re",
    "value_im",
    "reference_bound",
    "schema",
];

fn num(v: Option<f64>) -> String {
    v.map(|x| format!("{x:e}")).unwrap_or_default()
}

pub fn sorted_rows(outputs: &[ExperimentOutput]) -> Vec<&Row> {
    let mut rows: Vec<&Row> = outputs.iter().flat_map(|o| &o.rows).collect();
    rows.sort_by(|a, b| {
        a.experiment_id.cmp(&b.experiment_id).then_with(|| a.weight_id.cmp(&b.weight_id)).then(a.n.cmp(&b.n))
    });
    rows
}

pub fn csv_bytes(outputs: &[ExperimentOutput]) -> Result<Vec<u8>, CliError> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    let io = |e: csv::Error| CliError::Io(std::io::Error::other(e));
    w.write_record(COLUMNS).map_err(io)?;
    for r in sorted_rows(outputs) {
        let (re, im) = match r.value {
            Some((re, im)) => (Some(re), Some(im)),
            None => (None, None),
        };
        w.write_record([
            r.experiment_id.clone(),
            r.weight_id.clone(),
            r.n.to_string(),
            num(r.residual_cauchy_2),
            num(r.residual_cauchy_inf),
            num(r.residual_to_limit_2),
            num(r.residual_to_limit_inf),
            num(r.trunc_tau_perp),
            num(r.trunc_residual_inf),
            num(re),
            num(im),
            num(r.reference_bound),
            CSV_SCHEMA.to_string(),
        ])
        .map_err(io)?;
    }
    w.into_inner().map_err(|e| CliError::Io(std::io::Error::other(e.to_string())))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Serialize)]
struct Tolerances {
    unimodular_tol: f64,
    power_bound_slack: f64,
    structure_tol: f64,
    require_ds_tol: f64,
    require_ds_samples: usize,
    hartman_horizon: usize,
    limsup_window: f64,
}

#[derive(Debug, Serialize)]
struct Thresholds {
    decay: f64,
    trailing_cauchy: usize,
    monotone_slack: f64,
    rule: &'static str,
}

#[derive(Debug, Serialize)]
struct OperatorInfo {
    structure: &'static str,
    proof_tags: Vec<&'static str>,
    hs_dim: usize,
    blocks: Vec<(usize, f64)>,
    total_trace: f64,
}

#[derive(Debug, Serialize)]
struct ExperimentSummary<'a> {
    id: &'a str,
    kind: &'static str,
    verdicts: &'a [VerdictEntry],
    details: &'a Value,
}

#[derive(Debug, Serialize)]
struct Summary<'a> {
    schema: &'static str,
    csv_schema: &'static str,
    columns: &'static [&'static str],
    version: &'static str,
    scenario: &'a str,
    scenario_sha256: String,
    seed: u64,
    n_max: u64,
    checkpoints: &'a [u64],
    trace_budget: f64,
    default_budget_fraction: f64,
    tolerances: Tolerances,
    thresholds: Thresholds,
    disclosures: Vec<String>,
    operator: OperatorInfo,
    weights: Vec<(String, String)>,
    experiments: Vec<ExperimentSummary<'a>>,
}

fn disclosures(setup: &Setup) -> Vec<String> {
    let mut d = vec![
        "finite-dimensional model: the algebra is a finite direct sum of matrix blocks, where almost uniform, \
         bilateral almost uniform and norm convergence coincide; truncated curves are observable data, not proofs"
            .to_string(),
        "limsup-type seminorms are estimated by the maximum of running means over the last 10% of the horizon".to_string(),
        "projections e come from a heuristic spectral cut of the envelope sum 2^-(n+1)|v_n|; both tau(1-e) and the \
         achieved supremum are reported and optimality is not claimed"
            .to_string(),
        "the flight subspace is the spectral subspace of HS eigenvalues with modulus below 1".to_string(),
        "verdicts use the truncated residual to a predicted limit, or the truncated Cauchy residual when the limit \
         is the last iterate"
            .to_string(),
        "separability hypotheses are vacuous in finite dimension; 1-Besicovich weights are treated like other W1 weights"
            .to_string(),
    ];
    if matches!(setup.operator.structure(), Structure::Multiplier(_)) {
        d.push(
            "noncommutative torus: rational clock/shift model with the discrete Laplacian 4sin^2(pi m/q)+4sin^2(pi n/q) \
             in place of the continuous one"
                .to_string(),
        );
    }
    d
}

pub fn summary_json(
    scenario_name: &str,
    scenario_bytes: &[u8],
    n_max: u64,
    setup: &Setup,
    outputs: &[ExperimentOutput],
) -> Result<Vec<u8>, CliError> {
    let th = VerdictThresholds::default();
    let alg = &setup.algebra;
    let summary = Summary {
        schema: SUMMARY_SCHEMA,
        csv_schema: CSV_SCHEMA,
        columns: &COLUMNS,
        version: env!("CARGO_PKG_VERSION"),
        scenario: scenario_name,
        scenario_sha256: sha256_hex(scenario_bytes),
        seed: setup.seed,
        n_max,
        checkpoints: &setup.checkpoints,
        trace_budget: setup.budget,
        default_budget_fraction: DEFAULT_BUDGET_FRACTION,
        tolerances: Tolerances {
            unimodular_tol: DEFAULT_UNIMODULAR_TOL,
            power_bound_slack: POWER_BOUND_SLACK,
            structure_tol: ncwwlab_core::tracealg::STRUCTURE_TOL,
            require_ds_tol: REQUIRE_DS_TOL,
            require_ds_samples: REQUIRE_DS_SAMPLES,
            hartman_horizon: HARTMAN_HORIZON,
            limsup_window: 0.1,
        },
        thresholds: Thresholds {
            decay: th.decay,
            trailing_cauchy: th.trailing,
            monotone_slack: th.monotone_slack,
            rule: "decayed iff final residual <= decay and the trailing Cauchy residuals are nonincreasing; \
                   diverged iff non-finite or strictly increasing; plateaued otherwise",
        },
        disclosures: disclosures(setup),
        operator: OperatorInfo {
            structure: setup.operator.structure().tag(),
            proof_tags: setup.operator.proof().labels(),
            hs_dim: alg.hs_dim(),
            blocks: alg.blocks().iter().map(|b| (b.dim, b.weight)).collect(),
            total_trace: alg.total_trace(),
        },
        weights: setup.weights.iter().map(|(id, w)| (id.clone(), w.class().to_string())).collect(),
        experiments: outputs
            .iter()
            .map(|o| ExperimentSummary { id: &o.id, kind: o.kind, verdicts: &o.verdicts, details: &o.details })
            .collect(),
    };
    let mut bytes = serde_json::to_vec_pretty(&summary).map_err(|e| CliError::Io(std::io::Error::other(e)))?;
    bytes.write_all(b"\n")?;
    Ok(bytes)
}
