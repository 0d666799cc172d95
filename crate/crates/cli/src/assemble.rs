//! Turns a parsed scenario into algebra, operator, weights and initial element.

use std::collections::BTreeSet;
use std::sync::Arc;

use ncwwlab_core::harness::{dyadic_checkpoints, DEFAULT_BUDGET_FRACTION};
use ncwwlab_core::linalg::{self, CMat, C64};
use ncwwlab_core::spectral::{jdlg_split, DEFAULT_UNIMODULAR_TOL};
use ncwwlab_core::superop::{
    make_conjugation, make_convolution, make_expectation_product, make_identity, make_matrix, make_nc_torus_heat,
    validate_ds, Expectation, Keep,
};
use ncwwlab_core::weights::SampleFn;
use ncwwlab_core::{AlgElement, SuperOperator, TracialAlgebra, WeightSequence};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, CliError};
use crate::scenario::{
    CheckpointPolicy, ElementSpec, ExpectationSpec, ExperimentKind, KeepSpec, OperatorSpec, Scenario, WeightKind,
};

/// Samples used by the `require_ds` gate.
pub const REQUIRE_DS_SAMPLES: usize = 32;
pub const REQUIRE_DS_TOL: f64 = 1e-10;

/// Everything an experiment needs, shared read-only across workers.
pub struct Setup {
    pub algebra: Arc<TracialAlgebra>,
    pub operator: SuperOperator,
    pub weights: Vec<(String, WeightSequence)>,
    pub x: AlgElement,
    pub checkpoints: Vec<u64>,
    pub budget: f64,
    pub seed: u64,
}

/// Stream of sub-seeds: the `k`-th draw for a given purpose.
pub fn sub_seed(base: u64, purpose: u64, k: u64) -> u64 {
    let mut z = base ^ purpose.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ k.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub const PURPOSE_ELEMENT: u64 = 1;
pub const PURPOSE_OPERATOR: u64 = 2;
pub const PURPOSE_WEIGHT: u64 = 3;
pub const PURPOSE_EXPERIMENT: u64 = 4;

fn unit_turns(turns: f64) -> C64 {
    let a = std::f64::consts::TAU * turns;
    ncwwlab_core::c(a.cos(), a.sin())
}

pub fn resolve_algebra(s: &Scenario) -> Result<Arc<TracialAlgebra>, CliError> {
    match (&s.algebra, &s.operator) {
        (Some(a), _) => TracialAlgebra::new(&a.blocks).map_err(invalid),
        (None, OperatorSpec::NcTorusHeat { q, .. }) => TracialAlgebra::matrix(*q, 1.0 / *q as f64).map_err(invalid),
        (None, _) => Err(CliError::Validation("field 'algebra' is required for this operator".into())),
    }
}

pub fn checkpoints(s: &Scenario) -> Result<Vec<u64>, CliError> {
    let cps = match &s.checkpoints {
        CheckpointPolicy::Dyadic => dyadic_checkpoints(s.n_max),
        CheckpointPolicy::Explicit(v) => v.clone(),
    };
    if cps.is_empty() || cps[0] == 0 || cps.windows(2).any(|w| w[0] >= w[1]) {
        return Err(CliError::Validation("checkpoints must be positive and strictly increasing".into()));
    }
    if cps.last().copied().unwrap_or(0) > s.n_max {
        return Err(CliError::Validation(format!("checkpoint beyond n_max = {}", s.n_max)));
    }
    Ok(cps)
}

struct Ctx<'a> {
    algebra: &'a Arc<TracialAlgebra>,
    seed: Option<u64>,
}

impl Ctx<'_> {
    fn seed(&self, explicit: Option<u64>, purpose: u64, k: u64) -> Result<u64, CliError> {
        match (explicit, self.seed) {
            (Some(s), _) => Ok(s),
            (None, Some(base)) => Ok(sub_seed(base, purpose, k)),
            (None, None) => Err(CliError::Validation("a random spec is used but the scenario has no 'seed'".into())),
        }
    }

    fn element(&self, spec: &ElementSpec, op: Option<&SuperOperator>, purpose: u64) -> Result<AlgElement, CliError> {
        let alg = self.algebra;
        Ok(match spec {
            ElementSpec::Random { seed, normalize } => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed(*seed, purpose, 0)?);
                let x = AlgElement::random(alg, &mut rng);
                if *normalize {
                    x.scale_real(1.0 / x.norm_inf())
                } else {
                    x
                }
            }
            ElementSpec::Explicit { blocks } => {
                let mats = blocks
                    .iter()
                    .map(|rows| {
                        let n = rows.len();
                        if rows.iter().any(|r| r.len() != n) {
                            return Err(CliError::Validation("explicit block is not square".into()));
                        }
                        Ok(CMat::from_fn(n, n, |i, j| rows[i][j].value()))
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                AlgElement::from_blocks(alg, mats).map_err(invalid)?
            }
            ElementSpec::Diagonal { blocks } => {
                let diags: Vec<Vec<C64>> = blocks.iter().map(|b| b.iter().map(|z| z.value()).collect()).collect();
                AlgElement::diagonal(alg, &diags).map_err(invalid)?
            }
            ElementSpec::Identity => AlgElement::identity(alg),
            ElementSpec::Eigenvector { index } => {
                let op = op.ok_or_else(|| CliError::Validation("eigenvector spec needs an operator".into()))?;
                eigenvector(op, *index)?
            }
            ElementSpec::FlightComponent { of } => {
                let op = op.ok_or_else(|| CliError::Validation("flight component needs an operator".into()))?;
                let base = self.element(of, Some(op), purpose)?;
                jdlg_split(op, DEFAULT_UNIMODULAR_TOL).map_err(invalid)?.flight_part(&base)
            }
        })
    }

    fn operator(&self, spec: &OperatorSpec) -> Result<SuperOperator, CliError> {
        let alg = self.algebra;
        match spec {
            OperatorSpec::Identity => Ok(make_identity(alg)),
            OperatorSpec::Conjugation { u } => make_conjugation(&self.element(u, None, PURPOSE_OPERATOR)?).map_err(invalid),
            OperatorSpec::Convolution { automorphism, measure } => {
                make_convolution(&self.operator(automorphism)?, measure).map_err(invalid)
            }
            OperatorSpec::ExpectationProduct { factors } => {
                let fs: Vec<Expectation> = factors.iter().map(expectation).collect();
                make_expectation_product(alg, &fs).map_err(invalid)
            }
            OperatorSpec::NcTorusHeat { q, p, t } => {
                let op = make_nc_torus_heat(*q, *p, *t).map_err(invalid)?;
                if op.algebra() != alg {
                    return Err(CliError::Validation(format!("nc_torus_heat needs the algebra [({q}, {})]", 1.0 / *q as f64)));
                }
                // rebind to the scenario's algebra instance
                ncwwlab_core::superop::make_nc_torus_heat_on(alg, *p, *t).map_err(invalid)
            }
            OperatorSpec::Matrix { rows, scaled_identity } => {
                let n = alg.hs_dim();
                let hs = match (rows, scaled_identity) {
                    (Some(rows), None) => {
                        if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                            return Err(CliError::Validation(format!("matrix operator must be {n}x{n}")));
                        }
                        CMat::from_fn(n, n, |i, j| rows[i][j].value())
                    }
                    (None, Some(s)) => CMat::identity(n, n) * ncwwlab_core::c(*s, 0.0),
                    _ => return Err(CliError::Validation("matrix operator needs exactly one of 'rows' or 'scaled_identity'".into())),
                };
                make_matrix(alg, hs).map_err(invalid)
            }
            OperatorSpec::Power { base, k } => self.operator(base)?.power(*k).map_err(invalid),
        }
    }
}

fn expectation(spec: &ExpectationSpec) -> Expectation {
    match spec {
        ExpectationSpec::Diagonal => Expectation::Diagonal,
        ExpectationSpec::Scalars => Expectation::Scalars,
        ExpectationSpec::BlockScalars => Expectation::BlockScalars,
        ExpectationSpec::Pinching { block, groups } => Expectation::Pinching { block: *block, groups: groups.clone() },
        ExpectationSpec::PartialTrace { block, left, right, keep } => Expectation::PartialTrace {
            block: *block,
            left: *left,
            right: *right,
            keep: if *keep == KeepSpec::Left { Keep::Left } else { Keep::Right },
        },
    }
}

/// HS eigenvalues ordered by decreasing modulus, then argument (both rounded
/// so that roundoff cannot reorder ties), then solver order.
pub fn ordered_eigenpairs(op: &SuperOperator) -> Vec<(C64, usize)> {
    let (vals, _) = linalg::eigen_decomposition(op.hs_matrix());
    let key = |z: &C64| ((-z.norm() * 1e9).round() as i64, (z.arg() * 1e9).round() as i64);
    let mut idx: Vec<(C64, usize)> = vals.iter().copied().zip(0..).collect();
    idx.sort_by(|a, b| key(&a.0).cmp(&key(&b.0)).then(a.1.cmp(&b.1)));
    idx
}

fn eigenvector(op: &SuperOperator, index: usize) -> Result<AlgElement, CliError> {
    let (_, vecs) = linalg::eigen_decomposition(op.hs_matrix());
    let order = ordered_eigenpairs(op);
    let &(_, col) = order
        .get(index)
        .ok_or_else(|| CliError::Validation(format!("eigenvector index {index} out of range ({})", order.len())))?;
    let v = vecs.column(col).into_owned();
    let v = &v / ncwwlab_core::c(v.norm(), 0.0);
    AlgElement::from_hs(op.algebra(), &v).map_err(invalid)
}

pub fn weight(kind: &WeightKind, seed: Option<u64>, k: u64) -> Result<WeightSequence, CliError> {
    Ok(match kind {
        WeightKind::Constant { value } => WeightSequence::constant(value.value()),
        WeightKind::Rotation { turns } => WeightSequence::rotation(unit_turns(*turns)).map_err(invalid)?,
        WeightKind::TrigPoly { terms } => {
            let t: Vec<(C64, C64)> = terms.iter().map(|t| (t.coeff.value(), unit_turns(t.turns))).collect();
            WeightSequence::trig_poly(&t).map_err(invalid)?
        }
        WeightKind::RandomPhase { seed: explicit } => {
            let s = match (explicit, seed) {
                (Some(s), _) => *s,
                (None, Some(base)) => sub_seed(base, PURPOSE_WEIGHT, k),
                (None, None) => return Err(CliError::Validation("random_phase weight needs a seed".into())),
            };
            WeightSequence::random_phase(s)
        }
        WeightKind::VonMangoldt => WeightSequence::von_mangoldt(),
        WeightKind::ErgodicSample { theta, omega, interval: (a, b) } => {
            if !(0.0 <= *a && a < b && *b <= 1.0) {
                return Err(CliError::Validation(format!("sample interval [{a}, {b}) is not a subinterval of [0, 1)")));
            }
            WeightSequence::ergodic_sample(*theta, *omega, SampleFn::Indicator { a: *a, b: *b }, f64::INFINITY)
        }
    })
}

fn check_references(s: &Scenario) -> Result<(), CliError> {
    let mut ids = BTreeSet::new();
    for w in &s.weights {
        if !ids.insert(w.id.as_str()) {
            return Err(CliError::Validation(format!("duplicate weight id '{}'", w.id)));
        }
    }
    let mut exp_ids = BTreeSet::new();
    for e in &s.experiments {
        if !exp_ids.insert(e.id.as_str()) {
            return Err(CliError::Validation(format!("duplicate experiment id '{}'", e.id)));
        }
        let refs = match &e.kind {
            ExperimentKind::Weighted { weights, .. } | ExperimentKind::StabilityProbe { weights, .. } => weights,
            _ => continue,
        };
        for r in refs {
            if !ids.contains(r.as_str()) {
                return Err(CliError::Validation(format!("experiment '{}' references unknown weight '{r}'", e.id)));
            }
        }
        if refs.is_empty() && s.weights.is_empty() {
            return Err(CliError::Validation(format!("experiment '{}' needs at least one weight", e.id)));
        }
    }
    Ok(())
}

pub fn assemble(s: &Scenario) -> Result<Setup, CliError> {
    check_references(s)?;
    if s.uses_random() && s.seed.is_none() {
        return Err(CliError::Validation("a random spec is used but the scenario has no 'seed'".into()));
    }
    let algebra = resolve_algebra(s)?;
    let ctx = Ctx { algebra: &algebra, seed: s.seed };
    let operator = ctx.operator(&s.operator)?;
    if s.require_ds {
        let rep = validate_ds(&operator, REQUIRE_DS_SAMPLES, s.seed.unwrap_or(0), REQUIRE_DS_TOL);
        let failed: Vec<&str> = [
            ("positivity", rep.positivity.verdict),
            ("l1_contraction", rep.l1_contraction.verdict),
            ("linf_contraction", rep.linf_contraction.verdict),
        ]
        .iter()
        .filter(|(_, v)| v.is_failure())
        .map(|(name, _)| *name)
        .collect();
        if !failed.is_empty() {
            return Err(CliError::Validation(format!("operator fails require_ds: {}", failed.join(", "))));
        }
    }
    let x = ctx.element(&s.initial_element, Some(&operator), PURPOSE_ELEMENT)?;
    let weights = s
        .weights
        .iter()
        .enumerate()
        .map(|(k, w)| Ok((w.id.clone(), weight(&w.kind, s.seed, k as u64)?)))
        .collect::<Result<Vec<_>, CliError>>()?;
    let checkpoints = checkpoints(s)?;
    let budget = s.trace_budget.unwrap_or(DEFAULT_BUDGET_FRACTION * algebra.total_trace());
    if !(budget > 0.0 && budget < algebra.total_trace()) {
        return Err(CliError::Validation(format!("trace_budget {budget} must lie in (0, {}))", algebra.total_trace())));
    }
    Ok(Setup { algebra, operator, weights, x, checkpoints, budget, seed: s.seed.unwrap_or(0) })
}
