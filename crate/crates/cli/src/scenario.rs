//! Scenario file schema.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default = "default_name")]
    pub name: String,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Omitted when the operator implies its algebra (`nc_torus_heat`).
    #[serde(default)]
    pub algebra: Option<AlgebraSpec>,
    pub operator: OperatorSpec,
    #[serde(default)]
    pub weights: Vec<WeightSpec>,
    pub initial_element: ElementSpec,
    pub experiments: Vec<ExperimentSpec>,
    #[serde(default = "default_n_max")]
    pub n_max: u64,
    #[serde(default)]
    pub checkpoints: CheckpointPolicy,
    /// Absolute trace budget; defaults to a fixed fraction of `τ(1)`.
    #[serde(default)]
    pub trace_budget: Option<f64>,
    #[serde(default)]
    pub require_ds: bool,
}

fn default_name() -> String {
    "scenario".into()
}

fn default_n_max() -> u64 {
    ncwwlab_core::harness::DEFAULT_N_MAX
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgebraSpec {
    /// `(dim, weight)` per block.
    pub blocks: Vec<(usize, f64)>,
}

/// `3.0` or `[re, im]`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ComplexSpec {
    Real(f64),
    Pair([f64; 2]),
}

impl ComplexSpec {
    pub fn value(&self) -> ncwwlab_core::C64 {
        match *self {
            ComplexSpec::Real(re) => ncwwlab_core::c(re, 0.0),
            ComplexSpec::Pair([re, im]) => ncwwlab_core::c(re, im),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ElementSpec {
    Random {
        #[serde(default)]
        seed: Option<u64>,
        /// Rescale to `‖x‖_∞ = 1`.
        #[serde(default)]
        normalize: bool,
    },
    /// Full matrices, one per block, rows of entries.
    Explicit { blocks: Vec<Vec<Vec<ComplexSpec>>> },
    Diagonal { blocks: Vec<Vec<ComplexSpec>> },
    Identity,
    /// Eigenvector of the operator's HS matrix; eigenvalues are ordered by
    /// decreasing modulus, then argument.
    Eigenvector { index: usize },
    FlightComponent { of: Box<ElementSpec> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OperatorSpec {
    Identity,
    Conjugation { u: ElementSpec },
    Convolution { automorphism: Box<OperatorSpec>, measure: Vec<(i64, f64)> },
    ExpectationProduct { factors: Vec<ExpectationSpec> },
    NcTorusHeat { q: usize, p: i64, t: f64 },
    /// Dense HS matrix: explicit rows, or a multiple of the identity.
    Matrix {
        #[serde(default)]
        rows: Option<Vec<Vec<ComplexSpec>>>,
        #[serde(default)]
        scaled_identity: Option<f64>,
    },
    Power { base: Box<OperatorSpec>, k: u32 },
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum KeepSpec {
    Left,
    Right,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ExpectationSpec {
    Diagonal,
    Scalars,
    BlockScalars,
    Pinching { block: usize, groups: Vec<Vec<usize>> },
    PartialTrace { block: usize, left: usize, right: usize, keep: KeepSpec },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WeightSpec {
    pub id: String,
    #[serde(flatten)]
    pub kind: WeightKind,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrigTerm {
    pub coeff: ComplexSpec,
    /// Frequency `e^{2πi·turns}`.
    pub turns: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WeightKind {
    Constant { value: ComplexSpec },
    Rotation { turns: f64 },
    TrigPoly { terms: Vec<TrigTerm> },
    RandomPhase {
        #[serde(default)]
        seed: Option<u64>,
    },
    VonMangoldt,
    ErgodicSample { theta: f64, omega: f64, interval: (f64, f64) },
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckpointPolicy {
    #[default]
    Dyadic,
    Explicit(Vec<u64>),
}

#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum LimitSpec {
    #[default]
    LastIterate,
    Predicted,
}

#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum TruncationSide {
    #[default]
    Bilateral,
    Right,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum WindowSpec {
    Cesaro,
    PowerLaw { k_coef: f64, k_exp: f64, k_offset: i64, m_coef: f64, m_exp: f64, m_offset: i64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub id: String,
    #[serde(flatten)]
    pub kind: ExperimentKind,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExperimentKind {
    Weighted {
        /// Weight ids; empty means every declared weight.
        #[serde(default)]
        weights: Vec<String>,
        #[serde(default)]
        limit: LimitSpec,
        #[serde(default)]
        truncation: TruncationSide,
    },
    Primes {
        #[serde(default)]
        truncation: TruncationSide,
    },
    Mangoldt {
        #[serde(default)]
        truncation: TruncationSide,
    },
    Moving {
        window: WindowSpec,
        #[serde(default)]
        truncation: TruncationSide,
    },
    UniformWw {
        r: f64,
        b: f64,
        family_size: usize,
        #[serde(default)]
        seed: Option<u64>,
    },
    ReturnTime {
        theta: f64,
        samples: usize,
        interval: (f64, f64),
        #[serde(default)]
        seed: Option<u64>,
    },
    Jdlg {
        #[serde(default)]
        unimodular_tol: Option<f64>,
    },
    Validate {
        #[serde(default = "default_samples")]
        samples: usize,
        #[serde(default = "default_tol")]
        tol: f64,
    },
    StabilityProbe {
        /// Perturbation sizes `‖x_j − x‖`.
        sizes: Vec<f64>,
        #[serde(default)]
        weights: Vec<String>,
        #[serde(default = "default_p")]
        p: f64,
        #[serde(default)]
        seed: Option<u64>,
    },
}

fn default_samples() -> usize {
    100
}

fn default_tol() -> f64 {
    1e-10
}

fn default_p() -> f64 {
    2.0
}

impl ExperimentKind {
    pub fn label(&self) -> &'static str {
        match self {
            ExperimentKind::Weighted { .. } => "weighted",
            ExperimentKind::Primes { .. } => "primes",
            ExperimentKind::Mangoldt { .. } => "mangoldt",
            ExperimentKind::Moving { .. } => "moving",
            ExperimentKind::UniformWw { .. } => "uniform_ww",
            ExperimentKind::ReturnTime { .. } => "return_time",
            ExperimentKind::Jdlg { .. } => "jdlg",
            ExperimentKind::Validate { .. } => "validate",
            ExperimentKind::StabilityProbe { .. } => "stability_probe",
        }
    }
}

impl Scenario {
    pub fn from_str(text: &str, origin: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Parse {
            path: origin.to_string(),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<(Self, Vec<u8>), CliError> {
        let bytes = std::fs::read(path).map_err(|e| CliError::Parse {
            path: path.display().to_string(),
            line: 0,
            column: 0,
            message: e.to_string(),
        })?;
        let text = String::from_utf8_lossy(&bytes);
        Ok((Self::from_str(&text, &path.display().to_string())?, bytes))
    }

    /// True when some element, weight or experiment draws from the scenario seed.
    pub fn uses_random(&self) -> bool {
        fn element(e: &ElementSpec) -> bool {
            match e {
                ElementSpec::Random { seed, .. } => seed.is_none(),
                ElementSpec::FlightComponent { of } => element(of),
                _ => false,
            }
        }
        fn operator(o: &OperatorSpec) -> bool {
            match o {
                OperatorSpec::Conjugation { u } => element(u),
                OperatorSpec::Convolution { automorphism, .. } => operator(automorphism),
                OperatorSpec::Power { base, .. } => operator(base),
                _ => false,
            }
        }
        element(&self.initial_element)
            || operator(&self.operator)
            || self.weights.iter().any(|w| matches!(w.kind, WeightKind::RandomPhase { seed: None }))
            || self.experiments.iter().any(|e| {
                matches!(
                    e.kind,
                    ExperimentKind::UniformWw { seed: None, .. }
                        | ExperimentKind::ReturnTime { seed: None, .. }
                        | ExperimentKind::StabilityProbe { seed: None, .. }
                )
            })
    }
}
