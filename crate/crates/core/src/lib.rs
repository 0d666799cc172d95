//! Numerical laboratory for weighted ergodic averages of positive
//! Dunford-Schwartz operators on finite-dimensional tracial algebras.
//!
//! * [`tracealg`]: tracial algebras, noncommutative `L_p` norms, `μ_t`, projections.
//! * [`weights`]: weight generators and `W_r` / Hartman estimators.
//! * [`superop`]: the operator catalog and its validation.
//! * [`spectral`]: Jacobs-de Leeuw-Glicksberg split and spectral limits.
//! * [`harness`]: average engines, diagnostics and experiment procedures.

pub mod error;
pub mod harness;
pub mod linalg;
pub mod spectral;
pub mod superop;
pub mod tracealg;
pub mod weights;

pub use error::{Error, Result};
pub use linalg::{c, C64};
pub use tracealg::{AlgElement, SingularProfile, TracialAlgebra};
pub use superop::SuperOperator;
pub use weights::{WeightClass, WeightSequence};
