//! Deterministic weight sequences `k ↦ α_k` for every weight class used by
//! the experiments, plus finite-horizon estimators for the `W_r` seminorms
//! and Hartman coefficients.

mod estimators;
mod rules;
pub mod sieve;

use std::fmt;
use std::sync::Arc;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{c, C64, ONE, ZERO};

pub use estimators::{besicovich_distance, hartman_coefficient, w_r_seminorm, HartmanEstimate, SeminormEstimate};
pub use rules::{MovingWindow, SubsequenceRule, DEFAULT_WINDOW_THRESHOLD};

/// Unimodularity tolerance for user-supplied rotation parameters.
pub const UNIMODULAR_TOL: f64 = 1e-12;
/// Rotations are re-anchored on the unit circle every this many steps.
pub const RENORM_PERIOD: u64 = 1024;
/// Prefix length inspected by the convergence drift check.
const DRIFT_PREFIX: u64 = 4096;
const DRIFT_THRESHOLD: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum WeightClass {
    Constant,
    Convergent,
    Rotation,
    TrigPoly,
    Besicovich,
    ErgodicSample,
    VonMangoldt,
    Custom,
}

impl fmt::Display for WeightClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            WeightClass::Constant => "constant",
            WeightClass::Convergent => "convergent",
            WeightClass::Rotation => "rotation",
            WeightClass::TrigPoly => "trig_poly",
            WeightClass::Besicovich => "besicovich",
            WeightClass::ErgodicSample => "ergodic_sample",
            WeightClass::VonMangoldt => "von_mangoldt",
            WeightClass::Custom => "custom",
        };
        f.write_str(s)
    }
}

/// Observable sampled along a circle rotation.
#[derive(Clone)]
pub enum SampleFn {
    /// Indicator of `[a, b)`.
    Indicator { a: f64, b: f64 },
    /// `t ↦ e^{2πi m t}`.
    Character { freq: i64 },
    Constant(C64),
    Custom(Arc<dyn Fn(f64) -> C64 + Send + Sync>),
}

impl SampleFn {
    pub fn eval(&self, t: f64) -> C64 {
        match self {
            SampleFn::Indicator { a, b } => {
                if t >= *a && t < *b {
                    ONE
                } else {
                    ZERO
                }
            }
            SampleFn::Character { freq } => {
                let phase = 2.0 * std::f64::consts::PI * (*freq as f64) * t;
                c(phase.cos(), phase.sin())
            }
            SampleFn::Constant(z) => *z,
            SampleFn::Custom(f) => f(t),
        }
    }
}

impl fmt::Debug for SampleFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SampleFn::Indicator { a, b } => write!(f, "Indicator[{a}, {b})"),
            SampleFn::Character { freq } => write!(f, "Character({freq})"),
            SampleFn::Constant(z) => write!(f, "Constant({z})"),
            SampleFn::Custom(_) => f.write_str("Custom"),
        }
    }
}

type Rule = Arc<dyn Fn(u64) -> C64 + Send + Sync>;

#[derive(Clone)]
enum Generator {
    Constant(C64),
    Rotation(C64),
    TrigPoly(Vec<(C64, C64)>),
    Rule(Rule),
    ErgodicSample { theta: f64, omega: f64, f: SampleFn },
    VonMangoldt,
    RandomPhase { seed: u64 },
    Difference(Box<WeightSequence>, Box<WeightSequence>),
}

/// A deterministic, indexable weight sequence with class metadata.
///
/// The metadata (`class`, `limit`, `r_class`) never changes numeric output.
#[derive(Clone)]
pub struct WeightSequence {
    generator: Generator,
    class: WeightClass,
    scale: f64,
    limit: Option<C64>,
    r_class: Option<f64>,
    drift_warning: Option<String>,
}

impl fmt::Debug for WeightSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("WeightSequence")
            .field("class", &self.class)
            .field("scale", &self.scale)
            .field("limit", &self.limit)
            .field("drift_warning", &self.drift_warning)
            .finish()
    }
}

fn check_unimodular(z: C64) -> Result<()> {
    if (z.norm() - 1.0).abs() > UNIMODULAR_TOL {
        return Err(Error::NotUnimodular { re: z.re, im: z.im });
    }
    Ok(())
}

fn normalize(z: C64) -> C64 {
    let n = z.norm();
    if n == 1.0 || n == 0.0 {
        z
    } else {
        z / n
    }
}

/// `μ^k` by repeated squaring, renormalized to the unit circle.
fn unit_pow(mu: C64, k: u64) -> C64 {
    let mut result = ONE;
    let mut base = mu;
    let mut e = k;
    while e > 0 {
        if e & 1 == 1 {
            result *= base;
        }
        e >>= 1;
        if e > 0 {
            base *= base;
        }
    }
    normalize(result)
}

/// Sequential evaluation of `μ^k` with periodic re-anchoring.
#[derive(Clone, Debug)]
struct RotationCursor {
    mu: C64,
    k: u64,
    current: C64,
}

impl RotationCursor {
    fn at(mu: C64, k: u64) -> Self {
        let base = k - k % RENORM_PERIOD;
        let mut current = unit_pow(mu, base);
        for _ in base..k {
            current *= mu;
        }
        Self { mu, k, current }
    }

    fn advance(&mut self) {
        self.k += 1;
        if self.k % RENORM_PERIOD == 0 {
            self.current = unit_pow(self.mu, self.k);
        } else {
            self.current *= self.mu;
        }
    }
}

fn phase_from_bits(bits: u64) -> C64 {
    let u = (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
    let angle = 2.0 * std::f64::consts::PI * u;
    c(angle.cos(), angle.sin())
}

impl WeightSequence {
    fn with(generator: Generator, class: WeightClass) -> Self {
        Self { generator, class, scale: 1.0, limit: None, r_class: None, drift_warning: None }
    }

    /// `α ≡ c`.
    pub fn constant(value: C64) -> Self {
        let mut s = Self::with(Generator::Constant(value), WeightClass::Constant);
        s.limit = Some(value);
        s
    }

    /// `α_k = μ^k` for unimodular `μ`.
    pub fn rotation(mu: C64) -> Result<Self> {
        check_unimodular(mu)?;
        Ok(Self::with(Generator::Rotation(mu), WeightClass::Rotation))
    }

    /// `α_k = Σ_j r_j λ_j^k`.
    pub fn trig_poly(terms: &[(C64, C64)]) -> Result<Self> {
        for &(_, lambda) in terms {
            check_unimodular(lambda)?;
        }
        Ok(Self::with(Generator::TrigPoly(terms.to_vec()), WeightClass::TrigPoly))
    }

    /// A convergent sequence with declared limit `limit`. Convergence is not
    /// verified; a finite-prefix drift check attaches a warning instead.
    pub fn convergent(rule: impl Fn(u64) -> C64 + Send + Sync + 'static, limit: C64) -> Self {
        let rule: Rule = Arc::new(rule);
        let quarter = DRIFT_PREFIX / 4;
        let tail_dev = (3 * quarter..DRIFT_PREFIX).map(|k| (rule(k) - limit).norm()).fold(0.0, f64::max);
        let mut s = Self::with(Generator::Rule(rule), WeightClass::Convergent);
        s.limit = Some(limit);
        if !(tail_dev <= DRIFT_THRESHOLD * limit.norm().max(1.0)) {
            s.drift_warning = Some(format!(
                "max |α_k - l| = {tail_dev:.3e} over k in [{}, {DRIFT_PREFIX}) exceeds drift threshold",
                3 * quarter
            ));
        }
        s
    }

    /// Arbitrary user rule, class `custom`.
    pub fn custom(rule: impl Fn(u64) -> C64 + Send + Sync + 'static) -> Self {
        Self::with(Generator::Rule(Arc::new(rule)), WeightClass::Custom)
    }

    /// `α_k = f((ω + kθ) mod 1)`; `r_class` records the integrability class
    /// of `f` (`∞` for bounded observables).
    pub fn ergodic_sample(theta: f64, omega: f64, f: SampleFn, r_class: f64) -> Self {
        let mut s = Self::with(Generator::ErgodicSample { theta, omega, f }, WeightClass::ErgodicSample);
        s.r_class = Some(r_class);
        s
    }

    /// Von Mangoldt weight `Λ`.
    pub fn von_mangoldt() -> Self {
        Self::with(Generator::VonMangoldt, WeightClass::VonMangoldt)
    }

    /// `α_k = e^{2πi u_k}` with `u_k` uniform from a seeded ChaCha stream.
    pub fn random_phase(seed: u64) -> Self {
        Self::with(Generator::RandomPhase { seed }, WeightClass::Custom)
    }

    /// `k ↦ self_k − other_k`.
    pub fn difference(&self, other: &WeightSequence) -> Self {
        Self::with(Generator::Difference(Box::new(self.clone()), Box::new(other.clone())), WeightClass::Custom)
    }

    /// Same generator with output multiplied by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.scale *= s;
        out.limit = out.limit.map(|l| l * s);
        out
    }

    /// Relabel the declared class. Numeric output is unchanged.
    pub fn with_class(mut self, class: WeightClass) -> Self {
        self.class = class;
        self
    }

    pub fn class(&self) -> WeightClass {
        self.class
    }

    pub fn limit(&self) -> Option<C64> {
        self.limit
    }

    pub fn r_class(&self) -> Option<f64> {
        self.r_class
    }

    pub fn drift_warning(&self) -> Option<&str> {
        self.drift_warning.as_deref()
    }

    /// Trigonometric-polynomial terms, when this is one.
    pub fn trig_terms(&self) -> Option<Vec<(C64, C64)>> {
        match &self.generator {
            Generator::TrigPoly(t) => Some(t.iter().map(|&(r, l)| (r * self.scale, l)).collect()),
            Generator::Rotation(mu) => Some(vec![(c(self.scale, 0.0), *mu)]),
            Generator::Constant(z) => Some(vec![(z * self.scale, ONE)]),
            _ => None,
        }
    }

    /// Whether the sequence is a finite combination of rotations.
    pub fn is_trig_poly(&self) -> bool {
        matches!(self.generator, Generator::TrigPoly(_) | Generator::Rotation(_) | Generator::Constant(_))
    }

    fn raw_value(&self, k: u64) -> C64 {
        match &self.generator {
            Generator::Constant(z) => *z,
            Generator::Rotation(mu) => RotationCursor::at(*mu, k).current,
            Generator::TrigPoly(terms) => terms.iter().map(|&(r, l)| r * RotationCursor::at(l, k).current).sum(),
            Generator::Rule(f) => f(k),
            Generator::ErgodicSample { theta, omega, f } => f.eval((omega + k as f64 * theta).rem_euclid(1.0)),
            Generator::VonMangoldt => c(sieve::von_mangoldt(k), 0.0),
            Generator::RandomPhase { seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                rng.set_word_pos(2 * k as u128);
                phase_from_bits(rng.next_u64())
            }
            Generator::Difference(a, b) => a.value(k) - b.value(k),
        }
    }

    /// `α_k`. Bit-identical to the value produced by [`Self::iter_from`].
    pub fn value(&self, k: u64) -> C64 {
        let v = self.raw_value(k);
        if self.scale == 1.0 {
            v
        } else {
            v * self.scale
        }
    }

    pub fn iter(&self) -> WeightIter {
        self.iter_from(0)
    }

    pub fn iter_from(&self, start: u64) -> WeightIter {
        let state = match &self.generator {
            Generator::Rotation(mu) => IterState::Rotation(RotationCursor::at(*mu, start)),
            Generator::TrigPoly(terms) => {
                IterState::Trig(terms.iter().map(|&(r, l)| (r, RotationCursor::at(l, start))).collect())
            }
            Generator::VonMangoldt => IterState::Mangoldt { buf: Vec::new(), base: start },
            Generator::RandomPhase { seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                rng.set_word_pos(2 * start as u128);
                IterState::Phase(Box::new(rng))
            }
            Generator::Difference(a, b) => IterState::Diff(Box::new(a.iter_from(start)), Box::new(b.iter_from(start))),
            _ => IterState::Direct,
        };
        WeightIter { seq: self.clone(), k: start, state }
    }

    /// `α_0, …, α_{n-1}`.
    pub fn prefix(&self, n: usize) -> Vec<C64> {
        self.iter().take(n).collect()
    }
}

enum IterState {
    Direct,
    Rotation(RotationCursor),
    Trig(Vec<(C64, RotationCursor)>),
    Mangoldt { buf: Vec<f64>, base: u64 },
    Phase(Box<ChaCha8Rng>),
    Diff(Box<WeightIter>, Box<WeightIter>),
}

const MANGOLDT_BUF: usize = 1 << 16;

/// Sequential evaluator of a [`WeightSequence`].
pub struct WeightIter {
    seq: WeightSequence,
    k: u64,
    state: IterState,
}

impl Iterator for WeightIter {
    type Item = C64;

    fn next(&mut self) -> Option<C64> {
        let k = self.k;
        let raw = match &mut self.state {
            IterState::Direct => self.seq.raw_value(k),
            IterState::Rotation(cur) => {
                let v = cur.current;
                cur.advance();
                v
            }
            IterState::Trig(terms) => {
                let mut s = ZERO;
                for (r, cur) in terms.iter_mut() {
                    s += *r * cur.current;
                    cur.advance();
                }
                s
            }
            IterState::Mangoldt { buf, base } => {
                let off = (k - *base) as usize;
                if off >= buf.len() {
                    *base = k;
                    *buf = sieve::von_mangoldt_range(k, MANGOLDT_BUF);
                }
                c(buf[(k - *base) as usize], 0.0)
            }
            IterState::Phase(rng) => phase_from_bits(rng.next_u64()),
            IterState::Diff(a, b) => a.next().expect("infinite") - b.next().expect("infinite"),
        };
        self.k += 1;
        Some(if self.seq.scale == 1.0 { raw } else { raw * self.seq.scale })
    }
}
