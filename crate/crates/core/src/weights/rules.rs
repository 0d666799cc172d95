use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

use super::sieve;

/// Strictly increasing index sequences `{k_j}` used by subsequential averages.
#[derive(Clone)]
pub enum SubsequenceRule {
    /// `p_0 = 2, p_1 = 3, …`
    Primes,
    /// Explicit strictly increasing list.
    Explicit(Arc<Vec<u64>>),
    /// Indices `k` where the mask holds, in increasing order.
    DensityOneMask(Arc<dyn Fn(u64) -> bool + Send + Sync>),
}

impl fmt::Debug for SubsequenceRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SubsequenceRule::Primes => f.write_str("Primes"),
            SubsequenceRule::Explicit(v) => write!(f, "Explicit(len={})", v.len()),
            SubsequenceRule::DensityOneMask(_) => f.write_str("DensityOneMask"),
        }
    }
}

impl SubsequenceRule {
    pub fn explicit(indices: Vec<u64>) -> Result<Self> {
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Precondition("explicit subsequence must be strictly increasing".into()));
        }
        Ok(SubsequenceRule::Explicit(Arc::new(indices)))
    }

    /// First `count` indices, or fewer when an explicit list runs out.
    pub fn indices(&self, count: usize) -> Vec<u64> {
        match self {
            SubsequenceRule::Primes => sieve::first_primes(count),
            SubsequenceRule::Explicit(v) => v.iter().copied().take(count).collect(),
            SubsequenceRule::DensityOneMask(mask) => (0u64..).filter(|&k| mask(k)).take(count).collect(),
        }
    }

    /// The `j`-th index, if it exists.
    pub fn index(&self, j: usize) -> Option<u64> {
        match self {
            SubsequenceRule::Primes => Some(sieve::nth_prime(j)),
            SubsequenceRule::Explicit(v) => v.get(j).copied(),
            SubsequenceRule::DensityOneMask(_) => self.indices(j + 1).get(j).copied(),
        }
    }
}

/// Default `k_n → ∞` horizon check: `min_{n ≥ N/2} k_n ≥ ⌈log₂ N⌉`.
pub const DEFAULT_WINDOW_THRESHOLD: fn(u64) -> u64 = |n| (n.max(2) as f64).log2().ceil() as u64;

/// Moving-average windows `n ↦ (k_n, m_n)`: average `k_n` consecutive powers
/// starting at `m_n`.
#[derive(Clone)]
pub struct MovingWindow {
    rule: Arc<dyn Fn(u64) -> (i64, i64) + Send + Sync>,
    label: String,
}

impl fmt::Debug for MovingWindow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "MovingWindow({})", self.label)
    }
}

impl MovingWindow {
    pub fn new(label: impl Into<String>, rule: impl Fn(u64) -> (i64, i64) + Send + Sync + 'static) -> Self {
        Self { rule: Arc::new(rule), label: label.into() }
    }

    /// `k_n = n, m_n = 0`, the plain Cesàro averages.
    pub fn cesaro() -> Self {
        Self::new("cesaro", |n| (n as i64, 0))
    }

    /// `k_n = ⌊k_coef · n^k_exp⌋ + k_offset`, `m_n = ⌊m_coef · n^m_exp⌋ + m_offset`.
    pub fn power_law(k_coef: f64, k_exp: f64, k_offset: i64, m_coef: f64, m_exp: f64, m_offset: i64) -> Self {
        let label = format!("k={k_coef}n^{k_exp}+{k_offset},m={m_coef}n^{m_exp}+{m_offset}");
        Self::new(label, move |n| {
            let nf = n as f64;
            let k = (k_coef * nf.powf(k_exp)).floor() as i64 + k_offset;
            let m = (m_coef * nf.powf(m_exp)).floor() as i64 + m_offset;
            (k, m)
        })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// `(k_n, m_n)` without validation.
    pub fn raw(&self, n: u64) -> (i64, i64) {
        (self.rule)(n)
    }

    /// Validated `(k_n, m_n)`.
    pub fn window(&self, n: u64) -> Result<(u64, u64)> {
        let (k, m) = self.raw(n);
        if k <= 0 || m < 0 {
            return Err(Error::InvalidMovingWindow(format!("n={n}: k_n={k}, m_n={m}")));
        }
        Ok((k as u64, m as u64))
    }

    /// Checks `k_n ≥ 1, m_n ≥ 0` for `1 ≤ n ≤ horizon` and the finite-horizon
    /// growth proxy `min_{n ≥ horizon/2} k_n ≥ threshold(horizon)`.
    pub fn validate(&self, horizon: u64, threshold: fn(u64) -> u64) -> Result<()> {
        let mut tail_min = u64::MAX;
        for n in 1..=horizon {
            let (k, _) = self.window(n)?;
            if n >= horizon / 2 {
                tail_min = tail_min.min(k);
            }
        }
        let need = threshold(horizon);
        if tail_min < need {
            return Err(Error::InvalidMovingWindow(format!(
                "min k_n over the tail is {tail_min}, below the growth threshold {need} at horizon {horizon}"
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prime_indices() {
        let r = SubsequenceRule::Primes;
        assert_eq!(r.index(0), Some(2));
        assert_eq!(r.index(4), Some(11));
        assert_eq!(r.indices(5), vec![2, 3, 5, 7, 11]);
    }

    #[test]
    fn ten_thousandth_prime_matches_oracle() {
        // Independent oracle: trial division counting.
        let mut count = 0usize;
        let mut n = 1u64;
        let oracle = loop {
            n += 1;
            if (2..).take_while(|d| d * d <= n).all(|d| n % d != 0) {
                if count == 10_000 {
                    break n;
                }
                count += 1;
            }
        };
        assert_eq!(oracle, 104_743);
        assert_eq!(SubsequenceRule::Primes.index(10_000), Some(oracle));
    }

    #[test]
    fn explicit_must_increase() {
        assert!(SubsequenceRule::explicit(vec![1, 3, 3]).is_err());
        let r = SubsequenceRule::explicit(vec![0, 4, 9]).unwrap();
        assert_eq!(r.index(2), Some(9));
        assert_eq!(r.index(3), None);
        let m = SubsequenceRule::DensityOneMask(Arc::new(|k| k % 10 != 3));
        assert_eq!(m.indices(5), vec![0, 1, 2, 4, 5]);
    }

    #[test]
    fn window_validation() {
        assert!(MovingWindow::cesaro().validate(1024, DEFAULT_WINDOW_THRESHOLD).is_ok());
        let bounded = MovingWindow::new("k=3", |_| (3, 0));
        assert!(bounded.validate(1024, DEFAULT_WINDOW_THRESHOLD).is_err());
        let neg = MovingWindow::new("bad", |n| (n as i64, -1));
        assert!(matches!(neg.window(2), Err(Error::InvalidMovingWindow(_))));
        let shifted = MovingWindow::power_law(1.0, 1.0, 0, 1.0, 1.0, 0);
        assert_eq!(shifted.window(7).unwrap(), (7, 7));
    }
}
