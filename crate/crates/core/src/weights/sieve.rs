//! Process-wide prime sieve backing prime enumeration and the von Mangoldt
//! weight. The table grows on demand in chunks of 2²⁰ entries; readers see
//! either the old or the new table, never a partial one.

use std::sync::{OnceLock, RwLock};

pub const SIEVE_CHUNK: usize = 1 << 20;

#[derive(Debug, Default)]
struct Table {
    /// Exclusive upper bound of the covered range.
    limit: usize,
    lambda: Vec<f64>,
    primes: Vec<u64>,
}

impl Table {
    fn build(limit: usize) -> Self {
        let mut composite = vec![false; limit];
        let mut primes = Vec::new();
        for n in 2..limit {
            if composite[n] {
                continue;
            }
            primes.push(n as u64);
            let mut m = n.saturating_mul(n);
            while m < limit {
                composite[m] = true;
                m += n;
            }
        }
        let mut lambda = vec![0.0; limit];
        for &p in &primes {
            let ln_p = (p as f64).ln();
            let mut pk = p as usize;
            while pk < limit {
                lambda[pk] = ln_p;
                match pk.checked_mul(p as usize) {
                    Some(next) => pk = next,
                    None => break,
                }
            }
        }
        Self { limit, lambda, primes }
    }
}

fn table() -> &'static RwLock<Table> {
    static TABLE: OnceLock<RwLock<Table>> = OnceLock::new();
    TABLE.get_or_init(|| RwLock::new(Table::build(SIEVE_CHUNK)))
}

fn grow_to(needed_limit: usize) {
    let lock = table();
    if lock.read().expect("sieve lock poisoned").limit >= needed_limit {
        return;
    }
    let mut guard = lock.write().expect("sieve lock poisoned");
    if guard.limit >= needed_limit {
        return;
    }
    let target = needed_limit.max(guard.limit * 2).div_ceil(SIEVE_CHUNK) * SIEVE_CHUNK;
    *guard = Table::build(target);
}

/// Λ(n): `ln p` when `n = p^k` (k ≥ 1), zero otherwise.
pub fn von_mangoldt(n: u64) -> f64 {
    let n = n as usize;
    grow_to(n + 1);
    table().read().expect("sieve lock poisoned").lambda[n]
}

/// Λ(start), …, Λ(start + len - 1).
pub fn von_mangoldt_range(start: u64, len: usize) -> Vec<f64> {
    let start = start as usize;
    grow_to(start + len);
    table().read().expect("sieve lock poisoned").lambda[start..start + len].to_vec()
}

/// The `j`-th prime with `p_0 = 2`.
pub fn nth_prime(j: usize) -> u64 {
    loop {
        {
            let guard = table().read().expect("sieve lock poisoned");
            if let Some(&p) = guard.primes.get(j) {
                return p;
            }
        }
        let limit = table().read().expect("sieve lock poisoned").limit;
        grow_to(limit * 2);
    }
}

/// All primes `p_0, …, p_{count-1}`.
pub fn first_primes(count: usize) -> Vec<u64> {
    if count == 0 {
        return Vec::new();
    }
    nth_prime(count - 1);
    table().read().expect("sieve lock poisoned").primes[..count].to_vec()
}
