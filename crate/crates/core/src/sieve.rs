//! Smallest-prime-factor and totient tables.
//!
//! Both tables are built once by a linear sieve and are immutable afterwards,
//! so they can be shared by reference across threads. Entries are stored as
//! `u32` (every supported limit fits) while the public API speaks `u64`.

use std::sync::Arc;

use crate::error::{Error, Result};

/// Default upper bound on table limits.
pub const DEFAULT_CAP: u64 = 100_000_000;

/// Smallest prime factor of every integer in `[2, limit]`.
#[derive(Debug, Clone)]
pub struct SpfTable {
    limit: u64,
    spf: Vec<u32>,
    primes: Arc<[u32]>,
}

impl SpfTable {
    /// Builds the table with the default cap of [`DEFAULT_CAP`].
    pub fn new(limit: u64) -> Result<Self> {
        Self::with_cap(limit, DEFAULT_CAP)
    }

    pub fn with_cap(limit: u64, cap: u64) -> Result<Self> {
        let cap = cap.min(u32::MAX as u64);
        if !(2..=cap).contains(&limit) {
            return Err(Error::Size { limit, min: 2, cap });
        }
        let n = limit as usize;
        let mut spf = vec![0u32; n + 1];
        let mut primes: Vec<u32> = Vec::with_capacity(prime_count_estimate(limit));
        for i in 2..=n {
            if spf[i] == 0 {
                spf[i] = i as u32;
                primes.push(i as u32);
            }
            let si = spf[i];
            for &p in &primes {
                if p > si {
                    break;
                }
                let m = i * p as usize;
                if m > n {
                    break;
                }
                spf[m] = p;
            }
        }
        spf[1] = 1;
        Ok(Self {
            limit,
            spf,
            primes: primes.into(),
        })
    }

    pub fn limit(&self) -> u64 {
        self.limit
    }

    fn check(&self, n: u64) -> Result<()> {
        if n > self.limit {
            Err(Error::Range {
                value: n,
                limit: self.limit,
            })
        } else {
            Ok(())
        }
    }

    /// Smallest prime factor of `n`; `spf(1) == 1`.
    pub fn spf(&self, n: u64) -> Result<u64> {
        self.check(n)?;
        if n == 0 {
            return Err(Error::domain("spf(0) is undefined"));
        }
        Ok(self.spf[n as usize] as u64)
    }

    /// Unchecked lookup for hot loops; `n` must lie in `[1, limit]`.
    #[inline]
    pub(crate) fn spf_raw(&self, n: usize) -> usize {
        self.spf[n] as usize
    }

    pub fn is_prime(&self, n: u64) -> bool {
        n >= 2 && n <= self.limit && self.spf[n as usize] as u64 == n
    }

    /// All primes up to the limit, increasing.
    pub fn primes(&self) -> &[u32] {
        &self.primes
    }

    pub(crate) fn primes_arc(&self) -> Arc<[u32]> {
        Arc::clone(&self.primes)
    }

    /// Number of primes `<= x`, for `x <= limit`.
    pub fn prime_pi(&self, x: u64) -> Result<u64> {
        self.check(x)?;
        Ok(self.primes.partition_point(|&p| p as u64 <= x) as u64)
    }

    /// Prime factorization as `(prime, exponent)` pairs with increasing
    /// primes. `factorize(1)` is empty.
    pub fn factorize(&self, n: u64) -> Result<Vec<(u64, u32)>> {
        self.check(n)?;
        if n == 0 {
            return Err(Error::domain("cannot factorize 0"));
        }
        let mut out: Vec<(u64, u32)> = Vec::new();
        let mut m = n as usize;
        while m > 1 {
            let p = self.spf_raw(m);
            let mut e = 0;
            while m.is_multiple_of(p) {
                m /= p;
                e += 1;
            }
            out.push((p as u64, e));
        }
        Ok(out)
    }

    /// Largest prime dividing `n`; 1 for `n == 1`.
    pub fn largest_prime_factor(&self, n: u64) -> Result<u64> {
        self.check(n)?;
        if n == 0 {
            return Err(Error::domain("largest prime factor of 0 is undefined"));
        }
        Ok(self.lpf_raw(n as usize) as u64)
    }

    #[inline]
    pub(crate) fn lpf_raw(&self, mut m: usize) -> usize {
        let mut largest = 1;
        while m > 1 {
            let p = self.spf_raw(m);
            largest = p;
            m /= p;
        }
        largest
    }

    /// Calls `f` on each distinct prime factor of `m` in increasing order,
    /// stopping early if `f` returns `false`. Returns whether it ran to the end.
    #[inline]
    pub(crate) fn all_distinct_factors(
        &self,
        mut m: usize,
        mut f: impl FnMut(usize) -> bool,
    ) -> bool {
        while m > 1 {
            let p = self.spf_raw(m);
            if !f(p) {
                return false;
            }
            while m.is_multiple_of(p) {
                m /= p;
            }
        }
        true
    }
}

fn prime_count_estimate(limit: u64) -> usize {
    let x = limit as f64;
    if x < 17.0 {
        8
    } else {
        (1.26 * x / x.ln()) as usize
    }
}

/// Euler's totient for every integer in `[1, limit]`, derived from an
/// [`SpfTable`].
#[derive(Debug, Clone)]
pub struct TotientTable {
    limit: u64,
    phi: Vec<u32>,
}

impl TotientTable {
    pub fn new(limit: u64) -> Result<Self> {
        let spf = SpfTable::new(limit.max(2))?;
        Ok(Self::from_spf(&spf, limit))
    }

    /// Derives the totient from an existing SPF table; `limit` is clamped to
    /// the table's limit.
    pub fn from_spf(spf: &SpfTable, limit: u64) -> Self {
        let limit = limit.min(spf.limit()).max(1);
        let n = limit as usize;
        let mut phi = vec![0u32; n + 1];
        phi[1] = 1;
        for i in 2..=n {
            let p = spf.spf_raw(i);
            let m = i / p;
            phi[i] = if m.is_multiple_of(p) {
                phi[m] * p as u32
            } else {
                phi[m] * (p as u32 - 1)
            };
        }
        Self { limit, phi }
    }

    pub fn limit(&self) -> u64 {
        self.limit
    }

    pub fn phi(&self, n: u64) -> Result<u64> {
        if n == 0 || n > self.limit {
            return Err(Error::Range {
                value: n,
                limit: self.limit,
            });
        }
        Ok(self.phi[n as usize] as u64)
    }

    /// `phi_k(n)`, the `k`-fold iterate with `phi_0(n) = n`.
    pub fn phi_iterate(&self, n: u64, k: u32) -> Result<u64> {
        self.phi(n)?;
        Ok(self.phi_iterate_raw(n as usize, k) as u64)
    }

    #[inline]
    pub(crate) fn phi_iterate_raw(&self, mut n: usize, k: u32) -> usize {
        for _ in 0..k {
            if n == 1 {
                break;
            }
            n = self.phi[n] as usize;
        }
        n
    }
}
