//! Exact counts of smooth integers, smooth shifted primes and smooth values
//! of the iterated totient, together with the prime-set towers they are
//! approximated by.

mod identities;

pub use identities::{
    chain_sum_profile, chain_sum_r, divisor_sum_sides, prime_power_series_sides, Rational,
    DEFAULT_CHAIN_BUDGET, DEFAULT_SERIES_TRUNCATION,
};

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::format::g12;
use crate::sieve::{SpfTable, TotientTable};
use crate::volterra::GridFunction;

/// A set of primes not exceeding `limit`.
#[derive(Clone)]
pub struct PrimeSet {
    limit: u64,
    universe: Arc<[u32]>,
    universe_len: usize,
    member: Vec<bool>,
}

impl fmt::Debug for PrimeSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PrimeSet")
            .field("limit", &self.limit)
            .field("len", &self.len())
            .finish()
    }
}

impl PartialEq for PrimeSet {
    fn eq(&self, other: &Self) -> bool {
        self.limit == other.limit && self.member == other.member
    }
}

impl PrimeSet {
    fn with_membership(limit: u64, t: &SpfTable, f: impl Fn(u32) -> bool) -> Result<Self> {
        if limit > t.limit() {
            return Err(Error::Range {
                value: limit,
                limit: t.limit(),
            });
        }
        let universe = t.primes_arc();
        let universe_len = universe.partition_point(|&p| p as u64 <= limit);
        let mut member = vec![false; limit as usize + 1];
        for &p in &universe[..universe_len] {
            member[p as usize] = f(p);
        }
        Ok(Self {
            limit,
            universe,
            universe_len,
            member,
        })
    }

    /// Every prime `<= limit`.
    pub fn all(limit: u64, t: &SpfTable) -> Result<Self> {
        Self::with_membership(limit, t, |_| true)
    }

    pub fn empty(limit: u64, t: &SpfTable) -> Result<Self> {
        Self::with_membership(limit, t, |_| false)
    }

    /// Primes `<= y`, viewed as a subset of the primes `<= limit`.
    pub fn up_to(y: u64, limit: u64, t: &SpfTable) -> Result<Self> {
        Self::with_membership(limit, t, |p| p as u64 <= y)
    }

    /// Builds a set from explicit primes. Every entry must be a prime not
    /// exceeding `limit`.
    pub fn from_primes(
        limit: u64,
        primes: impl IntoIterator<Item = u64>,
        t: &SpfTable,
    ) -> Result<Self> {
        let mut set = Self::empty(limit, t)?;
        for p in primes {
            if p > limit {
                return Err(Error::Range { value: p, limit });
            }
            if !t.is_prime(p) {
                return Err(Error::domain(format!("{p} is not prime")));
            }
            set.member[p as usize] = true;
        }
        Ok(set)
    }

    pub fn limit(&self) -> u64 {
        self.limit
    }

    pub fn contains(&self, p: u64) -> bool {
        p <= self.limit && self.member[p as usize]
    }

    #[inline]
    fn contains_raw(&self, p: usize) -> bool {
        self.member[p]
    }

    /// All primes up to the limit, members or not.
    pub fn universe(&self) -> &[u32] {
        &self.universe[..self.universe_len]
    }

    pub fn iter(&self) -> impl Iterator<Item = u64> + '_ {
        self.universe()
            .iter()
            .filter(|&&p| self.member[p as usize])
            .map(|&p| p as u64)
    }

    /// Primes up to the limit that are not members.
    pub fn complement(&self) -> impl Iterator<Item = u64> + '_ {
        self.universe()
            .iter()
            .filter(|&&p| !self.member[p as usize])
            .map(|&p| p as u64)
    }

    pub fn len(&self) -> usize {
        self.iter().count()
    }

    pub fn is_empty(&self) -> bool {
        self.iter().next().is_none()
    }

    pub fn is_subset(&self, other: &PrimeSet) -> bool {
        self.iter().all(|p| other.contains(p))
    }

    /// Number of members `<= z`.
    pub fn count_up_to(&self, z: u64) -> usize {
        let end = self.universe().partition_point(|&p| p as u64 <= z);
        self.universe()[..end]
            .iter()
            .filter(|&&p| self.member[p as usize])
            .count()
    }

    /// Sum of `1/p` over primes `p <= limit` outside the set.
    pub fn reciprocal_sum_outside(&self) -> f64 {
        self.complement().map(|p| 1.0 / p as f64).sum()
    }
}

/// One exact count. `y == None` marks a count taken against a prime set
/// rather than a smoothness bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CountRecord {
    pub x: u64,
    pub y: Option<u64>,
    pub k: u32,
    pub count: u64,
    pub ratio: f64,
}

impl CountRecord {
    pub const CSV_HEADER: &'static str = "x,y,k,count,ratio";

    pub fn csv_row(&self) -> String {
        let y = self.y.map_or_else(|| "set".to_string(), |y| y.to_string());
        format!(
            "{},{},{},{},{}",
            self.x,
            y,
            self.k,
            self.count,
            g12(self.ratio)
        )
    }
}

fn check_x(x: u64, t: &SpfTable) -> Result<()> {
    if x == 0 {
        return Err(Error::domain("x must be at least 1"));
    }
    if x > t.limit() {
        return Err(Error::Range {
            value: x,
            limit: t.limit(),
        });
    }
    Ok(())
}

fn ratio(count: u64, total: u64) -> f64 {
    if total == 0 {
        0.0
    } else {
        count as f64 / total as f64
    }
}

fn primes_up_to(x: u64, t: &SpfTable) -> &[u32] {
    let end = t.primes().partition_point(|&p| p as u64 <= x);
    &t.primes()[..end]
}

/// Ψ(x, y): integers `n <= x` all of whose prime factors are `<= y`.
pub fn psi_smooth(x: u64, y: u64, t: &SpfTable) -> Result<CountRecord> {
    check_x(x, t)?;
    if y == 0 {
        return Err(Error::domain("y must be at least 1"));
    }
    let yy = y.min(x) as usize;
    let count = (1..=x as usize).filter(|&n| t.lpf_raw(n) <= yy).count() as u64;
    Ok(CountRecord {
        x,
        y: Some(y),
        k: 0,
        count,
        ratio: ratio(count, x),
    })
}

/// π(x, y): primes `p <= x` with `p - 1` y-smooth. `p = 2` always counts.
pub fn pi_smooth_shifted(x: u64, y: u64, t: &SpfTable) -> Result<CountRecord> {
    check_x(x, t)?;
    if y == 0 {
        return Err(Error::domain("y must be at least 1"));
    }
    let primes = primes_up_to(x, t);
    let yy = y.min(x) as usize;
    let count = primes
        .iter()
        .filter(|&&p| t.lpf_raw(p as usize - 1) <= yy)
        .count() as u64;
    Ok(CountRecord {
        x,
        y: Some(y),
        k: 0,
        count,
        ratio: ratio(count, primes.len() as u64),
    })
}

fn check_set(x: u64, set: &PrimeSet, t: &SpfTable) -> Result<()> {
    check_x(x, t)?;
    if set.limit() < x {
        return Err(Error::Range {
            value: x,
            limit: set.limit(),
        });
    }
    Ok(())
}

/// Ψ(x, P): integers `n <= x` whose prime factors all lie in `P`.
pub fn psi_set(x: u64, set: &PrimeSet, t: &SpfTable) -> Result<CountRecord> {
    check_set(x, set, t)?;
    let count = (1..=x as usize)
        .filter(|&n| t.all_distinct_factors(n, |p| set.contains_raw(p)))
        .count() as u64;
    Ok(CountRecord {
        x,
        y: None,
        k: 0,
        count,
        ratio: ratio(count, x),
    })
}

/// π(x, P): primes `p <= x` such that every prime factor of `p - 1` lies in `P`.
pub fn pi_set(x: u64, set: &PrimeSet, t: &SpfTable) -> Result<CountRecord> {
    check_set(x, set, t)?;
    let primes = primes_up_to(x, t);
    let count = primes
        .iter()
        .filter(|&&p| t.all_distinct_factors(p as usize - 1, |q| set.contains_raw(q)))
        .count() as u64;
    Ok(CountRecord {
        x,
        y: None,
        k: 0,
        count,
        ratio: ratio(count, primes.len() as u64),
    })
}

/// The tower `P_0 ⊆ P_1 ⊆ ... ⊆ P_k` with `P_0` the primes `<= y` and
/// `P_{j+1}` the primes `p <= x` whose `p - 1` factors entirely inside `P_j`.
pub fn build_pk_tower(x: u64, y: u64, k: u32, t: &SpfTable) -> Result<Vec<PrimeSet>> {
    check_x(x, t)?;
    if y > x {
        return Err(Error::domain(format!("y = {y} exceeds x = {x}")));
    }
    let primes = primes_up_to(x, t);
    // Distinct prime factors of p - 1 for each prime p, in CSR layout; reused
    // by every level.
    let mut offsets = Vec::with_capacity(primes.len() + 1);
    let mut factors: Vec<u32> = Vec::with_capacity(primes.len() * 3);
    offsets.push(0usize);
    for &p in primes {
        t.all_distinct_factors(p as usize - 1, |q| {
            factors.push(q as u32);
            true
        });
        offsets.push(factors.len());
    }

    let mut tower = vec![PrimeSet::up_to(y, x, t)?];
    for _ in 0..k {
        let prev = tower.last().expect("non-empty tower");
        let mut next = PrimeSet::empty(x, t)?;
        for (i, &p) in primes.iter().enumerate() {
            let fs = &factors[offsets[i]..offsets[i + 1]];
            next.member[p as usize] = fs.iter().all(|&q| prev.contains_raw(q as usize));
        }
        tower.push(next);
    }
    Ok(tower)
}

/// Φ_k(x, y): integers `n <= x` with `phi_k(n)` y-smooth.
pub fn phi_k_smooth_count(
    x: u64,
    y: u64,
    k: u32,
    t: &SpfTable,
    tt: &TotientTable,
) -> Result<CountRecord> {
    check_x(x, t)?;
    if x > tt.limit() {
        return Err(Error::Range {
            value: x,
            limit: tt.limit(),
        });
    }
    if y == 0 {
        return Err(Error::domain("y must be at least 1"));
    }
    let yy = y.min(x) as usize;
    let count = (1..=x as usize)
        .filter(|&n| t.lpf_raw(tt.phi_iterate_raw(n, k)) <= yy)
        .count() as u64;
    Ok(CountRecord {
        x,
        y: Some(y),
        k,
        count,
        ratio: ratio(count, x),
    })
}

/// The small-prime correction `∏_{p ∉ P} (1 - 1/(p-1)^2)` over primes up to
/// the set's limit. Zero whenever 2 is excluded.
pub fn correction_factor(set: &PrimeSet) -> f64 {
    let mut product = 1.0;
    for p in set.complement() {
        let d = (p - 1) as f64;
        product *= 1.0 - 1.0 / (d * d);
    }
    product
}

/// Relative density χ(u) = #{p ∈ P : p <= y^u} / π(y^u), sampled on
/// `u = 0, h, ..., umax`.
pub fn chi_from_prime_set(set: &PrimeSet, y: u64, umax: f64, h: f64) -> Result<GridFunction> {
    if y < 2 {
        return Err(Error::domain("y must be at least 2"));
    }
    if set
        .universe()
        .iter()
        .take_while(|&&p| p as u64 <= y)
        .any(|&p| !set.contains(p as u64))
    {
        return Err(Error::domain("prime set must contain every prime <= y"));
    }
    let steps = crate::volterra::steps_covering(umax, h)?;
    let top = y_pow(y, steps as f64 * h);
    if top > set.limit() as f64 {
        return Err(Error::Range {
            value: top.min(u64::MAX as f64) as u64,
            limit: set.limit(),
        });
    }
    let universe = set.universe();
    let mut values = Vec::with_capacity(steps + 1);
    let mut members_seen = 0usize;
    let mut idx = 0usize;
    for i in 0..=steps {
        let u = i as f64 * h;
        if u <= 1.0 {
            values.push(1.0);
            continue;
        }
        let z = y_pow(y, u) as u64;
        while idx < universe.len() && universe[idx] as u64 <= z {
            if set.contains(universe[idx] as u64) {
                members_seen += 1;
            }
            idx += 1;
        }
        values.push(if idx == 0 {
            1.0
        } else {
            members_seen as f64 / idx as f64
        });
    }
    GridFunction::new(h, values, false)
}

fn y_pow(y: u64, u: f64) -> f64 {
    // Slight upward nudge so exact integer powers are not lost to rounding.
    ((y as f64).powf(u) * (1.0 + 1e-12)).floor()
}

/// Averaged discrepancy of primes `≡ 1 (mod d)` over moduli `d <= x^(1-ε)`,
/// normalized by π(x).
///
/// This is a finite-x statistic only. No finite computation can certify the
/// `o(π(x))` behaviour it is meant to illustrate.
pub fn eh_discrepancy(x: u64, epsilon: f64, t: &SpfTable) -> Result<f64> {
    check_x(x, t)?;
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::domain("epsilon must lie in (0, 1)"));
    }
    let dmax = ((x as f64).powf(1.0 - epsilon) + 1e-9).floor() as usize;
    let primes = primes_up_to(x, t);
    let pi_x = primes.len() as f64;
    if primes.is_empty() {
        return Ok(0.0);
    }
    // π(x; d, 1) for all d <= dmax via the divisors of p - 1.
    let mut counts = vec![0u64; dmax + 1];
    let mut divisors = Vec::new();
    for &p in primes {
        let m = p as usize - 1;
        divisors.clear();
        divisors.push(1usize);
        let mut r = m;
        while r > 1 {
            let q = t.spf_raw(r);
            let mut e = 0;
            while r.is_multiple_of(q) {
                r /= q;
                e += 1;
            }
            let base = divisors.len();
            let mut pw = 1;
            for _ in 0..e {
                pw *= q;
                for i in 0..base {
                    divisors.push(divisors[i] * pw);
                }
            }
        }
        for &d in &divisors {
            if d <= dmax {
                counts[d] += 1;
            }
        }
    }
    let tt = TotientTable::from_spf(t, dmax.max(1) as u64);
    let mut total = 0.0;
    for (d, &c) in counts.iter().enumerate().skip(1) {
        let phi = tt.phi(d as u64)? as f64;
        total += (c as f64 - pi_x / phi).abs();
    }
    Ok(total / pi_x)
}
