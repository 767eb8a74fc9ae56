//! Finite checks of the divisor-sum identities and chain-sum bounds used in
//! the combinatorial part of the argument.

use num_rational::Ratio;

use crate::error::{Error, Result};
use crate::sieve::SpfTable;

pub type Rational = Ratio<i128>;

/// Truncation point used for the prime-power series when none is given.
/// Large enough that the neglected tail is far below `1e-9` for `k <= 100`.
pub const DEFAULT_SERIES_TRUNCATION: u64 = 1_000_000_000_000_000;

/// Node budget for chain enumeration.
pub const DEFAULT_CHAIN_BUDGET: u64 = 200_000_000;

fn distinct_primes(mut n: u64) -> (Vec<u64>, bool) {
    let mut primes = Vec::new();
    let mut squarefree = true;
    let mut p = 2;
    while p * p <= n {
        if n.is_multiple_of(p) {
            primes.push(p);
            n /= p;
            if n.is_multiple_of(p) {
                squarefree = false;
                while n.is_multiple_of(p) {
                    n /= p;
                }
            }
        }
        p += 1;
    }
    if n > 1 {
        primes.push(n);
    }
    (primes, squarefree)
}

fn mobius_of_squarefree(primes: &[u64]) -> i128 {
    if primes.len().is_multiple_of(2) {
        1
    } else {
        -1
    }
}

/// `(r, mu(r))` for every divisor `r` of a squarefree number with the given
/// prime factors, sorted by `r`.
fn squarefree_divisors(primes: &[u64]) -> Vec<(u64, i128)> {
    let mut divs = vec![(1u64, 1i128)];
    for &p in primes {
        let len = divs.len();
        for i in 0..len {
            let (r, mu) = divs[i];
            divs.push((r * p, -mu));
        }
    }
    divs.sort_unstable();
    divs
}

/// All `n <= bound` of the form `base * s` where every prime of `s` is in
/// `primes`, sorted.
fn supported_multiples(base: u64, primes: &[u64], bound: u64) -> Vec<u64> {
    fn go(n: u64, primes: &[u64], bound: u64, out: &mut Vec<u64>) {
        out.push(n);
        for (i, &p) in primes.iter().enumerate() {
            let mut m = n;
            loop {
                match m.checked_mul(p) {
                    Some(next) if next <= bound => {
                        m = next;
                        go(m, &primes[i + 1..], bound, out);
                    }
                    _ => break,
                }
            }
        }
    }
    let mut out = Vec::new();
    if base <= bound {
        go(base, primes, bound, &mut out);
    }
    out.sort_unstable();
    out
}

/// Both sides of
/// `Σ_{r<=x, d|r|m} μ(r)/r = μ(d) Σ_{d|n, p|n ⇒ p|d} (1/n) Σ_{r<=x/n, r|m} μ(r)/r`
/// in exact rational arithmetic. The outer sum on the right stops at
/// `n <= x`, beyond which every inner sum is empty.
pub fn divisor_sum_sides(m: u64, d: u64, x: u64) -> Result<(Rational, Rational)> {
    if m == 0 || d == 0 || x == 0 {
        return Err(Error::domain("m, d and x must be positive"));
    }
    let (m_primes, squarefree) = distinct_primes(m);
    if !squarefree {
        return Err(Error::domain(format!("{m} is not squarefree")));
    }
    if !m.is_multiple_of(d) {
        return Err(Error::domain(format!("{d} does not divide {m}")));
    }
    let m_divisors = squarefree_divisors(&m_primes);
    let partial = |bound: u64| -> Rational {
        m_divisors
            .iter()
            .take_while(|&&(r, _)| r <= bound)
            .fold(Rational::from_integer(0), |acc, &(r, mu)| {
                acc + Rational::new(mu, r as i128)
            })
    };

    let lhs = m_divisors
        .iter()
        .filter(|&&(r, _)| r <= x && r % d == 0)
        .fold(Rational::from_integer(0), |acc, &(r, mu)| {
            acc + Rational::new(mu, r as i128)
        });

    let (d_primes, _) = distinct_primes(d);
    let mu_d = mobius_of_squarefree(&d_primes);
    let rhs = supported_multiples(d, &d_primes, x)
        .into_iter()
        .fold(Rational::from_integer(0), |acc, n| {
            acc + partial(x / n) / Rational::from_integer(n as i128)
        })
        * Rational::from_integer(mu_d);
    Ok((lhs, rhs))
}

/// Both sides of
/// `Σ_{k|n, p|n ⇒ p|k} log(n)/n = (1/φ(k)) (Σ_{p|k} log(p)/(p-1) + log(k))`,
/// the left side truncated to `n <= truncation` and summed in increasing `n`.
pub fn prime_power_series_sides(k: u64, truncation: u64) -> Result<(f64, f64)> {
    if k == 0 {
        return Err(Error::domain("k must be positive"));
    }
    let (primes, _) = distinct_primes(k);
    let lhs = supported_multiples(k, &primes, truncation)
        .into_iter()
        .map(|n| (n as f64).ln() / n as f64)
        .sum::<f64>();
    let phi = primes.iter().fold(k, |acc, &p| acc / p * (p - 1)) as f64;
    let prime_part: f64 = primes
        .iter()
        .map(|&p| (p as f64).ln() / (p - 1) as f64)
        .sum();
    let rhs = (prime_part + (k as f64).ln()) / phi;
    Ok((lhs, rhs))
}

/// Visits every prime chain `r < q_1 < ... < q_k <= x` with `r | q_1 - 1` and
/// `q_i | q_{i+1} - 1`, calling `sink` with each terminal prime `q_k` in
/// depth-first order.
fn walk_chains(
    r: u64,
    k: u32,
    x: u64,
    t: &SpfTable,
    budget: u64,
    mut sink: impl FnMut(u64),
) -> Result<()> {
    if k == 0 {
        return Err(Error::domain("chain length k must be at least 1"));
    }
    if r == 0 {
        return Err(Error::domain("r must be positive"));
    }
    if x > t.limit() {
        return Err(Error::Range {
            value: x,
            limit: t.limit(),
        });
    }
    let mut nodes = 0u64;
    // Explicit stack of (modulus, remaining depth, next candidate).
    let mut stack: Vec<(u64, u32, u64)> = vec![(r, k, r + 1)];
    while let Some(top) = stack.last_mut() {
        let (modulus, depth, q) = *top;
        if q > x {
            stack.pop();
            continue;
        }
        top.2 = q + modulus;
        if !t.is_prime(q) {
            continue;
        }
        nodes += 1;
        if nodes > budget {
            return Err(Error::Budget { budget });
        }
        if depth == 1 {
            sink(q);
        } else {
            stack.push((q, depth - 1, q + 1));
        }
    }
    Ok(())
}

/// `R(r, k, x) = Σ 1/q_k` over prime chains `r < q_1 < ... < q_k <= x` with
/// `r | q_1 - 1` and `q_i | q_{i+1} - 1`, by explicit enumeration.
pub fn chain_sum_r(r: u64, k: u32, x: u64, t: &SpfTable, budget: u64) -> Result<f64> {
    let mut total = 0.0;
    walk_chains(r, k, x, t, budget, |q| total += 1.0 / q as f64)?;
    Ok(total)
}

/// `R(r, k, q)` at every `q <= xmax` where it jumps, as `(q, R(r, k, q))`
/// with increasing `q`. Between listed points `R` is constant, so this
/// profile determines `R(r, k, x)` for every `x <= xmax`.
pub fn chain_sum_profile(
    r: u64,
    k: u32,
    xmax: u64,
    t: &SpfTable,
    budget: u64,
) -> Result<Vec<(u64, f64)>> {
    let mut ends = Vec::new();
    walk_chains(r, k, xmax, t, budget, |q| ends.push(q))?;
    ends.sort_unstable();
    let mut profile: Vec<(u64, f64)> = Vec::new();
    let mut total = 0.0;
    for q in ends {
        total += 1.0 / q as f64;
        match profile.last_mut() {
            Some(last) if last.0 == q => last.1 = total,
            _ => profile.push((q, total)),
        }
    }
    Ok(profile)
}
