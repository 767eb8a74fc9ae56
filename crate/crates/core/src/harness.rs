//! Experiment pipelines behind the command-line front end.

use rayon::prelude::*;

use crate::asymptotics::sigma_k_estimate;
use crate::counting::{
    build_pk_tower, chain_sum_profile, correction_factor, divisor_sum_sides, eh_discrepancy,
    phi_k_smooth_count, pi_set, pi_smooth_shifted, prime_power_series_sides, psi_set, psi_smooth,
    PrimeSet, DEFAULT_CHAIN_BUDGET, DEFAULT_SERIES_TRUNCATION,
};
use crate::error::{Error, Result};
use crate::format::g12;
use crate::sieve::{SpfTable, TotientTable, DEFAULT_CAP};
use crate::volterra::{iterate_sigma, GridFunction, DEFAULT_HORIZON, DEFAULT_STEP};

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub x_list: Vec<u64>,
    /// `y` is derived as `round(x^(1/u))` unless overridden.
    pub u: f64,
    pub y_override: Option<u64>,
    pub k: u32,
    pub step: f64,
    pub horizon: f64,
    /// Worker threads; 0 lets the pool decide.
    pub jobs: usize,
    pub cap: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            x_list: Vec::new(),
            u: 2.0,
            y_override: None,
            k: 1,
            step: DEFAULT_STEP,
            horizon: DEFAULT_HORIZON,
            jobs: 0,
            cap: DEFAULT_CAP,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.u >= 1.0 && self.u.is_finite()) {
            return Err(Error::domain(format!("u = {} must be at least 1", self.u)));
        }
        if self.x_list.is_empty() {
            return Err(Error::domain("x list is empty"));
        }
        Ok(())
    }

    /// `y` used for a given `x`.
    pub fn y_for(&self, x: u64) -> u64 {
        self.y_override
            .unwrap_or_else(|| (x as f64).powf(1.0 / self.u).round() as u64)
    }
}

/// One `compare` row. Numeric fields are NaN when `error` is set.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub x: u64,
    pub y: u64,
    pub k: u32,
    /// Effective `u = log x / log y`.
    pub u: f64,
    /// Φ_k(x, y) / x.
    pub empirical: f64,
    /// Ψ(x, P_k) / x.
    pub tower: f64,
    pub sigma_k: f64,
    pub log10_sigma_k: f64,
    /// Leading-order estimate of `log10 σ_k(u)`, when defined at this `u`.
    pub log10_estimate: Option<f64>,
    /// `(Ψ(x, P_k) - Φ_k(x, y)) · y / (x (log x)^{2k})`.
    pub difference_ratio: f64,
    pub error: Option<String>,
}

impl ComparisonRow {
    pub const CSV_HEADER: &'static str =
        "x,y,k,u,empirical,tower,sigma_k,log10_sigma_k,log10_estimate,difference_ratio,error";

    fn failed(x: u64, y: u64, k: u32, error: String) -> Self {
        Self {
            x,
            y,
            k,
            u: f64::NAN,
            empirical: f64::NAN,
            tower: f64::NAN,
            sigma_k: f64::NAN,
            log10_sigma_k: f64::NAN,
            log10_estimate: None,
            difference_ratio: f64::NAN,
            error: Some(error),
        }
    }

    pub fn csv_row(&self) -> String {
        let num = |v: f64| if v.is_nan() { String::new() } else { g12(v) };
        // Below the underflow threshold only the log10 column is printed.
        let sigma = if self.sigma_k >= crate::volterra::UNDERFLOW_THRESHOLD {
            g12(self.sigma_k)
        } else {
            String::new()
        };
        let error = self
            .error
            .as_deref()
            .map(|e| format!("\"{}\"", e.replace('"', "'")))
            .unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            self.x,
            self.y,
            self.k,
            num(self.u),
            num(self.empirical),
            num(self.tower),
            sigma,
            num(self.log10_sigma_k),
            self.log10_estimate.map(g12).unwrap_or_default(),
            num(self.difference_ratio),
            error
        )
    }
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::domain(format!("cannot build worker pool: {e}")))
}

/// Compares Φ_k(x, y)/x, Ψ(x, P_k)/x and the solver's σ_k(u) for every `x`.
/// Rows come back in input order whatever the degree of parallelism.
pub fn cmd_compare(config: &ExperimentConfig) -> Result<Vec<ComparisonRow>> {
    config.validate()?;
    let k = config.k;
    let sigmas = iterate_sigma(k, config.horizon, config.step)?;
    let sigma_k = sigmas.last().expect("at least σ_0");

    let limit = config
        .x_list
        .iter()
        .copied()
        .filter(|&x| x <= config.cap)
        .max()
        .unwrap_or(2)
        .max(2);
    let spf = SpfTable::with_cap(limit, config.cap)?;
    let totient = TotientTable::from_spf(&spf, limit);

    let rows = pool(config.jobs)?.install(|| {
        config
            .x_list
            .par_iter()
            .map(|&x| {
                let y = config.y_for(x);
                compare_row(x, y, k, &spf, &totient, sigma_k, config.cap)
                    .unwrap_or_else(|e| ComparisonRow::failed(x, y, k, e.to_string()))
            })
            .collect::<Vec<_>>()
    });
    Ok(rows)
}

fn compare_row(
    x: u64,
    y: u64,
    k: u32,
    spf: &SpfTable,
    totient: &TotientTable,
    sigma_k: &GridFunction,
    cap: u64,
) -> Result<ComparisonRow> {
    if x > cap {
        return Err(Error::Size {
            limit: x,
            min: 2,
            cap,
        });
    }
    if x < 2 {
        return Err(Error::domain("x must be at least 2"));
    }
    if y < 2 {
        return Err(Error::domain(format!("y = {y} must be at least 2")));
    }
    let y_eff = y.min(x);
    let u = (x as f64).ln() / (y_eff as f64).ln();
    let phi = phi_k_smooth_count(x, y_eff, k, spf, totient)?;
    let tower = build_pk_tower(x, y_eff, k, spf)?;
    let psi_tower = psi_set(x, tower.last().expect("P_k"), spf)?;
    let sigma = sigma_k.eval(u).ok_or_else(|| {
        Error::domain(format!("u = {u} beyond solver horizon {}", sigma_k.umax()))
    })?;
    let ln_sigma = sigma_k.ln_eval(u).expect("inside horizon");
    let log_x = (x as f64).ln();
    let difference_ratio = (psi_tower.count as f64 - phi.count as f64) * y_eff as f64
        / (x as f64 * log_x.powi(2 * k as i32));
    Ok(ComparisonRow {
        x,
        y,
        k,
        u,
        empirical: phi.ratio,
        tower: psi_tower.ratio,
        sigma_k: sigma,
        log10_sigma_k: ln_sigma / std::f64::consts::LN_10,
        log10_estimate: sigma_k_estimate(k, u)
            .ok()
            .map(|v| v / std::f64::consts::LN_10),
        difference_ratio,
        error: None,
    })
}

/// Shifted-prime densities against integer densities, for the bound `y` and
/// for a general prime set with the small-prime correction applied.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftedDensityReport {
    pub x: u64,
    pub y: u64,
    pub pi_x: u64,
    pub pi_xy: u64,
    /// π(x, y) / π(x).
    pub pi_ratio: f64,
    pub psi_xy: u64,
    /// Ψ(x, y) / x.
    pub psi_ratio: f64,
    pub set_size: usize,
    pub pi_set_ratio: f64,
    pub psi_set_ratio: f64,
    pub correction: f64,
    /// Σ 1/p over primes `p <= x` outside the set.
    pub reciprocal_sum_outside: f64,
}

impl ShiftedDensityReport {
    pub const CSV_HEADER: &'static str = "x,y,pi_x,pi_xy,pi_ratio,psi_xy,psi_ratio,ratio,set_size,pi_set_ratio,psi_set_ratio,correction,corrected_psi_set_ratio,set_ratio,reciprocal_sum_outside";

    /// `(π(x,y)/π(x)) / (Ψ(x,y)/x)`.
    pub fn ratio(&self) -> f64 {
        self.pi_ratio / self.psi_ratio
    }

    pub fn corrected_psi_set_ratio(&self) -> f64 {
        self.correction * self.psi_set_ratio
    }

    /// `(π(x,P)/π(x)) / (correction · Ψ(x,P)/x)`; NaN when the correction is 0.
    pub fn set_ratio(&self) -> f64 {
        let denom = self.corrected_psi_set_ratio();
        if denom == 0.0 {
            f64::NAN
        } else {
            self.pi_set_ratio / denom
        }
    }

    pub fn csv_row(&self) -> String {
        let num = |v: f64| if v.is_nan() { String::new() } else { g12(v) };
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.x,
            self.y,
            self.pi_x,
            self.pi_xy,
            g12(self.pi_ratio),
            self.psi_xy,
            g12(self.psi_ratio),
            num(self.ratio()),
            self.set_size,
            g12(self.pi_set_ratio),
            g12(self.psi_set_ratio),
            g12(self.correction),
            g12(self.corrected_psi_set_ratio()),
            num(self.set_ratio()),
            g12(self.reciprocal_sum_outside)
        )
    }
}

/// Builds the comparison for `(x, y)` and the prime set `set` (primes above
/// `x` are ignored); without a set the primes `<= y` are used.
pub fn cmd_shifted_density(
    x: u64,
    y: u64,
    set: Option<&[u64]>,
    cap: u64,
) -> Result<ShiftedDensityReport> {
    let spf = SpfTable::with_cap(x.max(2), cap)?;
    let pi_x = spf.prime_pi(x)?;
    let pi_xy = pi_smooth_shifted(x, y, &spf)?;
    let psi_xy = psi_smooth(x, y, &spf)?;
    let prime_set = match set {
        Some(primes) => PrimeSet::from_primes(x, primes.iter().copied().filter(|&p| p <= x), &spf)?,
        None => PrimeSet::up_to(y, x, &spf)?,
    };
    let pi_p = pi_set(x, &prime_set, &spf)?;
    let psi_p = psi_set(x, &prime_set, &spf)?;
    Ok(ShiftedDensityReport {
        x,
        y,
        pi_x,
        pi_xy: pi_xy.count,
        pi_ratio: pi_xy.ratio,
        psi_xy: psi_xy.count,
        psi_ratio: psi_xy.ratio,
        set_size: prime_set.len(),
        pi_set_ratio: pi_p.ratio,
        psi_set_ratio: psi_p.ratio,
        correction: correction_factor(&prime_set),
        reciprocal_sum_outside: prime_set.reciprocal_sum_outside(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EhReport {
    pub x: u64,
    pub epsilon: f64,
    pub dmax: u64,
    pub value: f64,
}

impl EhReport {
    pub const CSV_HEADER: &'static str = "x,epsilon,dmax,discrepancy";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{}",
            self.x,
            g12(self.epsilon),
            self.dmax,
            g12(self.value)
        )
    }
}

pub fn cmd_eh(x: u64, epsilon: f64, cap: u64) -> Result<EhReport> {
    let spf = SpfTable::with_cap(x.max(2), cap)?;
    let value = eh_discrepancy(x, epsilon, &spf)?;
    Ok(EhReport {
        x,
        epsilon,
        dmax: ((x as f64).powf(1.0 - epsilon) + 1e-9).floor() as u64,
        value,
    })
}

pub const PRIME_LIST_HEADER: &str = "p";

/// Reads a one-column CSV of primes with header `p`.
pub fn read_prime_list<R: std::io::Read>(input: R) -> Result<Vec<u64>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(input);
    let header = reader.headers()?.clone();
    if header.len() != 1 || &header[0] != PRIME_LIST_HEADER {
        return Err(Error::Parse(format!(
            "expected header `{PRIME_LIST_HEADER}`"
        )));
    }
    reader
        .records()
        .map(|rec| {
            let rec = rec?;
            rec[0]
                .parse::<u64>()
                .map_err(|e| Error::Parse(format!("`{}`: {e}", &rec[0])))
        })
        .collect()
}

pub fn write_prime_list<W: std::io::Write>(set: &PrimeSet, out: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record([PRIME_LIST_HEADER])?;
    for p in set.iter() {
        writer.write_record([p.to_string()])?;
    }
    writer.flush()?;
    Ok(())
}

/// Parameter ranges for the identity suites.
#[derive(Debug, Clone, PartialEq)]
pub struct IdentityConfig {
    pub divisor_max_m: u64,
    pub divisor_max_x: u64,
    pub series_max_k: u64,
    pub series_truncation: u64,
    pub series_tolerance: f64,
    pub chain_max_r: u64,
    pub chain_max_k: u32,
    pub chain_max_x: u64,
}

impl Default for IdentityConfig {
    fn default() -> Self {
        Self {
            divisor_max_m: 210,
            divisor_max_x: 100,
            series_max_k: 100,
            series_truncation: DEFAULT_SERIES_TRUNCATION,
            series_tolerance: 1e-9,
            chain_max_r: 50,
            chain_max_k: 3,
            chain_max_x: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteResult {
    pub name: &'static str,
    pub cases: u64,
    /// Worst deviation (identities) or worst bound ratio (chain sums).
    pub worst: f64,
    pub threshold: f64,
    pub passed: bool,
}

impl SuiteResult {
    pub const CSV_HEADER: &'static str = "suite,cases,worst,threshold,status";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{}",
            self.name,
            self.cases,
            g12(self.worst),
            g12(self.threshold),
            if self.passed { "pass" } else { "fail" }
        )
    }
}

fn is_squarefree(mut m: u64) -> bool {
    let mut p = 2;
    while p * p <= m {
        if m.is_multiple_of(p * p) {
            return false;
        }
        if m.is_multiple_of(p) {
            m /= p;
        }
        p += 1;
    }
    true
}

/// Exact divisor-sum identity over all squarefree `m`, `d | m` and `x`.
pub fn divisor_sum_suite(max_m: u64, max_x: u64) -> Result<SuiteResult> {
    let cases: Vec<(u64, u64)> = (1..=max_m)
        .filter(|&m| is_squarefree(m))
        .flat_map(|m| (1..=m).filter(move |d| m % d == 0).map(move |d| (m, d)))
        .collect();
    let results = cases
        .par_iter()
        .map(|&(m, d)| -> Result<(u64, f64)> {
            let mut worst = 0.0f64;
            for x in 1..=max_x {
                let (lhs, rhs) = divisor_sum_sides(m, d, x)?;
                let diff = lhs - rhs;
                worst = worst.max((*diff.numer() as f64 / *diff.denom() as f64).abs());
            }
            Ok((max_x, worst))
        })
        .collect::<Result<Vec<_>>>()?;
    let worst = results.iter().map(|r| r.1).fold(0.0, f64::max);
    Ok(SuiteResult {
        name: "divisor_sum",
        cases: results.iter().map(|r| r.0).sum(),
        worst,
        threshold: 0.0,
        passed: worst == 0.0,
    })
}

/// Prime-power series against its closed form for `k = 1..=max_k`.
pub fn prime_power_series_suite(
    max_k: u64,
    truncation: u64,
    tolerance: f64,
) -> Result<SuiteResult> {
    let worst = (1..=max_k)
        .into_par_iter()
        .map(|k| prime_power_series_sides(k, truncation).map(|(l, r)| (l - r).abs()))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    Ok(SuiteResult {
        name: "prime_power_series",
        cases: max_k,
        worst,
        threshold: tolerance,
        passed: worst <= tolerance,
    })
}

/// Largest `R(r, k, x) · r / (log x + 1)^k` over `r <= max_r`, `k <= max_k`
/// and every `x <= max_x`.
pub fn chain_bound_suite(max_r: u64, max_k: u32, max_x: u64) -> Result<SuiteResult> {
    let spf = SpfTable::new(max_x.max(2))?;
    let cases: Vec<(u64, u32)> = (1..=max_r)
        .flat_map(|r| (1..=max_k).map(move |k| (r, k)))
        .collect();
    let worst = cases
        .par_iter()
        .map(|&(r, k)| -> Result<f64> {
            // R is a step function jumping at chain ends q, and the bound
            // increases in x, so the jump points are the only candidates.
            let profile = chain_sum_profile(r, k, max_x, &spf, DEFAULT_CHAIN_BUDGET)?;
            Ok(profile
                .iter()
                .map(|&(q, sum)| sum * r as f64 / ((q as f64).ln() + 1.0).powi(k as i32))
                .fold(0.0, f64::max))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    Ok(SuiteResult {
        name: "chain_bound",
        cases: cases.len() as u64 * max_x,
        worst,
        threshold: 1.0,
        passed: worst <= 1.0,
    })
}

/// Runs all three identity suites.
pub fn cmd_identities(config: &IdentityConfig) -> Result<Vec<SuiteResult>> {
    Ok(vec![
        divisor_sum_suite(config.divisor_max_m, config.divisor_max_x)?,
        prime_power_series_suite(
            config.series_max_k,
            config.series_truncation,
            config.series_tolerance,
        )?,
        chain_bound_suite(config.chain_max_r, config.chain_max_k, config.chain_max_x)?,
    ])
}
