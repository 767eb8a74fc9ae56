//! Grid solver for the delay integral equation
//!
//! ```text
//! u σ(u) = ∫_0^u σ(u - t) χ(t) dt   (u > 1),   σ(u) = 1 on [0, 1],
//! ```
//!
//! which covers the Dickman function (χ the indicator of `[0, 1]`) and the
//! iterated family `σ_{k+1}` obtained by feeding `σ_k` back in as χ.
//!
//! The right side is integrated with the trapezoidal rule on the uniform
//! grid. The `t = 0` endpoint carries `σ(u)` itself with `χ(0) = 1`, so each
//! step is a scalar linear equation solved in closed form:
//!
//! ```text
//! σ_n = (Σ_{j=1}^{L-1} σ_{n-j} χ_j + ½ σ_{n-L} χ_L) / (n - ½),   L = min(n, last χ index)
//! ```

mod grid;

pub use grid::{steps_for, GridFunction, UNDERFLOW_THRESHOLD};

use crate::error::{Error, Result};

/// Default step, `1/256`.
pub const DEFAULT_STEP: f64 = 1.0 / 256.0;
/// Default horizon.
pub const DEFAULT_HORIZON: f64 = 20.0;

/// What to do when χ is sampled on a different step than requested.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StepMismatch {
    #[default]
    Reject,
    /// Linearly resample χ onto the requested step.
    Resample,
}

/// Number of steps needed to reach at least `umax`.
pub(crate) fn steps_covering(umax: f64, h: f64) -> Result<usize> {
    if !(umax.is_finite() && umax > 0.0) {
        return Err(Error::domain(format!("horizon {umax} must be positive")));
    }
    let inv = 1.0 / h;
    if !(h > 0.0 && h <= 1.0) || (inv - inv.round()).abs() > 1e-9 * inv {
        return Err(Error::domain(format!(
            "1/step must be an integer, got step {h}"
        )));
    }
    Ok((umax * inv.round() - 1e-9).ceil() as usize)
}

/// Dickman's ρ on `[0, umax]` (rounded up to the grid).
pub fn dickman_rho(umax: f64, h: f64) -> Result<GridFunction> {
    if !(h > 0.0 && h <= 1.0 / 16.0) {
        return Err(Error::domain(format!("step {h} must lie in (0, 1/16]")));
    }
    if !(umax >= 1.0) {
        return Err(Error::domain(format!("horizon {umax} must be at least 1")));
    }
    solve_sigma(&GridFunction::indicator(1.0, h)?, umax, h)
}

pub fn solve_sigma(chi: &GridFunction, umax: f64, h: f64) -> Result<GridFunction> {
    solve_sigma_with(chi, umax, h, StepMismatch::Reject)
}

/// Solves the delay equation for the given χ on `[0, umax]`.
///
/// χ must equal 1 on `[0, 1]`, lie in `[0, 1]`, and either cover the horizon
/// or be marked compact (zero beyond its grid).
pub fn solve_sigma_with(
    chi: &GridFunction,
    umax: f64,
    h: f64,
    mismatch: StepMismatch,
) -> Result<GridFunction> {
    let n_steps = steps_covering(umax, h)?;
    let resampled;
    let chi = if (chi.step() - h).abs() > 1e-12 * h {
        match mismatch {
            StepMismatch::Reject => {
                return Err(Error::domain(format!(
                    "χ step {} does not match solver step {h}",
                    chi.step()
                )))
            }
            StepMismatch::Resample => {
                resampled = chi.resample(h)?;
                &resampled
            }
        }
    } else {
        chi
    };
    let per_unit = chi.per_unit();
    let c = chi.values();
    let last_chi = c.len() - 1;
    if last_chi < per_unit {
        return Err(Error::domain("χ must be sampled on at least [0, 1]"));
    }
    if !chi.is_compact() && last_chi < n_steps {
        return Err(Error::domain(format!(
            "χ ends at u = {} before the horizon {} and is not marked compact",
            chi.umax(),
            n_steps as f64 * chi.step()
        )));
    }
    chi.check_density_shape()?;

    let mut s = vec![1.0f64; n_steps + 1];
    for n in (per_unit + 1)..=n_steps {
        let l = n.min(last_chi);
        let interior: f64 = s[n - l + 1..n]
            .iter()
            .rev()
            .zip(&c[1..l])
            .map(|(a, b)| a * b)
            .sum();
        s[n] = (interior + 0.5 * s[n - l] * c[l]) / (n as f64 - 0.5);
    }

    let underflow = s.iter().any(|&v| v < UNDERFLOW_THRESHOLD);
    let grid = GridFunction::new(chi.step(), s, false)?;
    if underflow {
        let logs = log_space_solve(chi, n_steps);
        Ok(grid.with_log_values(logs))
    } else {
        Ok(grid)
    }
}

/// The same recurrence carried out on `ln σ`, for grids whose values
/// underflow.
fn log_space_solve(chi: &GridFunction, n_steps: usize) -> Vec<f64> {
    let per_unit = chi.per_unit();
    let last_chi = chi.len() - 1;
    let lc: Vec<f64> = (0..=last_chi).map(|j| chi.ln_at(j)).collect();
    let mut ls = vec![0.0f64; n_steps + 1];
    let half = 0.5f64.ln();
    let mut terms = Vec::with_capacity(n_steps);
    for n in (per_unit + 1)..=n_steps {
        let l = n.min(last_chi);
        terms.clear();
        terms.extend((1..l).map(|j| ls[n - j] + lc[j]));
        terms.push(ls[n - l] + lc[l] + half);
        let max = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        ls[n] = if max == f64::NEG_INFINITY {
            max
        } else {
            let sum: f64 = terms.iter().map(|t| (t - max).exp()).sum();
            max + sum.ln() - (n as f64 - 0.5).ln()
        };
    }
    ls
}

/// `σ_0 = ρ, σ_1, ..., σ_k`, each obtained by solving with the previous one
/// as χ.
pub fn iterate_sigma(k: u32, umax: f64, h: f64) -> Result<Vec<GridFunction>> {
    let mut out = vec![dickman_rho(umax, h)?];
    for _ in 0..k {
        let next = solve_sigma(out.last().expect("non-empty"), umax, h)?;
        out.push(next);
    }
    Ok(out)
}

/// Largest `|u σ(u) - Q(u)| / (h² u)` over grid points `u > 1`, where `Q` is
/// the full trapezoid sum of `∫_0^u σ(u - t) χ(t) dt` evaluated directly
/// from the stored grid.
pub fn residual_constant(sigma: &GridFunction, chi: &GridFunction) -> Result<f64> {
    if (sigma.step() - chi.step()).abs() > 1e-15 {
        return Err(Error::domain("σ and χ must share a step"));
    }
    let h = sigma.step();
    let s = sigma.values();
    let c = chi.values();
    let last_chi = c.len() - 1;
    let mut worst = 0.0f64;
    for n in (sigma.per_unit() + 1)..s.len() {
        let u = n as f64 * h;
        let l = n.min(last_chi);
        let mut q = 0.5 * s[n] * c[0] + 0.5 * s[n - l] * c[l];
        for j in 1..l {
            q += s[n - j] * c[j];
        }
        q *= h;
        worst = worst.max((u * s[n] - q).abs() / (h * h * u));
    }
    Ok(worst)
}
