use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::format::g12;

/// Values below this are also tracked in log scale.
pub const UNDERFLOW_THRESHOLD: f64 = 1e-300;

/// A real function sampled at `u = 0, h, 2h, ..., N h`.
///
/// `1/h` is always an integer so that `u = 1` is a grid point. A grid marked
/// `compact` is taken to vanish beyond its last sample.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    step: f64,
    per_unit: usize,
    values: Vec<f64>,
    log_values: Option<Vec<f64>>,
    compact: bool,
}

/// Number of steps of size `h` covering `[0, umax]`, checking that `1/h` and
/// `umax/h` are integers.
pub fn steps_for(umax: f64, h: f64) -> Result<usize> {
    per_unit(h)?;
    if !(umax.is_finite() && umax > 0.0) {
        return Err(Error::domain(format!("horizon {umax} must be positive")));
    }
    let steps = umax / h;
    let rounded = steps.round();
    if (steps - rounded).abs() > 1e-9 * rounded.max(1.0) {
        return Err(Error::domain(format!(
            "horizon {umax} is not a multiple of step {h}"
        )));
    }
    Ok(rounded as usize)
}

fn per_unit(h: f64) -> Result<usize> {
    if !(h.is_finite() && h > 0.0 && h <= 1.0) {
        return Err(Error::domain(format!("step {h} must lie in (0, 1]")));
    }
    let inv = 1.0 / h;
    let rounded = inv.round();
    if (inv - rounded).abs() > 1e-9 * rounded {
        return Err(Error::domain(format!(
            "1/step must be an integer, got {inv}"
        )));
    }
    Ok(rounded as usize)
}

impl GridFunction {
    pub fn new(step: f64, values: Vec<f64>, compact: bool) -> Result<Self> {
        let per_unit = per_unit(step)?;
        if values.len() < 2 {
            return Err(Error::domain("a grid needs at least two samples"));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::domain(format!("non-finite grid value {bad}")));
        }
        Ok(Self {
            step: 1.0 / per_unit as f64,
            per_unit,
            values,
            log_values: None,
            compact,
        })
    }

    /// The indicator of `[0, T]` as a compact grid ending at `T`.
    pub fn indicator(support: f64, h: f64) -> Result<Self> {
        let n = steps_for(support, h)?;
        Self::new(h, vec![1.0; n + 1], true)
    }

    /// Samples `f` on `[0, umax]`.
    pub fn from_fn(umax: f64, h: f64, compact: bool, f: impl Fn(f64) -> f64) -> Result<Self> {
        let n = steps_for(umax, h)?;
        let step = 1.0 / per_unit(h)? as f64;
        Self::new(step, (0..=n).map(|i| f(i as f64 * step)).collect(), compact)
    }

    pub(crate) fn with_log_values(mut self, log_values: Vec<f64>) -> Self {
        debug_assert_eq!(log_values.len(), self.values.len());
        self.log_values = Some(log_values);
        self
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    /// Samples per unit length, `1/h`.
    pub fn per_unit(&self) -> usize {
        self.per_unit
    }

    pub fn umax(&self) -> f64 {
        (self.values.len() - 1) as f64 * self.step
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_compact(&self) -> bool {
        self.compact
    }

    pub fn set_compact(&mut self, compact: bool) {
        self.compact = compact;
    }

    /// Natural log of the sample at index `i`. Underflowed samples are
    /// served from the log-space companion when one was computed.
    pub fn ln_at(&self, i: usize) -> f64 {
        let v = self.values[i];
        if v >= UNDERFLOW_THRESHOLD {
            return v.ln();
        }
        match &self.log_values {
            Some(logs) => logs[i],
            None => v.ln(),
        }
    }

    pub fn has_log_companion(&self) -> bool {
        self.log_values.is_some()
    }

    /// `ln f` at every sample, computed in log space, when the linear values
    /// underflowed.
    pub fn log_companion(&self) -> Option<&[f64]> {
        self.log_values.as_deref()
    }

    /// Linear interpolation; zero beyond the end of a compact grid.
    pub fn eval(&self, u: f64) -> Option<f64> {
        if !(u >= 0.0) {
            return None;
        }
        let pos = u * self.per_unit as f64;
        let last = self.values.len() - 1;
        if pos > last as f64 * (1.0 + 1e-12) {
            return self.compact.then_some(0.0);
        }
        let i = (pos.floor() as usize).min(last);
        if i == last {
            return Some(self.values[last]);
        }
        let frac = pos - i as f64;
        Some(self.values[i] * (1.0 - frac) + self.values[i + 1] * frac)
    }

    /// Log-scale counterpart of [`eval`](Self::eval), interpolating `ln f`.
    pub fn ln_eval(&self, u: f64) -> Option<f64> {
        if !(u >= 0.0) {
            return None;
        }
        let pos = u * self.per_unit as f64;
        let last = self.values.len() - 1;
        if pos > last as f64 * (1.0 + 1e-12) {
            return self.compact.then_some(f64::NEG_INFINITY);
        }
        let i = (pos.floor() as usize).min(last);
        if i == last {
            return Some(self.ln_at(last));
        }
        let frac = pos - i as f64;
        let (a, b) = (self.ln_at(i), self.ln_at(i + 1));
        if frac == 0.0 {
            Some(a)
        } else {
            Some(a * (1.0 - frac) + b * frac)
        }
    }

    /// Linear resampling onto step `h`, keeping the same horizon.
    pub fn resample(&self, h: f64) -> Result<Self> {
        let n = steps_for(self.umax(), h)?;
        let step = 1.0 / per_unit(h)? as f64;
        let values = (0..=n)
            .map(|i| self.eval(i as f64 * step).unwrap_or(0.0))
            .collect();
        Self::new(step, values, self.compact)
    }

    /// Checks the shape required of χ, ρ and σ: equal to 1 on `[0, 1]` and
    /// within `[0, 1]` elsewhere.
    pub fn check_density_shape(&self) -> Result<()> {
        for (i, &v) in self.values.iter().enumerate() {
            if i <= self.per_unit && (v - 1.0).abs() > 1e-12 {
                return Err(Error::domain(format!(
                    "value at u = {} must be 1, got {v}",
                    i as f64 * self.step
                )));
            }
            if !(-1e-15..=1.0 + 1e-12).contains(&v) {
                return Err(Error::domain(format!(
                    "value at u = {} outside [0, 1]: {v}",
                    i as f64 * self.step
                )));
            }
        }
        Ok(())
    }

    pub const CSV_HEADER: &'static str = "u,value";

    /// Writes `u,value` rows with 12 significant digits.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["u", "value"])?;
        for (i, &v) in self.values.iter().enumerate() {
            w.write_record([g12(i as f64 * self.step), g12(v)])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a `u,value` grid. Rows must start at `u = 0` and advance by a
    /// uniform step with `1/h` integral.
    pub fn read_csv<R: Read>(input: R, compact: bool) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(input);
        let headers = rdr.headers()?.clone();
        if headers.len() != 2 || &headers[0] != "u" || &headers[1] != "value" {
            return Err(Error::Parse(format!(
                "expected header `u,value`, found `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut us = Vec::new();
        let mut values = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let parse = |s: &str| -> Result<f64> {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("row {}: `{s}`: {e}", line + 2)))
            };
            us.push(parse(&rec[0])?);
            values.push(parse(&rec[1])?);
        }
        if us.len() < 2 {
            return Err(Error::Parse("grid file needs at least two rows".into()));
        }
        if us[0] != 0.0 {
            return Err(Error::Parse(format!(
                "first row must be at u = 0, found {}",
                us[0]
            )));
        }
        let step = 1.0 / per_unit(us[1])? as f64;
        for (i, &u) in us.iter().enumerate() {
            let expected = i as f64 * step;
            if (u - expected).abs() > 1e-9 * expected.max(1.0) {
                return Err(Error::Parse(format!(
                    "non-uniform grid: row {} has u = {u}, expected {expected}",
                    i + 2
                )));
            }
        }
        Self::new(step, values, compact)
    }
}
