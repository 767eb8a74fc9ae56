//! Smooth values of the iterated Euler phi-function.
//!
//! * [`sieve`]: smallest-prime-factor and totient tables.
//! * [`counting`]: exact counts Ψ(x, y), π(x, y), Ψ(x, P), π(x, P),
//!   Φ_k(x, y), the prime-set towers `P_k`, and finite checks of the
//!   supporting identities.
//! * [`volterra`]: the grid solver for the delay integral equation behind
//!   Dickman's ρ and the densities σ_k.
//! * [`asymptotics`]: saddle-point and explicit asymptotic estimates.
//! * [`harness`]: experiment pipelines that tie the above together and emit
//!   CSV reports.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod counting;
mod error;
pub mod format;
pub mod harness;
pub mod sieve;
pub mod volterra;

pub use error::{Error, Result};
