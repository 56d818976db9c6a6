//! Modified Bessel function of the first kind for integer order.
//!
//! Both entry points sum the power series
//! `I_n(z) = sum_k (z/2)^(2k+n) / (k! (k+n)!)` with `n = |nu|`, so that
//! `I_nu == I_{-nu}` holds bit-for-bit. The log-scale variant keeps a running
//! maximum so the partial sum never overflows.

use std::sync::OnceLock;

use thiserror::Error;

/// Relative size of the next term at which the series is truncated.
pub const SERIES_REL_TOL: f64 = 1e-16;
/// Hard cap on the number of series terms.
pub const SERIES_MAX_TERMS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum BesselError {
    #[error("NegativeArgument: z = {0}")]
    NegativeArgument(f64),
    #[error("Overflow: I_{nu}({z}) exceeds f64 range, use log_bessel_i")]
    Overflow { nu: i64, z: f64 },
}

const FACTORIAL_TABLE_LEN: usize = 4096;

fn ln_factorial_table() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = Vec::with_capacity(FACTORIAL_TABLE_LEN);
        let mut acc = 0.0f64;
        t.push(0.0);
        for k in 1..FACTORIAL_TABLE_LEN {
            acc += (k as f64).ln();
            t.push(acc);
        }
        t
    })
}

/// `ln(n!)`, accumulated as a sum of logarithms.
pub fn ln_factorial(n: u64) -> f64 {
    let table = ln_factorial_table();
    if (n as usize) < table.len() {
        return table[n as usize];
    }
    let mut acc = table[table.len() - 1];
    for k in table.len() as u64..=n {
        acc += (k as f64).ln();
    }
    acc
}

fn check_arg(z: f64) -> Result<(), BesselError> {
    if z < 0.0 || z.is_nan() {
        Err(BesselError::NegativeArgument(z))
    } else {
        Ok(())
    }
}

/// `I_nu(z)` for integer `nu` and `z >= 0`.
pub fn bessel_i(nu: i64, z: f64) -> Result<f64, BesselError> {
    check_arg(z)?;
    let n = nu.unsigned_abs();
    if z == 0.0 {
        return Ok(if n == 0 { 1.0 } else { 0.0 });
    }
    let half = 0.5 * z;
    let q = half * half;
    // Leading term built multiplicatively to avoid pow/factorial overflow.
    let mut term = 1.0f64;
    for j in 1..=n {
        term *= half / j as f64;
    }
    if !term.is_finite() {
        return Err(BesselError::Overflow { nu, z });
    }
    let mut sum = term;
    for k in 0..SERIES_MAX_TERMS as u64 {
        term *= q / ((k + 1) as f64 * (k + 1 + n) as f64);
        if term < SERIES_REL_TOL * sum {
            break;
        }
        sum += term;
    }
    if sum.is_finite() {
        Ok(sum)
    } else {
        Err(BesselError::Overflow { nu, z })
    }
}

/// `ln I_nu(z)`; returns `-inf` when `I_nu(z) == 0` (that is `z == 0`, `nu != 0`).
pub fn log_bessel_i(nu: i64, z: f64) -> Result<f64, BesselError> {
    check_arg(z)?;
    let n = nu.unsigned_abs();
    if z == 0.0 {
        return Ok(if n == 0 { 0.0 } else { f64::NEG_INFINITY });
    }
    let ln_half = (0.5 * z).ln();
    let ln_q = 2.0 * ln_half;
    let mut ln_term = n as f64 * ln_half - ln_factorial(n);
    // sum = exp(max) * scaled
    let mut max = ln_term;
    let mut scaled = 1.0f64;
    for k in 0..SERIES_MAX_TERMS as u64 {
        ln_term += ln_q - ((k + 1) as f64).ln() - ((k + 1 + n) as f64).ln();
        if ln_term > max {
            scaled = scaled * (max - ln_term).exp() + 1.0;
            max = ln_term;
        } else {
            let rel = (ln_term - max).exp();
            if rel < SERIES_REL_TOL * scaled {
                break;
            }
            scaled += rel;
        }
    }
    Ok(max + scaled.ln())
}
