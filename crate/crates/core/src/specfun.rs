//! Special functions: the Gauss hypergeometric function on the negative real
//! axis, the interference functional built on it, and `ln Γ`.

use crate::error::{domain, Error, Result};

/// Relative tolerance at which the hypergeometric series is truncated.
pub const SERIES_RTOL: f64 = 1e-14;
/// Hard cap on the number of series terms.
pub const SERIES_MAX_TERMS: usize = 10_000;

/// Below this argument the series is evaluated after a Pfaff transformation.
/// Keeping the direct series to `z ∈ (-1/2, 0]` bounds its ratio by one half.
const PFAFF_SWITCH: f64 = -0.5;

/// `₂F₁(a, b; c; z)` for real `z ≤ 0`.
///
/// The power series is summed directly for `z ∈ (-1/2, 0]`. For more negative
/// `z` the argument is mapped to `w = z / (z - 1) ∈ (1/3, 1)` by whichever Pfaff
/// transformation gives the faster decaying series.
pub fn hyp2f1(a: f64, b: f64, c: f64, z: f64) -> Result<f64> {
    check_args(a, b, c, z)?;
    if z >= PFAFF_SWITCH {
        return Ok(1.0 + series_tail(a, b, c, z)?);
    }
    let w = z / (z - 1.0);
    // Terms of the transformed series decay like n^(a-b-1) (first form) or
    // n^(b-a-1) (second form) on top of w^n.
    let (lead, a2, b2) = if a <= b { (a, a, c - b) } else { (b, c - a, b) };
    let scale = (1.0 - z).powf(-lead);
    Ok(scale * (1.0 + series_tail(a2, b2, c, w)?))
}

fn check_args(a: f64, b: f64, c: f64, z: f64) -> Result<()> {
    if !(a.is_finite() && b.is_finite() && c.is_finite() && z.is_finite()) {
        return Err(domain("hypergeometric arguments must be finite"));
    }
    if z > 0.0 {
        return Err(domain(format!("hypergeometric argument z = {z} must be <= 0")));
    }
    if c <= 0.0 && c == c.round() {
        return Err(domain(format!("hypergeometric parameter c = {c} is a non-positive integer")));
    }
    Ok(())
}

/// Sum of the hypergeometric series without its leading unit term.
///
/// Needs `|z| < 1`. Summing the tail on its own keeps full relative accuracy
/// when the total is close to one.
fn series_tail(a: f64, b: f64, c: f64, z: f64) -> Result<f64> {
    if z == 0.0 {
        return Ok(0.0);
    }
    let mut term = 1.0;
    let mut sum = 0.0;
    let mut small_run = 0;
    for n in 0..SERIES_MAX_TERMS {
        let k = n as f64;
        let ratio = (a + k) * (b + k) / ((c + k) * (k + 1.0)) * z;
        term *= ratio;
        sum += term;
        if term == 0.0 {
            return Ok(sum);
        }
        // Bound the remaining tail geometrically by the current term ratio.
        // Two consecutive passes guard against a numerator that happens to be
        // close to zero.
        let r = ratio.abs();
        let tail = if r < 1.0 { term.abs() / (1.0 - r) } else { f64::INFINITY };
        if tail <= SERIES_RTOL * sum.abs() {
            small_run += 1;
            if small_run == 2 {
                return Ok(sum);
            }
        } else {
            small_run = 0;
        }
    }
    Err(Error::NonConvergent { terms: SERIES_MAX_TERMS })
}

/// Interference functional `₂F₁(-2/β, 1; 1 - 2/β; -γ) - 1`.
///
/// Multiplies the BS density in the Laplace transform of the aggregate
/// interference for a detection threshold `gamma` (linear) and path-loss
/// exponent `beta > 2`.
pub fn upsilon(beta: f64, gamma: f64) -> Result<f64> {
    if !(beta.is_finite() && beta > 2.0) {
        return Err(domain(format!("path-loss exponent {beta} must exceed 2")));
    }
    if !(gamma.is_finite() && gamma >= 0.0) {
        return Err(domain(format!("threshold {gamma} must be finite and non-negative")));
    }
    let delta = 2.0 / beta;
    let (a, b, c, z) = (-delta, 1.0, 1.0 - delta, -gamma);
    if z >= PFAFF_SWITCH {
        series_tail(a, b, c, z)
    } else {
        Ok(hyp2f1(a, b, c, z)? - 1.0)
    }
}

/// `ln Γ(x)` for `x > 0`.
pub fn log_gamma(x: f64) -> Result<f64> {
    if !(x.is_finite() && x > 0.0) {
        return Err(domain(format!("log_gamma argument {x} must be positive and finite")));
    }
    Ok(log_gamma_pos(x))
}

pub(crate) fn log_gamma_pos(x: f64) -> f64 {
    statrs::function::gamma::ln_gamma(x)
}
