//! EE maximization: single-variable optimizers built on the stationarity
//! gaps, the alternating joint optimizer and a brute-force grid reference.

use std::cmp::Ordering;

use rayon::prelude::*;

use crate::error::{domain, Error, Result};
use crate::metrics::energy_efficiency;
use crate::netmodel::{LoadModel, Network, PowerProfile};
use crate::units::{dbm_to_w, radius_to_density};

/// How far the bracket may be widened beyond the box, as a factor.
const BRACKET_REACH: f64 = 1e6;
const MAX_ROOT_ITERS: usize = 300;

/// Feasible box and solver tolerances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizationBounds {
    pub p_min_w: f64,
    pub p_max_w: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
    /// Relative residual tolerance of the stationarity root finds.
    pub root_tol: f64,
    /// Relative EE change that stops the alternating loop.
    pub alt_eps: f64,
    /// When positive, the alternating loop also waits until a pass moves
    /// neither power nor density by more than this relative amount. The EE is
    /// flat at its maximum, so `alt_eps` alone fixes the location only to
    /// roughly `sqrt(alt_eps)`.
    pub alt_step_tol: f64,
    pub max_alt_iters: usize,
}

impl Default for OptimizationBounds {
    /// Transmit power in [-20, 60] dBm, cell radius in [10, 2000] m.
    fn default() -> Self {
        Self {
            p_min_w: dbm_to_w(-20.0),
            p_max_w: dbm_to_w(60.0),
            lambda_min: radius_to_density(2000.0),
            lambda_max: radius_to_density(10.0),
            root_tol: 1e-12,
            alt_eps: 1e-6,
            alt_step_tol: 0.0,
            max_alt_iters: 100,
        }
    }
}

impl OptimizationBounds {
    pub fn validate(&self) -> Result<()> {
        let ok = self.p_min_w > 0.0
            && self.p_min_w <= self.p_max_w
            && self.p_max_w.is_finite()
            && self.lambda_min > 0.0
            && self.lambda_min <= self.lambda_max
            && self.lambda_max.is_finite();
        if !ok {
            return Err(domain(format!("invalid optimization box {self:?}")));
        }
        if !(self.root_tol > 0.0 && self.alt_eps > 0.0 && self.alt_step_tol >= 0.0 && self.max_alt_iters > 0) {
            return Err(domain("tolerances and iteration cap must be positive"));
        }
        Ok(())
    }
}

/// Which box constraints are active at the reported optimum.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Clamp {
    Interior,
    AtPMin,
    AtPMax,
    AtLambdaMin,
    AtLambdaMax,
    MultipleClamps,
}

impl Clamp {
    fn combine(self, other: Clamp) -> Clamp {
        match (self, other) {
            (Clamp::Interior, c) | (c, Clamp::Interior) => c,
            _ => Clamp::MultipleClamps,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimumReport {
    pub p_opt_w: f64,
    pub lambda_opt: f64,
    pub ee_opt: f64,
    pub iterations: usize,
    pub clamped: Clamp,
    /// EE after each accepted alternating iteration.
    pub ee_trace: Vec<f64>,
}

/// Root of a function that is positive below it and negative above it,
/// searched over positive arguments in log scale.
///
/// The box `[lo, hi]` is widened a decade at a time, up to `BRACKET_REACH`,
/// until it brackets a sign change. Inside the bracket a Newton step on a
/// finite-difference slope is taken whenever it stays inside the bracket and
/// shrinks fast enough, bisection otherwise.
pub fn decreasing_root(f: impl Fn(f64) -> Result<f64>, lo: f64, hi: f64, ftol: f64) -> Result<f64> {
    let g = |t: f64| -> Result<f64> {
        let v = f(t.exp())?;
        if v.is_nan() {
            return Err(domain(format!("stationary gap is NaN at {}", t.exp())));
        }
        Ok(v)
    };
    let (floor, ceil) = ((lo / BRACKET_REACH).ln(), (hi * BRACKET_REACH).ln());
    let ten = 10f64.ln();
    let fail = || Error::BracketFailure { lo: lo / BRACKET_REACH, hi: hi * BRACKET_REACH };

    let mut a = lo.ln();
    let mut fa = g(a)?;
    while fa <= 0.0 {
        if fa == 0.0 {
            return Ok(a.exp());
        }
        if a <= floor {
            return Err(fail());
        }
        a = (a - ten).max(floor);
        fa = g(a)?;
    }
    let mut b = hi.ln();
    let mut fb = g(b)?;
    while fb >= 0.0 {
        if fb == 0.0 {
            return Ok(b.exp());
        }
        if b >= ceil {
            return Err(fail());
        }
        b = (b + ten).min(ceil);
        fb = g(b)?;
    }
    if a >= b {
        // Positive at the top of the box and negative at its bottom.
        return Err(fail());
    }

    let mut t = 0.5 * (a + b);
    let mut last_step = b - a;
    for _ in 0..MAX_ROOT_ITERS {
        let ft = g(t)?;
        if ft == 0.0 {
            return Ok(t.exp());
        }
        if ft > 0.0 {
            a = t;
        } else {
            b = t;
        }
        let width = b - a;
        if ft.abs() <= ftol || width <= 4.0 * f64::EPSILON * t.abs().max(1.0) {
            return Ok(t.exp());
        }
        let h = 1e-7 * t.abs().max(1.0);
        let slope = if ft.is_finite() { (g(t + h)? - ft) / h } else { f64::NAN };
        let newton = t - ft / slope;
        let step = (newton - t).abs();
        let next = if newton.is_finite() && newton > a && newton < b && step <= 0.5 * last_step {
            newton
        } else {
            0.5 * (a + b)
        };
        last_step = (next - t).abs();
        t = next;
    }
    Ok(t.exp())
}

fn clamp_to(v: f64, lo: f64, hi: f64, at_lo: Clamp, at_hi: Clamp) -> (f64, Clamp) {
    if v <= lo {
        (lo, at_lo)
    } else if v >= hi {
        (hi, at_hi)
    } else {
        (v, Clamp::Interior)
    }
}

fn residual_scale(power: &PowerProfile, root_tol: f64) -> f64 {
    root_tol * if power.p_idle_w > 0.0 { power.p_idle_w } else { 1.0 }
}

/// Unconstrained EE-maximizing transmit power at a fixed density.
pub fn stationary_power(lambda_bs: f64, net: &Network, power: &PowerProfile, load: LoadModel, bounds: &OptimizationBounds) -> Result<f64> {
    decreasing_root(
        |p| net.stationary_gap_power(p, lambda_bs, power, load),
        bounds.p_min_w,
        bounds.p_max_w,
        residual_scale(power, bounds.root_tol),
    )
}

/// Unconstrained EE-maximizing density at a fixed transmit power.
pub fn stationary_density(p_tx: f64, net: &Network, power: &PowerProfile, load: LoadModel, bounds: &OptimizationBounds) -> Result<f64> {
    decreasing_root(
        |lam| net.stationary_gap_density(p_tx, lam, power, load),
        bounds.lambda_min,
        bounds.lambda_max,
        residual_scale(power, bounds.root_tol),
    )
}

/// EE-optimal transmit power in the box for a given BS density.
pub fn optimal_power(lambda_bs: f64, net: &Network, power: &PowerProfile, load: LoadModel, bounds: &OptimizationBounds) -> Result<OptimumReport> {
    bounds.validate()?;
    if !(lambda_bs > 0.0 && lambda_bs.is_finite()) {
        return Err(domain(format!("BS density must be positive, got {lambda_bs}")));
    }
    let (p, clamped) = if net.params.gamma_a == 0.0 {
        // Detection is certain, so extra power only costs energy.
        (bounds.p_min_w, Clamp::AtPMin)
    } else {
        let root = stationary_power(lambda_bs, net, power, load, bounds)?;
        clamp_to(root, bounds.p_min_w, bounds.p_max_w, Clamp::AtPMin, Clamp::AtPMax)
    };
    let ee = energy_efficiency(p, lambda_bs, net, power, load)?;
    Ok(OptimumReport { p_opt_w: p, lambda_opt: lambda_bs, ee_opt: ee, iterations: 1, clamped, ee_trace: vec![ee] })
}

/// EE-optimal BS density in the box for a given transmit power.
pub fn optimal_density(p_tx: f64, net: &Network, power: &PowerProfile, load: LoadModel, bounds: &OptimizationBounds) -> Result<OptimumReport> {
    bounds.validate()?;
    if !(p_tx > 0.0 && p_tx.is_finite()) {
        return Err(domain(format!("transmit power must be positive, got {p_tx}")));
    }
    let root = stationary_density(p_tx, net, power, load, bounds)?;
    let (lam, clamped) = clamp_to(root, bounds.lambda_min, bounds.lambda_max, Clamp::AtLambdaMin, Clamp::AtLambdaMax);
    let ee = energy_efficiency(p_tx, lam, net, power, load)?;
    Ok(OptimumReport { p_opt_w: p_tx, lambda_opt: lam, ee_opt: ee, iterations: 1, clamped, ee_trace: vec![ee] })
}

/// Joint EE maximization by alternating the power and density optimizers.
///
/// Each pass optimizes the power at the current density, then the density at
/// the new power. The loop stops once the relative EE change of a pass is at
/// most `bounds.alt_eps` (and, if set, the step is below `bounds.alt_step_tol`).
///
/// `ee_trace` holds the best EE reached after each pass. Exact passes never
/// lose EE, so it differs from the per-pass EE only when a converged pass
/// loses a few ulps to round-off.
pub fn joint_optimize(
    net: &Network,
    power: &PowerProfile,
    load: LoadModel,
    bounds: &OptimizationBounds,
    initial_lambda: f64,
) -> Result<OptimumReport> {
    bounds.validate()?;
    if !(initial_lambda >= bounds.lambda_min && initial_lambda <= bounds.lambda_max) {
        return Err(domain(format!("initial density {initial_lambda} outside the box")));
    }
    let mut report = OptimumReport {
        // NaN marks "no power chosen yet" for the first step size.
        p_opt_w: f64::NAN,
        lambda_opt: initial_lambda,
        ee_opt: 0.0,
        iterations: 0,
        clamped: Clamp::Interior,
        ee_trace: Vec::new(),
    };
    for it in 1..=bounds.max_alt_iters {
        let p_step = optimal_power(report.lambda_opt, net, power, load, bounds)?;
        let l_step = optimal_density(p_step.p_opt_w, net, power, load, bounds)?;
        let value = l_step.ee_opt;
        let previous = report.ee_opt;
        let step = rel_step(report.p_opt_w, p_step.p_opt_w).max(rel_step(report.lambda_opt, l_step.lambda_opt));

        report.p_opt_w = p_step.p_opt_w;
        report.lambda_opt = l_step.lambda_opt;
        report.ee_opt = value;
        report.iterations = it;
        report.clamped = p_step.clamped.combine(l_step.clamped);
        report.ee_trace.push(value.max(previous));

        let settled = if value == 0.0 { previous == 0.0 && it > 1 } else { (value - previous).abs() / value <= bounds.alt_eps };
        let step_ok = bounds.alt_step_tol == 0.0 || step <= bounds.alt_step_tol;
        if settled && step_ok {
            return Ok(report);
        }
    }
    Err(Error::MaxIterations { best: Box::new(report) })
}

fn rel_step(old: f64, new: f64) -> f64 {
    if old.is_nan() {
        f64::INFINITY
    } else {
        (new - old).abs() / new.abs().max(old.abs())
    }
}

fn sign_with_tolerance(gap: f64, scale: f64) -> Ordering {
    if gap.abs() <= 1e-8 * scale {
        Ordering::Equal
    } else if gap > 0.0 {
        Ordering::Greater
    } else {
        Ordering::Less
    }
}

/// Direction in which the EE-optimal power moves when the density changes to
/// `new_lambda`, given the optimal power at the old density.
pub fn shift_sign_power(p_opt_old: f64, new_lambda: f64, net: &Network, power: &PowerProfile, load: LoadModel) -> Result<Ordering> {
    let gap = net.stationary_gap_power(p_opt_old, new_lambda, power, load)?;
    Ok(sign_with_tolerance(gap, power.p_idle_w + power.p_circ_w + p_opt_old))
}

/// Direction in which the EE-optimal density moves when the power changes to
/// `new_p`, given the optimal density at the old power.
pub fn shift_sign_density(lambda_opt_old: f64, new_p: f64, net: &Network, power: &PowerProfile, load: LoadModel) -> Result<Ordering> {
    let gap = net.stationary_gap_density(new_p, lambda_opt_old, power, load)?;
    Ok(sign_with_tolerance(gap, power.p_idle_w + power.p_circ_w + new_p))
}

/// Free variables of a grid search and the number of grid points for each.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GridSearch {
    Power { lambda_bs: f64, points: usize },
    Density { p_tx: f64, points: usize },
    Joint { power_points: usize, density_points: usize },
}

/// `n` log-spaced points from `lo` to `hi` inclusive. One point gives `lo`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| if i + 1 == n { hi } else { (a + (b - a) * i as f64 / (n - 1) as f64).exp() })
        .collect()
}

/// Exhaustive EE maximization over log-spaced grids spanning the box.
pub fn brute_force_grid(
    search: GridSearch,
    net: &Network,
    power: &PowerProfile,
    load: LoadModel,
    bounds: &OptimizationBounds,
) -> Result<OptimumReport> {
    bounds.validate()?;
    let (powers, densities) = match search {
        GridSearch::Power { lambda_bs, points } => (log_grid(bounds.p_min_w, bounds.p_max_w, points), vec![lambda_bs]),
        GridSearch::Density { p_tx, points } => (vec![p_tx], log_grid(bounds.lambda_min, bounds.lambda_max, points)),
        GridSearch::Joint { power_points, density_points } => (
            log_grid(bounds.p_min_w, bounds.p_max_w, power_points),
            log_grid(bounds.lambda_min, bounds.lambda_max, density_points),
        ),
    };
    if powers.is_empty() || densities.is_empty() {
        return Err(domain("grid needs at least one point per free variable"));
    }
    let n_l = densities.len();
    let values = (0..powers.len() * n_l)
        .into_par_iter()
        .map(|k| energy_efficiency(powers[k / n_l], densities[k % n_l], net, power, load))
        .collect::<Result<Vec<f64>>>()?;
    // First maximum in row-major order, so ties resolve to the lowest index.
    let mut best = 0;
    for (k, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = k;
        }
    }
    let (p, lam) = (powers[best / n_l], densities[best % n_l]);
    let p_clamp = match search {
        GridSearch::Density { .. } => Clamp::Interior,
        _ => edge_clamp(best / n_l, powers.len(), Clamp::AtPMin, Clamp::AtPMax),
    };
    let l_clamp = match search {
        GridSearch::Power { .. } => Clamp::Interior,
        _ => edge_clamp(best % n_l, n_l, Clamp::AtLambdaMin, Clamp::AtLambdaMax),
    };
    Ok(OptimumReport {
        p_opt_w: p,
        lambda_opt: lam,
        ee_opt: values[best],
        iterations: 1,
        clamped: p_clamp.combine(l_clamp),
        ee_trace: vec![values[best]],
    })
}

fn edge_clamp(i: usize, n: usize, lo: Clamp, hi: Clamp) -> Clamp {
    if n < 2 {
        Clamp::Interior
    } else if i == 0 {
        lo
    } else if i + 1 == n {
        hi
    } else {
        Clamp::Interior
    }
}
