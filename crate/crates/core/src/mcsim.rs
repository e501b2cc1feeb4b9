//! Monte Carlo simulation of the downlink from first principles.
//!
//! Each realization drops BSs and MTs as independent PPPs, adds a typical MT
//! at the origin, associates every MT with its nearest BS, and draws one
//! Rayleigh fading gain per BS-to-origin link.
//!
//! The window has two zones. Inside the association disc BSs and MTs are
//! placed explicitly and associated exactly. Beyond it, up to the
//! interference radius, only BS distances and fading are drawn; these BSs
//! are active with the empirical active fraction measured inside.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Poisson};
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{domain, Error, Result};
use crate::netmodel::{LoadModel, Network, PowerProfile};

/// How the single-user model picks which MT of the serving cell is scheduled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Selection {
    /// Weight the typical MT by its selection probability `1/(N+1)`.
    Expected,
    /// Select the typical MT by a Bernoulli draw with probability `1/(N+1)`.
    Bernoulli,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub realizations: usize,
    pub seed: u64,
    /// Two-sided confidence level of the reported intervals.
    pub confidence: f64,
    /// Association radius in mean cell radii.
    pub association_cells: f64,
    /// Lower bound of the association radius in metres.
    pub association_floor_m: f64,
    /// Interference radius in mean cell radii.
    pub interference_cells: f64,
    /// Redraws of a realization that holds no BS before it is dropped.
    pub max_empty_retries: u32,
    pub selection: Selection,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            realizations: 20_000,
            seed: 0x5EED_CE11,
            confidence: 0.95,
            association_cells: 12.0,
            association_floor_m: 3000.0,
            interference_cells: 80.0,
            max_empty_retries: 16,
            selection: Selection::Expected,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.realizations < 2 {
            return Err(domain("at least two realizations are needed"));
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(domain(format!("confidence {} must lie in (0, 1)", self.confidence)));
        }
        if !(self.association_cells > 2.0 && self.interference_cells >= self.association_cells && self.association_floor_m >= 0.0) {
            return Err(domain("window must satisfy 2 < association <= interference radius"));
        }
        Ok(())
    }

    /// Association and interference radii in metres for a BS density.
    pub fn radii(&self, lambda_bs: f64) -> (f64, f64) {
        let cell = (1.0 / (PI * lambda_bs)).sqrt();
        let assoc = (self.association_cells * cell).max(self.association_floor_m);
        let interf = (self.interference_cells * cell).max(assoc);
        (assoc, interf)
    }
}

/// One drop of the network around the typical MT at the origin.
#[derive(Debug, Clone)]
pub struct Realization {
    pub index: u64,
    pub association_radius: f64,
    pub interference_radius: f64,
    pub bs_positions: Vec<[f64; 2]>,
    /// MT positions, not including the typical MT.
    pub mt_positions: Vec<[f64; 2]>,
    /// Fading gain of each explicit BS towards the origin.
    pub bs_fading: Vec<f64>,
    /// Distances of the BSs between the two radii.
    pub outer_distances: Vec<f64>,
    pub outer_fading: Vec<f64>,
    /// Uniform draws deciding the activity of the outer BSs.
    pub outer_activity_draws: Vec<f64>,
    /// Uniform draw for the scheduling decision of the typical MT.
    pub selection_draw: f64,
    /// Number of redraws needed because the association disc was empty.
    pub empty_redraws: u32,
}

fn uniform_in_disc(rng: &mut ChaCha8Rng, radius: f64) -> [f64; 2] {
    let r = radius * rng.random::<f64>().sqrt();
    let (s, c) = (2.0 * PI * rng.random::<f64>()).sin_cos();
    [r * c, r * s]
}

fn poisson(rng: &mut ChaCha8Rng, mean: f64) -> Result<usize> {
    if mean == 0.0 {
        return Ok(0);
    }
    let dist = Poisson::new(mean).map_err(|e| domain(format!("Poisson mean {mean}: {e}")))?;
    Ok(dist.sample(rng) as usize)
}

/// Draws realization `index` of the stream keyed by `cfg.seed`.
///
/// Each index owns a separate ChaCha stream, so any realization can be
/// reproduced on its own and the result does not depend on thread count.
pub fn sample_realization(index: u64, lambda_bs: f64, lambda_mt: f64, cfg: &SimConfig) -> Result<Realization> {
    if !(lambda_bs > 0.0 && lambda_mt > 0.0 && lambda_bs.is_finite() && lambda_mt.is_finite()) {
        return Err(domain("densities must be positive and finite"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(index);
    let (ra, ri) = cfg.radii(lambda_bs);

    let mut empty_redraws = 0;
    let bs_positions = loop {
        let n = poisson(&mut rng, lambda_bs * PI * ra * ra)?;
        if n > 0 {
            break (0..n).map(|_| uniform_in_disc(&mut rng, ra)).collect::<Vec<_>>();
        }
        empty_redraws += 1;
        if empty_redraws > cfg.max_empty_retries {
            return Err(Error::EmptyRealization { index, attempts: empty_redraws });
        }
    };
    let n_mt = poisson(&mut rng, lambda_mt * PI * ra * ra)?;
    let mt_positions = (0..n_mt).map(|_| uniform_in_disc(&mut rng, ra)).collect();
    let bs_fading = (0..bs_positions.len()).map(|_| Exp1.sample(&mut rng)).collect();

    let n_out = poisson(&mut rng, lambda_bs * PI * (ri * ri - ra * ra))?;
    let mut outer_distances = Vec::with_capacity(n_out);
    let mut outer_fading = Vec::with_capacity(n_out);
    let mut outer_activity_draws = Vec::with_capacity(n_out);
    for _ in 0..n_out {
        let u: f64 = rng.random();
        outer_distances.push((ra * ra + u * (ri * ri - ra * ra)).sqrt());
        outer_fading.push(Exp1.sample(&mut rng));
        outer_activity_draws.push(rng.random());
    }
    Ok(Realization {
        index,
        association_radius: ra,
        interference_radius: ri,
        bs_positions,
        mt_positions,
        bs_fading,
        outer_distances,
        outer_fading,
        outer_activity_draws,
        selection_draw: rng.random(),
        empty_redraws,
    })
}

/// Uniform bucket grid for nearest-BS queries.
struct BsGrid {
    origin: f64,
    cell: f64,
    side: usize,
    buckets: Vec<Vec<u32>>,
}

impl BsGrid {
    fn new(points: &[[f64; 2]], radius: f64, lambda_bs: f64) -> Self {
        let cell = (1.0 / lambda_bs).sqrt();
        let side = ((2.0 * radius / cell).ceil() as usize).max(1);
        let mut buckets = vec![Vec::new(); side * side];
        let mut grid = Self { origin: -radius, cell, side, buckets: Vec::new() };
        for (i, p) in points.iter().enumerate() {
            let (cx, cy) = grid.cell_of(p);
            buckets[cy * side + cx].push(i as u32);
        }
        grid.buckets = buckets;
        grid
    }

    fn cell_of(&self, p: &[f64; 2]) -> (usize, usize) {
        let f = |v: f64| (((v - self.origin) / self.cell).floor().max(0.0) as usize).min(self.side - 1);
        (f(p[0]), f(p[1]))
    }

    /// Index of the point nearest to `q` and the squared distance to it.
    fn nearest(&self, points: &[[f64; 2]], q: &[f64; 2]) -> (usize, f64) {
        let (cx, cy) = self.cell_of(q);
        let (cx, cy) = (cx as isize, cy as isize);
        let side = self.side as isize;
        let mut best = (usize::MAX, f64::INFINITY);
        for ring in 0..=side {
            // Points in this ring and beyond lie at least `(ring - 1) * cell` away.
            let reach = (ring - 1).max(0) as f64 * self.cell;
            if best.0 != usize::MAX && reach * reach > best.1 {
                break;
            }
            for dy in -ring..=ring {
                let y = cy + dy;
                if y < 0 || y >= side {
                    continue;
                }
                let on_edge = dy.abs() == ring;
                let step = if on_edge { 1 } else { 2 * ring.max(1) };
                let mut dx = -ring;
                while dx <= ring {
                    let x = cx + dx;
                    if x >= 0 && x < side {
                        for &i in &self.buckets[(y * side + x) as usize] {
                            let p = points[i as usize];
                            let d2 = (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2);
                            if d2 < best.1 {
                                best = (i as usize, d2);
                            }
                        }
                    }
                    dx += step;
                }
            }
        }
        best
    }
}

/// Geometry of a realization reduced to what the metrics need. Independent
/// of the transmit power and the load model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TypicalOutcome {
    pub serving_distance: f64,
    /// Fading-weighted path gain of the serving link, `g r^-β`.
    pub signal_gain: f64,
    /// Sum of `g r^-β` over the active interfering BSs.
    pub interference_gain: f64,
    /// MTs other than the typical one in the serving cell.
    pub serving_load: u32,
    pub selection_draw: f64,
    /// Disc over which grid power is accounted, well inside the association disc.
    pub accounting_area: f64,
    pub accounted_bs: u32,
    pub accounted_active: u32,
    /// MTs served by the accounted BSs.
    pub accounted_mts: u64,
}

impl TypicalOutcome {
    /// Whether the typical MT detects its BS and decodes the data channel.
    pub fn covered(&self, p_tx: f64, net: &Network) -> bool {
        let prm = &net.params;
        let detectable = prm.gamma_a == 0.0
            || p_tx / (prm.kappa * self.serving_distance.powf(prm.beta) * prm.noise_power()) >= prm.gamma_a;
        detectable && self.signal_gain >= prm.gamma_d * self.interference_gain
    }

    /// Share of the serving BS's resources that the typical MT gets.
    pub fn schedule_weight(&self, load: LoadModel, selection: Selection) -> f64 {
        let share = 1.0 / (self.serving_load as f64 + 1.0);
        match (load, selection) {
            (LoadModel::SingleUser, Selection::Bernoulli) => {
                if self.selection_draw < share {
                    1.0
                } else {
                    0.0
                }
            }
            _ => share,
        }
    }

    /// PSE sample in bit/s/m².
    pub fn pse_sample(&self, p_tx: f64, net: &Network, load: LoadModel, selection: Selection) -> f64 {
        if !self.covered(p_tx, net) {
            return 0.0;
        }
        let prm = &net.params;
        prm.lambda_mt * prm.bandwidth_hz * (1.0 + prm.gamma_d).log2() * self.schedule_weight(load, selection)
    }

    /// Grid power per unit area over the accounting disc, in W/m².
    pub fn power_grid_sample(&self, p_tx: f64, power: &PowerProfile, load: LoadModel) -> f64 {
        let active = self.accounted_active as f64;
        let idle = (self.accounted_bs - self.accounted_active) as f64;
        let circuit = match load {
            LoadModel::SingleUser => active * power.p_circ_w,
            LoadModel::EqualShare => self.accounted_mts as f64 * power.p_circ_w,
        };
        (active * p_tx + circuit + idle * power.p_idle_w) / self.accounting_area
    }
}

/// Associates all MTs and reduces a realization to its [`TypicalOutcome`].
pub fn evaluate_typical(real: &Realization, lambda_bs: f64, net: &Network) -> TypicalOutcome {
    let beta = net.params.beta;
    let bs = &real.bs_positions;
    let grid = BsGrid::new(bs, real.association_radius, lambda_bs);
    let mut load = vec![0u32; bs.len()];
    for mt in &real.mt_positions {
        load[grid.nearest(bs, mt).0] += 1;
    }
    let (serving, d2) = grid.nearest(bs, &[0.0, 0.0]);
    let r0 = d2.sqrt();

    let acc_radius = 0.5 * real.association_radius;
    let acc_r2 = acc_radius * acc_radius;
    let (mut acc_bs, mut acc_active, mut acc_mts) = (0u32, 0u32, 0u64);
    let mut interference = 0.0;
    for (i, p) in bs.iter().enumerate() {
        let r2 = p[0] * p[0] + p[1] * p[1];
        // The typical MT keeps its own BS active whatever the other loads are.
        let active = load[i] > 0 || i == serving;
        // BSs form a plain PPP around the typical MT, so the serving BS is
        // accounted like any other, with the load of the PPP MTs only.
        if r2 <= acc_r2 {
            acc_bs += 1;
            acc_mts += load[i] as u64;
            if load[i] > 0 {
                acc_active += 1;
            }
        }
        if i != serving && active {
            interference += real.bs_fading[i] * r2.powf(-0.5 * beta);
        }
    }
    let outer_active = if acc_bs > 0 { acc_active as f64 / acc_bs as f64 } else { 1.0 };
    for k in 0..real.outer_distances.len() {
        if real.outer_activity_draws[k] < outer_active {
            interference += real.outer_fading[k] * real.outer_distances[k].powf(-beta);
        }
    }
    TypicalOutcome {
        serving_distance: r0,
        signal_gain: real.bs_fading[serving] * r0.powf(-beta),
        interference_gain: interference,
        serving_load: load[serving],
        selection_draw: real.selection_draw,
        accounting_area: PI * acc_r2,
        accounted_bs: acc_bs,
        accounted_active: acc_active,
        accounted_mts: acc_mts,
    }
}

/// Sample mean with a symmetric normal confidence interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub half_width: f64,
    pub samples: usize,
}

impl McEstimate {
    pub fn contains(&self, value: f64) -> bool {
        (value - self.mean).abs() <= self.half_width
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McMetrics {
    pub coverage: McEstimate,
    pub pse: McEstimate,
    pub power_grid: McEstimate,
    /// Ratio estimate with a delta-method interval.
    pub energy_efficiency: McEstimate,
    pub empty_redraws: u64,
    /// Realizations dropped because their window stayed empty.
    pub dropped: usize,
}

/// Relative half-width above which an estimate is flagged as imprecise.
pub const PRECISION_LIMIT: f64 = 0.1;

impl McMetrics {
    /// Whether any estimate has a relative half-width above [`PRECISION_LIMIT`].
    pub fn imprecise(&self) -> bool {
        [self.coverage, self.pse, self.power_grid, self.energy_efficiency]
            .iter()
            .any(|e| e.half_width > PRECISION_LIMIT * e.mean.abs())
    }
}

/// One operating point of a campaign.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scenario {
    pub p_tx: f64,
    pub load: LoadModel,
}

/// Estimates the metrics of several operating points that share one BS
/// density. All points are evaluated on the same realizations.
pub fn estimate_campaign(
    lambda_bs: f64,
    net: &Network,
    power: &PowerProfile,
    scenarios: &[Scenario],
    cfg: &SimConfig,
) -> Result<Vec<McMetrics>> {
    cfg.validate()?;
    power.validate()?;
    let drawn = (0..cfg.realizations as u64)
        .into_par_iter()
        .map(|i| match sample_realization(i, lambda_bs, net.params.lambda_mt, cfg) {
            Ok(real) => Ok(Some((evaluate_typical(&real, lambda_bs, net), real.empty_redraws))),
            Err(Error::EmptyRealization { .. }) => Ok(None),
            Err(e) => Err(e),
        })
        .collect::<Result<Vec<_>>>()?;
    let outcomes: Vec<&TypicalOutcome> = drawn.iter().flatten().map(|(o, _)| o).collect();
    let empty_redraws = drawn.iter().flatten().map(|(_, r)| *r as u64).sum::<u64>()
        + (drawn.len() - outcomes.len()) as u64 * (cfg.max_empty_retries as u64 + 1);
    let valid = outcomes.len();
    if valid < 2 {
        return Err(Error::InsufficientSamples { valid, requested: cfg.realizations });
    }
    let z = Normal::new(0.0, 1.0)
        .map_err(|e| domain(e.to_string()))?
        .inverse_cdf(0.5 + 0.5 * cfg.confidence);

    Ok(scenarios
        .iter()
        .map(|sc| {
            let cov: Vec<f64> = outcomes.iter().map(|o| if o.covered(sc.p_tx, net) { 1.0 } else { 0.0 }).collect();
            let pse: Vec<f64> = outcomes.iter().map(|o| o.pse_sample(sc.p_tx, net, sc.load, cfg.selection)).collect();
            let grid: Vec<f64> = outcomes.iter().map(|o| o.power_grid_sample(sc.p_tx, power, sc.load)).collect();
            McMetrics {
                coverage: mean_ci(&cov, z),
                pse: mean_ci(&pse, z),
                power_grid: mean_ci(&grid, z),
                energy_efficiency: ratio_ci(&pse, &grid, z),
                empty_redraws,
                dropped: cfg.realizations - valid,
            }
        })
        .collect())
}

/// Monte Carlo estimate of the metrics at one operating point.
pub fn estimate_metrics(
    p_tx: f64,
    lambda_bs: f64,
    net: &Network,
    power: &PowerProfile,
    load: LoadModel,
    cfg: &SimConfig,
) -> Result<McMetrics> {
    let mut out = estimate_campaign(lambda_bs, net, power, &[Scenario { p_tx, load }], cfg)?;
    Ok(out.remove(0))
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

fn mean_ci(x: &[f64], z: f64) -> McEstimate {
    let (mean, var) = mean_var(x);
    McEstimate { mean, half_width: z * (var / x.len() as f64).sqrt(), samples: x.len() }
}

/// `mean(num) / mean(den)` with a first-order (delta method) interval.
fn ratio_ci(num: &[f64], den: &[f64], z: f64) -> McEstimate {
    let n = num.len() as f64;
    let (mx, vx) = mean_var(num);
    let (my, vy) = mean_var(den);
    let cxy = num.iter().zip(den).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / (n - 1.0);
    let r = mx / my;
    let var = (vx - 2.0 * r * cxy + r * r * vy) / (my * my * n);
    McEstimate { mean: r, half_width: z * var.max(0.0).sqrt(), samples: num.len() }
}
